#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <vector>

#include "mvir/array.h"
#include "mvir/param_store.h"
#include "mvir/tape.h"

namespace mvir {

// ---------------------------------------------------------------------------
// Multi-resolution hash encoding of 3D positions.
// ---------------------------------------------------------------------------

struct HashGridConfig {
    int base_resolution = 32;     // cells per axis at level 0
    int levels = 14;
    int features_per_level = 2;
    int table_size = 1 << 16;     // entries per level, power of two
    double growth = 1.38;         // per-level resolution multiplier

    int output_dim() const { return levels * features_per_level; }
    size_t param_count() const {
        return static_cast<size_t>(levels) * table_size * features_per_level;
    }
};

// Trilinear interpolation of learned per-level tables addressed by spatial
// hashing. Positions live in [-1,1]^3 and are mapped to [0,1]^3 internally;
// out-of-cube positions are clamped (a warning is logged once). Collisions
// are left unresolved; gradients of colliding vertices simply accumulate.
class HashGrid {
public:
    HashGrid(HashGridConfig cfg, size_t table_offset);

    int output_dim() const { return cfg_.output_dim(); }
    const HashGridConfig& config() const { return cfg_; }
    size_t table_offset() const { return table_offset_; }
    int level_resolution(int level) const { return level_res_[level]; }

    // Table entry index (into the parameter store, feature 0) for a given
    // level-grid vertex. Exposed so tests can address entries directly.
    size_t vertex_param_index(int level, int ix, int iy, int iz) const {
        return table_offset_ +
               (static_cast<size_t>(level) * cfg_.table_size + hash_index(ix, iy, iz)) *
                   cfg_.features_per_level;
    }

    void forward(const double* params, const double* x, int n, double* out) const;
    // adj_x may be null when positions do not require gradients.
    void backward(const double* params, const double* x, int n, const double* adj_out,
                  double* grad_sink, double* adj_x) const;
    // out(n x 3) = J(x)^T r per row, J = d(encoding)/dx using in-cell
    // interpolation derivatives.
    void jacvec(const double* params, const double* x, int n, const double* r,
                double* out) const;
    void jacvec_backward(const double* params, const double* x, int n, const double* r,
                         const double* adj_out, double* grad_sink, double* adj_r) const;

private:
    uint32_t hash_index(int ix, int iy, int iz) const {
        // Spatial hash: fixed large prime multipliers, XOR-folded.
        uint32_t h = static_cast<uint32_t>(ix) * 2654435761u ^
                     static_cast<uint32_t>(iy) * 2246822519u ^
                     static_cast<uint32_t>(iz) * 3266489917u;
        return h & static_cast<uint32_t>(cfg_.table_size - 1);
    }

    struct CellCoords {
        int c0[3];
        double f[3];      // fractional position within the cell
        double dscale[3]; // d(frac)/d(x), zero where the input was clamped
    };
    CellCoords locate(int level, const double* xi) const;

    HashGridConfig cfg_;
    size_t table_offset_;
    std::vector<int> level_res_;
    mutable std::atomic<bool> warned_clamp_{false};
};

// ---------------------------------------------------------------------------
// Angular encoding of (normal, view, light) direction triples.
// ---------------------------------------------------------------------------

// The five rotation-invariant components [n.h, l.h, n.l, n.v, (n.h)^10]
// with h the normalized half vector of l and v.
std::array<double, 5> angular_encode(const Vec3& n, const Vec3& v, const Vec3& l);

// Graph version: normals are per-row (n x 3); v and l are 1 x 3 nodes shared
// by all rows. Output n x 5. Returns the n.l column alongside (reused by the
// shading clamp).
struct AngularNodes {
    V features; // n x 5
    V n_dot_l;  // n x 1
};
AngularNodes angular_encode_graph(Tape& t, V normals, V view, V light);

// ---------------------------------------------------------------------------
// Real spherical harmonics of unit directions.
// ---------------------------------------------------------------------------

int sh_dim(int degree);
// degree in [0,3]; throws if v deviates from unit norm by more than 1e-6.
std::vector<double> sh_encode(const Vec3& v, int degree = 3);
// Graph version for differentiable direction inputs (n x 3 of unit rows).
V sh_encode_graph(Tape& t, V dirs, int degree = 3);

} // namespace mvir
