#pragma once

#include <memory>

#include "mvir/encodings.h"
#include "mvir/param_store.h"
#include "mvir/rng.h"
#include "mvir/tape.h"

namespace mvir {

// Shared MLP parameter layout: per layer a row-major weight matrix
// (out x in) followed by a bias vector.
struct MlpLayout {
    std::vector<int> dims; // dims[0] = input width, dims.back() = output width
    size_t offset = 0;     // absolute offset into the parameter store

    int n_layers() const { return static_cast<int>(dims.size()) - 1; }
    size_t count() const {
        size_t c = 0;
        for (int l = 0; l < n_layers(); ++l)
            c += static_cast<size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
        return c;
    }
    size_t w_offset(int layer) const {
        size_t o = offset;
        for (int l = 0; l < layer; ++l)
            o += static_cast<size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
        return o;
    }
    size_t b_offset(int layer) const {
        return w_offset(layer) + static_cast<size_t>(dims[layer + 1]) * dims[layer];
    }
};

enum class Act { linear, relu, softplus, sigmoid };

// Graph MLP forward pass: hidden layers use `hidden`, the last layer `out`.
V mlp_graph(Tape& t, const MlpLayout& L, V input, Act hidden, Act out,
            double softplus_beta = 1.0);

// Raw (tape-free) forward pass over a batch; in: n x dims[0], out: n x back.
void mlp_raw(const MlpLayout& L, const double* params, const double* in, int n, double* out,
             Act hidden, Act out_act, double softplus_beta = 1.0);

// ---------------------------------------------------------------------------
// Spatial field: signed distance g plus a 63-dim reflectance latent, fed by
// the hash encoding concatenated with the raw coordinates.
// ---------------------------------------------------------------------------

class SpatialField {
public:
    static constexpr int kLatentDim = 63;
    static constexpr int kHidden = 64;
    static constexpr double kSdfBeta = 100.0; // softplus sharpness of the hidden layer

    // Registers groups "hash-table" and "spatial-mlp" on the store.
    SpatialField(ParamStore& store, const HashGridConfig& cfg, double lr_table, double lr_mlp,
                 double wd_mlp, Rng& init_rng);

    struct EvalNodes {
        V g;        // n x 1 signed distance
        V latent;   // n x 63
        V grad;     // n x 3 spatial gradient of g (only if requested)
        V normals;  // n x 3 normalized gradient (only if requested)
    };

    // positions: n x 3 node. When with_gradient is set, the graph includes an
    // analytic expression for the spatial gradient of g, so parameters receive
    // gradients through the rendered normals as well.
    EvalNodes eval_graph(Tape& t, V positions, bool with_gradient) const;

    // Tape-free evaluation. Any of the outputs may be null.
    void eval_raw(const double* params, const double* x, int n, double* g_out,
                  double* latent_out, double* grad_out) const;
    double signed_distance(const double* params, const Vec3& p) const;

    const HashGrid& grid() const { return *grid_; }
    const MlpLayout& mlp() const { return mlp_; }

private:
    std::unique_ptr<HashGrid> grid_;
    MlpLayout mlp_;
};

// ---------------------------------------------------------------------------
// Reflectance field: maps latent + encoded directions to RGB values, ReLU on
// every layer including the output so values stay non-negative.
// ---------------------------------------------------------------------------

class BRDFField {
public:
    static constexpr int kHidden = 64;

    // feature_dim: 5 for angular encoding, 3 * sh_dim(3) for the SH variant.
    BRDFField(ParamStore& store, int feature_dim, double lr, double wd, Rng& init_rng);

    V eval_graph(Tape& t, V latent, V features) const;
    int feature_dim() const { return feature_dim_; }
    const MlpLayout& mlp() const { return mlp_; }

private:
    MlpLayout mlp_;
    int feature_dim_;
};

// ---------------------------------------------------------------------------
// Shadow refinement: latent at the surface point + SH-encoded view direction
// + volume-rendered shadow scalar -> sigmoid-bounded refined shadow.
// ---------------------------------------------------------------------------

class ShadowField {
public:
    static constexpr int kHidden = 64;
    static constexpr int kViewShDegree = 3;

    ShadowField(ParamStore& store, double lr, double wd, Rng& init_rng);

    // latent: 1 x 63, sh_view: 1 x 16, s: 1 x 1. Returns 1 x 1 in (0,1).
    V eval_graph(Tape& t, V latent, V sh_view, V s) const;
    const MlpLayout& mlp() const { return mlp_; }

private:
    MlpLayout mlp_;
};

// ---------------------------------------------------------------------------

// Supervised regression of the spatial field onto the analytic sphere SDF
// |p| - radius over uniform cube samples. Throws if the mean absolute
// residual stays above `tol` after `steps` optimization steps.
// Returns the final residual.
double init_sphere(SpatialField& field, ParamStore& store, double radius, int steps, Rng& rng,
                   double tol = 0.02, int batch = 512);

} // namespace mvir
