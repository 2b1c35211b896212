#include "mvir/encodings.h"

#include <cmath>
#include <iostream>

#include "mvir/kernels.h"

namespace mvir {

HashGrid::HashGrid(HashGridConfig cfg, size_t table_offset)
    : cfg_(cfg), table_offset_(table_offset) {
    check((cfg_.table_size & (cfg_.table_size - 1)) == 0, "hash table size must be a power of two");
    double res = cfg_.base_resolution;
    for (int l = 0; l < cfg_.levels; ++l) {
        level_res_.push_back(static_cast<int>(res));
        res *= cfg_.growth;
    }
}

HashGrid::CellCoords HashGrid::locate(int level, const double* xi) const {
    CellCoords cc;
    int N = level_res_[level];
    for (int a = 0; a < 3; ++a) {
        double x = xi[a];
        bool clamped = false;
        if (x < -1.0) {
            clamped = x < -1.0 - 1e-9; // boundary round-off clamps silently
            x = -1.0;
        } else if (x > 1.0) {
            clamped = x > 1.0 + 1e-9;
            x = 1.0;
        }
        if (clamped && !warned_clamp_.exchange(true))
            std::cerr << "warning: hash encoding input outside [-1,1]^3, clamping\n";
        double u = (x + 1.0) * 0.5 * N; // in [0, N]
        int c0 = static_cast<int>(std::floor(u));
        if (c0 >= N)
            c0 = N - 1; // keep the +1 corner a valid vertex
        if (c0 < 0)
            c0 = 0;
        cc.c0[a] = c0;
        cc.f[a] = u - c0;
        cc.dscale[a] = clamped ? 0.0 : 0.5 * N;
    }
    return cc;
}

void HashGrid::forward(const double* params, const double* x, int n, double* out) const {
    const int F = cfg_.features_per_level;
    const int D = output_dim();
    const double* table = params + table_offset_;
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * 3;
        double* oi = out + static_cast<size_t>(i) * D;
        for (int l = 0; l < cfg_.levels; ++l) {
            CellCoords cc = locate(l, xi);
            double acc[8]; // up to features_per_level accumulators
            for (int f = 0; f < F; ++f)
                acc[f] = 0.0;
            for (int corner = 0; corner < 8; ++corner) {
                int bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
                double w = (bx ? cc.f[0] : 1.0 - cc.f[0]) * (by ? cc.f[1] : 1.0 - cc.f[1]) *
                           (bz ? cc.f[2] : 1.0 - cc.f[2]);
                size_t e = (static_cast<size_t>(l) * cfg_.table_size +
                            hash_index(cc.c0[0] + bx, cc.c0[1] + by, cc.c0[2] + bz)) *
                           F;
                for (int f = 0; f < F; ++f)
                    acc[f] += w * table[e + f];
            }
            for (int f = 0; f < F; ++f)
                oi[l * F + f] = acc[f];
        }
    }
}

void HashGrid::backward(const double* params, const double* x, int n, const double* adj_out,
                        double* grad_sink, double* adj_x) const {
    const int F = cfg_.features_per_level;
    const int D = output_dim();
    const double* table = params + table_offset_;
    double* gtable = grad_sink + table_offset_;
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * 3;
        const double* gi = adj_out + static_cast<size_t>(i) * D;
        double* gx = adj_x ? adj_x + static_cast<size_t>(i) * 3 : nullptr;
        for (int l = 0; l < cfg_.levels; ++l) {
            CellCoords cc = locate(l, xi);
            for (int corner = 0; corner < 8; ++corner) {
                int b[3] = {corner & 1, (corner >> 1) & 1, (corner >> 2) & 1};
                double wax[3];
                for (int a = 0; a < 3; ++a)
                    wax[a] = b[a] ? cc.f[a] : 1.0 - cc.f[a];
                double w = wax[0] * wax[1] * wax[2];
                size_t e = (static_cast<size_t>(l) * cfg_.table_size +
                            hash_index(cc.c0[0] + b[0], cc.c0[1] + b[1], cc.c0[2] + b[2])) *
                           F;
                double gdotT = 0.0;
                for (int f = 0; f < F; ++f) {
                    gtable[e + f] += w * gi[l * F + f];
                    gdotT += gi[l * F + f] * table[e + f];
                }
                if (gx) {
                    for (int a = 0; a < 3; ++a) {
                        double dw = (b[a] ? 1.0 : -1.0) * cc.dscale[a];
                        for (int a2 = 0; a2 < 3; ++a2)
                            if (a2 != a)
                                dw *= wax[a2];
                        gx[a] += gdotT * dw;
                    }
                }
            }
        }
    }
}

void HashGrid::jacvec(const double* params, const double* x, int n, const double* r,
                      double* out) const {
    const int F = cfg_.features_per_level;
    const int D = output_dim();
    const double* table = params + table_offset_;
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * 3;
        const double* ri = r + static_cast<size_t>(i) * D;
        double* oi = out + static_cast<size_t>(i) * 3;
        oi[0] = oi[1] = oi[2] = 0.0;
        for (int l = 0; l < cfg_.levels; ++l) {
            CellCoords cc = locate(l, xi);
            for (int corner = 0; corner < 8; ++corner) {
                int b[3] = {corner & 1, (corner >> 1) & 1, (corner >> 2) & 1};
                double wax[3];
                for (int a = 0; a < 3; ++a)
                    wax[a] = b[a] ? cc.f[a] : 1.0 - cc.f[a];
                size_t e = (static_cast<size_t>(l) * cfg_.table_size +
                            hash_index(cc.c0[0] + b[0], cc.c0[1] + b[1], cc.c0[2] + b[2])) *
                           F;
                double rdotT = 0.0;
                for (int f = 0; f < F; ++f)
                    rdotT += ri[l * F + f] * table[e + f];
                for (int a = 0; a < 3; ++a) {
                    double dw = (b[a] ? 1.0 : -1.0) * cc.dscale[a];
                    for (int a2 = 0; a2 < 3; ++a2)
                        if (a2 != a)
                            dw *= wax[a2];
                    oi[a] += rdotT * dw;
                }
            }
        }
    }
}

void HashGrid::jacvec_backward(const double* params, const double* x, int n, const double* r,
                               const double* adj_out, double* grad_sink, double* adj_r) const {
    const int F = cfg_.features_per_level;
    const int D = output_dim();
    const double* table = params + table_offset_;
    double* gtable = grad_sink + table_offset_;
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * 3;
        const double* ri = r + static_cast<size_t>(i) * D;
        const double* gi = adj_out + static_cast<size_t>(i) * 3;
        double* gri = adj_r + static_cast<size_t>(i) * D;
        for (int l = 0; l < cfg_.levels; ++l) {
            CellCoords cc = locate(l, xi);
            for (int corner = 0; corner < 8; ++corner) {
                int b[3] = {corner & 1, (corner >> 1) & 1, (corner >> 2) & 1};
                double wax[3];
                for (int a = 0; a < 3; ++a)
                    wax[a] = b[a] ? cc.f[a] : 1.0 - cc.f[a];
                size_t e = (static_cast<size_t>(l) * cfg_.table_size +
                            hash_index(cc.c0[0] + b[0], cc.c0[1] + b[1], cc.c0[2] + b[2])) *
                           F;
                double gdotdw = 0.0;
                for (int a = 0; a < 3; ++a) {
                    double dw = (b[a] ? 1.0 : -1.0) * cc.dscale[a];
                    for (int a2 = 0; a2 < 3; ++a2)
                        if (a2 != a)
                            dw *= wax[a2];
                    gdotdw += gi[a] * dw;
                }
                for (int f = 0; f < F; ++f) {
                    gri[l * F + f] += gdotdw * table[e + f];
                    gtable[e + f] += gdotdw * ri[l * F + f];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------

std::array<double, 5> angular_encode(const Vec3& n, const Vec3& v, const Vec3& l) {
    check(std::abs(norm(n) - 1.0) < 1e-6 && std::abs(norm(v) - 1.0) < 1e-6 &&
              std::abs(norm(l) - 1.0) < 1e-6,
          "angular_encode: inputs must be unit vectors");
    Vec3 hv = l + v;
    double hn = norm(hv);
    Vec3 h = hv / (hn + 1e-12);
    double nh = dot(n, h);
    return {nh, dot(l, h), dot(n, l), dot(n, v), kernels::pow_int(nh, 10)};
}

AngularNodes angular_encode_graph(Tape& t, V normals, V view, V light) {
    V h = t.normalize_rows(light + view);
    V nh = t.rowdot(normals, h);
    V lh = t.rowdot(light, h); // 1 x 1
    V nl = t.rowdot(normals, light);
    V nv = t.rowdot(normals, view);
    V nh10 = t.pow_int(nh, 10);
    int n = normals.rows();
    V lh_col = t.repeat_rows(t.reshape(lh, 1, 1), n);
    AngularNodes out;
    out.features = t.concat_cols({nh, lh_col, nl, nv, nh10});
    out.n_dot_l = nl;
    return out;
}

// ---------------------------------------------------------------------------

int sh_dim(int degree) { return (degree + 1) * (degree + 1); }

namespace {
// Real spherical harmonics constants (unit-normalized over the sphere).
constexpr double kC0 = 0.28209479177387814;  // 1/(2 sqrt(pi))
constexpr double kC1 = 0.4886025119029199;   // sqrt(3/(4 pi))
constexpr double kC2a = 1.0925484305920792;  // sqrt(15/(4 pi))
constexpr double kC2b = 0.31539156525252005; // sqrt(5/(16 pi))
constexpr double kC2c = 0.5462742152960396;  // sqrt(15/(16 pi))
constexpr double kC3a = 0.5900435899266435;  // sqrt(35/(32 pi))
constexpr double kC3b = 2.890611442640554;   // sqrt(105/(4 pi))
constexpr double kC3c = 0.4570457994644658;  // sqrt(21/(32 pi))
constexpr double kC3d = 0.3731763325901154;  // sqrt(7/(16 pi))
constexpr double kC3e = 1.445305721320277;   // sqrt(105/(16 pi))
} // namespace

std::vector<double> sh_encode(const Vec3& v, int degree) {
    check(degree >= 0 && degree <= 3, "sh_encode: degree must be in [0,3]");
    check(std::abs(norm(v) - 1.0) < 1e-6, "sh_encode: input must be unit length (|v|=", norm(v),
          ")");
    double x = v.x, y = v.y, z = v.z;
    std::vector<double> out;
    out.reserve(sh_dim(degree));
    out.push_back(kC0);
    if (degree >= 1) {
        out.push_back(kC1 * y);
        out.push_back(kC1 * z);
        out.push_back(kC1 * x);
    }
    if (degree >= 2) {
        out.push_back(kC2a * x * y);
        out.push_back(kC2a * y * z);
        out.push_back(kC2b * (3 * z * z - 1));
        out.push_back(kC2a * x * z);
        out.push_back(kC2c * (x * x - y * y));
    }
    if (degree >= 3) {
        out.push_back(kC3a * y * (3 * x * x - y * y));
        out.push_back(kC3b * x * y * z);
        out.push_back(kC3c * y * (5 * z * z - 1));
        out.push_back(kC3d * z * (5 * z * z - 3));
        out.push_back(kC3c * x * (5 * z * z - 1));
        out.push_back(kC3e * z * (x * x - y * y));
        out.push_back(kC3a * x * (x * x - 3 * y * y));
    }
    return out;
}

V sh_encode_graph(Tape& t, V dirs, int degree) {
    check(degree >= 0 && degree <= 3, "sh_encode_graph: degree must be in [0,3]");
    check(dirs.cols() == 3, "sh_encode_graph: dirs must be n x 3");
    int n = dirs.rows();
    V x = t.slice_cols(dirs, 0, 1);
    V y = t.slice_cols(dirs, 1, 2);
    V z = t.slice_cols(dirs, 2, 3);
    std::vector<V> comps;
    Mat ones(n, 1);
    for (auto& e : ones.a)
        e = 1.0;
    comps.push_back(t.scale(t.constant(ones), kC0));
    if (degree >= 1) {
        comps.push_back(t.scale(y, kC1));
        comps.push_back(t.scale(z, kC1));
        comps.push_back(t.scale(x, kC1));
    }
    if (degree >= 2) {
        V xx = x * x, yy = y * y, zz = z * z;
        comps.push_back(t.scale(x * y, kC2a));
        comps.push_back(t.scale(y * z, kC2a));
        comps.push_back(t.scale(t.add_scalar(t.scale(zz, 3.0), -1.0), kC2b));
        comps.push_back(t.scale(x * z, kC2a));
        comps.push_back(t.scale(xx - yy, kC2c));
        if (degree >= 3) {
            V zz5m1 = t.add_scalar(t.scale(zz, 5.0), -1.0);
            comps.push_back(t.scale(y * (t.scale(xx, 3.0) - yy), kC3a));
            comps.push_back(t.scale(x * y * z, kC3b));
            comps.push_back(t.scale(y * zz5m1, kC3c));
            comps.push_back(t.scale(z * t.add_scalar(t.scale(zz, 5.0), -3.0), kC3d));
            comps.push_back(t.scale(x * zz5m1, kC3c));
            comps.push_back(t.scale(z * (xx - yy), kC3e));
            comps.push_back(t.scale(x * (xx - t.scale(yy, 3.0)), kC3a));
        }
    }
    return t.concat_cols(comps);
}

} // namespace mvir
