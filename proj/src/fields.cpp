#include "mvir/fields.h"

#include <cmath>
#include <cstring>

#include "mvir/kernels.h"
#include "mvir/optimizer.h"

namespace mvir {

namespace {

V apply_act(Tape& t, V x, Act a, double beta) {
    switch (a) {
    case Act::linear: return x;
    case Act::relu: return t.relu(x);
    case Act::softplus: return t.softplus(x, beta);
    case Act::sigmoid: return t.sigmoid(x);
    }
    return x;
}

void init_mlp(ParamStore& store, const MlpLayout& L, Rng& rng) {
    for (int l = 0; l < L.n_layers(); ++l) {
        store.init_kaiming(L.w_offset(l), L.dims[l + 1], L.dims[l], rng);
        // biases stay zero
    }
}

} // namespace

V mlp_graph(Tape& t, const MlpLayout& L, V input, Act hidden, Act out, double beta) {
    V x = input;
    for (int l = 0; l < L.n_layers(); ++l) {
        V W = t.param(L.w_offset(l), L.dims[l + 1], L.dims[l]);
        V b = t.param(L.b_offset(l), 1, L.dims[l + 1]);
        x = t.add(t.matmul_nt(x, W), b);
        x = apply_act(t, x, l + 1 < L.n_layers() ? hidden : out, beta);
    }
    return x;
}

void mlp_raw(const MlpLayout& L, const double* params, const double* in, int n, double* out,
             Act hidden, Act out_act, double beta) {
    std::vector<double> cur(in, in + static_cast<size_t>(n) * L.dims[0]);
    std::vector<double> next;
    for (int l = 0; l < L.n_layers(); ++l) {
        int din = L.dims[l], dout = L.dims[l + 1];
        next.assign(static_cast<size_t>(n) * dout, 0.0);
        const double* W = params + L.w_offset(l);
        const double* b = params + L.b_offset(l);
        kernels::gemm_nt_acc(cur.data(), W, next.data(), n, din, dout);
        Act a = l + 1 < L.n_layers() ? hidden : out_act;
        for (int i = 0; i < n; ++i) {
            double* row = next.data() + static_cast<size_t>(i) * dout;
            for (int j = 0; j < dout; ++j) {
                double z = row[j] + b[j];
                switch (a) {
                case Act::linear: break;
                case Act::relu: z = z > 0 ? z : 0.0; break;
                case Act::softplus: z = kernels::softplus(z, beta); break;
                case Act::sigmoid: z = kernels::sigmoid(z); break;
                }
                row[j] = z;
            }
        }
        cur.swap(next);
    }
    std::memcpy(out, cur.data(), sizeof(double) * cur.size());
}

// ---------------------------------------------------------------------------

SpatialField::SpatialField(ParamStore& store, const HashGridConfig& cfg, double lr_table,
                           double lr_mlp, double wd_mlp, Rng& init_rng) {
    size_t table_off = store.add_group("hash-table", cfg.param_count(), lr_table, 0.0);
    grid_ = std::make_unique<HashGrid>(cfg, table_off);
    mlp_.dims = {cfg.output_dim() + 3, kHidden, 1 + kLatentDim};
    mlp_.offset = store.add_group("spatial-mlp", mlp_.count(), lr_mlp, wd_mlp);
    init_mlp(store, mlp_, init_rng);
    // small random table entries; the fit drifts them from there
    double* tb = store.values.data() + table_off;
    for (size_t i = 0; i < cfg.param_count(); ++i)
        tb[i] = init_rng.uniform(-1e-4, 1e-4);
}

SpatialField::EvalNodes SpatialField::eval_graph(Tape& t, V positions, bool with_gradient) const {
    int n = positions.rows();
    V enc = t.hash_encode(*grid_, positions);
    V u = t.concat_cols({enc, positions});
    V W1 = t.param(mlp_.w_offset(0), mlp_.dims[1], mlp_.dims[0]);
    V b1 = t.param(mlp_.b_offset(0), 1, mlp_.dims[1]);
    V a1 = t.add(t.matmul_nt(u, W1), b1);
    V z1 = t.softplus(a1, kSdfBeta);
    V W2 = t.param(mlp_.w_offset(1), mlp_.dims[2], mlp_.dims[1]);
    V b2 = t.param(mlp_.b_offset(1), 1, mlp_.dims[2]);
    V out = t.add(t.matmul_nt(z1, W2), b2);

    EvalNodes e;
    e.g = t.slice_cols(out, 0, 1);
    e.latent = t.slice_cols(out, 1, 1 + kLatentDim);
    if (with_gradient) {
        // dg/du = W1^T (softplus'(a1) . W2[0,:]); the position part of u adds
        // the identity, the encoding part goes through the interpolation
        // jacobian. This stays a first-order graph: backprop through it gives
        // parameter gradients of the normals without second derivatives of
        // the tables w.r.t. position.
        V w2row = t.param(mlp_.w_offset(1), 1, mlp_.dims[1]); // row 0 of W2
        V dact = t.sigmoid(t.scale(a1, kSdfBeta));
        V ds = t.mul(dact, w2row);
        V dg_du = t.matmul_nn(ds, W1); // n x 31
        V dg_enc = t.slice_cols(dg_du, 0, grid_->output_dim());
        V dg_raw = t.slice_cols(dg_du, grid_->output_dim(), grid_->output_dim() + 3);
        e.grad = t.add(t.hash_jacvec(*grid_, positions, dg_enc), dg_raw);
        e.normals = t.normalize_rows(e.grad);
        (void)n;
    }
    return e;
}

void SpatialField::eval_raw(const double* params, const double* x, int n, double* g_out,
                            double* latent_out, double* grad_out) const {
    const int enc_dim = grid_->output_dim();
    const int in_dim = mlp_.dims[0];
    const int hid = mlp_.dims[1];
    std::vector<double> enc(static_cast<size_t>(n) * enc_dim);
    grid_->forward(params, x, n, enc.data());
    std::vector<double> u(static_cast<size_t>(n) * in_dim);
    for (int i = 0; i < n; ++i) {
        std::memcpy(u.data() + static_cast<size_t>(i) * in_dim,
                    enc.data() + static_cast<size_t>(i) * enc_dim, sizeof(double) * enc_dim);
        std::memcpy(u.data() + static_cast<size_t>(i) * in_dim + enc_dim,
                    x + static_cast<size_t>(i) * 3, sizeof(double) * 3);
    }
    const double* W1 = params + mlp_.w_offset(0);
    const double* b1 = params + mlp_.b_offset(0);
    const double* W2 = params + mlp_.w_offset(1);
    const double* b2 = params + mlp_.b_offset(1);
    std::vector<double> a1(static_cast<size_t>(n) * hid, 0.0);
    kernels::gemm_nt_acc(u.data(), W1, a1.data(), n, in_dim, hid);
    std::vector<double> z1(a1.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < hid; ++j) {
            size_t k = static_cast<size_t>(i) * hid + j;
            a1[k] += b1[j];
            z1[k] = kernels::softplus(a1[k], kSdfBeta);
        }
    if (g_out || grad_out) {
        for (int i = 0; i < n; ++i) {
            const double* zi = z1.data() + static_cast<size_t>(i) * hid;
            double g = b2[0];
            for (int j = 0; j < hid; ++j)
                g += W2[j] * zi[j];
            if (g_out)
                g_out[i] = g;
        }
    }
    if (latent_out) {
        for (int i = 0; i < n; ++i) {
            const double* zi = z1.data() + static_cast<size_t>(i) * hid;
            double* li = latent_out + static_cast<size_t>(i) * kLatentDim;
            for (int o = 0; o < kLatentDim; ++o) {
                const double* wrow = W2 + static_cast<size_t>(o + 1) * hid;
                double s = b2[o + 1];
                for (int j = 0; j < hid; ++j)
                    s += wrow[j] * zi[j];
                li[o] = s;
            }
        }
    }
    if (grad_out) {
        std::vector<double> ds(static_cast<size_t>(n) * hid);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < hid; ++j) {
                size_t k = static_cast<size_t>(i) * hid + j;
                ds[k] = kernels::sigmoid(kSdfBeta * a1[k]) * W2[j];
            }
        std::vector<double> dg_du(static_cast<size_t>(n) * in_dim, 0.0);
        kernels::gemm_nn_acc(ds.data(), W1, dg_du.data(), n, hid, in_dim);
        std::vector<double> dg_enc(static_cast<size_t>(n) * enc_dim);
        for (int i = 0; i < n; ++i)
            std::memcpy(dg_enc.data() + static_cast<size_t>(i) * enc_dim,
                        dg_du.data() + static_cast<size_t>(i) * in_dim,
                        sizeof(double) * enc_dim);
        grid_->jacvec(params, x, n, dg_enc.data(), grad_out);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a)
                grad_out[static_cast<size_t>(i) * 3 + a] +=
                    dg_du[static_cast<size_t>(i) * in_dim + enc_dim + a];
    }
}

double SpatialField::signed_distance(const double* params, const Vec3& p) const {
    double g;
    double xp[3] = {p.x, p.y, p.z};
    eval_raw(params, xp, 1, &g, nullptr, nullptr);
    return g;
}

// ---------------------------------------------------------------------------

BRDFField::BRDFField(ParamStore& store, int feature_dim, double lr, double wd, Rng& init_rng)
    : feature_dim_(feature_dim) {
    mlp_.dims = {SpatialField::kLatentDim + feature_dim, kHidden, kHidden, 3};
    mlp_.offset = store.add_group("brdf-mlp", mlp_.count(), lr, wd);
    init_mlp(store, mlp_, init_rng);
}

V BRDFField::eval_graph(Tape& t, V latent, V features) const {
    check(latent.cols() == SpatialField::kLatentDim, "BRDF latent must be n x 63");
    check(features.cols() == feature_dim_, "BRDF features must be n x ", feature_dim_);
    V in = t.concat_cols({latent, features});
    return mlp_graph(t, mlp_, in, Act::relu, Act::relu);
}

// ---------------------------------------------------------------------------

ShadowField::ShadowField(ParamStore& store, double lr, double wd, Rng& init_rng) {
    mlp_.dims = {SpatialField::kLatentDim + sh_dim(kViewShDegree) + 1, kHidden, kHidden, 1};
    mlp_.offset = store.add_group("shadow-mlp", mlp_.count(), lr, wd);
    init_mlp(store, mlp_, init_rng);
}

V ShadowField::eval_graph(Tape& t, V latent, V sh_view, V s) const {
    V in = t.concat_cols({latent, sh_view, s});
    return mlp_graph(t, mlp_, in, Act::relu, Act::sigmoid);
}

// ---------------------------------------------------------------------------

double init_sphere(SpatialField& field, ParamStore& store, double radius, int steps, Rng& rng,
                   double tol, int batch) {
    AdamW opt(store);
    for (int step = 0; step < steps; ++step) {
        Mat pts(batch, 3);
        Mat target(batch, 1);
        Mat target_grad(batch, 3);
        for (int i = 0; i < batch; ++i) {
            Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            pts(i, 0) = p.x;
            pts(i, 1) = p.y;
            pts(i, 2) = p.z;
            double r = norm(p);
            target(i, 0) = r - radius;
            Vec3 gdir = r > 1e-6 ? p / r : Vec3{0, 0, 1};
            target_grad(i, 0) = gdir.x;
            target_grad(i, 1) = gdir.y;
            target_grad(i, 2) = gdir.z;
        }
        store.zero_grad();
        Tape t(&store);
        // Supervising the spatial gradient alongside the value keeps the
        // fitted field's normals smooth, not just its level sets.
        auto e = field.eval_graph(t, t.constant(pts), true);
        V resid = t.sub(e.g, t.constant(target));
        V gresid = t.sub(e.grad, t.constant(target_grad));
        V loss = t.add(t.scale(t.sum(t.mul(resid, resid)), 1.0 / batch),
                       t.scale(t.sum(t.mul(gresid, gresid)), 0.5 / batch));
        t.backward_scalar(loss);
        opt.step();
    }
    // Residual over a fresh uniform sample.
    const int n_eval = 4096;
    Mat pts(n_eval, 3);
    std::vector<double> target(n_eval);
    for (int i = 0; i < n_eval; ++i) {
        Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        pts(i, 0) = p.x;
        pts(i, 1) = p.y;
        pts(i, 2) = p.z;
        target[i] = norm(p) - radius;
    }
    std::vector<double> g(n_eval);
    field.eval_raw(store.values.data(), pts.data(), n_eval, g.data(), nullptr, nullptr);
    double resid = 0;
    for (int i = 0; i < n_eval; ++i)
        resid += std::abs(g[i] - target[i]);
    resid /= n_eval;
    check(resid < tol, "sphere initialization failed to converge: residual ", resid,
          " above tolerance ", tol);
    return resid;
}

} // namespace mvir
