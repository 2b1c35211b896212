#include "mvir/viz.h"

#include <cmath>

namespace mvir {

Image render_brdf_sphere(const Model& model, const std::vector<double>& latent,
                         int resolution) {
    check(latent.size() == SpatialField::kLatentDim, "latent must have 63 entries");
    Image img(resolution, resolution, 3);
    // collect disk pixels and their normals
    std::vector<std::pair<int, int>> pix;
    std::vector<Vec3> normals;
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            double u = 2.0 * (x + 0.5) / resolution - 1.0;
            double w = 2.0 * (y + 0.5) / resolution - 1.0;
            double r2 = u * u + w * w;
            if (r2 > 1.0)
                continue;
            pix.emplace_back(x, y);
            normals.push_back({u, w, -std::sqrt(std::max(0.0, 1.0 - r2))});
        }
    int n = static_cast<int>(pix.size());
    Mat lat(n, SpatialField::kLatentDim);
    Mat feats(n, 5);
    Vec3 vl{0, 0, -1};
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < SpatialField::kLatentDim; ++k)
            lat(i, k) = latent[k];
        auto f = angular_encode(normals[i], vl, vl);
        for (int k = 0; k < 5; ++k)
            feats(i, k) = f[k];
    }
    Tape t(const_cast<ParamStore*>(&model.store));
    V out;
    if (model.cfg.brdf_encoding == BrdfEncoding::angular) {
        out = model.brdf->eval_graph(t, t.constant(lat), t.constant(feats));
    } else {
        Mat shfeat(n, 3 * sh_dim(3));
        auto shv = sh_encode(vl, 3);
        for (int i = 0; i < n; ++i) {
            auto shn = sh_encode(normals[i], 3);
            for (int k = 0; k < 16; ++k) {
                shfeat(i, k) = shn[k];
                shfeat(i, 16 + k) = shv[k];
                shfeat(i, 32 + k) = shv[k];
            }
        }
        out = model.brdf->eval_graph(t, t.constant(lat), t.constant(shfeat));
    }
    auto v = out.value();
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            img.at(pix[i].first, pix[i].second, c) = v[3 * i + c];
    return img;
}

namespace {

// Jacobi eigensolver for a small symmetric matrix; returns eigenvalues
// (descending) and matching columns of V.
void jacobi_eigen(std::vector<double>& A, int n, std::vector<double>& eigvals,
                  std::vector<double>& eigvecs) {
    eigvecs.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        eigvecs[static_cast<size_t>(i) * n + i] = 1.0;
    auto at = [&](int r, int c) -> double& { return A[static_cast<size_t>(r) * n + c]; };
    auto vt = [&](int r, int c) -> double& { return eigvecs[static_cast<size_t>(r) * n + c]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q)
                off += at(p, q) * at(p, q);
        if (off < 1e-18)
            break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300)
                    continue;
                double theta = (at(q, q) - at(p, p)) / (2 * apq);
                double sgn = theta >= 0 ? 1.0 : -1.0;
                double tt = sgn / (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1.0 / std::sqrt(tt * tt + 1), s = tt * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = vt(k, p), vkq = vt(k, q);
                    vt(k, p) = c * vkp - s * vkq;
                    vt(k, q) = s * vkp + c * vkq;
                }
            }
    }
    eigvals.resize(n);
    for (int i = 0; i < n; ++i)
        eigvals[i] = at(i, i);
    // order descending by eigenvalue (selection into index order)
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return eigvals[a] > eigvals[b]; });
    std::vector<double> ev(n);
    std::vector<double> vecs(eigvecs.size());
    for (int i = 0; i < n; ++i) {
        ev[i] = eigvals[order[i]];
        for (int k = 0; k < n; ++k)
            vecs[static_cast<size_t>(k) * n + i] = vt(k, order[i]);
    }
    eigvals.swap(ev);
    eigvecs.swap(vecs);
}

} // namespace

Image latent_map_image(const std::vector<double>& latents,
                       const std::vector<std::pair<int, int>>& pixels, int width, int height) {
    const int D = SpatialField::kLatentDim;
    size_t n = pixels.size();
    check(latents.size() == n * D, "latents/pixels size mismatch");
    check(n >= 3, "latent map needs at least 3 foreground pixels");

    std::vector<double> mean(D, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (int k = 0; k < D; ++k)
            mean[k] += latents[i * D + k];
    for (int k = 0; k < D; ++k)
        mean[k] /= n;

    std::vector<double> cov(static_cast<size_t>(D) * D, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (int a = 0; a < D; ++a) {
            double da = latents[i * D + a] - mean[a];
            for (int b = a; b < D; ++b)
                cov[static_cast<size_t>(a) * D + b] += da * (latents[i * D + b] - mean[b]);
        }
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < a; ++b)
            cov[static_cast<size_t>(a) * D + b] = cov[static_cast<size_t>(b) * D + a];

    std::vector<double> eigvals, eigvecs;
    jacobi_eigen(cov, D, eigvals, eigvecs);

    Image img(width, height, 3);
    for (int c = 0; c < 3; ++c) {
        // projection onto the c-th principal direction
        std::vector<double> proj(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < D; ++k)
                proj[i] += (latents[i * D + k] - mean[k]) *
                           eigvecs[static_cast<size_t>(k) * D + c];
        double lo = proj[0], hi = proj[0];
        for (double p : proj) {
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        double span = hi - lo;
        for (size_t i = 0; i < n; ++i) {
            double v = span > 1e-9 ? (proj[i] - lo) / span : 0.5;
            img.at(pixels[i].first, pixels[i].second, c) = v;
        }
    }
    return img;
}

Image latent_map(const Model& model, const View& view, const SceneTransform& tf,
                 const RenderConfig& rc, const OccupancyGrid* occ, Exec exec) {
    RenderedMaps maps = render_image(model, view, tf, rc, occ, nullptr, exec);
    std::vector<std::pair<int, int>> pixels;
    std::vector<double> latents;
    std::vector<double> xs;
    for (int y = 0; y < view.height; ++y)
        for (int x = 0; x < view.width; ++x) {
            if (maps.opacity.at(x, y, 0) < 0.5)
                continue;
            Ray ray = generate_ray(view, x, y, tf);
            Vec3 xp = ray.origin + ray.dir * maps.depth.at(x, y, 0);
            pixels.emplace_back(x, y);
            xs.insert(xs.end(), {xp.x, xp.y, xp.z});
        }
    size_t n = pixels.size();
    check(n >= 3, "latent map needs at least 3 foreground pixels");
    latents.resize(n * SpatialField::kLatentDim);
    model.spatial->eval_raw(model.store.values.data(), xs.data(), static_cast<int>(n), nullptr,
                            latents.data(), nullptr);
    return latent_map_image(latents, pixels, view.width, view.height);
}

} // namespace mvir
