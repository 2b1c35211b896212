#include "mvir/renderer.h"

#include <cmath>

namespace mvir {

Ray generate_ray(const View& view, double px, double py, const SceneTransform& tf) {
    Ray r;
    r.origin = tf.to_object(view.camera_center_world());
    r.dir = view.pixel_ray_world(px, py); // directions are shared across spaces
    r.light = view.light;
    double b = dot(r.origin, r.dir);
    double c = dot(r.origin, r.origin) - 1.0;
    double disc = b * b - c;
    if (disc > 0) {
        double sq = std::sqrt(disc);
        r.tnear = std::max(0.0, -b - sq);
        r.tfar = -b + sq;
        r.hits_bound = r.tfar > r.tnear;
    }
    return r;
}

namespace {

PixelNodes background_pixel(Tape& t) {
    PixelNodes p;
    p.background = true;
    p.rgb = t.constant(Mat(1, 3));
    p.m = t.scalar(0.0);
    p.depth = t.scalar(0.0);
    p.s = t.scalar(1.0);
    p.s_ref = t.scalar(1.0);
    p.eik = t.scalar(0.0);
    return p;
}

// alpha_k = max((sig_k - sig_{k+1}) / sig_k, 0) with an underflow guard on
// the denominator.
V alphas_from_sdf(Tape& t, V g, V sharpness) {
    int n = g.rows();
    V sig = t.sigmoid(t.mul(g, sharpness));
    V sk = t.slice_rows(sig, 0, n - 1);
    V sk1 = t.slice_rows(sig, 1, n);
    std::vector<uint8_t> ok(n - 1);
    auto sv = sk.value();
    for (int i = 0; i < n - 1; ++i)
        ok[i] = sv[i] > 1e-12 ? 1 : 0;
    Mat ones(n - 1, 1);
    for (auto& v : ones.a)
        v = 1.0;
    V denom = t.select(ok, sk, t.constant(ones));
    V ratio = t.div(t.sub(sk, sk1), denom);
    V guarded = t.select(std::move(ok), ratio, t.scalar(0.0));
    return t.relu(guarded);
}

struct ShadingInputs {
    V features; // (n-1) x feature_dim
    V n_dot_l;  // (n-1) x 1
};

ShadingInputs shading_features(Tape& t, const Model& model, V normals_use, V view_row,
                               V light_row) {
    ShadingInputs si;
    if (model.cfg.brdf_encoding == BrdfEncoding::angular) {
        auto ae = angular_encode_graph(t, normals_use, view_row, light_row);
        si.features = ae.features;
        si.n_dot_l = ae.n_dot_l;
    } else {
        int n = normals_use.rows();
        V shn = sh_encode_graph(t, normals_use);
        V shv = t.repeat_rows(sh_encode_graph(t, view_row), n);
        V shl = t.repeat_rows(sh_encode_graph(t, light_row), n);
        si.features = t.concat_cols({shn, shv, shl});
        si.n_dot_l = t.rowdot(normals_use, light_row);
    }
    return si;
}

} // namespace

PixelNodes render_pixel_graph(Tape& t, const Model& model, const Ray& ray, const View& view,
                              const RenderConfig& rc, const OccupancyGrid* occ,
                              const LightOverride* ov) {
    if (!ray.hits_bound)
        return background_pixel(t);

    // Uniform depths across the sphere chord, pruned by the occupancy grid.
    std::vector<double> ts;
    ts.reserve(rc.n_primary);
    for (int k = 0; k < rc.n_primary; ++k) {
        double tk = ray.tnear + (ray.tfar - ray.tnear) * k / (rc.n_primary - 1);
        if (occ && !occ->occupied(ray.origin + ray.dir * tk))
            continue;
        ts.push_back(tk);
    }
    int n = static_cast<int>(ts.size());
    if (n < 2)
        return background_pixel(t);

    Mat X(n, 3), tcol(n, 1);
    for (int i = 0; i < n; ++i) {
        Vec3 p = ray.origin + ray.dir * ts[i];
        X(i, 0) = p.x;
        X(i, 1) = p.y;
        X(i, 2) = p.z;
        tcol(i, 0) = ts[i];
    }

    PixelNodes out;
    out.background = false;
    out.n_samples = n;

    auto field = model.spatial->eval_graph(t, t.constant(X), /*with_gradient=*/true);
    V sharpness = model.sharpness_graph(t);
    V alpha = alphas_from_sdf(t, field.g, sharpness);
    V w = t.transmit_weights(alpha);
    out.weights = w;
    out.normals = field.normals;
    out.m = t.sum(w);
    out.m_value = out.m.scalar();
    // each alpha covers the whole interval [t_k, t_{k+1}]; pairing its weight
    // with the interval midpoint keeps the composited depth unbiased
    Mat tmid(n - 1, 1);
    for (int i = 0; i + 1 < n; ++i)
        tmid(i, 0) = 0.5 * (ts[i] + ts[i + 1]);
    out.depth = t.dot(w, t.constant(tmid));

    // Eikonal over the ray-marched samples.
    V gradnorm = t.rownorm(field.grad);
    V gshift = t.add_scalar(gradnorm, -1.0);
    out.eik = t.sum(t.mul(gshift, gshift));

    // Shading at the first n-1 samples (the ones with opacities).
    V normals_use = t.slice_rows(field.normals, 0, n - 1);
    V latent_use = t.slice_rows(field.latent, 0, n - 1);
    V view_row = t.row3(-ray.dir); // toward the viewer
    V light_row = (ov && ov->dir_world) ? t.row3(normalized(*ov->dir_world))
                                        : model.lights->world_direction_graph(t, ray.light, view);
    V intensity = (ov && ov->intensity)
                      ? t.constant(Mat::row3(*ov->intensity))
                      : model.lights->intensity_graph(t, ray.light);

    auto si = shading_features(t, model, normals_use, view_row, light_row);
    V clamp = rc.eval_mode ? t.relu(si.n_dot_l) : t.softplus(si.n_dot_l, rc.cos_clamp_beta);
    V brdf = model.brdf->eval_graph(t, latent_use, si.features);
    V wc = t.mul(w, clamp);
    V contrib = t.matmul_nn(t.reshape(wc, 1, n - 1), brdf); // 1 x 3
    V base = t.mul(contrib, intensity);

    if (rc.unshadowed || out.m_value < 0.5) {
        // No meaningful surface point (or shadows disabled): neutral factor.
        out.s = t.scalar(1.0);
        out.s_ref = t.scalar(1.0);
        out.rgb = base;
        return out;
    }

    // Surface point x' = o + d v, with d the composited depth.
    V xprime = t.add(t.row3(ray.origin), t.mul(t.row3(ray.dir), out.depth));
    auto surf = model.spatial->eval_graph(t, xprime, /*with_gradient=*/false);

    // Shadow ray march from x' toward the light.
    Vec3 xp_val{xprime.value()[0], xprime.value()[1], xprime.value()[2]};
    Vec3 l_val{light_row.value()[0], light_row.value()[1], light_row.value()[2]};
    std::vector<double> ss;
    ss.reserve(rc.n_shadow);
    for (int k = 0; k < rc.n_shadow; ++k) {
        double tk = rc.shadow_near + (rc.shadow_far - rc.shadow_near) * k / (rc.n_shadow - 1);
        Vec3 p = xp_val + l_val * tk;
        if (dot(p, p) > 1.0)
            continue; // outside the scene bounds
        if (occ && !occ->occupied(p))
            continue;
        ss.push_back(tk);
    }
    if (ss.size() < 2) {
        out.s = t.scalar(1.0);
    } else {
        int m = static_cast<int>(ss.size());
        Mat scol(m, 1, std::vector<double>(ss));
        V xs = t.add(t.repeat_rows(xprime, m),
                     t.mul(t.repeat_rows(light_row, m), t.constant(scol)));
        auto sf = model.spatial->eval_graph(t, xs, /*with_gradient=*/false);
        V salpha = alphas_from_sdf(t, sf.g, sharpness);
        V sw = t.transmit_weights(salpha);
        out.s = t.add_scalar(t.scale(t.sum(sw), -1.0), 1.0);
    }

    auto shv = sh_encode(-ray.dir, ShadowField::kViewShDegree);
    V sh_view = t.constant(1, static_cast<int>(shv.size()), shv.data());
    out.s_ref = model.shadow->eval_graph(t, surf.latent, sh_view, out.s);
    out.rgb = t.mul(base, out.s_ref);
    return out;
}

RenderedMaps render_image(const Model& model, const View& view, const SceneTransform& tf,
                          const RenderConfig& rc, const OccupancyGrid* occ,
                          const LightOverride* ov, Exec exec) {
    int W = view.width, H = view.height;
    check(W > 0 && H > 0, "view has no image dimensions");
    RenderedMaps maps{Image(W, H, 3), Image(W, H, 1), Image(W, H, 1),
                      Image(W, H, 1), Image(W, H, 1), Image(W, H, 3)};
    parallel_for(H, exec, [&](int y) {
        Tape t(const_cast<ParamStore*>(&model.store));
        for (int x = 0; x < W; ++x) {
            t.reset();
            Ray ray = generate_ray(view, x, y, tf);
            PixelNodes p = render_pixel_graph(t, model, ray, view, rc, occ, ov);
            double m = p.background ? 0.0 : p.m_value;
            maps.opacity.at(x, y, 0) = m;
            bool bg = rc.eval_mode && m < 0.5;
            maps.shadow.at(x, y, 0) = bg || p.background ? 1.0 : p.s.scalar();
            maps.refined.at(x, y, 0) = bg || p.background ? 1.0 : p.s_ref.scalar();
            if (p.background || bg)
                continue;
            auto rgb = p.rgb.value();
            for (int c = 0; c < 3; ++c)
                maps.rgb.at(x, y, c) = rgb[c];
            maps.depth.at(x, y, 0) = p.depth.scalar();
            // opacity-composited normal
            auto wv = p.weights.value();
            auto nv = p.normals.value();
            Vec3 acc{0, 0, 0};
            for (size_t k = 0; k < wv.size(); ++k)
                acc += Vec3{nv[3 * k], nv[3 * k + 1], nv[3 * k + 2]} * wv[k];
            Vec3 nn = norm(acc) > 1e-12 ? normalized(acc) : Vec3{0, 0, 0};
            maps.normal.at(x, y, 0) = nn.x;
            maps.normal.at(x, y, 1) = nn.y;
            maps.normal.at(x, y, 2) = nn.z;
        }
    });
    return maps;
}

} // namespace mvir
