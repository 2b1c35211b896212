#pragma once

#include <cmath>
#include <memory>

#include "mvir/model.h"
#include "mvir/synth.h"

namespace mvir::testfx {

inline HashGridConfig small_hash() {
    HashGridConfig cfg;
    cfg.base_resolution = 8;
    cfg.levels = 6;
    cfg.features_per_level = 2;
    cfg.table_size = 1 << 12;
    cfg.growth = 1.5;
    return cfg;
}

// Camera on the +z axis at `dist`, looking at the origin (z forward, y down).
inline View axis_camera(double dist, int wh = 64, double focal = 100.0) {
    View v;
    Vec3 pos{0, 0, dist};
    Vec3 fwd = normalized(Vec3{0, 0, 0} - pos);
    Vec3 right = normalized(cross(fwd, Vec3{0, 1, 0}));
    Vec3 down = cross(fwd, right);
    v.R.m = {right.x, right.y, right.z, down.x, down.y, down.z, fwd.x, fwd.y, fwd.z};
    v.t = -(v.R * pos);
    double c = (wh - 1) * 0.5;
    v.K.m = {focal, 0, c, 0, focal, c, 0, 0, 1};
    v.width = wh;
    v.height = wh;
    return v;
}

// Model with a sphere-fitted spatial field, a constant (bias-only) BRDF of
// rho/pi, and a zeroed shadow MLP (refined factor 0.5 everywhere).
struct SphereModel {
    std::unique_ptr<Model> model;
    Vec3 rho{0.6, 0.45, 0.3};
    double fit_residual = 0;

    SphereModel() {
        ModelConfig cfg;
        cfg.hash = small_hash();
        cfg.n_lights = 2;
        cfg.seed = 77;
        model = std::make_unique<Model>(cfg);
        Rng rng = named_stream(cfg.seed, "init");
        fit_residual = init_sphere(*model->spatial, model->store, 0.5, 2000, rng);

        // constant BRDF: zero weights, output bias = rho/pi
        auto& store = model->store;
        const auto& bg = store.group("brdf-mlp");
        std::fill(store.values.begin() + bg.offset,
                  store.values.begin() + bg.offset + bg.length, 0.0);
        const MlpLayout& L = model->brdf->mlp();
        size_t bias = L.b_offset(L.n_layers() - 1);
        store.values[bias + 0] = rho.x / M_PI;
        store.values[bias + 1] = rho.y / M_PI;
        store.values[bias + 2] = rho.z / M_PI;

        const auto& sg = store.group("shadow-mlp");
        std::fill(store.values.begin() + sg.offset,
                  store.values.begin() + sg.offset + sg.length, 0.0);

        // a trained field ends up much sharper than the init value; use a
        // crisp transition so composites sit on the analytic surface
        store.values[model->sharpness_offset] = std::log(60.0);
    }
};

inline SphereModel& sphere_model() {
    static SphereModel fx;
    return fx;
}

} // namespace mvir::testfx
