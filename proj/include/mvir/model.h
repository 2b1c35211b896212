#pragma once

#include <cmath>
#include <memory>

#include "mvir/encodings.h"
#include "mvir/fields.h"
#include "mvir/lighting.h"

namespace mvir {

enum class BrdfEncoding { angular, sh };

struct ModelConfig {
    HashGridConfig hash;
    BrdfEncoding brdf_encoding = BrdfEncoding::angular;
    int n_lights = 1;
    double lr_mlp = 1e-2;    // spatial MLP, BRDF MLP, hash tables
    double lr_other = 1e-3;  // shadow MLP, sharpness, lights
    double weight_decay_mlp = 1e-2;
    double sharpness_init = 20.0;
    uint64_t seed = 1;

    int brdf_feature_dim() const {
        return brdf_encoding == BrdfEncoding::angular ? 5 : 3 * sh_dim(3);
    }
};

// Everything optimizable, wired onto one parameter store. Group order fixes
// the checkpoint layout: hash-table, spatial-mlp, brdf-mlp, shadow-mlp,
// sharpness, light-dirs, light-log-intensity.
struct Model {
    ModelConfig cfg;
    ParamStore store;
    std::unique_ptr<SpatialField> spatial;
    std::unique_ptr<BRDFField> brdf;
    std::unique_ptr<ShadowField> shadow;
    std::unique_ptr<LightRig> lights;
    size_t sharpness_offset = 0;

    explicit Model(const ModelConfig& c) : cfg(c) {
        Rng init = named_stream(cfg.seed, "init");
        spatial = std::make_unique<SpatialField>(store, cfg.hash, cfg.lr_mlp, cfg.lr_mlp,
                                                 cfg.weight_decay_mlp, init);
        brdf = std::make_unique<BRDFField>(store, cfg.brdf_feature_dim(), cfg.lr_mlp,
                                           cfg.weight_decay_mlp, init);
        shadow = std::make_unique<ShadowField>(store, cfg.lr_other, cfg.weight_decay_mlp, init);
        // sharpness optimized in the log domain so it stays positive
        sharpness_offset = store.add_group("sharpness", 1, cfg.lr_other, 0.0);
        store.values[sharpness_offset] = std::log(cfg.sharpness_init);
        lights = std::make_unique<LightRig>(store, cfg.n_lights, cfg.lr_other);
    }

    double sharpness() const { return std::exp(store.values[sharpness_offset]); }
    V sharpness_graph(Tape& t) const { return t.vexp(t.param(sharpness_offset, 1, 1)); }
};

} // namespace mvir
