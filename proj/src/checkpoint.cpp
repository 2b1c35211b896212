#include "mvir/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mvir {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'M', 'V', 'I', 'R', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const Model& model, const SceneTransform& tf,
                     uint64_t config_hash) {
    json h;
    h["groups"] = json::array();
    for (const auto& g : model.store.groups())
        h["groups"].push_back({{"name", g.name}, {"offset", g.offset}, {"length", g.length}});
    const auto& c = model.cfg;
    h["model"] = {{"hash_base_resolution", c.hash.base_resolution},
                  {"hash_levels", c.hash.levels},
                  {"hash_features", c.hash.features_per_level},
                  {"hash_table_size", c.hash.table_size},
                  {"hash_growth", c.hash.growth},
                  {"brdf_encoding", c.brdf_encoding == BrdfEncoding::angular ? "angular" : "sh"},
                  {"n_lights", c.n_lights},
                  {"lr_mlp", c.lr_mlp},
                  {"lr_other", c.lr_other},
                  {"weight_decay_mlp", c.weight_decay_mlp},
                  {"sharpness_init", c.sharpness_init},
                  {"seed", c.seed}};
    h["transform"] = {{"scale", tf.scale},
                      {"translation", {tf.translation.x, tf.translation.y, tf.translation.z}}};
    h["config_hash"] = config_hash;
    h["n_params"] = model.store.size();
    std::string header = h.dump();

    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot open '", path, "' for writing");
    f.write(kMagic, 8);
    uint64_t len = header.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(model.store.values.data()),
            static_cast<std::streamsize>(model.store.size() * sizeof(double)));
    check(f.good(), "failed writing checkpoint '", path, "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "cannot open checkpoint '", path, "'");
    char magic[8];
    f.read(magic, 8);
    check(f.good() && std::memcmp(magic, kMagic, 8) == 0, "'", path,
          "' is not a checkpoint file");
    uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 8);
    std::string header(len, '\0');
    f.read(header.data(), static_cast<std::streamsize>(len));
    check(f.good(), "truncated checkpoint header in '", path, "'");
    json h;
    try {
        h = json::parse(header);
    } catch (const std::exception& e) {
        fail("bad checkpoint header in '", path, "': ", e.what());
    }

    ModelConfig cfg;
    const auto& m = h.at("model");
    cfg.hash.base_resolution = m.at("hash_base_resolution").get<int>();
    cfg.hash.levels = m.at("hash_levels").get<int>();
    cfg.hash.features_per_level = m.at("hash_features").get<int>();
    cfg.hash.table_size = m.at("hash_table_size").get<int>();
    cfg.hash.growth = m.at("hash_growth").get<double>();
    cfg.brdf_encoding = m.at("brdf_encoding").get<std::string>() == "sh" ? BrdfEncoding::sh
                                                                         : BrdfEncoding::angular;
    cfg.n_lights = m.at("n_lights").get<int>();
    cfg.lr_mlp = m.at("lr_mlp").get<double>();
    cfg.lr_other = m.at("lr_other").get<double>();
    cfg.weight_decay_mlp = m.at("weight_decay_mlp").get<double>();
    cfg.sharpness_init = m.at("sharpness_init").get<double>();
    cfg.seed = m.at("seed").get<uint64_t>();

    LoadedCheckpoint out;
    out.model = std::make_unique<Model>(cfg);
    size_t n = h.at("n_params").get<size_t>();
    check(n == out.model->store.size(), "checkpoint parameter count ", n,
          " does not match the reconstructed model (", out.model->store.size(), ")");
    f.read(reinterpret_cast<char*>(out.model->store.values.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    check(f.good(), "truncated checkpoint data in '", path, "'");

    const auto& tr = h.at("transform");
    out.transform.scale = tr.at("scale").get<double>();
    out.transform.translation = {tr.at("translation")[0].get<double>(),
                                 tr.at("translation")[1].get<double>(),
                                 tr.at("translation")[2].get<double>()};
    out.config_hash = h.value("config_hash", 0ULL);
    return out;
}

} // namespace mvir
