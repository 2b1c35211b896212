#pragma once

#include <memory>
#include <string>

#include "mvir/camera.h"
#include "mvir/model.h"

namespace mvir {

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// Checkpoint file: 8-byte magic, little-endian u64 header length, JSON header
// (group table, model config, scene transform, config hash), then every
// parameter value as little-endian float64 in store order.
void save_checkpoint(const std::string& path, const Model& model, const SceneTransform& tf,
                     uint64_t config_hash = 0);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    SceneTransform transform;
    uint64_t config_hash = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace mvir
