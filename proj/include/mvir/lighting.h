#pragma once

#include <vector>

#include "mvir/camera.h"
#include "mvir/param_store.h"
#include "mvir/tape.h"

namespace mvir {

// Per-light camera-space direction and log RGB intensity, both optimizable.
// Directions are stored unnormalized and normalized on every read; storing
// intensities in the log domain keeps the effective values strictly positive
// under any optimizer step.
class LightRig {
public:
    // Registers groups "light-dirs" (M x 3) and "light-log-intensity" (M x 3),
    // initialized to frontal direction [0,0,-1] and unit intensity.
    LightRig(ParamStore& store, int n_lights, double lr);

    int count() const { return n_lights_; }

    // Normalized camera-space direction of light j.
    Vec3 direction_cam(const ParamStore& store, int j) const;
    // Effective RGB intensity exp(stored log value).
    Vec3 intensity(const ParamStore& store, int j) const;
    // Unit world-space direction for light j seen from a view.
    Vec3 world_direction(const ParamStore& store, int j, const View& view) const;

    // Graph builders (1 x 3 nodes).
    V world_direction_graph(Tape& t, int j, const View& view) const;
    V intensity_graph(Tape& t, int j) const;

    size_t dirs_offset() const { return dirs_offset_; }
    size_t logint_offset() const { return logint_offset_; }

private:
    int n_lights_;
    size_t dirs_offset_ = 0;
    size_t logint_offset_ = 0;
};

} // namespace mvir
