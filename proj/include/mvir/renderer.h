#pragma once

#include <optional>

#include "mvir/camera.h"
#include "mvir/image_io.h"
#include "mvir/model.h"
#include "mvir/occupancy.h"

namespace mvir {

struct RenderConfig {
    int n_primary = 64;        // uniform samples between the sphere bounds
    int n_shadow = 64;         // uniform samples on the shadow ray
    double shadow_near = 1e-2;
    double shadow_far = 0.5;
    double cos_clamp_beta = 10.0; // softplus sharpness of the shading clamp
    bool eval_mode = false;    // hard max clamp; background conventions apply
    bool unshadowed = false;   // skip the refined-shadow factor entirely
};

// Substitutes the view-bound light during rendering (relighting).
struct LightOverride {
    std::optional<Vec3> dir_world;  // unit, toward the light
    std::optional<Vec3> intensity;  // linear RGB
};

struct Ray {
    Vec3 origin; // object space
    Vec3 dir;    // unit, object space
    double tnear = 0, tfar = 0;
    bool hits_bound = false;
    int light = 0;
};

// Ray through pixel (px, py): origin at the camera center mapped to object
// coordinates, bounds from the unit-sphere intersection.
Ray generate_ray(const View& view, double px, double py, const SceneTransform& tf);

// Nodes of one rendered pixel. When `background` is set (ray misses the
// bounding sphere or every sample lands in empty cells) the value nodes are
// constants: rgb 0, m 0, s = s_ref = 1.
struct PixelNodes {
    bool background = true;
    int n_samples = 0;
    V rgb;     // 1 x 3
    V m;       // 1 x 1 accumulated opacity
    V depth;   // 1 x 1 composited ray depth
    V s;       // 1 x 1 volume-rendered shadow factor
    V s_ref;   // 1 x 1 refined shadow factor
    V eik;     // 1 x 1 sum over samples of (|grad g| - 1)^2
    V weights; // (n-1) x 1 compositing weights
    V normals; // n x 3 per-sample unit normals
    double m_value = 0.0;
};

PixelNodes render_pixel_graph(Tape& t, const Model& model, const Ray& ray, const View& view,
                              const RenderConfig& rc, const OccupancyGrid* occ = nullptr,
                              const LightOverride* ov = nullptr);

struct RenderedMaps {
    Image rgb;     // 3ch linear
    Image opacity; // 1ch
    Image depth;   // 1ch, object-space ray depth
    Image shadow;  // 1ch volume-rendered factor
    Image refined; // 1ch refined factor
    Image normal;  // 3ch world-space composite normals
};

RenderedMaps render_image(const Model& model, const View& view, const SceneTransform& tf,
                          const RenderConfig& rc, const OccupancyGrid* occ = nullptr,
                          const LightOverride* ov = nullptr, Exec exec = Exec::openmp);

} // namespace mvir
