#pragma once

#include <string>
#include <vector>

#include "mvir/camera.h"
#include "mvir/image_io.h"
#include "mvir/parallel.h"

namespace mvir {

// Analytic primitives and materials for the synthetic OLAT generator.
// BRDF: Lambertian rho/pi, optionally plus a Phong lobe
// ks * max(reflect(l,n).v, 0)^exponent.
struct SynthBrdf {
    Vec3 rho{0.75, 0.75, 0.75};
    double ks = 0.0;
    double exponent = 32.0;
};

struct SynthPrimitive {
    enum class Kind { sphere, capsule } kind = Kind::sphere;
    Vec3 a{0, 0, 0}; // center (sphere) or first endpoint (capsule)
    Vec3 b{0, 0, 0}; // second endpoint (capsule)
    double radius = 0.5;
    SynthBrdf brdf;
};

// One ring of camera poses orbiting `lookat`, shared by the listed lights
// (every pose is rendered once per listed light).
struct SynthRing {
    int n_views = 8;
    double elevation_deg = 15.0;
    double azimuth0_deg = 0.0;
    double distance = 2.8;
    std::vector<int> lights; // indices into the light list
};

struct SynthSpec {
    std::vector<SynthPrimitive> primitives;
    double smooth_k = 0.0; // > 0 blends primitives with an exponential smooth min

    std::vector<Vec3> light_dirs_cam; // unit camera-space, toward the light
    std::vector<Vec3> light_intensities;

    std::vector<SynthRing> rings;
    Vec3 lookat{0, 0, 0};
    int width = 64, height = 64;
    double focal = 100.0;

    // Held-out lights rendered from their own ring.
    std::vector<Vec3> test_light_dirs;
    std::vector<Vec3> test_light_intensities;
    std::vector<SynthRing> test_rings;

    int gt_mesh_resolution = 128;
};

// Parses the scene-spec JSON (throws with the offending key on errors).
SynthSpec parse_synth_spec(const std::string& json_path);

// Analytic scene queries (world space).
double synth_sdf(const SynthSpec& spec, const Vec3& p);
Vec3 synth_sdf_gradient(const SynthSpec& spec, const Vec3& p);
// Sphere-traced first hit; returns t or negative on miss.
double synth_trace(const SynthSpec& spec, const Vec3& o, const Vec3& d);
// Hard binary visibility from a surface point toward a light.
bool synth_visible(const SynthSpec& spec, const Vec3& x, const Vec3& n, const Vec3& l);
// Radiance of a surface point (BRDF of the nearest primitive, cosine clamp,
// binary shadow).
Vec3 synth_shade(const SynthSpec& spec, const Vec3& x, const Vec3& n, const Vec3& v,
                 const Vec3& l, const Vec3& intensity);

View synth_camera(const SynthSpec& spec, const SynthRing& ring, int view_idx);

// Renders OLAT images, masks, ground-truth normals, lights, and mesh into
// `out_dir` in the dataset layout.
void synth_scene(const SynthSpec& spec, const std::string& out_dir, Exec exec = Exec::openmp);

} // namespace mvir
