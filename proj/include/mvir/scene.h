#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvir/camera.h"
#include "mvir/image_io.h"
#include "mvir/parallel.h"

namespace mvir {

// Camera-space light directions (unit, toward the light) and RGB intensities.
struct GtLights {
    std::vector<Vec3> directions;
    std::vector<Vec3> intensities;
};

// A dataset directory:
//   scene.json        lights count, views (K/R/t/light/image/mask), optional
//                     gt_lights, gt_mesh, test_views, gt_test_lights
//   images/*.pfm      3-channel little-endian linear float (or *.png with
//                     "linearized" true: sRGB decoded on load)
//   masks/*.png       8-bit, >127 = foreground
struct Dataset {
    std::string root;
    int n_lights = 0;
    std::vector<View> views;
    std::vector<Image> images;
    std::vector<MaskImage> masks;

    std::optional<GtLights> gt_lights;
    std::string gt_mesh_path; // empty when absent

    // Held-out split rendered under lights not seen in training.
    std::vector<View> test_views;
    std::vector<Image> test_images;
    std::vector<MaskImage> test_masks;
    std::optional<GtLights> gt_test_lights;

    // Optional per-view ground-truth world-space normal maps (PFM).
    std::vector<std::string> gt_normal_paths;

    SceneTransform transform;
};

// Ray through the foreground center of mass of a view, in world space.
struct CenterRay {
    Vec3 origin;
    Vec3 dir;
};
CenterRay center_of_mass_ray(const View& view, const MaskImage& mask);

// Least-squares point closest to all center-of-mass rays. Throws
// "degenerate camera configuration" when the system is rank deficient
// (e.g. all rays parallel, or a single view).
Vec3 estimate_translation(const std::vector<View>& views, const std::vector<MaskImage>& masks);

// Closed-form object-to-world scale: the projected unit sphere area summed
// over views must reach k times the summed foreground areas.
double estimate_scale(const std::vector<View>& views, const std::vector<MaskImage>& masks,
                      const Vec3& translation, double k = 5.0);

// Per-view worst-case margin (in world units) by which the projected unit
// sphere encloses the foreground: min over fg pixels of
// (s - distance(pixel ray, sphere center)). Negative = not enclosed.
std::vector<double> enclosure_margins(const std::vector<View>& views,
                                      const std::vector<MaskImage>& masks,
                                      const SceneTransform& transform);

SceneTransform normalize_scene(const std::vector<View>& views,
                               const std::vector<MaskImage>& masks, double k = 5.0);

// Loads and validates the directory, then runs scene normalization.
Dataset load_dataset(const std::string& dir, Exec exec = Exec::openmp);

} // namespace mvir
