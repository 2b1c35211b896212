#pragma once

#include "mvir/model.h"
#include "mvir/occupancy.h"
#include "mvir/renderer.h"

namespace mvir {

// Renders the reflectance of one latent code on a sphere under colocated
// view and light fixed at [0,0,-1]: the disk center shows the head-on
// response (n = v = l), the rim grazing angles. Pixels outside the disk are
// black.
Image render_brdf_sphere(const Model& model, const std::vector<double>& latent,
                         int resolution = 64);

// Projects per-pixel surface latents of a rendered view to RGB via PCA.
// Core entry: latents is n x 63 row-major, pixels the matching coordinates.
// Components are affinely mapped to [0,1] per channel; a (near-)constant
// latent field maps to mid gray. Throws when fewer than 3 pixels are given.
Image latent_map_image(const std::vector<double>& latents,
                       const std::vector<std::pair<int, int>>& pixels, int width, int height);

// Convenience wrapper: renders the view, collects surface latents where the
// accumulated opacity exceeds 0.5, and maps them.
Image latent_map(const Model& model, const View& view, const SceneTransform& tf,
                 const RenderConfig& rc, const OccupancyGrid* occ = nullptr,
                 Exec exec = Exec::openmp);

} // namespace mvir
