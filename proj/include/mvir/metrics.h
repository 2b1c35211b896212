#pragma once

#include <vector>

#include "mvir/image_io.h"
#include "mvir/mesh.h"
#include "mvir/scene.h"

namespace mvir {

// Symmetric Chamfer distance between two point sets: the sum of both
// directed mean nearest-neighbor distances.
double chamfer_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                      Exec exec = Exec::openmp);

// Chamfer distance restricted to points visible from the input views: one
// ray per foreground pixel (subsampled by `stride`), first hits collected on
// each mesh, then chamfer_points between the two hit sets. Meshes and views
// are in world space. Throws when either mesh receives no hits.
double chamfer_visible(const TriangleMesh& a, const TriangleMesh& b,
                       const std::vector<View>& views, const std::vector<MaskImage>& masks,
                       int stride = 4, Exec exec = Exec::openmp);

// Mean angular difference in degrees between paired unit vectors.
double normal_mae_deg(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// 10 log10(1 / MSE) over masked pixels, values clamped to [0,1]; a zero MSE
// reports the 99 dB sentinel. Throws on an empty mask.
double psnr_db(const Image& a, const Image& b, const MaskImage& mask);

// Scale-invariant intensity error with the closed-form optimal scale
// s = sum(est*gt) / sum(est^2). Ground-truth entries must be positive.
struct SiMse {
    double error;
    double scale;
};
SiMse si_mse(const std::vector<double>& est, const std::vector<double>& gt);

// Mean angular error between matched light direction estimates, in degrees.
double light_mae_deg(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);

} // namespace mvir
