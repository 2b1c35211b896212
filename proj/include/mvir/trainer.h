#pragma once

#include <functional>
#include <string>

#include "mvir/losses.h"
#include "mvir/model.h"
#include "mvir/occupancy.h"
#include "mvir/renderer.h"
#include "mvir/scene.h"

namespace mvir {

struct TrainConfig {
    int steps = 3000;
    int rays_per_step = 4096;
    // Gradient work is split into this many fixed shards per step; shards are
    // merged in index order, so results do not depend on the thread count.
    int shards = 8;
    double lambda_mask = 1.0;
    double lambda_eik = 1.0;
    double color_eps = 1e-3;
    ColorLossKind color_loss = ColorLossKind::weighted_l1;
    int mask_dilate_px = 16;
    int occupancy_res = 64;
    int occupancy_interval = 16;
    double occupancy_threshold = 1e-4;
    double init_radius = 0.5;
    int init_steps = 2000;
    int log_every = 50;
    RenderConfig render;
    uint64_t seed = 1;
    Exec exec = Exec::openmp;
};

struct StepLog {
    int step;
    double color, mask, eikonal, total;
};

struct TrainResult {
    std::vector<StepLog> log;
    bool diverged = false;
    int steps_run = 0;
};

// Per-view pixel candidates: the foreground mask dilated by `radius_px`.
// Color supervision applies only where the mask itself is set; mask
// supervision applies to every sampled ray.
std::vector<std::vector<std::pair<int, int>>>
candidate_pixels(const Dataset& ds, int radius_px);

// Joint single-stage optimization of all parameter groups. Assumes the model
// was freshly constructed; runs sphere initialization first. On divergence
// (non-finite loss) the parameters are rolled back to the last finite step
// and `diverged` is set. `log_csv` may be empty.
TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg,
                  const std::string& log_csv = "", OccupancyGrid* grid_out = nullptr);

} // namespace mvir
