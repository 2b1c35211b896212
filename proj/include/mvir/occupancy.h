#pragma once

#include <cstdint>
#include <vector>

#include "mvir/fields.h"
#include "mvir/parallel.h"

namespace mvir {

// Boolean grid over [-1,1]^3 marking cells that can contribute opacity.
// A freshly constructed grid is fully occupied (conservative); updates mark a
// cell empty only when the sigmoid opacity implied by the smallest |g| at its
// corners falls below the threshold, then dilate occupancy by one cell.
class OccupancyGrid {
public:
    explicit OccupancyGrid(int resolution = 64)
        : res_(resolution), cells_(static_cast<size_t>(res_) * res_ * res_, 1) {}

    int resolution() const { return res_; }

    bool occupied_index(int x, int y, int z) const {
        return cells_[(static_cast<size_t>(z) * res_ + y) * res_ + x] != 0;
    }

    bool occupied(const Vec3& p) const {
        int x = cell_of(p.x), y = cell_of(p.y), z = cell_of(p.z);
        return occupied_index(x, y, z);
    }

    double occupancy_fraction() const {
        size_t n = 0;
        for (uint8_t c : cells_)
            n += c;
        return static_cast<double>(n) / cells_.size();
    }

    void reset_occupied() { std::fill(cells_.begin(), cells_.end(), 1); }

    // Re-evaluates the field at the (res+1)^3 cell corners and marks cells.
    // `step` is the ray-march step the opacity proxy assumes (defaults to the
    // cell diagonal).
    void update(const SpatialField& field, const ParamStore& store, double sharpness,
                double threshold = 1e-4, Exec exec = Exec::openmp, double step = 0.0);

private:
    int cell_of(double v) const {
        int c = static_cast<int>((v + 1.0) * 0.5 * res_);
        return std::clamp(c, 0, res_ - 1);
    }

    int res_;
    std::vector<uint8_t> cells_;
};

} // namespace mvir
