#include "mvir/occupancy.h"

#include <cmath>

#include "mvir/kernels.h"

namespace mvir {

void OccupancyGrid::update(const SpatialField& field, const ParamStore& store, double sharpness,
                           double threshold, Exec exec, double step) {
    const int N = res_;
    const int N1 = N + 1;
    const double cell = 2.0 / N;
    if (step <= 0)
        step = cell * std::sqrt(3.0);

    // field values at all cell corners, one z-slab at a time
    std::vector<double> g(static_cast<size_t>(N1) * N1 * N1);
    parallel_for(N1, exec, [&](int z) {
        std::vector<double> pts(static_cast<size_t>(N1) * N1 * 3);
        for (int y = 0; y < N1; ++y)
            for (int x = 0; x < N1; ++x) {
                size_t i = (static_cast<size_t>(y) * N1 + x) * 3;
                pts[i + 0] = -1.0 + cell * x;
                pts[i + 1] = -1.0 + cell * y;
                pts[i + 2] = -1.0 + cell * z;
            }
        field.eval_raw(store.values.data(), pts.data(), N1 * N1,
                       g.data() + static_cast<size_t>(z) * N1 * N1, nullptr, nullptr);
    });

    std::vector<uint8_t> raw(cells_.size(), 0);
    parallel_for(N, exec, [&](int z) {
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                double dmin = 1e30;
                for (int c = 0; c < 8; ++c) {
                    int cx = x + (c & 1), cy = y + ((c >> 1) & 1), cz = z + ((c >> 2) & 1);
                    double v = g[(static_cast<size_t>(cz) * N1 + cy) * N1 + cx];
                    dmin = std::min(dmin, std::abs(v));
                }
                // best-case opacity of a sample pair straddling this cell
                double s0 = kernels::sigmoid(sharpness * dmin);
                double s1 = kernels::sigmoid(sharpness * (dmin - step));
                double alpha = (s0 - s1) / std::max(s0, 1e-12);
                raw[(static_cast<size_t>(z) * N + y) * N + x] = alpha > threshold ? 1 : 0;
            }
    });

    // conservative 1-cell dilation
    parallel_for(N, exec, [&](int z) {
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                uint8_t occ = 0;
                for (int dz = -1; dz <= 1 && !occ; ++dz)
                    for (int dy = -1; dy <= 1 && !occ; ++dy)
                        for (int dx = -1; dx <= 1 && !occ; ++dx) {
                            int nx = x + dx, ny = y + dy, nz = z + dz;
                            if (nx < 0 || ny < 0 || nz < 0 || nx >= N || ny >= N || nz >= N)
                                continue;
                            occ = raw[(static_cast<size_t>(nz) * N + ny) * N + nx];
                        }
                cells_[(static_cast<size_t>(z) * N + y) * N + x] = occ;
            }
    });
}

} // namespace mvir
