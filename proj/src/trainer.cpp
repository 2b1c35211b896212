#include "mvir/trainer.h"

#include <cmath>
#include <fstream>
#include <iostream>

#include "mvir/optimizer.h"

namespace mvir {

std::vector<std::vector<std::pair<int, int>>> candidate_pixels(const Dataset& ds,
                                                               int radius_px) {
    std::vector<std::vector<std::pair<int, int>>> out(ds.views.size());
    for (size_t v = 0; v < ds.views.size(); ++v) {
        const MaskImage& m = ds.masks[v];
        std::vector<std::pair<int, int>> fg;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y))
                    fg.emplace_back(x, y);
        const double r2 = static_cast<double>(radius_px) * radius_px;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                bool near = false;
                for (const auto& [fx, fy] : fg) {
                    double dx = fx - x, dy = fy - y;
                    if (dx * dx + dy * dy <= r2) {
                        near = true;
                        break;
                    }
                }
                if (near)
                    out[v].emplace_back(x, y);
            }
    }
    return out;
}

namespace {

struct SampledRay {
    int view;
    int px, py;
};

} // namespace

TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg,
                  const std::string& log_csv, OccupancyGrid* grid_out) {
    check(!ds.views.empty(), "dataset has no views");
    check(ds.n_lights == model.cfg.n_lights, "model was built for ", model.cfg.n_lights,
          " lights but the dataset has ", ds.n_lights);

    Rng init_rng = named_stream(cfg.seed, "init");
    std::cerr << "init: fitting sphere of radius " << cfg.init_radius << " ("
              << cfg.init_steps << " steps)\n";
    double resid = init_sphere(*model.spatial, model.store, cfg.init_radius, cfg.init_steps,
                               init_rng);
    std::cerr << "init: residual " << resid << "\n";

    auto candidates = candidate_pixels(ds, cfg.mask_dilate_px);
    // flattened (view, pixel) candidate list; sampling is uniform over it
    std::vector<SampledRay> pool;
    for (size_t v = 0; v < candidates.size(); ++v)
        for (const auto& [x, y] : candidates[v])
            pool.push_back({static_cast<int>(v), x, y});
    check(!pool.empty(), "no candidate pixels to sample");

    OccupancyGrid local_grid(cfg.occupancy_res);
    OccupancyGrid& grid = grid_out ? *grid_out : local_grid;

    Rng ray_rng = named_stream(cfg.seed, "ray-sampling");
    AdamW opt(model.store);

    const int B = cfg.rays_per_step;
    const int S = std::max(1, cfg.shards);
    std::vector<std::vector<double>> sinks(S);
    for (auto& s : sinks)
        s.assign(model.store.size(), 0.0);
    std::vector<std::unique_ptr<Tape>> tapes(S);
    for (int s = 0; s < S; ++s)
        tapes[s] = std::make_unique<Tape>(&model.store, sinks[s].data());

    std::ofstream csv;
    if (!log_csv.empty()) {
        csv.open(log_csv);
        check(csv.good(), "cannot open loss log '", log_csv, "'");
        csv << "step,color,mask,eikonal,total\n";
    }

    std::vector<double> last_good = model.store.values;
    TrainResult result;

    for (int step = 0; step < cfg.steps; ++step) {
        if (step % cfg.occupancy_interval == 0)
            grid.update(*model.spatial, model.store, model.sharpness(),
                        cfg.occupancy_threshold, cfg.exec);

        std::vector<SampledRay> rays(B);
        for (int i = 0; i < B; ++i)
            rays[i] = pool[ray_rng.below(pool.size())];

        std::vector<double> shard_color(S, 0.0), shard_mask(S, 0.0), shard_eik(S, 0.0);
        std::vector<int> shard_color_count(S, 0);
        for_each_shard(S, cfg.exec, [&](int s) {
            Tape& tape = *tapes[s];
            int lo = static_cast<int>(static_cast<int64_t>(B) * s / S);
            int hi = static_cast<int>(static_cast<int64_t>(B) * (s + 1) / S);
            for (int i = lo; i < hi; ++i) {
                const SampledRay& sr = rays[i];
                const View& view = ds.views[sr.view];
                tape.reset();
                Ray ray = generate_ray(view, sr.px, sr.py, ds.transform);
                PixelNodes p =
                    render_pixel_graph(tape, model, ray, view, cfg.render, &grid, nullptr);
                bool fg = ds.masks[sr.view].at(sr.px, sr.py);

                V total = mask_loss_graph(tape, p.m, fg);
                shard_mask[s] += total.scalar();
                total = tape.scale(total, cfg.lambda_mask / B);
                if (!p.background) {
                    if (fg) {
                        Vec3 measured{ds.images[sr.view].at(sr.px, sr.py, 0),
                                      ds.images[sr.view].at(sr.px, sr.py, 1),
                                      ds.images[sr.view].at(sr.px, sr.py, 2)};
                        V cl = color_loss_graph(tape, p.rgb, measured, cfg.color_loss,
                                                cfg.color_eps);
                        shard_color[s] += cl.scalar();
                        ++shard_color_count[s];
                        total = tape.add(total, tape.scale(cl, 1.0 / B));
                    }
                    V eik = tape.scale(p.eik, 1.0 / p.n_samples);
                    shard_eik[s] += eik.scalar();
                    total = tape.add(total, tape.scale(eik, cfg.lambda_eik / B));
                }
                tape.backward_scalar(total);
            }
        });

        // deterministic merge in shard order
        model.store.zero_grad();
        for (int s = 0; s < S; ++s) {
            double* g = model.store.grads.data();
            const double* src = sinks[s].data();
            for (size_t k = 0; k < sinks[s].size(); ++k)
                g[k] += src[k];
            std::fill(sinks[s].begin(), sinks[s].end(), 0.0);
        }

        double color = 0, mask = 0, eik = 0;
        int ccount = 0;
        for (int s = 0; s < S; ++s) {
            color += shard_color[s];
            mask += shard_mask[s];
            eik += shard_eik[s];
            ccount += shard_color_count[s];
        }
        color /= std::max(1, ccount);
        mask /= B;
        eik /= B;
        double total = color + cfg.lambda_mask * mask + cfg.lambda_eik * eik;

        if (!std::isfinite(total)) {
            std::cerr << "error: non-finite loss at step " << step
                      << ", rolling back to the last finite step\n";
            model.store.values = last_good;
            result.diverged = true;
            break;
        }
        last_good = model.store.values;
        opt.step();
        result.steps_run = step + 1;

        if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
            result.log.push_back({step, color, mask, eik, total});
            if (csv.is_open())
                csv << step << "," << color << "," << mask << "," << eik << "," << total
                    << "\n";
            std::cerr << "step " << step << "  color " << color << "  mask " << mask
                      << "  eikonal " << eik << "  total " << total << "  occ "
                      << grid.occupancy_fraction() << "\n";
        }
    }
    return result;
}

} // namespace mvir
