#pragma once

#include "mvir/array.h"
#include "mvir/tape.h"

namespace mvir {

enum class ColorLossKind { weighted_l1, l1, l2, weighted_l2 };

ColorLossKind color_loss_from_string(const std::string& s);
const char* to_string(ColorLossKind k);

// Per-ray color term, summed over channels. The weighted variants divide the
// residual by a stop-gradient copy of the rendered value plus eps, so the
// denominator never feeds the backward pass.
V color_loss_graph(Tape& t, V rgb, const Vec3& measured, ColorLossKind kind, double eps);

// Binary cross-entropy between the accumulated opacity and a binary mask
// value; the opacity is clamped to [eps_m, 1 - eps_m] first.
V mask_loss_graph(Tape& t, V m, bool fg, double eps_m = 1e-6);

// Sum over rows of (|grad| - 1)^2.
V eikonal_loss_graph(Tape& t, V grad);

} // namespace mvir
