#include "mvir/losses.h"

namespace mvir {

ColorLossKind color_loss_from_string(const std::string& s) {
    if (s == "weighted_l1")
        return ColorLossKind::weighted_l1;
    if (s == "l1")
        return ColorLossKind::l1;
    if (s == "l2")
        return ColorLossKind::l2;
    if (s == "weighted_l2")
        return ColorLossKind::weighted_l2;
    fail("unknown color loss '", s, "'");
}

const char* to_string(ColorLossKind k) {
    switch (k) {
    case ColorLossKind::weighted_l1: return "weighted_l1";
    case ColorLossKind::l1: return "l1";
    case ColorLossKind::l2: return "l2";
    case ColorLossKind::weighted_l2: return "weighted_l2";
    }
    return "?";
}

V color_loss_graph(Tape& t, V rgb, const Vec3& measured, ColorLossKind kind, double eps) {
    V resid = t.sub(rgb, t.row3(measured));
    switch (kind) {
    case ColorLossKind::l1:
        return t.sum(t.vabs(resid));
    case ColorLossKind::l2:
        return t.sum(t.mul(resid, resid));
    case ColorLossKind::weighted_l1: {
        V denom = t.add_scalar(t.stop_grad(rgb), eps);
        return t.sum(t.vabs(t.div(resid, denom)));
    }
    case ColorLossKind::weighted_l2: {
        V denom = t.add_scalar(t.stop_grad(rgb), eps);
        V r = t.div(resid, denom);
        return t.sum(t.mul(r, r));
    }
    }
    fail("unreachable");
}

V mask_loss_graph(Tape& t, V m, bool fg, double eps_m) {
    // clamp to [eps_m, 1-eps_m]
    double mv = m.scalar();
    V lo = t.select({mv > eps_m}, m, t.scalar(eps_m));
    V cl = t.select({mv < 1.0 - eps_m}, lo, t.scalar(1.0 - eps_m));
    if (fg)
        return t.scale(t.vlog(cl), -1.0);
    return t.scale(t.vlog(t.add_scalar(t.scale(cl, -1.0), 1.0)), -1.0);
}

V eikonal_loss_graph(Tape& t, V grad) {
    V r = t.add_scalar(t.rownorm(grad), -1.0);
    return t.sum(t.mul(r, r));
}

} // namespace mvir
