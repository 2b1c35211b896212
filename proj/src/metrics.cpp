#include "mvir/metrics.h"

#include <cmath>

namespace mvir {

namespace {

std::vector<Vec3> visible_points(const TriangleMesh& mesh, const std::vector<View>& views,
                                 const std::vector<MaskImage>& masks, int stride, Exec exec) {
    std::vector<std::vector<Vec3>> per_view(views.size());
    parallel_for(static_cast<int>(views.size()), exec, [&](int vi) {
        const View& v = views[vi];
        Vec3 o = v.camera_center_world();
        for (int y = 0; y < masks[vi].height; y += stride)
            for (int x = 0; x < masks[vi].width; x += stride) {
                if (!masks[vi].at(x, y))
                    continue;
                Vec3 d = v.pixel_ray_world(x, y);
                double t = ray_mesh_hit(mesh, o, d);
                if (t > 0)
                    per_view[vi].push_back(o + d * t);
            }
    });
    std::vector<Vec3> pts;
    for (const auto& p : per_view)
        pts.insert(pts.end(), p.begin(), p.end());
    return pts;
}

double directed_mean_nn(const std::vector<Vec3>& from, const std::vector<Vec3>& to, Exec exec) {
    std::vector<double> d(from.size());
    parallel_for(static_cast<int>(from.size()), exec, [&](int i) {
        double best = 1e30;
        for (const auto& q : to) {
            double dd = dot(from[i] - q, from[i] - q);
            best = std::min(best, dd);
        }
        d[i] = std::sqrt(best);
    });
    double s = 0;
    for (double x : d)
        s += x;
    return s / from.size();
}

} // namespace

double chamfer_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b, Exec exec) {
    check(!a.empty() && !b.empty(), "chamfer needs non-empty point sets");
    return directed_mean_nn(a, b, exec) + directed_mean_nn(b, a, exec);
}

double chamfer_visible(const TriangleMesh& a, const TriangleMesh& b,
                       const std::vector<View>& views, const std::vector<MaskImage>& masks,
                       int stride, Exec exec) {
    check(views.size() == masks.size(), "views/masks size mismatch");
    auto pa = visible_points(a, views, masks, stride, exec);
    auto pb = visible_points(b, views, masks, stride, exec);
    check(!pa.empty(), "no visible points on the first mesh");
    check(!pb.empty(), "no visible points on the second mesh");
    return chamfer_points(pa, pb, exec);
}

double normal_mae_deg(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    check(a.size() == b.size() && !a.empty(), "normal sets must match and be non-empty");
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += std::acos(std::clamp(dot(a[i], b[i]), -1.0, 1.0));
    return acc / a.size() * 180.0 / M_PI;
}

double psnr_db(const Image& a, const Image& b, const MaskImage& mask) {
    check(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "image dimensions differ");
    check(a.width == mask.width && a.height == mask.height, "mask dimensions differ");
    double mse = 0;
    size_t n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (!mask.at(x, y))
                continue;
            for (int c = 0; c < a.channels; ++c) {
                double va = std::clamp(a.at(x, y, c), 0.0, 1.0);
                double vb = std::clamp(b.at(x, y, c), 0.0, 1.0);
                mse += (va - vb) * (va - vb);
                ++n;
            }
        }
    check(n > 0, "empty mask in psnr");
    mse /= n;
    if (mse <= 0)
        return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

SiMse si_mse(const std::vector<double>& est, const std::vector<double>& gt) {
    check(est.size() == gt.size() && !est.empty(), "intensity lists must match");
    double num = 0, den = 0;
    for (size_t i = 0; i < est.size(); ++i) {
        check(gt[i] > 0, "ground-truth intensities must be positive");
        num += est[i] * gt[i];
        den += est[i] * est[i];
    }
    check(den > 0, "all estimated intensities are zero");
    SiMse out;
    out.scale = num / den;
    double acc = 0;
    for (size_t i = 0; i < est.size(); ++i)
        acc += std::abs(out.scale * est[i] - gt[i]) / gt[i];
    out.error = acc / est.size();
    return out;
}

double light_mae_deg(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
    return normal_mae_deg(est, gt);
}

} // namespace mvir
