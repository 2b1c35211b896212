#pragma once

#include <string>

#include "mvir/array.h"

namespace mvir {

// Global scale/translation mapping object coordinates (unit-sphere centered)
// to world coordinates: x_world = s * x_object + d. Directions are unaffected.
struct SceneTransform {
    double scale = 1.0;
    Vec3 translation{0, 0, 0};

    Vec3 to_object(const Vec3& w) const { return (w - translation) / scale; }
    Vec3 to_world(const Vec3& o) const { return o * scale + translation; }
};

// One captured view: pinhole intrinsics, world-to-camera extrinsics, and the
// index of the light active in its image.
struct View {
    Mat3 K;       // 3x3 intrinsics
    Mat3 R;       // world-to-camera rotation
    Vec3 t;       // world-to-camera translation
    int light = 0;
    std::string image_path;
    std::string mask_path;
    int width = 0, height = 0;

    Vec3 camera_center_world() const { return -(R.transposed() * t); }
    Mat3 cam_to_world() const { return R.transposed(); }

    // Unit world-space direction of the ray through pixel (u, v).
    Vec3 pixel_ray_world(double u, double v) const {
        double fx = K(0, 0), fy = K(1, 1), cx = K(0, 2), cy = K(1, 2), skew = K(0, 1);
        double yc = (v - cy) / fy;
        double xc = (u - cx - skew * yc) / fx;
        return normalized(R.transposed() * Vec3{xc, yc, 1.0});
    }

    // Checks R in SO(3) within tol; throws otherwise.
    void validate_rotation(double tol = 1e-6) const;
};

} // namespace mvir
