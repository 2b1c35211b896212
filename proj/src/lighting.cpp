#include "mvir/lighting.h"

#include <cmath>

namespace mvir {

void View::validate_rotation(double tol) const {
    Mat3 RtR = R.transposed() * R;
    Mat3 I = Mat3::identity();
    for (int i = 0; i < 9; ++i)
        check(std::abs(RtR.m[i] - I.m[i]) < tol, "camera rotation is not orthonormal");
    check(std::abs(R.det() - 1.0) < tol, "camera rotation has det != +1");
}

LightRig::LightRig(ParamStore& store, int n_lights, double lr) : n_lights_(n_lights) {
    check(n_lights >= 1, "light rig needs at least one light");
    dirs_offset_ = store.add_group("light-dirs", static_cast<size_t>(n_lights) * 3, lr, 0.0);
    logint_offset_ =
        store.add_group("light-log-intensity", static_cast<size_t>(n_lights) * 3, lr, 0.0);
    for (int j = 0; j < n_lights; ++j) {
        store.values[dirs_offset_ + 3 * j + 0] = 0.0;
        store.values[dirs_offset_ + 3 * j + 1] = 0.0;
        store.values[dirs_offset_ + 3 * j + 2] = -1.0;
        // log intensities start at 0 => unit intensity
    }
}

Vec3 LightRig::direction_cam(const ParamStore& store, int j) const {
    check(j >= 0 && j < n_lights_, "light index ", j, " out of range");
    const double* d = store.values.data() + dirs_offset_ + 3 * j;
    Vec3 v{d[0], d[1], d[2]};
    return v / (norm(v) + 1e-12);
}

Vec3 LightRig::intensity(const ParamStore& store, int j) const {
    check(j >= 0 && j < n_lights_, "light index ", j, " out of range");
    const double* e = store.values.data() + logint_offset_ + 3 * j;
    return {std::exp(e[0]), std::exp(e[1]), std::exp(e[2])};
}

Vec3 LightRig::world_direction(const ParamStore& store, int j, const View& view) const {
    return view.cam_to_world() * direction_cam(store, j);
}

V LightRig::world_direction_graph(Tape& t, int j, const View& view) const {
    check(j >= 0 && j < n_lights_, "light index ", j, " out of range");
    V raw = t.param(dirs_offset_ + 3 * j, 1, 3);
    V unit = t.normalize_rows(raw);
    // Row vector times R_c2w^T: world = R_c2w * dir.
    Mat R(3, 3);
    Mat3 c2w = view.cam_to_world();
    for (int i = 0; i < 9; ++i)
        R.a[i] = c2w.m[i];
    return t.matmul_nt(unit, t.constant(R));
}

V LightRig::intensity_graph(Tape& t, int j) const {
    check(j >= 0 && j < n_lights_, "light index ", j, " out of range");
    return t.vexp(t.param(logint_offset_ + 3 * j, 1, 3));
}

} // namespace mvir
