#include "mvir/scene.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mvir {

namespace fs = std::filesystem;
using nlohmann::json;

CenterRay center_of_mass_ray(const View& view, const MaskImage& mask) {
    double sx = 0, sy = 0;
    size_t n = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
    check(n > 0, "view has an empty foreground mask");
    CenterRay r;
    r.origin = view.camera_center_world();
    r.dir = view.pixel_ray_world(sx / n, sy / n);
    return r;
}

Vec3 estimate_translation(const std::vector<View>& views, const std::vector<MaskImage>& masks) {
    check(views.size() == masks.size(), "views/masks size mismatch");
    check(!views.empty(), "no views");
    Mat3 V{};
    Vec3 b{0, 0, 0};
    for (size_t i = 0; i < views.size(); ++i) {
        CenterRay r = center_of_mass_ray(views[i], masks[i]);
        // V_i = I - v v^T
        Mat3 Vi;
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c)
                Vi(a, c) = (a == c ? 1.0 : 0.0) - r.dir[a] * r.dir[c];
        for (int k = 0; k < 9; ++k)
            V.m[k] += Vi.m[k];
        b += Vi * r.origin;
    }
    if (std::abs(V.det()) < 1e-9)
        fail("degenerate camera configuration: center-of-mass rays do not constrain a point");
    return solve3(V, b);
}

double estimate_scale(const std::vector<View>& views, const std::vector<MaskImage>& masks,
                      const Vec3& translation, double k) {
    check(views.size() == masks.size(), "views/masks size mismatch");
    double area_sum = 0, ratio_sum = 0;
    for (size_t i = 0; i < views.size(); ++i) {
        const View& v = views[i];
        double z = (v.R * translation + v.t).z;
        check(z > 0, "object behind camera in view ", i, " (z=", z, ")");
        double f = 0.5 * (v.K(0, 0) + v.K(1, 1));
        area_sum += static_cast<double>(masks[i].count());
        ratio_sum += f * f / (z * z);
    }
    check(area_sum > 0, "all foreground masks are empty");
    return std::sqrt(k * area_sum / (M_PI * ratio_sum));
}

std::vector<double> enclosure_margins(const std::vector<View>& views,
                                      const std::vector<MaskImage>& masks,
                                      const SceneTransform& transform) {
    std::vector<double> margins;
    for (size_t i = 0; i < views.size(); ++i) {
        const View& v = views[i];
        Vec3 o = v.camera_center_world();
        double worst = transform.scale;
        for (int y = 0; y < masks[i].height; ++y)
            for (int x = 0; x < masks[i].width; ++x) {
                if (!masks[i].at(x, y))
                    continue;
                Vec3 d = v.pixel_ray_world(x, y);
                Vec3 rel = transform.translation - o;
                Vec3 perp = rel - d * dot(rel, d);
                worst = std::min(worst, transform.scale - norm(perp));
            }
        margins.push_back(worst);
    }
    return margins;
}

SceneTransform normalize_scene(const std::vector<View>& views,
                               const std::vector<MaskImage>& masks, double k) {
    SceneTransform t;
    t.translation = estimate_translation(views, masks);
    t.scale = estimate_scale(views, masks, t.translation, k);
    return t;
}

namespace {

Vec3 parse_vec3(const json& j) {
    check(j.is_array() && j.size() == 3, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Mat3 parse_mat3(const json& j) {
    check(j.is_array() && j.size() == 9, "expected 9 row-major reals");
    Mat3 m;
    for (int i = 0; i < 9; ++i)
        m.m[i] = j[i].get<double>();
    return m;
}

GtLights parse_lights(const json& j) {
    GtLights g;
    for (const auto& d : j.at("directions"))
        g.directions.push_back(normalized(parse_vec3(d)));
    if (j.contains("intensities")) {
        for (const auto& e : j.at("intensities")) {
            if (e.is_number())
                g.intensities.push_back({e.get<double>(), e.get<double>(), e.get<double>()});
            else
                g.intensities.push_back(parse_vec3(e));
        }
    } else {
        g.intensities.assign(g.directions.size(), {1, 1, 1});
    }
    check(g.directions.size() == g.intensities.size(), "lights: direction/intensity mismatch");
    return g;
}

View parse_view(const json& j, int n_lights, const std::string& root) {
    View v;
    v.K = parse_mat3(j.at("K"));
    v.R = parse_mat3(j.at("R"));
    v.t = parse_vec3(j.at("t"));
    v.light = j.at("light").get<int>();
    check(v.light >= 0 && v.light < n_lights, "light index ", v.light, " out of range [0,",
          n_lights, ")");
    v.image_path = (fs::path(root) / j.at("image").get<std::string>()).string();
    v.mask_path = (fs::path(root) / j.at("mask").get<std::string>()).string();
    v.validate_rotation();
    return v;
}

void load_view_images(const std::string& dir, std::vector<View>& views, bool linearized,
                      std::vector<Image>& images, std::vector<MaskImage>& masks, Exec exec) {
    images.resize(views.size());
    masks.resize(views.size());
    parallel_for(static_cast<int>(views.size()), exec, [&](int i) {
        View& v = views[i];
        check(fs::exists(v.image_path), "missing image '", v.image_path, "'");
        check(fs::exists(v.mask_path), "missing mask '", v.mask_path, "'");
        if (v.image_path.size() > 4 &&
            v.image_path.substr(v.image_path.size() - 4) == ".pfm")
            images[i] = read_pfm(v.image_path);
        else
            images[i] = read_png(v.image_path, linearized);
        masks[i] = read_mask_png(v.mask_path);
        check(images[i].width == masks[i].width && images[i].height == masks[i].height,
              "image/mask dimensions differ for '", v.image_path, "'");
        v.width = images[i].width;
        v.height = images[i].height;
    });
    (void)dir;
}

} // namespace

Dataset load_dataset(const std::string& dir, Exec exec) {
    fs::path root(dir);
    fs::path scene_file = root / "scene.json";
    check(fs::exists(scene_file), "missing '", scene_file.string(), "'");
    std::ifstream f(scene_file);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("cannot parse '", scene_file.string(), "': ", e.what());
    }

    Dataset ds;
    ds.root = dir;
    ds.n_lights = j.at("lights").get<int>();
    check(ds.n_lights >= 1, "dataset must declare at least one light");
    bool linearized = j.value("linearized", true);

    for (const auto& jv : j.at("views"))
        ds.views.push_back(parse_view(jv, ds.n_lights, dir));
    check(!ds.views.empty(), "dataset has no views");
    load_view_images(dir, ds.views, linearized, ds.images, ds.masks, exec);

    if (j.contains("gt_lights")) {
        ds.gt_lights = parse_lights(j.at("gt_lights"));
        check(static_cast<int>(ds.gt_lights->directions.size()) == ds.n_lights,
              "gt_lights count differs from the declared light count");
    }
    if (j.contains("gt_mesh"))
        ds.gt_mesh_path = (root / j.at("gt_mesh").get<std::string>()).string();
    if (j.contains("gt_normals"))
        for (const auto& p : j.at("gt_normals"))
            ds.gt_normal_paths.push_back((root / p.get<std::string>()).string());

    if (j.contains("test_views")) {
        int n_test_lights = ds.n_lights;
        if (j.contains("gt_test_lights")) {
            ds.gt_test_lights = parse_lights(j.at("gt_test_lights"));
            n_test_lights = static_cast<int>(ds.gt_test_lights->directions.size());
        }
        for (const auto& jv : j.at("test_views"))
            ds.test_views.push_back(parse_view(jv, n_test_lights, dir));
        load_view_images(dir, ds.test_views, linearized, ds.test_images, ds.test_masks, exec);
    }

    ds.transform = normalize_scene(ds.views, ds.masks);
    return ds;
}

} // namespace mvir
