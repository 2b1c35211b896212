#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.h"
#include "mvir/scene.h"
#include "mvir/synth.h"

using namespace mvir;

namespace {

// View whose center-of-mass ray is exactly (origin o, direction d): a
// synthetic one-pixel mask at the principal point.
View ray_view(const Vec3& o, const Vec3& d) {
    // build any rotation taking camera z to d
    Vec3 up = std::abs(d.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
    Vec3 right = normalized(cross(d, up));
    Vec3 down = cross(d, right);
    View v;
    v.R.m = {right.x, right.y, right.z, down.x, down.y, down.z, d.x, d.y, d.z};
    v.t = -(v.R * o);
    v.K.m = {100, 0, 3, 0, 100, 3, 0, 0, 1};
    v.width = 7;
    v.height = 7;
    return v;
}

MaskImage center_pixel_mask() {
    MaskImage m(7, 7);
    m.set(3, 3, true);
    return m;
}

SynthSpec simple_sphere_spec() {
    SynthSpec spec;
    SynthPrimitive p;
    p.kind = SynthPrimitive::Kind::sphere;
    p.a = {0.05, -0.02, 0.08};
    p.radius = 0.5;
    p.brdf.rho = {0.8, 0.55, 0.35};
    spec.primitives.push_back(p);
    spec.light_dirs_cam = {normalized(Vec3{0.3, 0.1, -0.95}), Vec3{0, 0, -1}};
    spec.light_intensities = {{1.2, 1.2, 1.2}, {0.8, 0.8, 0.8}};
    SynthRing ring;
    ring.n_views = 6;
    ring.elevation_deg = 12;
    ring.distance = 2.8;
    ring.lights = {0, 1};
    spec.rings = {ring};
    spec.focal = 90;
    spec.gt_mesh_resolution = 96;
    return spec;
}

} // namespace

TEST_CASE("translation estimation recovers ray intersection points") {
    SUBCASE("two orthogonal rays through the origin") {
        std::vector<View> views = {ray_view({-2, 0, 0}, {1, 0, 0}),
                                   ray_view({0, -3, 0}, {0, 1, 0})};
        std::vector<MaskImage> masks = {center_pixel_mask(), center_pixel_mask()};
        Vec3 d = estimate_translation(views, masks);
        CHECK(norm(d) < 1e-9);
    }

    SUBCASE("three random rays constructed through p = [1,2,3]") {
        Vec3 p{1, 2, 3};
        Rng rng(5);
        std::vector<View> views;
        std::vector<MaskImage> masks;
        for (int i = 0; i < 3; ++i) {
            Vec3 dir = rng.unit_vector();
            views.push_back(ray_view(p - dir * rng.uniform(2.0, 4.0), dir));
            masks.push_back(center_pixel_mask());
        }
        Vec3 d = estimate_translation(views, masks);
        CHECK(norm(d - p) < 1e-6);
    }

    SUBCASE("a single view is rank deficient") {
        std::vector<View> views = {ray_view({0, 0, 3}, {0, 0, -1})};
        std::vector<MaskImage> masks = {center_pixel_mask()};
        CHECK_THROWS_WITH_AS(estimate_translation(views, masks),
                             doctest::Contains("degenerate camera configuration"), Error);
    }
}

TEST_CASE("scale estimation closed form") {
    SUBCASE("worked single-view example") {
        // f = 1000 px, z = 4, foreground = radius-50 disk (area 7853.98 px^2),
        // k = 5 -> s = sqrt(0.2) ~ 0.4472
        View v = ray_view({0, 0, -4}, {0, 0, 1});
        v.K.m = {1000, 0, 100, 0, 1000, 100, 0, 0, 1};
        MaskImage m(201, 201);
        for (int y = 0; y < 201; ++y)
            for (int x = 0; x < 201; ++x)
                if ((x - 100.0) * (x - 100.0) + (y - 100.0) * (y - 100.0) <= 50.0 * 50.0)
                    m.set(x, y, true);
        // use the exact disk area rather than the rasterized count for the
        // closed-form check: patch the count by scaling k accordingly
        double area_exact = M_PI * 50.0 * 50.0;
        double k_adj = 5.0 * area_exact / static_cast<double>(m.count());
        double s = estimate_scale({v}, {m}, {0, 0, 0}, k_adj);
        CHECK(s == doctest::Approx(std::sqrt(0.2)).epsilon(1e-9));
    }

    SUBCASE("doubling all foreground areas scales s by sqrt(2)") {
        View v = ray_view({0, 0, -4}, {0, 0, 1});
        MaskImage m1(100, 100), m2(100, 100);
        for (int i = 0; i < 40; ++i)
            m1.set(10 + i % 8, 10 + i / 8, true);
        for (int i = 0; i < 80; ++i)
            m2.set(10 + i % 16, 10 + i / 16, true);
        double s1 = estimate_scale({v}, {m1}, {0, 0, 0});
        double s2 = estimate_scale({v}, {m2}, {0, 0, 0});
        CHECK(s2 / s1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }

    SUBCASE("object behind the camera is rejected") {
        View v = ray_view({0, 0, -4}, {0, 0, 1});
        MaskImage m = center_pixel_mask();
        m.width = m.height = 7;
        CHECK_THROWS_WITH_AS(estimate_scale({v}, {m}, {0, 0, -10}),
                             doctest::Contains("behind camera"), Error);
    }
}

TEST_CASE("object/world transforms") {
    SceneTransform t;
    t.scale = 2.0;
    t.translation = {1, 0, 0};
    Vec3 w{3, 0, 0};
    Vec3 o = t.to_object(w);
    CHECK(o.x == doctest::Approx(1.0));
    CHECK(norm(t.to_world(o) - w) < 1e-12);

    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        Vec3 p{rng.normal(), rng.normal(), rng.normal()};
        Vec3 back = t.to_world(t.to_object(p));
        CHECK(norm(back - p) < 1e-12);
    }
}

TEST_CASE("synthetic generator: shading oracle and dataset round trip") {
    SynthSpec spec = simple_sphere_spec();

    SUBCASE("head-on light peaks at the sphere center and matches the closed form") {
        View cam = synth_camera(spec, spec.rings[0], 0);
        Vec3 o = cam.camera_center_world();
        // brightest pixel when the light equals the view direction
        Vec3 l_cam{0, 0, -1};
        double best = -1;
        Vec3 best_px{0, 0, 0};
        int bx = -1, by = -1;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                Vec3 d = cam.pixel_ray_world(x, y);
                double t = synth_trace(spec, o, d);
                if (t < 0)
                    continue;
                Vec3 hit = o + d * t;
                Vec3 n = synth_sdf_gradient(spec, hit);
                Vec3 c = synth_shade(spec, hit, n, -d, cam.cam_to_world() * l_cam, {1, 1, 1});
                if (c.x > best) {
                    best = c.x;
                    bx = x;
                    by = y;
                    best_px = c;
                }
            }
        REQUIRE(best > 0);
        // the sphere center projects near the principal point for this rig
        Vec3 center_dir = normalized(spec.primitives[0].a - o);
        Vec3 px_dir = cam.pixel_ray_world(bx, by);
        CHECK(std::acos(std::clamp(dot(center_dir, px_dir), -1.0, 1.0)) < 0.1);
        // energy: e * rho/pi * (n.l) with n ~ l ~ view
        CHECK(best_px.x == doctest::Approx(0.8 / M_PI).epsilon(0.02));
    }

    SUBCASE("unshadowed Lambertian pixel equals e * rho/pi * (n.l)") {
        View cam = synth_camera(spec, spec.rings[0], 2);
        Vec3 o = cam.camera_center_world();
        Vec3 l = cam.cam_to_world() * spec.light_dirs_cam[0];
        Rng rng(31);
        int checked = 0;
        for (int tries = 0; tries < 500 && checked < 50; ++tries) {
            int x = static_cast<int>(rng.below(spec.width));
            int y = static_cast<int>(rng.below(spec.height));
            Vec3 d = cam.pixel_ray_world(x, y);
            double t = synth_trace(spec, o, d);
            if (t < 0)
                continue;
            Vec3 hit = o + d * t;
            Vec3 n = synth_sdf_gradient(spec, hit);
            if (dot(n, l) <= 0.05 || !synth_visible(spec, hit, n, l))
                continue;
            Vec3 c = synth_shade(spec, hit, n, -d, l, spec.light_intensities[0]);
            double expect = 1.2 * 0.8 / M_PI * dot(n, l);
            CHECK(c.x == doctest::Approx(expect).epsilon(1e-9));
            ++checked;
        }
        CHECK(checked > 10);
    }

    SUBCASE("two-sphere scene casts shadows that match a brute-force visibility oracle") {
        SynthSpec two = spec;
        SynthPrimitive occluder;
        occluder.kind = SynthPrimitive::Kind::sphere;
        occluder.a = {0.45, 0.0, 0.3};
        occluder.radius = 0.22;
        two.primitives.push_back(occluder);
        View cam = synth_camera(two, two.rings[0], 1);
        Vec3 o = cam.camera_center_world();
        // light behind the occluder as seen from the main sphere: guarantees
        // a cast shadow in view
        Vec3 l = normalized(occluder.a - two.primitives[0].a);
        int shadowed = 0, checked = 0;
        for (int y = 0; y < two.height; y += 2)
            for (int x = 0; x < two.width; x += 2) {
                Vec3 d = cam.pixel_ray_world(x, y);
                double t = synth_trace(two, o, d);
                if (t < 0)
                    continue;
                Vec3 hit = o + d * t;
                Vec3 n = synth_sdf_gradient(two, hit);
                Vec3 c = synth_shade(two, hit, n, -d, l, {1, 1, 1});
                // independent oracle: fine-stepped occlusion march
                bool lit_oracle = true;
                if (dot(n, l) > 0) {
                    Vec3 p = hit + n * 1e-4;
                    for (double tt = 1e-3; tt < 3.0; tt += 1e-3)
                        if (synth_sdf(two, p + l * tt) < 0) {
                            lit_oracle = false;
                            break;
                        }
                } else {
                    lit_oracle = false; // facing away counts as unlit
                }
                bool lit_render = c.x > 0;
                CHECK(lit_render == lit_oracle);
                shadowed += !lit_render;
                ++checked;
            }
        CHECK(checked > 50);
        CHECK(shadowed > 5); // the occluder must actually cast something
    }

    SUBCASE("synth -> load_dataset round trip with normalization") {
        namespace fs = std::filesystem;
        SynthSpec full = spec;
        full.test_light_dirs = {normalized(Vec3{0.2, 0.25, -0.94})};
        full.test_light_intensities = {{1, 1, 1}};
        SynthRing tr;
        tr.n_views = 2;
        tr.elevation_deg = 25;
        tr.distance = 2.8;
        tr.lights = {0};
        full.test_rings = {tr};
        std::string dir = (fs::temp_directory_path() / "mvir_synth_test").string();
        fs::remove_all(dir);
        synth_scene(full, dir, Exec::serial);

        Dataset ds = load_dataset(dir, Exec::serial);
        CHECK(ds.n_lights == 2);
        CHECK(ds.views.size() == 12);   // 6 poses x 2 lights
        CHECK(ds.test_views.size() == 2);
        REQUIRE(ds.gt_lights.has_value());
        CHECK(norm(ds.gt_lights->directions[0] - full.light_dirs_cam[0]) < 1e-9);
        CHECK(!ds.gt_mesh_path.empty());

        // normalization puts every foreground inside the projected unit sphere
        auto margins = enclosure_margins(ds.views, ds.masks, ds.transform);
        for (double m : margins)
            CHECK(m > 0.0);
        // sphere of radius .5 at k=5: the object-space radius is well under 1
        double r_obj = 0.5 / ds.transform.scale;
        CHECK(r_obj < 1.0);
        CHECK(r_obj > 0.2);
        // translation lands near the true center
        CHECK(norm(ds.transform.translation - full.primitives[0].a) < 0.05);

        // image IO round trip is lossless for PFM + masks
        Image img = read_pfm(ds.views[0].image_path);
        std::string copy = (fs::path(dir) / "copy.pfm").string();
        write_pfm(copy, img);
        Image img2 = read_pfm(copy);
        REQUIRE(img.px.size() == img2.px.size());
        for (size_t i = 0; i < img.px.size(); ++i)
            CHECK(img.px[i] == img2.px[i]);

        // rejects a corrupted rotation
        View bad = ds.views[0];
        bad.R.m[0] = 2.0;
        CHECK_THROWS_AS(bad.validate_rotation(), Error);
    }
}

TEST_CASE("PNG round trip and sRGB flag") {
    namespace fs = std::filesystem;
    Image img(8, 8, 3);
    Rng rng(77);
    for (auto& v : img.px)
        v = rng.uniform();
    std::string path = (fs::temp_directory_path() / "mvir_png_test.png").string();
    write_png(path, img, 16, /*to_srgb=*/false);
    Image back = read_png(path, /*linearize=*/false);
    REQUIRE(back.px.size() == img.px.size());
    for (size_t i = 0; i < img.px.size(); ++i)
        CHECK(back.px[i] == doctest::Approx(img.px[i]).epsilon(1e-4));

    // sRGB encode/decode round trip through 16-bit quantization
    write_png(path, img, 16, /*to_srgb=*/true);
    Image lin = read_png(path, /*linearize=*/true);
    for (size_t i = 0; i < img.px.size(); ++i)
        CHECK(lin.px[i] == doctest::Approx(img.px[i]).epsilon(2e-3));

    MaskImage m(5, 5);
    m.set(2, 3, true);
    m.set(0, 0, true);
    std::string mpath = (fs::temp_directory_path() / "mvir_mask_test.png").string();
    write_mask_png(mpath, m);
    MaskImage back_m = read_mask_png(mpath);
    CHECK(back_m.count() == 2);
    CHECK(back_m.at(2, 3));
    CHECK(back_m.at(0, 0));
}
