#include "mvir/synth.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mvir/mesh.h"

namespace mvir {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double prim_sdf(const SynthPrimitive& p, const Vec3& x) {
    switch (p.kind) {
    case SynthPrimitive::Kind::sphere:
        return norm(x - p.a) - p.radius;
    case SynthPrimitive::Kind::capsule: {
        Vec3 ab = p.b - p.a;
        double t = std::clamp(dot(x - p.a, ab) / std::max(dot(ab, ab), 1e-30), 0.0, 1.0);
        return norm(x - (p.a + ab * t)) - p.radius;
    }
    }
    return 1e30;
}

Vec3 prim_grad(const SynthPrimitive& p, const Vec3& x) {
    switch (p.kind) {
    case SynthPrimitive::Kind::sphere:
        return normalized(x - p.a);
    case SynthPrimitive::Kind::capsule: {
        Vec3 ab = p.b - p.a;
        double t = std::clamp(dot(x - p.a, ab) / std::max(dot(ab, ab), 1e-30), 0.0, 1.0);
        return normalized(x - (p.a + ab * t));
    }
    }
    return {0, 0, 1};
}

int nearest_prim(const SynthSpec& spec, const Vec3& x) {
    int best = 0;
    double bd = 1e30;
    for (size_t i = 0; i < spec.primitives.size(); ++i) {
        double d = prim_sdf(spec.primitives[i], x);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

double bounding_radius(const SynthSpec& spec) {
    double r = 0;
    for (const auto& p : spec.primitives) {
        r = std::max(r, norm(p.a) + p.radius);
        if (p.kind == SynthPrimitive::Kind::capsule)
            r = std::max(r, norm(p.b) + p.radius);
    }
    return r + 0.05;
}

} // namespace

double synth_sdf(const SynthSpec& spec, const Vec3& p) {
    check(!spec.primitives.empty(), "synthetic scene has no primitives");
    if (spec.smooth_k > 0) {
        // exponential smooth min
        double k = spec.smooth_k;
        double acc = 0;
        for (const auto& prim : spec.primitives)
            acc += std::exp(-k * prim_sdf(prim, p));
        return -std::log(acc) / k;
    }
    double d = 1e30;
    for (const auto& prim : spec.primitives)
        d = std::min(d, prim_sdf(prim, p));
    return d;
}

Vec3 synth_sdf_gradient(const SynthSpec& spec, const Vec3& p) {
    if (spec.smooth_k > 0) {
        double k = spec.smooth_k;
        double wsum = 0;
        Vec3 g{0, 0, 0};
        for (const auto& prim : spec.primitives) {
            double w = std::exp(-k * prim_sdf(prim, p));
            wsum += w;
            g += prim_grad(prim, p) * w;
        }
        return normalized(g / std::max(wsum, 1e-300));
    }
    return prim_grad(spec.primitives[nearest_prim(spec, p)], p);
}

double synth_trace(const SynthSpec& spec, const Vec3& o, const Vec3& d) {
    double rb = bounding_radius(spec);
    // clip to the bounding sphere
    double b = dot(o, d);
    double c = dot(o, o) - rb * rb;
    double disc = b * b - c;
    if (disc <= 0)
        return -1.0;
    double t = std::max(0.0, -b - std::sqrt(disc));
    double t_end = -b + std::sqrt(disc);
    for (int it = 0; it < 512 && t < t_end; ++it) {
        double dist = synth_sdf(spec, o + d * t);
        if (dist < 1e-7)
            return t;
        t += dist;
    }
    return -1.0;
}

bool synth_visible(const SynthSpec& spec, const Vec3& x, const Vec3& n, const Vec3& l) {
    Vec3 o = x + n * 1e-4;
    return synth_trace(spec, o, l) < 0.0;
}

Vec3 synth_shade(const SynthSpec& spec, const Vec3& x, const Vec3& n, const Vec3& v,
                 const Vec3& l, const Vec3& intensity) {
    double ndl = std::max(dot(n, l), 0.0);
    if (ndl <= 0)
        return {0, 0, 0};
    if (!synth_visible(spec, x, n, l))
        return {0, 0, 0};
    const SynthBrdf& m = spec.primitives[nearest_prim(spec, x)].brdf;
    Vec3 f = m.rho / M_PI;
    if (m.ks > 0) {
        Vec3 r = n * (2.0 * dot(n, l)) - l;
        double spec_lobe = std::pow(std::max(dot(r, v), 0.0), m.exponent);
        f += Vec3{m.ks, m.ks, m.ks} * spec_lobe;
    }
    return {intensity.x * f.x * ndl, intensity.y * f.y * ndl, intensity.z * f.z * ndl};
}

View synth_camera(const SynthSpec& spec, const SynthRing& ring, int view_idx) {
    double az = (ring.azimuth0_deg + 360.0 * view_idx / ring.n_views) * M_PI / 180.0;
    double el = ring.elevation_deg * M_PI / 180.0;
    Vec3 pos = spec.lookat + Vec3{std::cos(el) * std::cos(az), std::sin(el),
                                  std::cos(el) * std::sin(az)} *
                                 ring.distance;
    // camera looks at `lookat`: z forward, y down, x right
    Vec3 fwd = normalized(spec.lookat - pos);
    Vec3 world_up{0, 1, 0};
    Vec3 right = normalized(cross(fwd, world_up));
    if (norm(cross(fwd, world_up)) < 1e-6)
        right = Vec3{1, 0, 0};
    Vec3 down = cross(fwd, right);

    View v;
    v.R.m = {right.x, right.y, right.z, down.x, down.y, down.z, fwd.x, fwd.y, fwd.z};
    v.t = -(v.R * pos);
    double cx = (spec.width - 1) * 0.5, cy = (spec.height - 1) * 0.5;
    v.K.m = {spec.focal, 0, cx, 0, spec.focal, cy, 0, 0, 1};
    v.width = spec.width;
    v.height = spec.height;
    return v;
}

namespace {

Vec3 parse_vec3(const json& j) {
    check(j.is_array() && j.size() == 3, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

SynthRing parse_ring(const json& j) {
    SynthRing r;
    r.n_views = j.at("views").get<int>();
    r.elevation_deg = j.value("elevation", 15.0);
    r.azimuth0_deg = j.value("azimuth0", 0.0);
    r.distance = j.value("distance", 2.8);
    if (j.contains("lights"))
        for (const auto& li : j.at("lights"))
            r.lights.push_back(li.get<int>());
    return r;
}

struct RenderedView {
    View view;
    Image image;
    MaskImage mask;
    Image normals; // world space
};

RenderedView render_view(const SynthSpec& spec, const View& cam, const Vec3& light_cam,
                         const Vec3& intensity) {
    RenderedView out;
    out.view = cam;
    out.image = Image(spec.width, spec.height, 3);
    out.mask = MaskImage(spec.width, spec.height);
    out.normals = Image(spec.width, spec.height, 3);
    Vec3 o = cam.camera_center_world();
    Vec3 l_world = cam.cam_to_world() * light_cam;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            Vec3 d = cam.pixel_ray_world(x, y);
            double t = synth_trace(spec, o, d);
            if (t < 0)
                continue;
            Vec3 hit = o + d * t;
            Vec3 n = synth_sdf_gradient(spec, hit);
            Vec3 c = synth_shade(spec, hit, n, -d, l_world, intensity);
            out.mask.set(x, y, true);
            for (int ch = 0; ch < 3; ++ch)
                out.image.at(x, y, ch) = c[ch];
            out.normals.at(x, y, 0) = n.x;
            out.normals.at(x, y, 1) = n.y;
            out.normals.at(x, y, 2) = n.z;
        }
    return out;
}

json view_json(const View& v, int light, const std::string& image_rel,
               const std::string& mask_rel) {
    json j;
    j["K"] = std::vector<double>(v.K.m.begin(), v.K.m.end());
    j["R"] = std::vector<double>(v.R.m.begin(), v.R.m.end());
    j["t"] = {v.t.x, v.t.y, v.t.z};
    j["light"] = light;
    j["image"] = image_rel;
    j["mask"] = mask_rel;
    return j;
}

json lights_json(const std::vector<Vec3>& dirs, const std::vector<Vec3>& ints) {
    json j;
    j["directions"] = json::array();
    j["intensities"] = json::array();
    for (const auto& d : dirs)
        j["directions"].push_back({d.x, d.y, d.z});
    for (const auto& e : ints)
        j["intensities"].push_back({e.x, e.y, e.z});
    return j;
}

} // namespace

SynthSpec parse_synth_spec(const std::string& json_path) {
    std::ifstream f(json_path);
    check(f.good(), "cannot open scene spec '", json_path, "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("cannot parse scene spec '", json_path, "': ", e.what());
    }

    SynthSpec spec;
    spec.width = j.value("width", 64);
    spec.height = j.value("height", 64);
    spec.focal = j.value("focal", 100.0);
    spec.smooth_k = j.value("smooth_k", 0.0);
    if (j.contains("lookat"))
        spec.lookat = parse_vec3(j.at("lookat"));
    spec.gt_mesh_resolution = j.value("gt_mesh_resolution", 128);

    check(j.contains("primitives"), "scene spec: missing 'primitives'");
    for (const auto& jp : j.at("primitives")) {
        SynthPrimitive p;
        std::string type = jp.at("type").get<std::string>();
        if (type == "sphere") {
            p.kind = SynthPrimitive::Kind::sphere;
            p.a = parse_vec3(jp.at("center"));
        } else if (type == "capsule") {
            p.kind = SynthPrimitive::Kind::capsule;
            p.a = parse_vec3(jp.at("a"));
            p.b = parse_vec3(jp.at("b"));
        } else {
            fail("scene spec: unknown primitive type '", type, "'");
        }
        p.radius = jp.at("radius").get<double>();
        if (jp.contains("brdf")) {
            const auto& jb = jp.at("brdf");
            if (jb.contains("rho"))
                p.brdf.rho = parse_vec3(jb.at("rho"));
            p.brdf.ks = jb.value("ks", 0.0);
            p.brdf.exponent = jb.value("exponent", 32.0);
        }
        spec.primitives.push_back(p);
    }

    check(j.contains("lights"), "scene spec: missing 'lights'");
    for (const auto& jl : j.at("lights")) {
        spec.light_dirs_cam.push_back(normalized(parse_vec3(jl.at("dir"))));
        Vec3 e{1, 1, 1};
        if (jl.contains("intensity")) {
            if (jl.at("intensity").is_number()) {
                double s = jl.at("intensity").get<double>();
                e = {s, s, s};
            } else {
                e = parse_vec3(jl.at("intensity"));
            }
        }
        spec.light_intensities.push_back(e);
    }

    check(j.contains("rings"), "scene spec: missing 'rings'");
    for (const auto& jr : j.at("rings")) {
        SynthRing r = parse_ring(jr);
        check(!r.lights.empty(), "scene spec: ring without lights");
        for (int li : r.lights)
            check(li >= 0 && li < static_cast<int>(spec.light_dirs_cam.size()),
                  "scene spec: ring references light ", li, " out of range");
        spec.rings.push_back(r);
    }

    if (j.contains("test")) {
        const auto& jt = j.at("test");
        for (const auto& jl : jt.at("lights")) {
            spec.test_light_dirs.push_back(normalized(parse_vec3(jl.at("dir"))));
            Vec3 e{1, 1, 1};
            if (jl.contains("intensity")) {
                if (jl.at("intensity").is_number()) {
                    double s = jl.at("intensity").get<double>();
                    e = {s, s, s};
                } else {
                    e = parse_vec3(jl.at("intensity"));
                }
            }
            spec.test_light_intensities.push_back(e);
        }
        for (const auto& jr : jt.at("rings")) {
            SynthRing r = parse_ring(jr);
            check(!r.lights.empty(), "scene spec: test ring without lights");
            for (int li : r.lights)
                check(li >= 0 && li < static_cast<int>(spec.test_light_dirs.size()),
                      "scene spec: test ring references light ", li, " out of range");
            spec.test_rings.push_back(r);
        }
    }
    return spec;
}

void synth_scene(const SynthSpec& spec, const std::string& out_dir, Exec exec) {
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");
    fs::create_directories(fs::path(out_dir) / "normals");

    struct Job {
        View cam;
        int light;
        bool test;
        int index;
    };
    std::vector<Job> jobs;
    for (const auto& ring : spec.rings)
        for (int vi = 0; vi < ring.n_views; ++vi) {
            View cam = synth_camera(spec, ring, vi);
            for (int li : ring.lights)
                jobs.push_back({cam, li, false, 0});
        }
    for (const auto& ring : spec.test_rings)
        for (int vi = 0; vi < ring.n_views; ++vi) {
            View cam = synth_camera(spec, ring, vi);
            for (int li : ring.lights)
                jobs.push_back({cam, li, true, 0});
        }
    int n_train = 0, n_test = 0;
    for (auto& jb : jobs)
        jb.index = jb.test ? n_test++ : n_train++;

    std::vector<RenderedView> rendered(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), exec, [&](int i) {
        const Job& jb = jobs[i];
        const Vec3& dir =
            jb.test ? spec.test_light_dirs[jb.light] : spec.light_dirs_cam[jb.light];
        const Vec3& e = jb.test ? spec.test_light_intensities[jb.light]
                                : spec.light_intensities[jb.light];
        rendered[i] = render_view(spec, jb.cam, dir, e);
    });

    json scene;
    scene["lights"] = static_cast<int>(spec.light_dirs_cam.size());
    scene["views"] = json::array();
    scene["test_views"] = json::array();
    scene["gt_normals"] = json::array();
    char name[64];
    for (size_t i = 0; i < jobs.size(); ++i) {
        const Job& jb = jobs[i];
        const char* prefix = jb.test ? "test" : "view";
        std::snprintf(name, sizeof(name), "%s_%03d", prefix, jb.index);
        std::string img_rel = strf("images/", name, ".pfm");
        std::string mask_rel = strf("masks/", name, ".png");
        write_pfm((fs::path(out_dir) / img_rel).string(), rendered[i].image);
        write_mask_png((fs::path(out_dir) / mask_rel).string(), rendered[i].mask);
        json jv = view_json(jobs[i].cam, jb.light, img_rel, mask_rel);
        if (jb.test) {
            scene["test_views"].push_back(jv);
        } else {
            std::string nrm_rel = strf("normals/", name, ".pfm");
            write_pfm((fs::path(out_dir) / nrm_rel).string(), rendered[i].normals);
            scene["views"].push_back(jv);
            scene["gt_normals"].push_back(nrm_rel);
        }
    }

    scene["gt_lights"] = lights_json(spec.light_dirs_cam, spec.light_intensities);
    if (!spec.test_light_dirs.empty())
        scene["gt_test_lights"] = lights_json(spec.test_light_dirs, spec.test_light_intensities);

    // Ground-truth mesh from the analytic SDF (world space; the scene is
    // built inside the unit cube).
    TriangleMesh mesh = marching_cubes(
        [&](const double* pts, int n, double* out) {
            for (int i = 0; i < n; ++i)
                out[i] = synth_sdf(spec, {pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]});
        },
        spec.gt_mesh_resolution, exec);
    write_obj((fs::path(out_dir) / "gt_mesh.obj").string(), mesh);
    scene["gt_mesh"] = "gt_mesh.obj";

    std::ofstream sf(fs::path(out_dir) / "scene.json");
    sf << scene.dump(1);
    check(sf.good(), "failed writing scene.json");
}

} // namespace mvir
