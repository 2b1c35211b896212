#include <doctest.h>

#include <cmath>
#include <memory>

#include "mvir/fields.h"
#include "mvir/grad_check.h"

using namespace mvir;

namespace {

HashGridConfig small_cfg() {
    HashGridConfig cfg;
    cfg.base_resolution = 8;
    cfg.levels = 6;
    cfg.features_per_level = 2;
    cfg.table_size = 1 << 12;
    cfg.growth = 1.5;
    return cfg;
}

// Sphere-initialized field shared across test cases (the fit takes a couple
// of seconds, run it once).
struct SphereFixture {
    ParamStore store;
    std::unique_ptr<SpatialField> field;
    double residual = 0;

    SphereFixture() {
        Rng rng(2024);
        field = std::make_unique<SpatialField>(store, small_cfg(), 1e-2, 1e-2, 0.0, rng);
        Rng fit_rng = named_stream(2024, "init");
        residual = init_sphere(*field, store, 0.5, 2000, fit_rng);
    }
};

SphereFixture& sphere_fixture() {
    static SphereFixture fx;
    return fx;
}

} // namespace

TEST_CASE("sphere initialization reaches the regression tolerance") {
    auto& fx = sphere_fixture();
    CHECK(fx.residual < 0.02);

    const double* p = fx.store.values.data();
    CHECK(fx.field->signed_distance(p, {0, 0, 0}) < 0.0);
    CHECK(fx.field->signed_distance(p, {1, 0, 0}) > 0.0);

    Rng rng(7);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        Vec3 dir = rng.unit_vector();
        double r = rng.uniform(0.3, 0.9);
        Vec3 x = dir * r;
        double g = fx.field->signed_distance(p, x);
        worst = std::max(worst, std::abs(g - (r - 0.5)));
    }
    CHECK(worst < 0.02);
}

TEST_CASE("post-init Eikonal residual near the zero set") {
    auto& fx = sphere_fixture();
    Rng rng(8);
    const int N = 500;
    Mat pts(N, 3);
    for (int i = 0; i < N; ++i) {
        Vec3 x = rng.unit_vector() * rng.uniform(0.45, 0.55);
        pts(i, 0) = x.x;
        pts(i, 1) = x.y;
        pts(i, 2) = x.z;
    }
    std::vector<double> grad(N * 3);
    fx.field->eval_raw(fx.store.values.data(), pts.data(), N, nullptr, nullptr, grad.data());
    double acc = 0;
    for (int i = 0; i < N; ++i) {
        Vec3 g{grad[3 * i], grad[3 * i + 1], grad[3 * i + 2]};
        acc += std::abs(norm(g) - 1.0);
    }
    CHECK(acc / N < 0.05);
}

TEST_CASE("normals of the fitted sphere point radially") {
    auto& fx = sphere_fixture();
    double x[3] = {0.5, 0.0, 0.0};
    double grad[3];
    fx.field->eval_raw(fx.store.values.data(), x, 1, nullptr, nullptr, grad);
    Vec3 n = normalized({grad[0], grad[1], grad[2]});
    double angle = std::acos(std::clamp(dot(n, Vec3{1, 0, 0}), -1.0, 1.0)) * 180.0 / M_PI;
    CHECK(angle < 2.0);
}

TEST_CASE("analytic spatial gradient matches central differences of the raw field") {
    auto& fx = sphere_fixture();
    Rng rng(9);
    const double h = 1e-5;
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        Vec3 x = rng.unit_vector() * rng.uniform(0.2, 0.9);
        double xp[3] = {x.x, x.y, x.z};
        double grad[3];
        fx.field->eval_raw(fx.store.values.data(), xp, 1, nullptr, nullptr, grad);
        for (int a = 0; a < 3; ++a) {
            double saved = xp[a];
            xp[a] = saved + h;
            double gp = fx.field->signed_distance(fx.store.values.data(),
                                                  {xp[0], xp[1], xp[2]});
            xp[a] = saved - h;
            double gm = fx.field->signed_distance(fx.store.values.data(),
                                                  {xp[0], xp[1], xp[2]});
            xp[a] = saved;
            double fd = (gp - gm) / (2 * h);
            worst = std::max(worst, rel_err(grad[a], fd));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("graph evaluation agrees with the raw evaluation") {
    auto& fx = sphere_fixture();
    Mat pts(4, 3,
            {0.3, -0.2, 0.1, -0.5, 0.4, 0.2, 0.05, 0.6, -0.3, -0.1, -0.1, 0.8});
    Tape t(&fx.store);
    auto e = fx.field->eval_graph(t, t.constant(pts), true);
    std::vector<double> g(4), latent(4 * SpatialField::kLatentDim), grad(4 * 3);
    fx.field->eval_raw(fx.store.values.data(), pts.data(), 4, g.data(), latent.data(),
                       grad.data());
    for (int i = 0; i < 4; ++i) {
        CHECK(e.g.value()[i] == doctest::Approx(g[i]).epsilon(1e-12));
        for (int a = 0; a < 3; ++a)
            CHECK(e.grad.value()[3 * i + a] == doctest::Approx(grad[3 * i + a]).epsilon(1e-10));
        for (int k = 0; k < SpatialField::kLatentDim; ++k)
            CHECK(e.latent.value()[i * SpatialField::kLatentDim + k] ==
                  doctest::Approx(latent[i * SpatialField::kLatentDim + k]).epsilon(1e-10));
    }
    CHECK(e.latent.cols() == 63);
    for (double v : e.latent.value())
        CHECK(std::isfinite(v));
}

TEST_CASE("spatial field parameter gradients (incl. normals path) pass grad_check") {
    ParamStore store;
    Rng rng(11);
    SpatialField field(store, small_cfg(), 1e-2, 1e-2, 0.0, rng);
    // perturb tables so gradients are generic
    for (size_t i = 0; i < store.size(); ++i)
        store.values[i] += 0.05 * rng.normal();

    Mat pts(2, 3, {0.31, -0.44, 0.12, -0.25, 0.52, 0.61});
    Mat probe_n(2, 3, {0.3, -0.7, 0.2, 0.5, 0.1, -0.4});
    Mat probe_l(2, 63);
    for (auto& v : probe_l.a)
        v = rng.uniform(-1, 1);
    auto build = [&](Tape& t) {
        auto e = field.eval_graph(t, t.constant(pts), true);
        V a = t.dot(e.normals, t.constant(probe_n));
        V b = t.dot(e.latent, t.constant(probe_l));
        V c = t.sum(e.g);
        return t.add(t.add(a, b), c);
    };
    std::vector<size_t> idx;
    const auto& mg = store.group("spatial-mlp");
    for (size_t i = 0; i < mg.length; i += 7)
        idx.push_back(mg.offset + i);
    for (int i = 0; i < 150; ++i)
        idx.push_back(rng.below(store.group("hash-table").length));
    auto rep = grad_check(build, store, 1e-5, idx);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("BRDF field basics") {
    ParamStore store;
    Rng rng(13);
    BRDFField brdf(store, 5, 1e-2, 0.0, rng);

    SUBCASE("zero-weight network returns zero RGB") {
        std::fill(store.values.begin(), store.values.end(), 0.0);
        Tape t(&store);
        Mat latent(1, 63);
        Mat feat(1, 5, {0.5, 0.5, 0.5, 0.5, 0.5});
        V out = brdf.eval_graph(t, t.constant(latent), t.constant(feat));
        for (double v : out.value())
            CHECK(v == 0.0);
    }

    SUBCASE("outputs are non-negative for random inputs") {
        for (int trial = 0; trial < 200; ++trial) {
            Tape t(&store);
            Mat latent(1, 63), feat(1, 5);
            for (auto& v : latent.a)
                v = rng.normal();
            for (auto& v : feat.a)
                v = rng.uniform(-1, 1);
            V out = brdf.eval_graph(t, t.constant(latent), t.constant(feat));
            for (double v : out.value())
                CHECK(v >= 0.0);
        }
    }

    SUBCASE("joint rotation of directions leaves the output unchanged") {
        Mat latent(1, 63);
        for (auto& v : latent.a)
            v = rng.normal();
        Vec3 n = rng.unit_vector(), vdir = rng.unit_vector(), l = rng.unit_vector();
        Mat3 R = rng.rotation();
        auto feats = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
            auto f = angular_encode(a, b, c);
            return Mat(1, 5, {f[0], f[1], f[2], f[3], f[4]});
        };
        Tape t(&store);
        V o1 = brdf.eval_graph(t, t.constant(latent), t.constant(feats(n, vdir, l)));
        V o2 = brdf.eval_graph(
            t, t.constant(latent),
            t.constant(feats(normalized(R * n), normalized(R * vdir), normalized(R * l))));
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(o1.value()[k] - o2.value()[k]) < 1e-9);
    }

    SUBCASE("gradient w.r.t. the latent matches finite differences") {
        ParamStore s2;
        Rng rng2(17);
        BRDFField b2(s2, 5, 1e-2, 0.0, rng2);
        size_t lat_off = s2.add_group("latent", 63, 1.0, 0.0);
        for (int i = 0; i < 63; ++i)
            s2.values[lat_off + i] = rng2.normal();
        Mat feat(1, 5, {0.3, 0.9, 0.2, 0.8, 0.01});
        auto build = [&](Tape& t) {
            V latent = t.param(lat_off, 1, 63);
            V out = b2.eval_graph(t, latent, t.constant(feat));
            return t.sum(out);
        };
        std::vector<size_t> idx;
        for (int i = 0; i < 63; ++i)
            idx.push_back(lat_off + i);
        CHECK(grad_check(build, s2, 1e-5, idx).max_rel_err < 1e-4);
    }
}

TEST_CASE("shadow field basics") {
    ParamStore store;
    Rng rng(19);
    ShadowField shadow(store, 1e-3, 0.0, rng);

    Mat latent(1, 63);
    for (auto& v : latent.a)
        v = rng.normal();
    auto shv = sh_encode({0, 0, -1}, 3);
    Mat sh_view(1, 16, shv);

    SUBCASE("zero weights give 0.5; outputs stay in (0,1); finite at s in {0,0.5,1}") {
        {
            ParamStore zero = store;
            std::fill(zero.values.begin(), zero.values.end(), 0.0);
            Tape t(&zero);
            V out = shadow.eval_graph(t, t.constant(latent), t.constant(sh_view), t.scalar(0.3));
            CHECK(out.scalar() == doctest::Approx(0.5));
        }
        for (double s : {0.0, 0.5, 1.0}) {
            Tape t(&store);
            V out = shadow.eval_graph(t, t.constant(latent), t.constant(sh_view), t.scalar(s));
            double v = out.scalar();
            CHECK(std::isfinite(v));
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }

    SUBCASE("parameter gradients pass grad_check") {
        auto build = [&](Tape& t) {
            V out =
                shadow.eval_graph(t, t.constant(latent), t.constant(sh_view), t.scalar(0.42));
            return t.reshape(out, 1, 1);
        };
        const auto& g = store.group("shadow-mlp");
        std::vector<size_t> idx;
        Rng r2(23);
        for (int i = 0; i < 200; ++i)
            idx.push_back(g.offset + r2.below(g.length));
        CHECK(grad_check(build, store, 1e-5, idx).max_rel_err < 1e-4);
    }
}
