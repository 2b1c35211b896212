#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mvir/grad_check.h"
#include "mvir/tape.h"

using namespace mvir;

namespace {

ParamStore make_store(std::vector<double> vals, const char* name = "p") {
    ParamStore s;
    s.add_group(name, vals.size(), 1.0, 0.0);
    s.values = vals;
    s.grads.assign(vals.size(), 0.0);
    return s;
}

} // namespace

TEST_CASE("forward primitives match analytic values") {
    ParamStore s = make_store({0.0});
    Tape t(&s);
    CHECK(t.softplus(t.scalar(0.0), 1.0).scalar() == doctest::Approx(std::log(2.0)));

    Mat v(1, 3, {0, 0, 2});
    auto n = t.normalize_rows(t.constant(v));
    CHECK(n.value()[0] == doctest::Approx(0.0));
    CHECK(n.value()[2] == doctest::Approx(1.0).epsilon(1e-9));

    auto sg = t.stop_grad(t.scalar(3.25));
    CHECK(sg.scalar() == 3.25);
}

TEST_CASE("backward of x^2 at x=3 gives 6") {
    ParamStore s = make_store({3.0});
    Tape t(&s);
    V x = t.param(0, 1, 1);
    V y = x * x;
    t.backward_scalar(y);
    CHECK(s.grads[0] == doctest::Approx(6.0));
}

TEST_CASE("repeated backward accumulates until grads are zeroed") {
    ParamStore s = make_store({2.0});
    Tape t(&s);
    V x = t.param(0, 1, 1);
    V y = x * x;
    t.backward_scalar(y);
    t.backward_scalar(y);
    CHECK(s.grads[0] == doctest::Approx(8.0));
    s.zero_grad();
    t.backward_scalar(y);
    CHECK(s.grads[0] == doctest::Approx(4.0));
}

TEST_CASE("stop-gradient blocks adjoints exactly") {
    ParamStore s = make_store({1.5, -0.5});
    Tape t(&s);
    V a = t.param(0, 1, 1);
    V b = t.param(1, 1, 1);
    // b only reachable through stop_grad
    V y = a * t.stop_grad(b * b);
    t.backward_scalar(y);
    CHECK(s.grads[0] == doctest::Approx(0.25));
    CHECK(s.grads[1] == 0.0);
}

TEST_CASE("adjoint of normalize matches central differences") {
    // d/dv of sum(c . normalize(v)) at v = [3,4,0]
    ParamStore s = make_store({3.0, 4.0, 0.0});
    Mat c(1, 3, {0.3, -1.1, 0.7});
    auto build = [&](Tape& t) {
        V v = t.param(0, 1, 3);
        return t.dot(t.normalize_rows(v), t.constant(c));
    };
    auto rep = grad_check(build, s, 1e-5);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("grad_check: quadratic form below 1e-6, constant graph exactly zero") {
    ParamStore s = make_store({0.7, -1.3, 2.1});
    Mat A(3, 3, {2.0, 0.3, -0.1, 0.3, 1.5, 0.4, -0.1, 0.4, 3.0});
    auto quad = [&](Tape& t) {
        V x = t.param(0, 3, 1);
        V Ax = t.matmul_nn(t.constant(A), x);
        return t.dot(x, Ax);
    };
    CHECK(grad_check(quad, s, 1e-5).max_rel_err < 1e-6);

    auto constant = [&](Tape& t) { return t.scalar(42.0); };
    std::vector<double> sink(s.size(), 0.0);
    Tape t(&s, sink.data());
    t.backward_scalar(constant(t));
    for (double g : sink)
        CHECK(g == 0.0);
}

TEST_CASE("every differentiable primitive matches finite differences") {
    Rng rng(1234);
    // Each builder consumes a 12-parameter store laid out as two 2x3 blocks.
    using Builder = std::function<V(Tape&, V, V)>;
    std::vector<std::pair<const char*, Builder>> ops = {
        {"add", [](Tape& t, V a, V b) { return t.sum(a + b); }},
        {"sub", [](Tape& t, V a, V b) { return t.sum(a - b); }},
        {"mul", [](Tape& t, V a, V b) { return t.sum(a * b); }},
        {"div", [](Tape& t, V a, V b) {
             return t.sum(a / t.add_scalar(t.mul(b, b), 0.5));
         }},
        {"scale", [](Tape& t, V a, V) { return t.sum(t.scale(a, -2.5)); }},
        {"softplus", [](Tape& t, V a, V) { return t.sum(t.softplus(a, 3.0)); }},
        {"relu", [](Tape& t, V a, V) { return t.sum(t.relu(a)); }},
        {"sigmoid", [](Tape& t, V a, V) { return t.sum(t.sigmoid(a)); }},
        {"exp", [](Tape& t, V a, V) { return t.sum(t.vexp(a)); }},
        {"abs", [](Tape& t, V a, V) { return t.sum(t.vabs(a)); }},
        {"pow10", [](Tape& t, V a, V) { return t.sum(t.pow_int(a, 10)); }},
        {"dot", [](Tape& t, V a, V b) { return t.dot(a, b); }},
        {"rowdot", [](Tape& t, V a, V b) { return t.sum(t.rowdot(a, b)); }},
        {"rownorm", [](Tape& t, V a, V) { return t.sum(t.rownorm(a)); }},
        {"normalize", [](Tape& t, V a, V) { return t.sum(t.normalize_rows(a)); }},
        {"matmul_nt", [](Tape& t, V a, V b) { return t.sum(t.matmul_nt(a, b)); }},
        {"matmul_nn",
         [](Tape& t, V a, V b) {
             return t.sum(t.matmul_nn(t.reshape(a, 3, 2), t.reshape(b, 2, 3)));
         }},
        {"slice+concat",
         [](Tape& t, V a, V b) {
             V c = t.concat_cols({t.slice_cols(a, 0, 2), t.slice_cols(b, 1, 3)});
             return t.sum(t.slice_rows(c, 0, 1));
         }},
        {"repeat_rows",
         [](Tape& t, V a, V b) {
             V r = t.repeat_rows(t.slice_rows(a, 0, 1), 4);
             return t.sum(t.mul(r, t.repeat_rows(t.slice_rows(b, 1, 2), 4)));
         }},
        {"sum-broadcast-col",
         [](Tape& t, V a, V b) { return t.sum(t.mul(a, t.slice_cols(b, 0, 1))); }},
        {"transmit",
         [](Tape& t, V a, V b) {
             V alpha = t.sigmoid(t.reshape(a, 6, 1)); // keep alphas in (0,1)
             V w = t.transmit_weights(alpha);
             return t.dot(w, t.reshape(b, 6, 1));
         }},
        {"log1p-ish", [](Tape& t, V a, V) {
             return t.sum(t.vlog(t.add_scalar(t.mul(a, a), 1.0)));
         }},
    };

    for (auto& [name, builder] : ops) {
        CAPTURE(name);
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> vals(12);
            for (auto& v : vals) {
                v = rng.uniform(-2.0, 2.0);
                // keep away from the relu/abs kinks and tiny normalize inputs
                if (std::abs(v) < 0.05)
                    v = v < 0 ? v - 0.1 : v + 0.1;
            }
            ParamStore s = make_store(vals);
            auto build = [&](Tape& t) {
                V a = t.param(0, 2, 3);
                V b = t.param(6, 2, 3);
                return builder(t, a, b);
            };
            worst = std::max(worst, grad_check(build, s, 1e-5).max_rel_err);
        }
        CHECK_MESSAGE(worst < 1e-4, name, " worst rel err ", worst);
    }
}

TEST_CASE("backward linearity: grad(f+g) == grad(f) + grad(g) elementwise") {
    Rng rng(99);
    std::vector<double> vals(6);
    for (auto& v : vals)
        v = rng.uniform(-1.0, 1.0);
    ParamStore s = make_store(vals);

    auto make_f = [](Tape& t) {
        V x = t.param(0, 1, 6);
        return t.sum(t.sigmoid(x));
    };
    auto make_g = [](Tape& t) {
        V x = t.param(0, 1, 6);
        return t.dot(x, x);
    };

    std::vector<double> gf(s.size(), 0.0), gg(s.size(), 0.0), gfg(s.size(), 0.0);
    {
        Tape t(&s, gf.data());
        t.backward_scalar(make_f(t));
    }
    {
        Tape t(&s, gg.data());
        t.backward_scalar(make_g(t));
    }
    {
        Tape t(&s, gfg.data());
        t.backward_scalar(t.add(make_f(t), make_g(t)));
    }
    for (size_t i = 0; i < s.size(); ++i)
        CHECK(gfg[i] == gf[i] + gg[i]); // bitwise
}

TEST_CASE("two identical runs are bit-identical") {
    auto run = [](std::vector<double>& grads_out) {
        Rng rng(7);
        std::vector<double> vals(20);
        for (auto& v : vals)
            v = rng.normal();
        ParamStore s = make_store(vals);
        Tape t(&s);
        V x = t.param(0, 4, 5);
        V y = t.sum(t.sigmoid(t.matmul_nt(x, x)));
        t.backward_scalar(y);
        grads_out = s.grads;
        return y.scalar();
    };
    std::vector<double> g1, g2;
    double v1 = run(g1), v2 = run(g2);
    CHECK(std::memcmp(&v1, &v2, sizeof(double)) == 0);
    REQUIRE(g1.size() == g2.size());
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("non-finite forward values raise a diagnostic naming the op") {
    ParamStore s = make_store({1.0});
    Tape t(&s);
    V big = t.scalar(1e308);
    CHECK_THROWS_WITH_AS(t.vexp(big), doctest::Contains("exp"), Error);
}

TEST_CASE("seed shape mismatch raises") {
    ParamStore s = make_store({1.0, 2.0});
    Tape t(&s);
    V x = t.param(0, 1, 2);
    CHECK_THROWS_AS(t.backward(x, Mat::scalar(1.0)), Error);
}

TEST_CASE("select routes values and adjoints by mask") {
    ParamStore s = make_store({2.0, -3.0, 0.5, 1.0});
    Tape t(&s);
    V a = t.param(0, 1, 2);
    V b = t.param(2, 1, 2);
    V out = t.select({1, 0}, a, b);
    CHECK(out.value()[0] == 2.0);
    CHECK(out.value()[1] == 1.0);
    t.backward(out, Mat(1, 2, {1.0, 1.0}));
    CHECK(s.grads[0] == 1.0);
    CHECK(s.grads[1] == 0.0);
    CHECK(s.grads[2] == 0.0);
    CHECK(s.grads[3] == 1.0);
}
