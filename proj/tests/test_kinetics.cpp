#include <doctest.h>

#include <cmath>
#include <random>

#include "petkin/error.hpp"
#include "petkin/kinetics.hpp"

using namespace petkin;

namespace {

const KineticParams kRef{0.5, 0.3, 0.1, 0.0};

// Closed forms for the tissue curve (t in minutes).
double step_oracle(const KineticParams &p, double t) {
    const double a = p.k2 + p.k3;
    return p.K1 / a * (p.k3 * t + p.k2 / a * (1 - std::exp(-a * t)));
}

double exp_oracle(const KineticParams &p, double lambda, double t) {
    const double a = p.k2 + p.k3;
    return p.K1 / a *
           (p.k3 * (1 - std::exp(-lambda * t)) / lambda + p.k2 * (std::exp(-lambda * t) - std::exp(-a * t)) / (a - lambda));
}

SampledCurve exp_input(double lambda_per_min, const FineGrid &g) {
    std::vector<double> t(g.n), v(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        t[j] = g.time(j);
        v[j] = std::exp(-lambda_per_min * t[j] / 60.0);
    }
    return SampledCurve(t, v);
}

double max_exp_error(double dt_s, double t_end_min) {
    const FineGrid g{dt_s, static_cast<std::size_t>(std::llround(t_end_min * 60 / dt_s)) + 1};
    const auto ct = tissue_response(kRef, exp_input(1.0, g), g);
    double worst = 0;
    for (std::size_t j = 0; j < g.n; ++j)
        worst = std::max(worst, std::abs(ct.values()[j] - exp_oracle(kRef, 1.0, g.time(j) / 60)));
    return worst;
}

KineticParams random_params(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> rate(0.02, 1.5), vb(0.0, 0.6);
    return {rate(rng), rate(rng), rate(rng), vb(rng)};
}

} // namespace

TEST_SUITE("kinetics") {

TEST_CASE("impulse response values") {
    CHECK(impulse_response(kRef, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(impulse_response({0, 0.3, 0.1, 0}, 120.0) == 0.0);
    CHECK(impulse_response({0, 0, 0, 0}, 120.0) == 0.0);
    CHECK(impulse_response(kRef, 60.0) == doctest::Approx(1.25 * (0.1 + 0.3 * std::exp(-0.4))).epsilon(1e-14));
    CHECK(impulse_response(kRef, 1e7) == doctest::Approx(ki(kRef)));
    CHECK_THROWS_AS(impulse_response({0.5, 0, 0, 0}, 1.0), ValidationError);
    CHECK_THROWS_AS(impulse_response(kRef, -1.0), ValidationError);
}

TEST_CASE("impulse response is non-increasing") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const KineticParams p = random_params(rng);
        double prev = impulse_response(p, 0);
        for (double t = 1; t < 3000; t += 7) {
            const double h = impulse_response(p, t);
            REQUIRE(h <= prev);
            prev = h;
        }
    }
}

TEST_CASE("ki") {
    CHECK(ki({0.5, 0.3, 0.0, 0}) == 0.0);
    CHECK(ki({0.5, 0.0, 0.1, 0}) == 0.5);
    CHECK(ki(kRef) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(ki({0, 0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(ki({0.5, 0, 0, 0}), ValidationError);
}

TEST_CASE("params validation") {
    CHECK_THROWS_AS((KineticParams{-0.1, 0.1, 0.1, 0}).validate(), ValidationError);
    CHECK_THROWS_AS((KineticParams{0.1, 0.1, 0.1, 1.1}).validate(), ValidationError);
    CHECK_THROWS_AS((KineticParams{0.1, 0.1, -0.1, 0.5}).validate(), ValidationError);
    CHECK_NOTHROW((KineticParams{0.1, 0.1, 0.1, 1.0}).validate());
}

TEST_CASE("step input tissue response matches closed form") {
    const FineGrid g{0.5, 241};
    const SampledCurve step({0.0, 120.0}, {1.0, 1.0});
    const auto ct = tissue_response(kRef, step, g);
    CHECK(ct.values()[0] == 0.0);
    CHECK(step_oracle(kRef, 1.0) == doctest::Approx(0.434075).epsilon(1e-6));
    CHECK(std::abs(ct.values()[120] - 0.434075) < 1e-4);
    for (std::size_t j = 0; j < g.n; ++j)
        CHECK(ct.values()[j] == doctest::Approx(step_oracle(kRef, g.time(j) / 60)).epsilon(1e-5).scale(1e-6));
}

TEST_CASE("exponential input tissue response matches closed form") {
    CHECK(exp_oracle(kRef, 1.0, 1.0) == doctest::Approx(0.268040).epsilon(1e-6));
    const FineGrid g{0.5, 241};
    const auto ct = tissue_response(kRef, exp_input(1.0, g), g);
    CHECK(std::abs(ct.values()[120] - 0.268040) < 1e-4);
}

TEST_CASE("convolution error shrinks quadratically with dt") {
    const double coarse = max_exp_error(1.2, 10);
    const double fine = max_exp_error(0.6, 10);
    const double ratio = coarse / fine;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
}

TEST_CASE("recursive convolution equals the direct trapezoid sum") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 3);
    std::vector<double> c(300);
    for (auto &x : c)
        x = u(rng);
    const double dt = 0.05, alpha = 0.7;
    std::vector<double> fast(c.size()), dfast(c.size());
    exp_convolution(c, alpha, dt, fast, dfast);
    for (std::size_t j = 0; j < c.size(); ++j) {
        double s = 0, ds = 0;
        for (std::size_t k = 0; k <= j; ++k) {
            const double w = (k == 0 || k == j) ? 0.5 : 1.0;
            const double lag = static_cast<double>(j - k) * dt;
            s += w * std::exp(-alpha * lag) * c[k];
            ds += -w * lag * std::exp(-alpha * lag) * c[k];
        }
        if (j == 0) {
            s = 0;
            ds = 0;
        }
        REQUIRE(fast[j] == doctest::Approx(dt * s).epsilon(1e-12).scale(1e-12));
        REQUIRE(dfast[j] == doctest::Approx(dt * ds).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("cumulative_trapezoid") {
    const auto c = cumulative_trapezoid(std::vector<double>{0, 1, 0}, 1.0);
    CHECK(c == std::vector<double>{0, 0.5, 1.0});
}

TEST_CASE("frame operator averages the linear interpolant exactly") {
    const FrameSchedule s({0, 0.7, 2.2}, {0.7, 1.5, 1.3});
    const FineGrid g = fine_grid(s, 0.5);
    std::vector<double> lin(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        lin[j] = 2.0 + 3.0 * g.time(j);
    const auto avg = FrameOperator(s, g, FrameMode::FrameAverage).apply(lin);
    const auto mid = FrameOperator(s, g, FrameMode::Midpoint).apply(lin);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double m = s.start(i) + s.duration(i) / 2;
        CHECK(avg[i] == doctest::Approx(2.0 + 3.0 * m).epsilon(1e-12));
        CHECK(mid[i] == doctest::Approx(2.0 + 3.0 * m).epsilon(1e-12));
    }
}

TEST_CASE("pure blood and pure scaling cases") {
    const FrameSchedule s = mouse_fdg_schedule();
    const SampledCurve ca = sample_feng(FengAif{}, fine_grid(s));
    const ForwardModel fm(ca, s);
    const auto blood = fm.frames({0.7, 0.2, 0.05, 1.0});
    const auto scaled = fm.frames({0.0, 0.2, 0.05, 0.05});
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(blood[i] == doctest::Approx(fm.input_frames()[i]).epsilon(1e-14));
        CHECK(scaled[i] == doctest::Approx(0.05 * fm.input_frames()[i]).epsilon(1e-14));
    }
    const auto none = forward_model({0, 0, 0, 0}, ca, s);
    for (double v : none)
        CHECK(v == 0.0);
}

TEST_CASE("single-frame average of the step response") {
    const FrameSchedule s = make_schedule({{1, 60}});
    const SampledCurve step({0.0, 60.0}, {1.0, 1.0});
    const auto f = forward_model(kRef, step, s);
    const double a = 0.4;
    // integral over [0, 1] min of the closed-form step response
    const double expected = kRef.K1 / a * (kRef.k3 / 2 + kRef.k2 / a * (1 - (1 - std::exp(-a)) / a));
    CHECK(f[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("forward model is linear in the input") {
    const FrameSchedule s = mouse_fdg_schedule();
    const FineGrid g = fine_grid(s);
    const SampledCurve ca = sample_feng(FengAif{}, g);
    std::vector<double> twice = ca.values();
    for (auto &v : twice)
        v *= 2;
    const SampledCurve ca2(ca.times(), twice);
    const KineticParams p{0.3, 0.5, 0.06, 0.04};
    const auto f1 = forward_model(p, ca, s);
    const auto f2 = forward_model(p, ca2, s);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(f2[i] == doctest::Approx(2 * f1[i]).epsilon(1e-13));
}

TEST_CASE("frame average and midpoint agree for short frames") {
    const FrameSchedule s = make_schedule({{120, 1}});
    const FineGrid g = fine_grid(s, 0.1);
    std::vector<double> t(g.n), v(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        t[j] = g.time(j);
        v[j] = 10 * (1 - std::exp(-t[j] / 20));
    }
    const SampledCurve ca(t, v);
    const KineticParams p{0.6, 0.9, 0.05, 0.2};
    const auto avg = forward_model(p, ca, s, FrameMode::FrameAverage, 0.1);
    const auto mid = forward_model(p, ca, s, FrameMode::Midpoint, 0.1);
    for (std::size_t i = 10; i < s.size(); ++i)
        CHECK(std::abs(avg[i] - mid[i]) / std::abs(mid[i]) < 1e-3);
}

TEST_CASE("analytic Jacobian matches central differences") {
    const FrameSchedule s = mouse_fdg_schedule();
    const ForwardModel fm(sample_feng(FengAif{}, fine_grid(s)), s);
    std::mt19937_64 rng(5);
    const std::size_t nf = s.size();
    for (int trial = 0; trial < 10; ++trial) {
        const KineticParams p = random_params(rng);
        std::vector<double> out(nf), jac(4 * nf);
        fm.frames_with_jacobian(p, out, jac);
        const auto plain = fm.frames(p);
        for (std::size_t i = 0; i < nf; ++i)
            CHECK(out[i] == doctest::Approx(plain[i]).epsilon(1e-13));
        for (int k = 0; k < 4; ++k) {
            auto up = p.to_array(), dn = p.to_array();
            const double h = 1e-5 * std::max(std::abs(up[k]), 1e-2);
            up[k] += h;
            dn[k] -= h;
            const auto fu = fm.frames(KineticParams::from_array(up));
            const auto fd = fm.frames(KineticParams::from_array(dn));
            double num = 0, den = 0;
            for (std::size_t i = 0; i < nf; ++i) {
                const double d = (fu[i] - fd[i]) / (2 * h);
                num = std::max(num, std::abs(jac[4 * i + k] - d));
                den = std::max(den, std::abs(d));
            }
            CHECK(num / den < 1e-4);
        }
    }
}

TEST_CASE("forward_volume") {
    const FrameSchedule s = mouse_fdg_schedule();
    const SampledCurve ca = sample_feng(FengAif{}, fine_grid(s));

    SUBCASE("all-zero maps give an all-zero image") {
        const ParametricMaps maps(Dims3{2, 3, 4});
        const DynamicImage img = forward_volume(maps, ca, s);
        CHECK(img.values.size() == s.size() * 24);
        for (double v : img.values)
            CHECK(v == 0.0);
    }
    SUBCASE("uniform maps give identical TACs") {
        ParametricMaps maps(Dims3{2, 2, 2});
        const KineticParams p{0.3, 0.5, 0.06, 0.04};
        for (std::size_t v = 0; v < maps.voxels(); ++v)
            maps.set(v, p);
        const DynamicImage img = forward_volume(maps, ca, s);
        const auto single = forward_model(p, ca, s);
        for (std::size_t v = 0; v < maps.voxels(); ++v)
            CHECK(img.tac(v) == single);
    }
    SUBCASE("distinct voxels match single-voxel calls; unmasked voxels stay zero") {
        ParametricMaps maps(Dims3{1, 1, 3});
        maps.set(0, {0.3, 0.5, 0.06, 0.04});
        maps.set(1, {0.8, 1.2, 0.02, 0.25});
        maps.set(2, {0.8, 1.2, 0.02, 0.25});
        maps.mask[2] = 0;
        const DynamicImage img = forward_volume(maps, ca, s);
        CHECK(img.tac(0) == forward_model(maps.at(0), ca, s));
        CHECK(img.tac(1) == forward_model(maps.at(1), ca, s));
        for (double v : img.tac(2))
            CHECK(v == 0.0);
    }
    SUBCASE("invalid voxel is named") {
        ParametricMaps maps(Dims3{1, 1, 4});
        maps.set(2, {0.5, 0.0, 0.0, 0.1});
        try {
            forward_volume(maps, ca, s);
            FAIL("expected a validation error");
        } catch (const ValidationError &e) {
            CHECK(std::string(e.what()).find("voxel 2") != std::string::npos);
        }
    }
    SUBCASE("worker count does not change the output") {
        ParametricMaps maps(Dims3{3, 5, 7});
        std::mt19937_64 rng(9);
        for (std::size_t v = 0; v < maps.voxels(); ++v)
            maps.set(v, random_params(rng));
        const DynamicImage a = forward_volume(maps, ca, s, {FrameMode::FrameAverage, 0.5, 1});
        const DynamicImage b = forward_volume(maps, ca, s, {FrameMode::FrameAverage, 0.5, 4});
        CHECK(a.values == b.values);
    }
}

}
