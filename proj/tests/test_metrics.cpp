#include <doctest.h>

#include <cmath>
#include <random>

#include "petkin/error.hpp"
#include "petkin/metrics.hpp"

using namespace petkin;

namespace {

std::vector<double> random_volume(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(n);
    for (auto &x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr values") {
    const std::vector<double> a(64, 0.3);
    std::vector<double> b(64, 0.4);
    CHECK(psnr(a, a, 1.0) == kPsnrIdentical);
    CHECK(std::isinf(psnr(a, a, 1.0)));
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    std::vector<double> c(64, 1.3);
    CHECK(psnr(a, c, 1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(a, std::vector<double>(3, 0.0), 1.0), ValidationError);
    CHECK_THROWS_AS(psnr(a, b, 0.0), ValidationError);
}

TEST_CASE("psnr falls as noise grows") {
    const auto ref = random_volume(4096, 1);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> noise(ref.size());
    for (auto &x : noise)
        x = n(rng);
    double prev = kPsnrIdentical;
    for (double amp : {0.01, 0.05, 0.2}) {
        std::vector<double> est(ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            est[i] = ref[i] + amp * noise[i];
        const double p = psnr(est, ref, 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim identities") {
    const Dims3 d{3, 16, 16};
    const auto a = random_volume(d.count(), 3);
    const auto b = random_volume(d.count(), 4);
    const SsimConfig cfg;
    CHECK(std::abs(ssim(a, a, d, cfg) - 1.0) < 1e-9);
    CHECK(ssim(a, b, d, cfg) == doctest::Approx(ssim(b, a, d, cfg)).epsilon(1e-14));
    CHECK(ssim(a, b, d, cfg) < 0.99);
}

TEST_CASE("constant-image ssim closed form") {
    const Dims3 d{1, 16, 16};
    const std::vector<double> a(d.count(), 0.5), b(d.count(), 0.6);
    const double expected = (2 * 0.3 + 1e-4) / (0.25 + 0.36 + 1e-4);
    CHECK(expected == doctest::Approx(0.983609).epsilon(1e-6));
    CHECK(std::abs(ssim(a, b, d, {}) - 0.983609) < 1e-6);
    SsimConfig u;
    u.kind = WindowKind::Uniform;
    CHECK(std::abs(ssim(a, b, d, u) - expected) < 1e-12);
}

TEST_CASE("ssim stays within [-1, 1]") {
    const Dims3 d{2, 13, 12};
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto a = random_volume(d.count(), 100 + s);
        auto b = random_volume(d.count(), 200 + s);
        if (s % 2)
            for (std::size_t i = 0; i < b.size(); ++i)
                b[i] = 1 - a[i]; // anti-correlated
        for (auto kind : {WindowKind::Gaussian, WindowKind::Uniform}) {
            SsimConfig cfg;
            cfg.kind = kind;
            cfg.window = 7;
            const double v = ssim(a, b, d, cfg);
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("ssim input checks") {
    const Dims3 d{1, 8, 8};
    const std::vector<double> a(d.count(), 0.5);
    CHECK_THROWS_AS(ssim(a, a, d, {}), ValidationError); // 8x8 < 11x11
    SsimConfig cfg;
    cfg.window = 4;
    CHECK_THROWS_AS(ssim(a, a, d, cfg), ValidationError);
    cfg.window = 5;
    CHECK_THROWS_AS(ssim(a, std::vector<double>(3, 0.0), d, cfg), ValidationError);
    cfg.k1 = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("aif metrics") {
    const auto mids = mid_times(mouse_fdg_schedule());
    const SampledCurve ref = sample_feng(FengAif{}, mids);

    SUBCASE("identical curves") {
        const AifMetrics m = aif_metrics(ref, ref);
        CHECK(m.rmse == 0.0);
        CHECK(m.nrmse == 0.0);
        CHECK(m.peak_rel_err == 0.0);
        CHECK(m.peak_time_diff_s == 0.0);
        CHECK(m.auc_rel_err == 0.0);
    }
    SUBCASE("scaled estimate") {
        std::vector<double> v = ref.values();
        for (auto &x : v)
            x *= 1.1;
        const AifMetrics m = aif_metrics(SampledCurve(ref.times(), v), ref);
        CHECK(m.auc_rel_err == doctest::Approx(0.10).epsilon(1e-12));
        CHECK(m.peak_rel_err == doctest::Approx(0.10).epsilon(1e-12));
        CHECK(m.peak_time_diff_s == 0.0);
    }
    SUBCASE("time-shifted estimate") {
        FengAif shifted;
        shifted.tau_s += 5;
        std::vector<double> dense;
        for (int i = 0; i <= 5460; ++i)
            dense.push_back(0.5 * i);
        const AifMetrics m = aif_metrics(sample_feng(shifted, dense), ref);
        CHECK(std::abs(m.peak_time_diff_s - 5.0) <= 5.0);
        CHECK(m.peak_time_diff_s >= 0.0);
    }
    SUBCASE("zero reference") {
        const SampledCurve zero({0, 1, 2}, {0, 0, 0});
        CHECK_THROWS_AS(aif_metrics(ref, zero), ValidationError);
    }
    SUBCASE("time units only rescale the peak time difference") {
        std::vector<double> v = ref.values();
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] *= 1.0 + 0.01 * std::sin(0.3 * static_cast<double>(i));
        v[3] *= 1.8; // moves the estimated peak
        const SampledCurve est(ref.times(), v);
        std::vector<double> tmin = ref.times();
        for (auto &t : tmin)
            t /= 60;
        const AifMetrics s = aif_metrics(est, ref);
        const AifMetrics m = aif_metrics(SampledCurve(tmin, v), SampledCurve(tmin, ref.values()));
        CHECK(m.rmse == doctest::Approx(s.rmse));
        CHECK(m.nrmse == doctest::Approx(s.nrmse));
        CHECK(m.peak_rel_err == doctest::Approx(s.peak_rel_err));
        CHECK(m.auc_rel_err == doctest::Approx(s.auc_rel_err));
        CHECK(m.peak_time_diff_s * 60 == doctest::Approx(s.peak_time_diff_s));
    }
}

TEST_CASE("score_maps reports every channel and Ki") {
    const Dims3 d{2, 12, 12};
    ParametricMaps ref(d), est(d);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.05, 0.9);
    for (std::size_t v = 0; v < d.count(); ++v) {
        const KineticParams p{u(rng), u(rng), u(rng) * 0.2, u(rng) * 0.5};
        ref.set(v, p);
        est.set(v, {p.K1 * 1.01, p.k2, p.k3, p.Vb});
    }
    const MapsScore same = score_maps(ref, ref);
    CHECK(same.channels.size() == 5);
    CHECK(same.channels[4].name == "Ki");
    CHECK(std::abs(same.mean_ssim - 1.0) < 1e-9);
    CHECK(std::isinf(same.mean_psnr));
    const MapsScore diff = score_maps(est, ref);
    CHECK(diff.channels[0].ssim < 1.0);
    CHECK(std::isfinite(diff.channels[0].psnr));
    CHECK(std::isinf(diff.channels[1].psnr));
    CHECK_THROWS_AS(score_maps(est, ParametricMaps(Dims3{1, 12, 12})), ValidationError);
}

}
