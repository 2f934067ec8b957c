#include <doctest.h>

#include <cmath>
#include <map>

#include "petkin/error.hpp"
#include "petkin/phantom.hpp"

using namespace petkin;

TEST_SUITE("phantom") {

TEST_CASE("empty region list gives an empty phantom") {
    PhantomSpec spec;
    spec.dims = {4, 5, 6};
    const Phantom ph = build_phantom(spec, mouse_fdg_schedule());
    for (auto l : ph.labels)
        CHECK(l == 0);
    for (auto m : ph.maps.mask)
        CHECK(m == 0);
    for (const auto &c : ph.maps.channels)
        for (double x : c)
            CHECK(x == 0.0);
    CHECK(ph.truth_aif.size() == 42);
}

TEST_CASE("a tiny ellipsoid labels exactly one voxel") {
    PhantomSpec spec;
    spec.dims = {5, 5, 5};
    spec.regions.push_back({"dot", {{2, 3, 1}, {0.4, 0.4, 0.4}}, {0.2, 0.3, 0.04, 0.1}});
    const Phantom ph = build_phantom(spec, mouse_fdg_schedule());
    std::size_t n = 0;
    for (std::size_t v = 0; v < ph.labels.size(); ++v)
        if (ph.labels[v]) {
            ++n;
            CHECK(v == spec.dims.index(2, 3, 1));
            CHECK(ph.maps.at(v) == KineticParams{0.2, 0.3, 0.04, 0.1});
            CHECK(ph.maps.mask[v] == 1);
        }
    CHECK(n == 1);
}

TEST_CASE("mouse phantom region counts match an independent recount") {
    const PhantomSpec spec = PhantomSpec::mouse({32, 32, 32});
    const Phantom ph = build_phantom(spec, mouse_fdg_schedule());
    std::map<int, std::size_t> got, want;
    for (auto l : ph.labels)
        ++got[l];
    for (int z = 0; z < 32; ++z)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                int label = 0;
                for (std::size_t i = 0; i < spec.regions.size(); ++i) {
                    const auto &e = spec.regions[i].shape;
                    double r = 0;
                    const double p[3] = {double(z), double(y), double(x)};
                    for (int a = 0; a < 3; ++a)
                        r += std::pow((p[a] - e.center[a]) / e.semi_axes[a], 2);
                    if (r <= 1.0)
                        label = static_cast<int>(i) + 1;
                }
                ++want[label];
            }
    CHECK(got == want);
    CHECK(ph.region_names == std::vector<std::string>{"muscle", "brain", "heart", "liver", "kidney", "tumor"});
    for (int l = 1; l <= 6; ++l)
        CHECK(got[l] > 0);
}

TEST_CASE("regions must fit inside the volume") {
    PhantomSpec spec;
    spec.dims = {8, 8, 8};
    spec.regions.push_back({"out", {{7, 4, 4}, {2, 1, 1}}, {0.2, 0.3, 0.04, 0.1}});
    CHECK_THROWS_AS(build_phantom(spec, mouse_fdg_schedule()), ValidationError);
    spec.regions[0].shape = {{4, 4, 4}, {1, 0, 1}};
    CHECK_THROWS_AS(build_phantom(spec, mouse_fdg_schedule()), ValidationError);
    spec.regions[0] = {"bad", {{4, 4, 4}, {1, 1, 1}}, {0.2, 0, 0, 0.1}};
    CHECK_THROWS_AS(build_phantom(spec, mouse_fdg_schedule()), ValidationError);
}

TEST_CASE("simulate_scan") {
    const FrameSchedule s = mouse_fdg_schedule();
    const Phantom ph = build_phantom(PhantomSpec::mouse({12, 12, 12}), s);

    SUBCASE("zero noise is the forward model") {
        const DynamicImage img = simulate_scan(ph, s, 0.0, 1);
        const DynamicImage clean = forward_volume(ph.maps, sample_feng(ph.aif, fine_grid(s)), s);
        CHECK(img.values == clean.values);
    }
    SUBCASE("seeded noise is reproducible and independent of workers") {
        const DynamicImage a = simulate_scan(ph, s, 0.1, 5, {kDefaultDt, FrameMode::FrameAverage, 1});
        const DynamicImage b = simulate_scan(ph, s, 0.1, 5, {kDefaultDt, FrameMode::FrameAverage, 3});
        const DynamicImage c = simulate_scan(ph, s, 0.1, 6, {kDefaultDt, FrameMode::FrameAverage, 1});
        CHECK(a.values == b.values);
        CHECK(a.values != c.values);
    }
    SUBCASE("pure blood voxels carry the frame-averaged input") {
        PhantomSpec spec;
        spec.dims = {3, 3, 3};
        spec.regions.push_back({"blood", {{1, 1, 1}, {1.4, 1.4, 1.4}}, {0.3, 0.2, 0.1, 1.0}});
        const Phantom pb = build_phantom(spec, s);
        const DynamicImage img = simulate_scan(pb, s, 0.0, 0);
        const ForwardModel fm(sample_feng(pb.aif, fine_grid(s)), s);
        const auto tac = img.tac(spec.dims.index(1, 1, 1));
        for (std::size_t f = 0; f < s.size(); ++f)
            CHECK(tac[f] == doctest::Approx(fm.input_frames()[f]).epsilon(1e-14));
    }
}

TEST_CASE("noise follows the stated law") {
    const FrameSchedule s = mouse_fdg_schedule();
    PhantomSpec spec;
    spec.dims = {16, 40, 40};
    spec.regions.push_back({"blob", {{7.5, 19.5, 19.5}, {8, 20, 20}}, {0.6, 0.9, 0.05, 0.2}});
    const Phantom ph = build_phantom(spec, s);
    const double sigma0 = 0.1;
    const DynamicImage clean = simulate_scan(ph, s, 0.0, 0);
    const DynamicImage noisy = simulate_scan(ph, s, sigma0, 123);
    std::vector<std::size_t> vox;
    for (std::size_t v = 0; v < ph.labels.size(); ++v)
        if (ph.labels[v])
            vox.push_back(v);
    const std::size_t nv = vox.size();
    REQUIRE(nv >= 10000);
    const std::size_t ref = vox.front();

    std::vector<double> normalized(s.size());
    for (std::size_t f : {0UL, 1UL, 20UL, 30UL, 36UL, 41UL}) {
        double ss = 0, mean = 0;
        for (std::size_t v : vox)
            mean += noisy.at(f, v) - clean.at(f, v);
        mean /= static_cast<double>(nv);
        for (std::size_t v : vox)
            ss += std::pow(noisy.at(f, v) - clean.at(f, v) - mean, 2);
        const double emp = std::sqrt(ss / static_cast<double>(nv - 1));
        const double law = noise_sd(clean.at(f, ref), s.duration(f), sigma0);
        CAPTURE(f);
        CHECK(std::abs(emp / law - 1) < 0.1);
        // variance * duration / activity is constant: longer frames, lower variance
        normalized[f] = emp * emp * (s.duration(f) / 60.0) / std::max(clean.at(f, ref), kNoiseActivityFloor);
    }
    for (std::size_t f : {1UL, 20UL, 30UL, 36UL, 41UL})
        CHECK(std::abs(normalized[f] / (sigma0 * sigma0) - 1) < 0.1);
    CHECK(noise_sd(4.0, 120, 0.1) == doctest::Approx(noise_sd(4.0, 60, 0.1) / std::sqrt(2.0)));
}

}
