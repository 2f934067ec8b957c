#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "petkin/aif.hpp"
#include "petkin/kinetics.hpp"

namespace petkin {

/// Axis-aligned ellipsoid in voxel-index coordinates (z, y, x).
struct Ellipsoid {
    std::array<double, 3> center{};
    std::array<double, 3> semi_axes{};

    bool contains(double z, double y, double x) const;
};

struct Region {
    std::string name;
    Ellipsoid shape;
    KineticParams params;
};

/// Labeled ellipsoid phantom. Regions are painted in order, later ones win.
struct PhantomSpec {
    Dims3 dims{32, 32, 32};
    std::vector<Region> regions;
    FengAif aif;
    double noise_sigma0 = 0.0;
    std::uint64_t seed = 0;

    /// Regions inside dims, positive semi-axes, valid params, sigma0 >= 0.
    void validate() const;

    /// Whole-body mouse layout scaled to dims: muscle body envelope with
    /// brain, heart blood pool, liver, kidney and a tumor inside it.
    static PhantomSpec mouse(Dims3 dims = {32, 32, 32});
};

struct Phantom {
    Dims3 dims;
    std::vector<std::int32_t> labels; // 0 background, region i -> i + 1
    std::vector<std::string> region_names;
    ParametricMaps maps;              // mask = labels > 0
    FengAif aif;
    SampledCurve truth_aif;           // sampled at frame mid-times
};

Phantom build_phantom(const PhantomSpec &spec, const FrameSchedule &s);

struct SimulationOptions {
    double dt = kDefaultDt;
    FrameMode mode = FrameMode::FrameAverage;
    int threads = 1;
};

/// Lower floor on activity inside the noise variance, kBq/mL.
inline constexpr double kNoiseActivityFloor = 1e-3;

/// forward_volume of the phantom (input sampled on the fine grid) plus
/// Gaussian noise with sd = sigma0 * sqrt(max(x, floor) / duration_min).
///
/// Every voxel draws from its own stream seeded from (seed, voxel index),
/// consumed in frame order, so output is independent of the worker count.
DynamicImage simulate_scan(const Phantom &ph, const FrameSchedule &s, double noise_sigma0, std::uint64_t seed,
                           const SimulationOptions &opts = {});

/// Noise standard deviation for one voxel-frame.
double noise_sd(double activity, double duration_s, double sigma0);

} // namespace petkin
