#include "petkin/phantom.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "petkin/error.hpp"
#include "petkin/parallel.hpp"

namespace petkin {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Layout {
    const char *name;
    std::array<double, 3> center; // fraction of (dim - 1)
    std::array<double, 3> axes;   // fraction of dim
    KineticParams params;
};

// Simulation defaults spanning identifiable regimes of the irreversible model.
constexpr std::array<Layout, 6> kMouseLayout{{
    {"muscle", {0.50, 0.50, 0.50}, {0.44, 0.28, 0.30}, {0.1, 0.25, 0.03, 0.05}},
    {"brain", {0.14, 0.50, 0.50}, {0.08, 0.14, 0.14}, {0.3, 0.5, 0.06, 0.04}},
    {"heart", {0.34, 0.45, 0.45}, {0.08, 0.10, 0.10}, {0.1, 0.1, 0.01, 0.9}},
    {"liver", {0.50, 0.52, 0.58}, {0.10, 0.15, 0.17}, {0.6, 0.9, 0.05, 0.2}},
    {"kidney", {0.66, 0.60, 0.36}, {0.07, 0.08, 0.08}, {0.8, 1.2, 0.02, 0.25}},
    {"tumor", {0.80, 0.38, 0.66}, {0.08, 0.08, 0.08}, {0.5, 0.4, 0.12, 0.1}},
}};

} // namespace

bool Ellipsoid::contains(double z, double y, double x) const {
    const double dz = (z - center[0]) / semi_axes[0];
    const double dy = (y - center[1]) / semi_axes[1];
    const double dx = (x - center[2]) / semi_axes[2];
    return dz * dz + dy * dy + dx * dx <= 1.0;
}

void PhantomSpec::validate() const {
    if (dims.count() == 0)
        throw ValidationError("phantom dims must be positive");
    if (!(noise_sigma0 >= 0.0) || !std::isfinite(noise_sigma0))
        throw ValidationError("noise_sigma0 must be >= 0");
    aif.validate();
    const std::array<double, 3> extent{static_cast<double>(dims.z), static_cast<double>(dims.y),
                                       static_cast<double>(dims.x)};
    for (const auto &r : regions) {
        for (int a = 0; a < 3; ++a) {
            const double c = r.shape.center[a];
            const double h = r.shape.semi_axes[a];
            if (!(h > 0.0))
                throw ValidationError("region '" + r.name + "' needs positive semi-axes");
            if (c - h < -0.5 || c + h > extent[a] - 0.5) {
                std::ostringstream msg;
                msg << "region '" << r.name << "' extends outside the " << dims.z << "x" << dims.y << "x" << dims.x
                    << " volume";
                throw ValidationError(msg.str());
            }
        }
        try {
            r.params.validate();
        } catch (const ValidationError &e) {
            throw ValidationError("region '" + r.name + "': " + e.what());
        }
    }
}

PhantomSpec PhantomSpec::mouse(Dims3 dims) {
    PhantomSpec spec;
    spec.dims = dims;
    const std::array<double, 3> extent{static_cast<double>(dims.z), static_cast<double>(dims.y),
                                       static_cast<double>(dims.x)};
    for (const auto &l : kMouseLayout) {
        Region r;
        r.name = l.name;
        for (int a = 0; a < 3; ++a) {
            r.shape.center[a] = l.center[a] * (extent[a] - 1.0);
            r.shape.semi_axes[a] = l.axes[a] * extent[a];
        }
        r.params = l.params;
        spec.regions.push_back(r);
    }
    return spec;
}

Phantom build_phantom(const PhantomSpec &spec, const FrameSchedule &s) {
    spec.validate();
    Phantom ph;
    ph.dims = spec.dims;
    ph.labels.assign(spec.dims.count(), 0);
    ph.maps = ParametricMaps(spec.dims);
    ph.aif = spec.aif;
    for (const auto &r : spec.regions)
        ph.region_names.push_back(r.name);

    const Dims3 d = spec.dims;
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
                const std::size_t v = d.index(z, y, x);
                for (std::size_t i = 0; i < spec.regions.size(); ++i)
                    if (spec.regions[i].shape.contains(static_cast<double>(z), static_cast<double>(y),
                                                       static_cast<double>(x)))
                        ph.labels[v] = static_cast<std::int32_t>(i + 1);
            }
    for (std::size_t v = 0; v < d.count(); ++v) {
        const std::int32_t l = ph.labels[v];
        ph.maps.mask[v] = l > 0 ? 1 : 0;
        if (l > 0)
            ph.maps.set(v, spec.regions[static_cast<std::size_t>(l - 1)].params);
    }
    ph.truth_aif = s.size() >= 2 ? sample_feng(spec.aif, mid_times(s)) : SampledCurve{};
    return ph;
}

double noise_sd(double activity, double duration_s, double sigma0) {
    return sigma0 * std::sqrt(std::max(activity, kNoiseActivityFloor) / (duration_s / 60.0));
}

DynamicImage simulate_scan(const Phantom &ph, const FrameSchedule &s, double noise_sigma0, std::uint64_t seed,
                           const SimulationOptions &opts) {
    if (!(noise_sigma0 >= 0.0))
        throw ValidationError("noise_sigma0 must be >= 0");
    const SampledCurve input = sample_feng(ph.aif, fine_grid(s, opts.dt));
    DynamicImage img = forward_volume(ph.maps, input, s, {opts.mode, opts.dt, opts.threads});
    if (noise_sigma0 == 0.0)
        return img;

    const std::size_t nf = s.size();
    parallel_for(img.voxels(), opts.threads, [&](std::size_t v) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(v))));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t f = 0; f < nf; ++f) {
            double &x = img.at(f, v);
            x += noise_sd(x, s.duration(f), noise_sigma0) * normal(rng);
        }
    });
    return img;
}

} // namespace petkin
