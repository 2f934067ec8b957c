#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "petkin/timegrid.hpp"

namespace petkin {

/// Spatial extent, slowest axis first (axial z, coronal y, sagittal x).
struct Dims3 {
    std::size_t z = 0;
    std::size_t y = 0;
    std::size_t x = 0;

    std::size_t count() const { return z * y * x; }
    std::size_t index(std::size_t iz, std::size_t iy, std::size_t ix) const { return (iz * y + iy) * x + ix; }
    bool operator==(const Dims3 &) const = default;
};

/// Irreversible two-tissue compartment rate constants.
/// K1 in mL/min/mL, k2 and k3 in 1/min, Vb dimensionless.
struct KineticParams {
    double K1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double Vb = 0.0;

    /// Non-negative rates, Vb in [0, 1], and k2 + k3 > 0 whenever K1 > 0.
    /// Throws ValidationError.
    void validate() const;

    std::array<double, 4> to_array() const { return {K1, k2, k3, Vb}; }
    static KineticParams from_array(const std::array<double, 4> &a) { return {a[0], a[1], a[2], a[3]}; }
    bool operator==(const KineticParams &) const = default;
};

/// Canonical channel order for parameter maps on disk and in memory.
inline constexpr std::array<std::string_view, 4> kChannelNames{"K1", "k2", "k3", "Vb"};

/// Four 3D volumes (K1, k2, k3, Vb) with a per-voxel validity mask.
struct ParametricMaps {
    Dims3 dims;
    std::array<std::vector<double>, 4> channels;
    std::vector<std::uint8_t> mask;

    ParametricMaps() = default;
    /// Zero-filled channels, every voxel marked valid.
    explicit ParametricMaps(Dims3 d);

    std::size_t voxels() const { return dims.count(); }
    KineticParams at(std::size_t v) const;
    void set(std::size_t v, const KineticParams &p);

    /// Checks channel sizes and KineticParams invariants under the mask.
    void validate() const;
};

/// 4D activity (kBq/mL) over a frame schedule, stored frame-major (t, z, y, x).
struct DynamicImage {
    FrameSchedule schedule;
    Dims3 dims;
    std::vector<double> values;

    DynamicImage() = default;
    DynamicImage(FrameSchedule s, Dims3 d);

    std::size_t frames() const { return schedule.size(); }
    std::size_t voxels() const { return dims.count(); }
    double at(std::size_t frame, std::size_t voxel) const { return values[frame * voxels() + voxel]; }
    double &at(std::size_t frame, std::size_t voxel) { return values[frame * voxels() + voxel]; }

    std::vector<double> tac(std::size_t voxel) const;
    void set_tac(std::size_t voxel, std::span<const double> tac);
};

} // namespace petkin
