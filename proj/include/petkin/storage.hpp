#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "petkin/aif.hpp"
#include "petkin/timegrid.hpp"
#include "petkin/volume.hpp"

namespace petkin {

inline constexpr std::string_view kVolumeMagic = "PETKIN1";

enum class VolumeKind {
    Dynamic, // (t, z, y, x) over a frame schedule
    Maps,    // (4, z, y, x), channels K1, k2, k3, Vb
    Labels,  // (1, z, y, x), integer-valued
    Scalar,  // (1, z, y, x), one named derived quantity (e.g. Ki)
};

std::string_view to_string(VolumeKind k);

struct VolumeHeader {
    VolumeKind kind = VolumeKind::Dynamic;
    std::array<std::size_t, 4> dims{}; // (t|c, z, y, x)
    std::optional<FrameSchedule> schedule;
    std::vector<std::string> channels;
    std::string units;

    std::size_t count() const { return dims[0] * dims[1] * dims[2] * dims[3]; }
    Dims3 spatial() const { return {dims[1], dims[2], dims[3]}; }

    /// Kind-specific consistency; throws ValidationError.
    void validate() const;
};

struct VolumeFile {
    VolumeHeader header;
    std::vector<float> data;
};

/// Writes <dir>/meta.json and <dir>/data.f32 (IEEE-754 binary32,
/// little-endian, C order with the first dims entry slowest).
void write_volume(const std::filesystem::path &dir, const VolumeHeader &header, std::span<const float> data);

/// Validates the header, the payload size and rejects non-finite values.
VolumeFile read_volume(const std::filesystem::path &dir);

void write_dynamic(const std::filesystem::path &dir, const DynamicImage &img);
DynamicImage read_dynamic(const std::filesystem::path &dir);

/// The mask is not stored; maps read back with every voxel marked valid.
void write_maps(const std::filesystem::path &dir, const ParametricMaps &maps);
ParametricMaps read_maps(const std::filesystem::path &dir);

struct LabelVolume {
    Dims3 dims;
    std::vector<std::int32_t> labels;
};

void write_labels(const std::filesystem::path &dir, Dims3 dims, std::span<const std::int32_t> labels);
LabelVolume read_labels(const std::filesystem::path &dir);

void write_scalar(const std::filesystem::path &dir, std::string_view name, std::string_view units, Dims3 dims,
                  std::span<const double> values);

/// Header `time_s,value_kbq_ml`, one sample per row, LF line endings.
void write_aif_csv(const std::filesystem::path &path, const SampledCurve &c);
SampledCurve read_aif_csv(const std::filesystem::path &path);

/// Creates parent directories; throws ValidationError when the file cannot be written.
void write_text_file(const std::filesystem::path &path, std::string_view text);
std::string read_text_file(const std::filesystem::path &path);

} // namespace petkin
