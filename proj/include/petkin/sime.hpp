#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "petkin/aif.hpp"
#include "petkin/fitting.hpp"

namespace petkin {

enum class AifModel {
    Feng,
    SampledSmooth, // reserved; rejected by sime_estimate
};

enum class Anchor {
    PeakNormalization,
    BloodRoi,
};

struct SimeConfig {
    AifModel aif_model = AifModel::Feng;
    int n_outer = 10;
    /// >= 1: voxel count; in (0, 1): fraction of the eligible voxels.
    double voxel_subsample = 500;
    /// Unset: blood-roi when a blood mask is given, else peak-normalization.
    std::optional<Anchor> anchor;
    FengAif init_aif;
    FitConfig fit_cfg;
    std::uint64_t seed = 0;
    /// Blood volume fraction assumed for the anchor region (the blood ROI
    /// mean, or the hottest voxel under peak normalization).
    double blood_fraction = 1.0;
    /// Keep init_aif fixed and only fit the maps.
    bool freeze_aif = false;
    int aif_max_iter = 50;

    void validate() const;
};

struct SimeResult {
    FengAif aif;
    SampledCurve aif_mid;    // at frame mid-times
    VolumeFit fit;           // final pass over every masked voxel
    std::vector<double> objective_trace; // pooled weighted SSE after each outer iteration
    std::vector<std::size_t> subsample;  // voxel indices, ascending
    Anchor anchor = Anchor::PeakNormalization;
    int outer_iterations = 0;
};

/// Pooled weighted SSE above which an outer iteration counts as an increase,
/// relative to the weighted energy of the subsampled TACs.
inline constexpr double kSimeMonotoneTol = 1e-9;

/// Alternates per-voxel fits on a seeded subsample with LM updates of the
/// Feng parameters on the pooled residuals, anchoring the scale after each
/// update, then fits every masked voxel with the final input function.
///
/// Throws ValidationError for bad configs or too few voxels and NumericError
/// when the objective increases between outer iterations.
SimeResult sime_estimate(const DynamicImage &img, std::span<const std::uint8_t> mask, const SimeConfig &cfg,
                         std::span<const std::uint8_t> blood_mask = {}, int threads = 1);

} // namespace petkin
