#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "petkin/aif.hpp"
#include "petkin/volume.hpp"

namespace petkin {

/// psnr() result for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10*log10(L^2 / MSE) in dB; kPsnrIdentical when MSE is 0.
double psnr(std::span<const double> a, std::span<const double> b, double max_val);

enum class WindowKind {
    Gaussian,
    Uniform,
};

struct SsimConfig {
    int window = 11;
    WindowKind kind = WindowKind::Gaussian;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0; // L; C1 = (k1 L)^2, C2 = (k2 L)^2

    void validate() const;
};

/// Mean SSIM over every fully-contained window of every axial (y, x) slice.
double ssim(std::span<const double> a, std::span<const double> b, Dims3 dims, const SsimConfig &cfg);

struct AifMetrics {
    double rmse = 0.0;
    double nrmse = 0.0;            // rmse / max(ref)
    double peak_rel_err = 0.0;     // signed
    double peak_time_diff_s = 0.0; // est peak time - ref peak time
    double auc_rel_err = 0.0;      // signed, trapezoid over ref times
};

/// Compares est resampled (interp) onto ref's times. Throws ValidationError
/// when ref is identically zero.
AifMetrics aif_metrics(const SampledCurve &est, const SampledCurve &ref);

struct ChannelScore {
    std::string name;
    double dynamic_range = 0.0;
    double ssim = 0.0;
    double psnr = 0.0;
};

struct MapsScore {
    std::vector<ChannelScore> channels; // K1, k2, k3, Vb, then Ki
    double mean_ssim = 0.0;             // over K1, k2, k3, Vb
    double mean_psnr = 0.0;             // over K1, k2, k3, Vb; infinite if any channel is
};

/// Per-channel SSIM/PSNR of estimated against reference maps. Each channel
/// uses the maximum of its reference volume as L (1 when that is not positive).
/// `base` supplies window and stabilizer settings.
MapsScore score_maps(const ParametricMaps &est, const ParametricMaps &ref, const SsimConfig &base = {});

/// Ki per voxel computed from the map channels (0 where undefined).
std::vector<double> ki_volume(const ParametricMaps &maps);

} // namespace petkin
