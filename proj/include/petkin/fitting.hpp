#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "petkin/kinetics.hpp"

namespace petkin {

enum class Weighting {
    Uniform,
    FrameDuration, // w_i = duration_i / sum(durations)
};

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

struct FitConfig {
    Weighting weights = Weighting::FrameDuration;
    /// Per-parameter box in (K1, k2, k3, Vb) order.
    std::array<Bounds, 4> bounds{{{0.0, 5.0}, {0.0, 5.0}, {0.0, 5.0}, {0.0, 1.0}}};
    int max_iter = 100;
    double tol = 1e-6;
    double dt = kDefaultDt;
    FrameMode mode = FrameMode::FrameAverage;

    /// Throws ValidationError for inverted or out-of-domain bounds, max_iter < 1, tol <= 0.
    void validate() const;
};

enum class FitStatus : std::uint8_t {
    Ok = 0,
    Clamped = 1,
    Degenerate = 2,
    NoSignal = 3,
};

std::string_view to_string(FitStatus s);

/// Coefficients of C_PET = b0*C_A + b1*int(C_A) + b2*int(int(C_A)) + b3*int(C_PET),
/// integrals in minutes.
using LlsCoefficients = std::array<double, 4>;

struct FitResult {
    KineticParams params;
    double ki = 0.0;
    double residual_rms = 0.0; // weighted RMS of forward_model(params) - tac
    FitStatus status = FitStatus::Ok;
    std::optional<LlsCoefficients> lls_coeffs;
    int iterations = 0;
};

/// b0 = Vb, b1 = (1-Vb)K1 + (k2+k3)Vb, b2 = (1-Vb)K1k3, b3 = -(k2+k3).
LlsCoefficients lls_coefficients(const KineticParams &p);

/// Inverse of lls_coefficients without any bounds handling; the result can
/// be non-physical or non-finite for noisy coefficients.
KineticParams params_from_coefficients(const LlsCoefficients &b);

/// Normalized so the weights sum to 1.
std::vector<double> frame_weights(const FrameSchedule &s, Weighting w);

/// Per-voxel fitting against one input function.
///
/// Holds the forward model and the LLS basis, so one instance serves every
/// voxel of a volume. All methods are const and safe to call concurrently.
class VoxelFitter {
public:
    VoxelFitter(const SampledCurve &ca, const FrameSchedule &s, const FitConfig &cfg);

    const ForwardModel &model() const { return model_; }
    const FitConfig &config() const { return cfg_; }
    const std::vector<double> &weights() const { return weights_; }

    /// Double-integration linearized least squares.
    FitResult lls(std::span<const double> tac) const;

    /// Levenberg-Marquardt on the weighted residuals of the forward model,
    /// with log (K1, k2, k3) and logit (Vb) reparameterization.
    FitResult nls(std::span<const double> tac, const KineticParams &init) const;

    /// LLS, then NLS started from the (bounded) LLS estimate.
    FitResult lls_nls(std::span<const double> tac) const;

    double residual_rms(std::span<const double> tac, const KineticParams &p) const;

    /// Frame-averaged running integral of the measured curve (kBq*min/mL),
    /// the data-side regressor of the linearized model.
    std::vector<double> tac_integral(std::span<const double> tac) const;

private:
    void check_tac(std::span<const double> tac) const;
    std::optional<LlsCoefficients> solve_lls(std::span<const double> tac, std::span<const double> tac_int) const;
    KineticParams recover(const LlsCoefficients &coeffs, bool &clamped) const;

    ForwardModel model_;
    FitConfig cfg_;
    std::vector<double> weights_;
    std::vector<double> mid_min_;
};

FitResult lls_fit(std::span<const double> tac, const SampledCurve &ca, const FrameSchedule &s, const FitConfig &cfg);
FitResult nls_fit(std::span<const double> tac, const SampledCurve &ca, const FrameSchedule &s,
                  const KineticParams &init, const FitConfig &cfg);

enum class FitMethod {
    Lls,
    LlsNls,
};

struct StatusCounts {
    std::size_t ok = 0;
    std::size_t clamped = 0;
    std::size_t degenerate = 0;
    std::size_t no_signal = 0;

    std::size_t fitted() const { return ok + clamped + degenerate + no_signal; }
    void add(FitStatus s);
};

struct VolumeFit {
    ParametricMaps maps;                // mask set where a usable fit exists
    std::vector<double> ki;             // per voxel, 1/min
    std::vector<double> residual_rms;   // per voxel
    std::vector<std::uint8_t> status;   // FitStatus per voxel; unmasked voxels NoSignal
    std::vector<std::uint8_t> fitted;   // 1 where a fit was attempted
    StatusCounts counts;
};

/// Independent fits for every voxel selected by mask (empty mask = all voxels).
VolumeFit fit_volume(const DynamicImage &img, const SampledCurve &ca, FitMethod method,
                     std::span<const std::uint8_t> mask, const FitConfig &cfg, int threads = 1);

/// Same, reusing an existing fitter (its schedule must match the image).
VolumeFit fit_volume(const DynamicImage &img, const VoxelFitter &fitter, FitMethod method,
                     std::span<const std::uint8_t> mask, int threads = 1);

} // namespace petkin
