#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "petkin/aif.hpp"
#include "petkin/timegrid.hpp"
#include "petkin/volume.hpp"

namespace petkin {

/// How the continuous model curve is reduced to one value per frame.
enum class FrameMode {
    FrameAverage, // mean over [start, end)
    Midpoint,     // sampled at the frame mid-time
};

/// Tissue impulse response K1/(k2+k3) * (k3 + k2*exp(-(k2+k3)*t)), t in seconds
/// (converted to minutes internally). h(0) = K1.
double impulse_response(const KineticParams &p, double t_s);

/// Net influx rate K1*k3/(k2+k3) in 1/min. 0 when K1 = 0.
double ki(const KineticParams &p);

/// Linear map from fine-grid node values to frame values.
///
/// Frame averages integrate the piecewise-linear interpolant of the grid values
/// exactly, so frame boundaries need not coincide with grid nodes.
class FrameOperator {
public:
    FrameOperator(const FrameSchedule &s, const FineGrid &g, FrameMode mode);

    std::size_t frames() const { return rows_.size(); }
    void apply(std::span<const double> grid_values, std::span<double> frames) const;
    std::vector<double> apply(std::span<const double> grid_values) const;

private:
    struct Row {
        std::size_t first = 0;
        std::vector<double> weights;
    };
    std::vector<Row> rows_;
};

/// Running trapezoid integral of grid samples with spacing dt (any unit).
std::vector<double> cumulative_trapezoid(std::span<const double> c, double dt);

/// Trapezoid-rule convolution of exp(-alpha*t) with grid samples c.
///
/// out[j] = dt * sum_k w_k exp(-alpha*(t_j - t_k)) c_k with half weights on the
/// end points, evaluated by a first-order recursion in O(n). When d_alpha is
/// non-empty it receives the derivative of out with respect to alpha, which is
/// the same quadrature applied to -(t_j - t_k) exp(-alpha*(t_j - t_k)).
void exp_convolution(std::span<const double> c, double alpha, double dt, std::span<double> out,
                     std::span<double> d_alpha = {});

/// C_T = h (x) C_A on the grid nodes by trapezoid quadrature.
SampledCurve tissue_response(const KineticParams &p, const SampledCurve &ca, const FineGrid &g);

/// Frame-level forward model for one input function and schedule.
///
/// Holds the input sampled on the fine grid with its frame-discretized forms,
/// so each evaluation costs one O(n) recursion plus the frame reduction.
class ForwardModel {
public:
    ForwardModel(const SampledCurve &ca, const FrameSchedule &s, FrameMode mode = FrameMode::FrameAverage,
                 double dt = kDefaultDt);

    /// Input already sampled on fine_grid(s, dt).
    ForwardModel(std::vector<double> input_on_grid, const FrameSchedule &s, FrameMode mode, double dt);

    std::size_t frames() const { return schedule_.size(); }
    const FrameSchedule &schedule() const { return schedule_; }
    const FineGrid &grid() const { return grid_; }
    FrameMode mode() const { return mode_; }
    const FrameOperator &frame_operator() const { return op_; }

    /// C_A on the grid.
    const std::vector<double> &input() const { return input_; }
    /// C_A per frame.
    const std::vector<double> &input_frames() const { return input_frames_; }
    /// Running integral of C_A per frame, kBq*min/mL.
    const std::vector<double> &integral_frames() const { return integral_frames_; }
    /// Running double integral of C_A per frame, kBq*min^2/mL.
    const std::vector<double> &double_integral_frames() const { return double_integral_frames_; }
    /// Grid nodes where the input had to hold its last sample.
    std::size_t extrapolated() const { return extrapolated_; }

    void frames(const KineticParams &p, std::span<double> out) const;
    std::vector<double> frames(const KineticParams &p) const;

    /// Running integral of the model output C_PET reduced to frames, kBq*min/mL.
    std::vector<double> output_integral_frames(const KineticParams &p) const;

    /// Frame values plus their derivatives with respect to (K1, k2, k3, Vb),
    /// stored row-major as jac[frame * 4 + param].
    void frames_with_jacobian(const KineticParams &p, std::span<double> out, std::span<double> jac) const;

private:
    void init();

    FrameSchedule schedule_;
    FineGrid grid_;
    FrameMode mode_;
    FrameOperator op_;
    std::vector<double> input_;
    std::vector<double> integral_;
    std::vector<double> input_frames_;
    std::vector<double> integral_frames_;
    std::vector<double> double_integral_frames_;
    std::size_t extrapolated_ = 0;
};

/// C_PET = Vb*C_A + (1 - Vb)*C_T reduced to frames.
std::vector<double> forward_model(const KineticParams &p, const SampledCurve &ca, const FrameSchedule &s,
                                  FrameMode mode = FrameMode::FrameAverage, double dt = kDefaultDt);

struct ForwardOptions {
    FrameMode mode = FrameMode::FrameAverage;
    double dt = kDefaultDt;
    int threads = 1;
};

/// Independent forward_model per masked voxel; unmasked voxels stay 0.
/// Output does not depend on the worker count.
DynamicImage forward_volume(const ParametricMaps &maps, const SampledCurve &ca, const FrameSchedule &s,
                            const ForwardOptions &opts = {});

} // namespace petkin
