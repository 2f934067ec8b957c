#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "petkin/timegrid.hpp"

namespace petkin {

/// Piecewise-linear curve over strictly increasing times (seconds).
///
/// Used for the arterial input function as well as tissue and voxel TACs.
/// Values are activity concentrations (kBq/mL) and must be non-negative.
class SampledCurve {
public:
    SampledCurve() = default;
    SampledCurve(std::vector<double> times, std::vector<double> values);

    const std::vector<double> &times() const { return times_; }
    const std::vector<double> &values() const { return values_; }
    std::size_t size() const { return times_.size(); }

    /// 0 before the first sample, linear inside, last value held afterwards.
    /// Each held (extrapolated) evaluation increments *extrapolated when given.
    double interp(double t, std::size_t *extrapolated = nullptr) const;

    /// Evaluates at every node of the grid, counting held evaluations.
    std::vector<double> on_grid(const FineGrid &g, std::size_t *extrapolated = nullptr) const;

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Running trapezoid integral on the curve's own nodes (kBq*s/mL); first value 0.
SampledCurve cumulative_integral(const SampledCurve &c);

/// Tri-exponential input function with onset delay.
///
/// For u = (t - tau)/60 min > 0:
///   (A1*u - A2 - A3)*exp(l1*u) + A2*exp(l2*u) + A3*exp(l3*u)
/// and 0 before the onset.
struct FengAif {
    double tau_s = 30.0;
    double a1 = 800.0; // kBq/mL/min
    double a2 = 20.0;  // kBq/mL
    double a3 = 20.0;  // kBq/mL
    double l1 = -4.0;  // 1/min
    double l2 = -0.1;
    double l3 = -0.01;

    /// Throws ValidationError unless l1 < l2 < l3 < 0, a1 > 0, a2, a3, tau >= 0.
    void validate() const;

    bool operator==(const FengAif &) const = default;
};

inline constexpr std::size_t kFengParamCount = 7;

/// Parameter vector order: tau_s, a1, a2, a3, l1, l2, l3.
std::array<double, kFengParamCount> to_array(const FengAif &p);
FengAif feng_from_array(const std::array<double, kFengParamCount> &v);

/// Negative formula values are clamped to 0 and reported through *clamped.
double feng_eval(const FengAif &p, double t_s, bool *clamped = nullptr);

/// Partial derivatives of the unclamped formula with respect to the seven
/// parameters, in to_array order. All zero before the onset.
std::array<double, kFengParamCount> feng_gradient(const FengAif &p, double t_s);

SampledCurve sample_feng(const FengAif &p, std::span<const double> times_s);

/// Samples on every grid node. Both fitting and simulation use this so the
/// same parameters always produce the same discrete input.
SampledCurve sample_feng(const FengAif &p, const FineGrid &g);

} // namespace petkin
