#include "petkin/aif.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "petkin/error.hpp"

namespace petkin {

SampledCurve::SampledCurve(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
        throw ValidationError("curve times and values differ in length");
    if (times_.size() < 2)
        throw ValidationError("curve needs at least two samples");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i]) || !std::isfinite(values_[i]))
            throw ValidationError("curve contains non-finite samples");
        if (values_[i] < 0.0) {
            std::ostringstream msg;
            msg << "curve value at t=" << times_[i] << " s is negative (" << values_[i] << ")";
            throw ValidationError(msg.str());
        }
        if (i > 0 && !(times_[i] > times_[i - 1]))
            throw ValidationError("curve times must be strictly increasing");
    }
}

double SampledCurve::interp(double t, std::size_t *extrapolated) const {
    if (times_.empty() || t < times_.front())
        return 0.0;
    if (t >= times_.back()) {
        if (t > times_.back() && extrapolated)
            ++*extrapolated;
        return values_.back();
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    const std::size_t lo = hi - 1;
    const double f = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return values_[lo] + f * (values_[hi] - values_[lo]);
}

std::vector<double> SampledCurve::on_grid(const FineGrid &g, std::size_t *extrapolated) const {
    std::vector<double> out(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        out[j] = interp(g.time(j), extrapolated);
    return out;
}

SampledCurve cumulative_integral(const SampledCurve &c) {
    const auto &t = c.times();
    const auto &v = c.values();
    std::vector<double> acc(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i)
        acc[i] = acc[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return SampledCurve(t, std::move(acc));
}

void FengAif::validate() const {
    const bool finite = std::isfinite(tau_s) && std::isfinite(a1) && std::isfinite(a2) && std::isfinite(a3) &&
                        std::isfinite(l1) && std::isfinite(l2) && std::isfinite(l3);
    if (!finite)
        throw ValidationError("Feng AIF parameters must be finite");
    if (!(l1 < l2 && l2 < l3 && l3 < 0.0)) {
        std::ostringstream msg;
        msg << "Feng AIF needs l1 < l2 < l3 < 0, got " << l1 << ", " << l2 << ", " << l3;
        throw ValidationError(msg.str());
    }
    if (!(a1 > 0.0) || a2 < 0.0 || a3 < 0.0)
        throw ValidationError("Feng AIF needs a1 > 0 and a2, a3 >= 0");
    if (tau_s < 0.0)
        throw ValidationError("Feng AIF onset delay must be >= 0");
}

std::array<double, kFengParamCount> to_array(const FengAif &p) {
    return {p.tau_s, p.a1, p.a2, p.a3, p.l1, p.l2, p.l3};
}

FengAif feng_from_array(const std::array<double, kFengParamCount> &v) {
    return FengAif{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

double feng_eval(const FengAif &p, double t_s, bool *clamped) {
    p.validate();
    if (t_s <= p.tau_s)
        return 0.0;
    const double u = (t_s - p.tau_s) / 60.0;
    const double value = (p.a1 * u - p.a2 - p.a3) * std::exp(p.l1 * u) + p.a2 * std::exp(p.l2 * u) +
                         p.a3 * std::exp(p.l3 * u);
    if (value < 0.0) {
        if (clamped)
            *clamped = true;
        return 0.0;
    }
    return value;
}

std::array<double, kFengParamCount> feng_gradient(const FengAif &p, double t_s) {
    std::array<double, kFengParamCount> g{};
    if (t_s <= p.tau_s)
        return g;
    const double u = (t_s - p.tau_s) / 60.0;
    const double e1 = std::exp(p.l1 * u);
    const double e2 = std::exp(p.l2 * u);
    const double e3 = std::exp(p.l3 * u);
    const double lead = p.a1 * u - p.a2 - p.a3;
    const double dfdu = p.a1 * e1 + lead * p.l1 * e1 + p.a2 * p.l2 * e2 + p.a3 * p.l3 * e3;
    g[0] = -dfdu / 60.0;
    g[1] = u * e1;
    g[2] = e2 - e1;
    g[3] = e3 - e1;
    g[4] = lead * u * e1;
    g[5] = p.a2 * u * e2;
    g[6] = p.a3 * u * e3;
    return g;
}

SampledCurve sample_feng(const FengAif &p, std::span<const double> times_s) {
    p.validate();
    std::vector<double> t(times_s.begin(), times_s.end());
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        v[i] = feng_eval(p, t[i]);
    return SampledCurve(std::move(t), std::move(v));
}

SampledCurve sample_feng(const FengAif &p, const FineGrid &g) {
    std::vector<double> t(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        t[j] = g.time(j);
    return sample_feng(p, t);
}

} // namespace petkin
