#include "petkin/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "petkin/error.hpp"
#include "petkin/parallel.hpp"

namespace petkin {

namespace {

constexpr double kRateFloor = 1e-6;
constexpr double kLogitEdge = 1e-6;
constexpr double kRankTol = 1e-10;
constexpr int kLlsRefinements = 2;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Smooth unconstrained coordinates for the LM solve. Rates use
// p = exp(theta) on [max(lower, floor), upper], Vb uses a scaled logistic.
struct Reparam {
    std::array<double, 4> lo{};
    std::array<double, 4> hi{};

    explicit Reparam(const FitConfig &cfg) {
        for (int i = 0; i < 3; ++i) {
            lo[i] = std::log(std::max(cfg.bounds[i].lower, kRateFloor));
            hi[i] = std::log(cfg.bounds[i].upper);
        }
        lo[3] = cfg.bounds[3].lower;
        hi[3] = cfg.bounds[3].upper;
    }

    std::array<double, 4> to_theta(const KineticParams &p) const {
        const auto a = p.to_array();
        std::array<double, 4> t{};
        for (int i = 0; i < 3; ++i)
            t[i] = std::clamp(std::log(std::max(a[i], kRateFloor)), lo[i], hi[i]);
        const double s = std::clamp((a[3] - lo[3]) / (hi[3] - lo[3]), kLogitEdge, 1.0 - kLogitEdge);
        t[3] = std::log(s / (1.0 - s));
        return t;
    }

    KineticParams to_params(const std::array<double, 4> &t) const {
        return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2]), lo[3] + (hi[3] - lo[3]) * logistic(t[3])};
    }

    // dp/dtheta
    std::array<double, 4> scale(const std::array<double, 4> &t) const {
        const double s = logistic(t[3]);
        return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2]), (hi[3] - lo[3]) * s * (1.0 - s)};
    }

    void clamp(std::array<double, 4> &t) const {
        for (int i = 0; i < 3; ++i)
            t[i] = std::clamp(t[i], lo[i], hi[i]);
        t[3] = std::clamp(t[3], -30.0, 30.0);
    }

    bool pinned(const std::array<double, 4> &t) const {
        for (int i = 0; i < 3; ++i)
            if (t[i] >= hi[i])
                return true;
        return false;
    }
};

bool all_zero(std::span<const double> tac) {
    return std::all_of(tac.begin(), tac.end(), [](double v) { return v == 0.0; });
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double weighted_sse(std::span<const double> model, std::span<const double> tac, std::span<const double> w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tac.size(); ++i) {
        const double r = model[i] - tac[i];
        acc += w[i] * r * r;
    }
    return acc;
}

// Moves recovered parameters into the configured box. Returns true if
// anything had to change.
bool clamp_to_bounds(KineticParams &p, const FitConfig &cfg) {
    auto a = p.to_array();
    bool changed = false;
    for (int i = 0; i < 4; ++i) {
        double v = std::isfinite(a[i]) ? a[i] : cfg.bounds[i].lower;
        v = std::clamp(v, cfg.bounds[i].lower, cfg.bounds[i].upper);
        if (v != a[i])
            changed = true;
        a[i] = v;
    }
    p = KineticParams::from_array(a);
    if (p.K1 > 0.0 && !(p.k2 + p.k3 > 0.0)) {
        p.k2 = std::max(cfg.bounds[1].lower, kRateFloor);
        changed = true;
    }
    return changed;
}

} // namespace

void FitConfig::validate() const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const auto &b = bounds[i];
        if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || !(b.lower < b.upper)) {
            std::ostringstream msg;
            msg << "bounds for " << kChannelNames[i] << " must satisfy lower < upper";
            throw ValidationError(msg.str());
        }
        if (b.lower < 0.0)
            throw ValidationError("parameter bounds must be non-negative");
        if (i < 3 && b.upper <= kRateFloor)
            throw ValidationError("rate constant upper bound is too small");
    }
    if (bounds[3].upper > 1.0)
        throw ValidationError("Vb upper bound must be <= 1");
    if (max_iter < 1)
        throw ValidationError("max_iter must be >= 1");
    if (!(tol > 0.0))
        throw ValidationError("tol must be > 0");
    if (!(dt > 0.0))
        throw ValidationError("dt must be > 0");
}

std::string_view to_string(FitStatus s) {
    switch (s) {
    case FitStatus::Ok: return "ok";
    case FitStatus::Clamped: return "clamped";
    case FitStatus::Degenerate: return "degenerate";
    case FitStatus::NoSignal: return "no_signal";
    }
    return "unknown";
}

void StatusCounts::add(FitStatus s) {
    switch (s) {
    case FitStatus::Ok: ++ok; break;
    case FitStatus::Clamped: ++clamped; break;
    case FitStatus::Degenerate: ++degenerate; break;
    case FitStatus::NoSignal: ++no_signal; break;
    }
}

LlsCoefficients lls_coefficients(const KineticParams &p) {
    const double alpha = p.k2 + p.k3;
    return {p.Vb, (1.0 - p.Vb) * p.K1 + alpha * p.Vb, (1.0 - p.Vb) * p.K1 * p.k3, -alpha};
}

KineticParams params_from_coefficients(const LlsCoefficients &b) {
    KineticParams p;
    p.Vb = b[0];
    const double alpha = -b[3];
    p.K1 = (b[1] + b[3] * b[0]) / (1.0 - b[0]);
    p.k3 = b[2] / ((1.0 - b[0]) * p.K1);
    p.k2 = alpha - p.k3;
    return p;
}

std::vector<double> frame_weights(const FrameSchedule &s, Weighting w) {
    std::vector<double> out(s.size(), 1.0);
    if (w == Weighting::FrameDuration)
        out = s.durations();
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (auto &v : out)
        v /= total;
    return out;
}

VoxelFitter::VoxelFitter(const SampledCurve &ca, const FrameSchedule &s, const FitConfig &cfg)
    : model_((cfg.validate(), ca), s, cfg.mode, cfg.dt), cfg_(cfg), weights_(frame_weights(s, cfg.weights)) {
    mid_min_ = mid_times(s);
    for (auto &t : mid_min_)
        t /= 60.0;
}

void VoxelFitter::check_tac(std::span<const double> tac) const {
    if (tac.size() != model_.frames()) {
        std::ostringstream msg;
        msg << "TAC has " << tac.size() << " frames, schedule has " << model_.frames();
        throw ValidationError(msg.str());
    }
}

double VoxelFitter::residual_rms(std::span<const double> tac, const KineticParams &p) const {
    check_tac(tac);
    const auto model = model_.frames(p);
    return std::sqrt(weighted_sse(model, tac, weights_));
}

std::vector<double> VoxelFitter::tac_integral(std::span<const double> tac) const {
    const std::size_t n = tac.size();
    std::vector<double> out(n);
    const auto &sched = model_.schedule();
    if (model_.mode() == FrameMode::Midpoint) {
        // Trapezoid through (0, 0) and the mid-time samples.
        double acc = 0.0, t_prev = 0.0, v_prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += 0.5 * (v_prev + tac[i]) * (mid_min_[i] - t_prev);
            out[i] = acc;
            t_prev = mid_min_[i];
            v_prev = tac[i];
        }
        return out;
    }
    // The running integral is known exactly at frame boundaries. Its mean over
    // a frame is I(start) + d*c/2 - g*d^2/12 for a locally linear curve with
    // frame mean c and slope g; g comes from neighbouring frame means.
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = sched.duration(i) / 60.0;
        double slope = 0.0;
        if (n > 1) {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            const std::size_t hi = i + 1 == n ? i : i + 1;
            slope = (tac[hi] - tac[lo]) / (mid_min_[hi] - mid_min_[lo]);
        }
        out[i] = acc + 0.5 * d * tac[i] - slope * d * d / 12.0;
        acc += d * tac[i];
    }
    return out;
}

std::optional<LlsCoefficients> VoxelFitter::solve_lls(std::span<const double> tac,
                                                      std::span<const double> tac_int) const {
    const auto n = static_cast<Eigen::Index>(tac.size());
    const std::array<std::span<const double>, 4> columns{model_.input_frames(), model_.integral_frames(),
                                                         model_.double_integral_frames(), tac_int};
    Eigen::MatrixXd design(n, 4);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double sw = std::sqrt(weights_[k]);
        for (int c = 0; c < 4; ++c)
            design(i, c) = sw * columns[static_cast<std::size_t>(c)][k];
        rhs(i) = sw * tac[k];
    }
    // Column equilibration so the rank test is scale-free.
    const Eigen::Vector4d norms = design.colwise().norm().transpose();
    if (!(norms.minCoeff() > 0.0) || !norms.allFinite())
        return std::nullopt;
    design = design * norms.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(kRankTol);
    if (qr.rank() < 4)
        return std::nullopt;
    const Eigen::Vector4d beta = qr.solve(rhs).cwiseQuotient(norms);
    if (!beta.allFinite())
        return std::nullopt;
    return LlsCoefficients{beta(0), beta(1), beta(2), beta(3)};
}

KineticParams VoxelFitter::recover(const LlsCoefficients &coeffs, bool &clamped) const {
    KineticParams p = params_from_coefficients(coeffs);
    if (!(p.K1 > 0.0) || !std::isfinite(p.K1)) {
        // No identifiable uptake: keep the blood term, drop the kernel.
        p.K1 = 0.0;
        p.k3 = 0.0;
        p.k2 = -coeffs[3];
    }
    clamped = clamp_to_bounds(p, cfg_);
    return p;
}

FitResult VoxelFitter::lls(std::span<const double> tac) const {
    check_tac(tac);
    FitResult res;
    if (all_zero(tac)) {
        res.status = FitStatus::NoSignal;
        return res;
    }
    if (tac.size() < 5)
        throw ValidationError("linearized fit needs at least 5 frames");

    std::optional<LlsCoefficients> coeffs = solve_lls(tac, tac_integral(tac));
    if (!coeffs) {
        res.status = FitStatus::Degenerate;
        res.residual_rms = std::sqrt(weighted_sse(std::vector<double>(tac.size(), 0.0), tac, weights_));
        return res;
    }
    bool clamped = false;
    KineticParams p = recover(*coeffs, clamped);

    // The data-side regressor is only approximate inside long or peaked
    // frames. Re-anchor it on the exact model integral and keep the
    // approximation for the (small) data-model residual.
    std::vector<double> resid(tac.size());
    for (int pass = 0; pass < kLlsRefinements; ++pass) {
        const auto model = model_.frames(p);
        for (std::size_t i = 0; i < tac.size(); ++i)
            resid[i] = tac[i] - model[i];
        std::vector<double> regressor = model_.output_integral_frames(p);
        const std::vector<double> correction = tac_integral(resid);
        for (std::size_t i = 0; i < tac.size(); ++i)
            regressor[i] += correction[i];
        const auto next = solve_lls(tac, regressor);
        if (!next)
            break;
        coeffs = next;
        p = recover(*coeffs, clamped);
    }

    res.lls_coeffs = coeffs;
    res.params = p;
    res.status = clamped ? FitStatus::Clamped : FitStatus::Ok;
    res.ki = ki(p);
    res.residual_rms = residual_rms(tac, p);
    return res;
}

FitResult VoxelFitter::nls(std::span<const double> tac, const KineticParams &init) const {
    check_tac(tac);
    init.validate();
    const auto a = init.to_array();
    for (int i = 0; i < 4; ++i) {
        if (a[i] < cfg_.bounds[i].lower || a[i] > cfg_.bounds[i].upper) {
            std::ostringstream msg;
            msg << "initial " << kChannelNames[i] << " = " << a[i] << " is outside its bounds";
            throw ValidationError(msg.str());
        }
    }

    const std::size_t nf = tac.size();
    FitResult init_res;
    init_res.params = init;
    init_res.ki = ki(init);
    {
        const auto m = model_.frames(init);
        init_res.residual_rms = all_finite(m) ? std::sqrt(weighted_sse(m, tac, weights_))
                                              : std::numeric_limits<double>::infinity();
    }

    const Reparam rp(cfg_);
    std::array<double, 4> theta = rp.to_theta(init);
    std::vector<double> model(nf), jac(4 * nf), trial(nf);
    model_.frames_with_jacobian(rp.to_params(theta), model, jac);
    double cost = weighted_sse(model, tac, weights_);
    if (!std::isfinite(cost)) {
        FitResult res = init_res;
        res.status = FitStatus::Degenerate;
        return res;
    }

    double mu = 1e-3;
    int iter = 0;
    bool converged = false;
    while (iter < cfg_.max_iter && !converged) {
        ++iter;
        const auto dp = rp.scale(theta);
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (std::size_t i = 0; i < nf; ++i) {
            Eigen::Vector4d row;
            for (int c = 0; c < 4; ++c)
                row(c) = jac[4 * i + static_cast<std::size_t>(c)] * dp[static_cast<std::size_t>(c)];
            jtj.noalias() += weights_[i] * row * row.transpose();
            jtr.noalias() += weights_[i] * (model[i] - tac[i]) * row;
        }
        if (cost == 0.0 || jtr.isZero(0.0))
            break;

        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix4d lhs = jtj;
            for (int c = 0; c < 4; ++c)
                lhs(c, c) += mu * (jtj(c, c) + 1e-12 * jtj.trace());
            const Eigen::Vector4d step = lhs.ldlt().solve(-jtr);
            std::array<double, 4> next = theta;
            double max_step = 0.0;
            for (int c = 0; c < 4; ++c)
                next[static_cast<std::size_t>(c)] += step.allFinite() ? step(c) : 0.0;
            rp.clamp(next);
            for (std::size_t c = 0; c < 4; ++c)
                max_step = std::max(max_step, std::abs(next[c] - theta[c]));
            if (max_step < cfg_.tol) {
                converged = true;
                break;
            }
            model_.frames(rp.to_params(next), trial);
            const double trial_cost = weighted_sse(trial, tac, weights_);
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                theta = next;
                cost = trial_cost;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
            } else {
                mu *= 4.0;
                if (mu > 1e12) {
                    converged = true;
                    break;
                }
            }
        }
        if (accepted)
            model_.frames_with_jacobian(rp.to_params(theta), model, jac);
    }

    FitResult res;
    res.params = rp.to_params(theta);
    res.residual_rms = std::sqrt(cost);
    res.iterations = iter;
    if (!(res.residual_rms <= init_res.residual_rms)) {
        // The floored start can sit marginally above the given one.
        init_res.iterations = iter;
        init_res.status = FitStatus::Ok;
        return init_res;
    }
    res.ki = ki(res.params);
    res.status = rp.pinned(theta) ? FitStatus::Clamped : FitStatus::Ok;
    return res;
}

FitResult VoxelFitter::lls_nls(std::span<const double> tac) const {
    FitResult first = lls(tac);
    if (first.status == FitStatus::Degenerate || first.status == FitStatus::NoSignal)
        return first;
    FitResult refined = nls(tac, first.params);
    refined.lls_coeffs = first.lls_coeffs;
    return refined;
}

FitResult lls_fit(std::span<const double> tac, const SampledCurve &ca, const FrameSchedule &s, const FitConfig &cfg) {
    return VoxelFitter(ca, s, cfg).lls(tac);
}

FitResult nls_fit(std::span<const double> tac, const SampledCurve &ca, const FrameSchedule &s,
                  const KineticParams &init, const FitConfig &cfg) {
    return VoxelFitter(ca, s, cfg).nls(tac, init);
}

VolumeFit fit_volume(const DynamicImage &img, const SampledCurve &ca, FitMethod method,
                     std::span<const std::uint8_t> mask, const FitConfig &cfg, int threads) {
    return fit_volume(img, VoxelFitter(ca, img.schedule, cfg), method, mask, threads);
}

VolumeFit fit_volume(const DynamicImage &img, const VoxelFitter &fitter, FitMethod method,
                     std::span<const std::uint8_t> mask, int threads) {
    const std::size_t nv = img.voxels();
    if (!mask.empty() && mask.size() != nv) {
        std::ostringstream msg;
        msg << "mask has " << mask.size() << " voxels, image has " << nv;
        throw ValidationError(msg.str());
    }
    if (!(fitter.model().schedule() == img.schedule))
        throw ValidationError("image frame schedule does not match the fitter schedule");

    VolumeFit out;
    out.maps = ParametricMaps(img.dims);
    std::fill(out.maps.mask.begin(), out.maps.mask.end(), 0);
    out.ki.assign(nv, 0.0);
    out.residual_rms.assign(nv, 0.0);
    out.status.assign(nv, static_cast<std::uint8_t>(FitStatus::NoSignal));
    out.fitted.assign(nv, 0);

    parallel_for(nv, threads, [&](std::size_t v) {
        if (!mask.empty() && !mask[v])
            return;
        const std::vector<double> tac = img.tac(v);
        const FitResult r = method == FitMethod::Lls ? fitter.lls(tac) : fitter.lls_nls(tac);
        out.maps.set(v, r.params);
        out.maps.mask[v] = r.status == FitStatus::Degenerate ? 0 : 1;
        out.ki[v] = r.ki;
        out.residual_rms[v] = r.residual_rms;
        out.status[v] = static_cast<std::uint8_t>(r.status);
        out.fitted[v] = 1;
    });
    for (std::size_t v = 0; v < nv; ++v)
        if (out.fitted[v])
            out.counts.add(static_cast<FitStatus>(out.status[v]));
    return out;
}

} // namespace petkin
