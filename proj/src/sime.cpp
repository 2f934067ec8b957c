#include "petkin/sime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "petkin/error.hpp"
#include "petkin/parallel.hpp"

namespace petkin {

namespace {

constexpr double kAmplitudeFloor = 1e-12;
constexpr double kAifStepTol = 1e-10;
constexpr double kMaxDamping = 1e12;

using Theta = Eigen::Matrix<double, 7, 1>;

// Unconstrained coordinates for the Feng family: tau directly (clamped to be
// non-negative), log amplitudes, and log gaps between the ordered exponents.
Theta to_theta(const FengAif &p) {
    Theta t;
    t << p.tau_s, std::log(std::max(p.a1, kAmplitudeFloor)), std::log(std::max(p.a2, kAmplitudeFloor)),
        std::log(std::max(p.a3, kAmplitudeFloor)), std::log(p.l2 - p.l1), std::log(p.l3 - p.l2), std::log(-p.l3);
    return t;
}

FengAif from_theta(const Theta &t) {
    FengAif p;
    p.tau_s = std::max(t[0], 0.0);
    p.a1 = std::exp(t[1]);
    p.a2 = std::exp(t[2]);
    p.a3 = std::exp(t[3]);
    p.l3 = -std::exp(t[6]);
    p.l2 = p.l3 - std::exp(t[5]);
    p.l1 = p.l2 - std::exp(t[4]);
    return p;
}

// Grid derivatives of the sampled input with respect to theta.
std::array<std::vector<double>, 7> input_derivatives(const FengAif &p, const FineGrid &g) {
    std::array<std::vector<double>, 7> d;
    for (auto &v : d)
        v.assign(g.n, 0.0);
    for (std::size_t j = 0; j < g.n; ++j) {
        const double t = g.time(j);
        bool clamped = false;
        if (feng_eval(p, t, &clamped) <= 0.0 || clamped)
            continue;
        const auto gr = feng_gradient(p, t);
        d[0][j] = gr[0];
        d[1][j] = p.a1 * gr[1];
        d[2][j] = p.a2 * gr[2];
        d[3][j] = p.a3 * gr[3];
        d[4][j] = (p.l1 - p.l2) * gr[4];
        d[5][j] = (p.l2 - p.l3) * (gr[4] + gr[5]);
        d[6][j] = p.l3 * (gr[4] + gr[5] + gr[6]);
    }
    return d;
}

struct Problem {
    const FrameSchedule &schedule;
    FineGrid grid;
    const FitConfig &cfg;
    std::vector<double> weights;
    std::vector<std::vector<double>> tacs;
    int threads = 1;

    ForwardModel model(const FengAif &aif) const {
        return ForwardModel(sample_feng(aif, grid).values(), schedule, cfg.mode, cfg.dt);
    }

    double sse(const ForwardModel &m, const std::vector<double> &tac, const KineticParams &p) const {
        const auto f = m.frames(p);
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            acc += weights[i] * (f[i] - tac[i]) * (f[i] - tac[i]);
        return acc;
    }

    // Per-voxel terms are computed independently and summed in index order.
    double objective(const ForwardModel &m, const std::vector<KineticParams> &params) const {
        std::vector<double> terms(tacs.size());
        parallel_for(tacs.size(), threads, [&](std::size_t i) { terms[i] = sse(m, tacs[i], params[i]); });
        double acc = 0.0;
        for (double t : terms)
            acc += t;
        return std::isfinite(acc) ? acc : std::numeric_limits<double>::infinity();
    }
};

KineticParams clamp_to_bounds(KineticParams p, const FitConfig &cfg) {
    auto a = p.to_array();
    for (int i = 0; i < 4; ++i)
        a[i] = std::clamp(a[i], cfg.bounds[i].lower, cfg.bounds[i].upper);
    return KineticParams::from_array(a);
}

bool usable_init(const KineticParams &p) { return !(p.K1 > 0.0 && !(p.k2 + p.k3 > 0.0)); }

// Step (a): refit every subsampled voxel under the current input function,
// keeping the better of a warm start and a fresh linearized start.
void fit_subsample(const Problem &pr, const FengAif &aif, std::vector<KineticParams> &params, bool warm) {
    const VoxelFitter fitter(sample_feng(aif, pr.grid), pr.schedule, pr.cfg);
    parallel_for(pr.tacs.size(), pr.threads, [&](std::size_t i) {
        const auto &tac = pr.tacs[i];
        FitResult best = fitter.lls_nls(tac);
        if (warm) {
            const KineticParams init = clamp_to_bounds(params[i], pr.cfg);
            if (usable_init(init)) {
                const FitResult w = fitter.nls(tac, init);
                if (!(w.residual_rms > best.residual_rms))
                    best = w;
            }
        }
        params[i] = best.params;
    });
}

// Step (b): Levenberg-Marquardt on the Feng parameters with voxel parameters fixed.
FengAif update_aif(const Problem &pr, const FengAif &start, const std::vector<KineticParams> &params, int max_iter) {
    const std::size_t nf = pr.schedule.size();
    const std::size_t nv = pr.tacs.size();
    const double tau_max = pr.schedule.end_time();

    FengAif best = start;
    Theta theta = to_theta(start);
    double cost = pr.objective(pr.model(best), params);
    double mu = 1e-3;

    Eigen::Matrix<double, 7, 7> jtj;
    Theta jtr;
    bool need_jacobian = true;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (need_jacobian) {
            const ForwardModel base = pr.model(best);
            const auto dinput = input_derivatives(best, pr.grid);
            std::vector<ForwardModel> dmodels;
            dmodels.reserve(7);
            for (const auto &d : dinput)
                dmodels.emplace_back(d, pr.schedule, pr.cfg.mode, pr.cfg.dt);

            std::vector<Eigen::Matrix<double, 7, 7>> part_jtj(nv);
            std::vector<Theta> part_jtr(nv);
            parallel_for(nv, pr.threads, [&](std::size_t v) {
                const auto f = base.frames(params[v]);
                Eigen::MatrixXd j(nf, 7);
                for (int k = 0; k < 7; ++k) {
                    const auto col = dmodels[static_cast<std::size_t>(k)].frames(params[v]);
                    for (std::size_t i = 0; i < nf; ++i)
                        j(static_cast<Eigen::Index>(i), k) = col[i];
                }
                Eigen::VectorXd r(nf);
                for (std::size_t i = 0; i < nf; ++i) {
                    const double sw = std::sqrt(pr.weights[i]);
                    r[static_cast<Eigen::Index>(i)] = sw * (f[i] - pr.tacs[v][i]);
                    j.row(static_cast<Eigen::Index>(i)) *= sw;
                }
                part_jtj[v] = j.transpose() * j;
                part_jtr[v] = j.transpose() * r;
            });
            jtj.setZero();
            jtr.setZero();
            for (std::size_t v = 0; v < nv; ++v) {
                jtj += part_jtj[v];
                jtr += part_jtr[v];
            }
            need_jacobian = false;
        }

        Eigen::Matrix<double, 7, 7> a = jtj;
        for (int k = 0; k < 7; ++k)
            a(k, k) += mu * std::max(jtj(k, k), 1e-12);
        const Theta step = a.ldlt().solve(-jtr);
        if (!step.allFinite()) {
            mu *= 10.0;
            if (mu > kMaxDamping)
                break;
            continue;
        }
        Theta trial = theta + step;
        trial[0] = std::clamp(trial[0], 0.0, tau_max);
        const FengAif cand = from_theta(trial);
        const double c = pr.objective(pr.model(cand), params);
        if (c < cost) {
            const double moved = (trial - theta).cwiseAbs().maxCoeff();
            theta = trial;
            best = cand;
            cost = c;
            mu = std::max(mu / 10.0, 1e-12);
            need_jacobian = true;
            if (moved < kAifStepTol)
                break;
        } else {
            mu *= 10.0;
            if (mu > kMaxDamping)
                break;
        }
    }
    return best;
}

std::vector<double> mean_tac(const DynamicImage &img, std::span<const std::uint8_t> roi) {
    std::vector<double> out(img.frames(), 0.0);
    std::size_t n = 0;
    for (std::size_t v = 0; v < img.voxels(); ++v) {
        if (!roi[v])
            continue;
        ++n;
        for (std::size_t f = 0; f < img.frames(); ++f)
            out[f] += img.at(f, v);
    }
    if (n == 0)
        throw ValidationError("blood ROI mask selects no voxels");
    for (auto &x : out)
        x /= static_cast<double>(n);
    return out;
}

// Scale that makes the anchor curve's fitted blood fraction equal the
// configured one. Returns 1 when the anchor carries no blood signal.
double anchor_scale(const Problem &pr, const FengAif &aif, const std::vector<double> &anchor_tac,
                    double blood_fraction) {
    const VoxelFitter fitter(sample_feng(aif, pr.grid), pr.schedule, pr.cfg);
    const FitResult r = fitter.lls_nls(anchor_tac);
    if (r.status == FitStatus::Degenerate || r.status == FitStatus::NoSignal || !(r.params.Vb > 0.0))
        return 1.0;
    return r.params.Vb / blood_fraction;
}

// Scaling the input by s leaves every model curve unchanged when
// Vb' = Vb/s and (1 - Vb')K1' s = (1 - Vb)K1.
KineticParams rescale_params(const KineticParams &p, double s) {
    KineticParams q = p;
    q.Vb = p.Vb / s;
    if (q.Vb < 1.0)
        q.K1 = (1.0 - p.Vb) * p.K1 / ((1.0 - q.Vb) * s);
    return q;
}

std::vector<std::size_t> choose_subsample(const std::vector<std::size_t> &eligible, std::size_t n,
                                          std::uint64_t seed) {
    std::vector<std::size_t> pool = eligible;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

} // namespace

void SimeConfig::validate() const {
    if (n_outer < 1)
        throw ValidationError("sime n_outer must be >= 1");
    if (!(voxel_subsample > 0.0) || !std::isfinite(voxel_subsample))
        throw ValidationError("sime voxel_subsample must be > 0");
    if (voxel_subsample >= 1.0 && voxel_subsample != std::floor(voxel_subsample))
        throw ValidationError("sime voxel_subsample must be a whole count or a fraction below 1");
    if (!(blood_fraction > 0.0) || blood_fraction > 1.0)
        throw ValidationError("sime blood_fraction must be in (0, 1]");
    if (aif_max_iter < 1)
        throw ValidationError("sime aif_max_iter must be >= 1");
    init_aif.validate();
    fit_cfg.validate();
}

SimeResult sime_estimate(const DynamicImage &img, std::span<const std::uint8_t> mask, const SimeConfig &cfg,
                         std::span<const std::uint8_t> blood_mask, int threads) {
    cfg.validate();
    if (cfg.aif_model != AifModel::Feng)
        throw ValidationError("sime aif_model 'sampled-with-smoothness' is not implemented; use 'feng'");
    const std::size_t nv = img.voxels();
    if (!mask.empty() && mask.size() != nv)
        throw ValidationError("sime mask does not match the image dimensions");
    if (!blood_mask.empty() && blood_mask.size() != nv)
        throw ValidationError("blood ROI mask does not match the image dimensions");

    SimeResult res;
    res.anchor = cfg.anchor.value_or(blood_mask.empty() ? Anchor::PeakNormalization : Anchor::BloodRoi);
    if (res.anchor == Anchor::BloodRoi && blood_mask.empty())
        throw ValidationError("blood-roi anchor requires a blood ROI mask");

    std::vector<std::size_t> eligible;
    for (std::size_t v = 0; v < nv; ++v) {
        if (!mask.empty() && !mask[v])
            continue;
        for (std::size_t f = 0; f < img.frames(); ++f)
            if (img.at(f, v) != 0.0) {
                eligible.push_back(v);
                break;
            }
    }
    const std::size_t wanted =
        cfg.voxel_subsample >= 1.0
            ? static_cast<std::size_t>(cfg.voxel_subsample)
            : static_cast<std::size_t>(std::ceil(cfg.voxel_subsample * static_cast<double>(eligible.size())));
    if (wanted == 0 || wanted > eligible.size()) {
        std::ostringstream msg;
        msg << "sime needs " << wanted << " masked voxels with signal, found " << eligible.size();
        throw ValidationError(msg.str());
    }

    const int nthreads = resolve_threads(threads);
    Problem pr{img.schedule, fine_grid(img.schedule, cfg.fit_cfg.dt), cfg.fit_cfg,
               frame_weights(img.schedule, cfg.fit_cfg.weights), {}, nthreads};

    FengAif aif = cfg.init_aif;
    if (!cfg.freeze_aif) {
        res.subsample = choose_subsample(eligible, wanted, cfg.seed);
        for (std::size_t v : res.subsample)
            pr.tacs.push_back(img.tac(v));

        std::vector<double> anchor_tac;
        if (res.anchor == Anchor::BloodRoi) {
            anchor_tac = mean_tac(img, blood_mask);
        } else {
            std::size_t hot = eligible.front();
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t v : eligible)
                for (std::size_t f = 0; f < img.frames(); ++f)
                    if (img.at(f, v) > peak) {
                        peak = img.at(f, v);
                        hot = v;
                    }
            anchor_tac = img.tac(hot);
        }

        double energy = 0.0;
        for (const auto &tac : pr.tacs)
            for (std::size_t i = 0; i < tac.size(); ++i)
                energy += pr.weights[i] * tac[i] * tac[i];
        const double slack = kSimeMonotoneTol * energy;

        std::vector<KineticParams> params(pr.tacs.size());
        for (int outer = 0; outer < cfg.n_outer; ++outer) {
            fit_subsample(pr, aif, params, outer > 0);
            const FengAif updated = update_aif(pr, aif, params, cfg.aif_max_iter);

            double s = anchor_scale(pr, updated, anchor_tac, cfg.blood_fraction);
            double vb_max = 0.0;
            for (const auto &p : params)
                vb_max = std::max(vb_max, p.Vb);
            s = std::max(s, vb_max / cfg.fit_cfg.bounds[3].upper);
            FengAif next = updated;
            next.a1 *= s;
            next.a2 *= s;
            next.a3 *= s;
            for (auto &p : params)
                p = clamp_to_bounds(rescale_params(p, s), cfg.fit_cfg);

            const double obj = pr.objective(pr.model(next), params);
            if (!res.objective_trace.empty() && obj > res.objective_trace.back() + slack) {
                std::ostringstream msg;
                msg << "sime objective increased at outer iteration " << outer + 1 << ": "
                    << res.objective_trace.back() << " -> " << obj;
                throw NumericError(msg.str());
            }
            const auto before = to_array(aif);
            const auto after = to_array(next);
            double change = 0.0;
            for (std::size_t k = 0; k < kFengParamCount; ++k)
                change = std::max(change, std::abs(after[k] - before[k]) / std::max(std::abs(before[k]), 1e-12));
            const bool settled = !res.objective_trace.empty() &&
                                 std::abs(res.objective_trace.back() - obj) <= slack && change < 1e-9;
            res.objective_trace.push_back(obj);
            aif = next;
            res.outer_iterations = outer + 1;
            if (settled)
                break;
        }
    }

    res.aif = aif;
    res.aif_mid = sample_feng(aif, mid_times(img.schedule));
    res.fit = fit_volume(img, sample_feng(aif, pr.grid), FitMethod::LlsNls, mask, cfg.fit_cfg, nthreads);
    return res;
}

} // namespace petkin
