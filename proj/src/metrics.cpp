#include "petkin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "petkin/error.hpp"
#include "petkin/kinetics.hpp"

namespace petkin {

namespace {

std::vector<double> window_weights(const SsimConfig &cfg) {
    const int w = cfg.window;
    const int h = w / 2;
    std::vector<double> k(static_cast<std::size_t>(w * w));
    double total = 0.0;
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
            double v = 1.0;
            if (cfg.kind == WindowKind::Gaussian) {
                const double di = i - h, dj = j - h;
                v = std::exp(-(di * di + dj * dj) / (2.0 * cfg.sigma * cfg.sigma));
            }
            k[static_cast<std::size_t>(i * w + j)] = v;
            total += v;
        }
    for (auto &v : k)
        v /= total;
    return k;
}

double peak_ref_range(std::span<const double> ref) {
    const double m = ref.empty() ? 0.0 : *std::max_element(ref.begin(), ref.end());
    return m > 0.0 ? m : 1.0;
}

double trapezoid(std::span<const double> t, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        acc += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return acc;
}

} // namespace

double psnr(std::span<const double> a, std::span<const double> b, double max_val) {
    if (a.size() != b.size())
        throw ValidationError("psnr: inputs differ in size");
    if (a.empty())
        throw ValidationError("psnr: empty inputs");
    if (!(max_val > 0.0))
        throw ValidationError("psnr: max_val must be > 0");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sse += d * d;
    }
    if (sse == 0.0)
        return kPsnrIdentical;
    const double mse = sse / static_cast<double>(a.size());
    return 10.0 * std::log10(max_val * max_val / mse);
}

void SsimConfig::validate() const {
    if (window < 3 || window % 2 == 0)
        throw ValidationError("SSIM window must be odd and >= 3");
    if (kind == WindowKind::Gaussian && !(sigma > 0.0))
        throw ValidationError("SSIM Gaussian sigma must be > 0");
    if (!(k1 > 0.0) || !(k2 > 0.0))
        throw ValidationError("SSIM k1 and k2 must be > 0");
    if (!(dynamic_range > 0.0))
        throw ValidationError("SSIM dynamic range must be > 0");
}

double ssim(std::span<const double> a, std::span<const double> b, Dims3 dims, const SsimConfig &cfg) {
    cfg.validate();
    if (a.size() != b.size() || a.size() != dims.count())
        throw ValidationError("ssim: input sizes do not match the dimensions");
    const auto w = static_cast<std::size_t>(cfg.window);
    if (dims.y < w || dims.x < w) {
        std::ostringstream msg;
        msg << "ssim: slice " << dims.y << "x" << dims.x << " is smaller than the " << w << "x" << w << " window";
        throw ValidationError(msg.str());
    }
    const std::vector<double> k = window_weights(cfg);
    const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
    const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t z = 0; z < dims.z; ++z) {
        const std::size_t base = z * dims.y * dims.x;
        for (std::size_t y0 = 0; y0 + w <= dims.y; ++y0)
            for (std::size_t x0 = 0; x0 + w <= dims.x; ++x0) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (std::size_t i = 0; i < w; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        const double kw = k[i * w + j];
                        const std::size_t v = base + (y0 + i) * dims.x + (x0 + j);
                        ma += kw * a[v];
                        mb += kw * b[v];
                        saa += kw * a[v] * a[v];
                        sbb += kw * b[v] * b[v];
                        sab += kw * a[v] * b[v];
                    }
                const double va = saa - ma * ma;
                const double vb = sbb - mb * mb;
                const double cov = sab - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

AifMetrics aif_metrics(const SampledCurve &est, const SampledCurve &ref) {
    const auto &t = ref.times();
    const auto &r = ref.values();
    const double ref_max = *std::max_element(r.begin(), r.end());
    if (!(ref_max > 0.0))
        throw ValidationError("aif_metrics: reference curve is identically zero");
    std::vector<double> e(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        e[i] = est.interp(t[i]);

    AifMetrics m;
    double sse = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        sse += (e[i] - r[i]) * (e[i] - r[i]);
    m.rmse = std::sqrt(sse / static_cast<double>(t.size()));
    m.nrmse = m.rmse / ref_max;
    const auto ie = std::max_element(e.begin(), e.end()) - e.begin();
    const auto ir = std::max_element(r.begin(), r.end()) - r.begin();
    m.peak_rel_err = (e[static_cast<std::size_t>(ie)] - ref_max) / ref_max;
    m.peak_time_diff_s = t[static_cast<std::size_t>(ie)] - t[static_cast<std::size_t>(ir)];
    const double auc_ref = trapezoid(t, r);
    m.auc_rel_err = auc_ref > 0.0 ? (trapezoid(t, e) - auc_ref) / auc_ref : 0.0;
    return m;
}

std::vector<double> ki_volume(const ParametricMaps &maps) {
    std::vector<double> out(maps.voxels(), 0.0);
    for (std::size_t v = 0; v < out.size(); ++v) {
        const KineticParams p = maps.at(v);
        if (p.K1 > 0.0 && p.k2 + p.k3 > 0.0)
            out[v] = ki(p);
    }
    return out;
}

MapsScore score_maps(const ParametricMaps &est, const ParametricMaps &ref, const SsimConfig &base) {
    if (!(est.dims == ref.dims))
        throw ValidationError("score_maps: map dimensions differ");
    MapsScore out;
    auto score = [&](const std::string &name, std::span<const double> e, std::span<const double> r) {
        SsimConfig cfg = base;
        cfg.dynamic_range = peak_ref_range(r);
        ChannelScore c;
        c.name = name;
        c.dynamic_range = cfg.dynamic_range;
        c.ssim = ssim(e, r, ref.dims, cfg);
        c.psnr = psnr(e, r, cfg.dynamic_range);
        out.channels.push_back(c);
    };
    for (std::size_t c = 0; c < 4; ++c)
        score(std::string(kChannelNames[c]), est.channels[c], ref.channels[c]);
    score("Ki", ki_volume(est), ki_volume(ref));
    for (std::size_t c = 0; c < 4; ++c) {
        out.mean_ssim += out.channels[c].ssim / 4.0;
        out.mean_psnr += out.channels[c].psnr / 4.0;
    }
    return out;
}

} // namespace petkin
