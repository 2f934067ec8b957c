#include "petkin/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "petkin/error.hpp"
#include "petkin/parallel.hpp"

namespace petkin {

namespace {

constexpr double kSecondsPerMinute = 60.0;

// Midpoint rows: linear interpolation between the two bracketing nodes.
void midpoint_row(const FineGrid &g, double t, std::size_t &first, std::vector<double> &w) {
    const double pos = t / g.dt;
    auto j = static_cast<std::size_t>(std::floor(pos));
    if (j + 1 >= g.n)
        j = g.n - 2;
    const double f = pos - static_cast<double>(j);
    first = j;
    w = {1.0 - f, f};
}

} // namespace

double impulse_response(const KineticParams &p, double t_s) {
    p.validate();
    if (t_s < 0.0)
        throw ValidationError("impulse response is defined for t >= 0");
    if (p.K1 == 0.0)
        return 0.0;
    const double alpha = p.k2 + p.k3;
    const double t = t_s / kSecondsPerMinute;
    return p.K1 / alpha * (p.k3 + p.k2 * std::exp(-alpha * t));
}

double ki(const KineticParams &p) {
    if (p.K1 == 0.0)
        return 0.0;
    const double alpha = p.k2 + p.k3;
    if (!(alpha > 0.0))
        throw ValidationError("Ki undefined: k2 + k3 = 0 with K1 > 0");
    return p.K1 * p.k3 / alpha;
}

FrameOperator::FrameOperator(const FrameSchedule &s, const FineGrid &g, FrameMode mode) {
    if (g.n < 2)
        throw ValidationError("fine grid needs at least two nodes");
    if (g.span() + 1e-9 * g.dt < s.end_time())
        throw ValidationError("fine grid does not cover the frame schedule");
    rows_.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        Row &row = rows_[i];
        if (mode == FrameMode::Midpoint) {
            midpoint_row(g, s.start(i) + 0.5 * s.duration(i), row.first, row.weights);
            continue;
        }
        const double a = s.start(i);
        const double b = s.end(i);
        auto j0 = static_cast<std::size_t>(std::floor(a / g.dt));
        auto j1 = static_cast<std::size_t>(std::ceil(b / g.dt - 1e-12));
        j0 = std::min(j0, g.n - 2);
        j1 = std::clamp<std::size_t>(j1, j0 + 1, g.n - 1);
        row.first = j0;
        row.weights.assign(j1 - j0 + 1, 0.0);
        for (std::size_t j = j0; j < j1; ++j) {
            const double tl = g.time(j);
            const double tr = g.time(j + 1);
            const double u = std::max(a, tl);
            const double v = std::min(b, tr);
            if (v <= u)
                continue;
            // Exact integral of the linear interpolant over [u, v].
            row.weights[j - j0] += ((tr - u) * (tr - u) - (tr - v) * (tr - v)) / (2.0 * g.dt);
            row.weights[j + 1 - j0] += ((v - tl) * (v - tl) - (u - tl) * (u - tl)) / (2.0 * g.dt);
        }
        for (auto &w : row.weights)
            w /= (b - a);
    }
}

void FrameOperator::apply(std::span<const double> grid_values, std::span<double> frames) const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const Row &row = rows_[i];
        double acc = 0.0;
        for (std::size_t k = 0; k < row.weights.size(); ++k)
            acc += row.weights[k] * grid_values[row.first + k];
        frames[i] = acc;
    }
}

std::vector<double> FrameOperator::apply(std::span<const double> grid_values) const {
    std::vector<double> out(rows_.size());
    apply(grid_values, out);
    return out;
}

std::vector<double> cumulative_trapezoid(std::span<const double> c, double dt) {
    std::vector<double> out(c.size(), 0.0);
    for (std::size_t j = 1; j < c.size(); ++j)
        out[j] = out[j - 1] + 0.5 * dt * (c[j - 1] + c[j]);
    return out;
}

void exp_convolution(std::span<const double> c, double alpha, double dt, std::span<double> out,
                     std::span<double> d_alpha) {
    const std::size_t n = c.size();
    if (n == 0)
        return;
    const bool with_derivative = !d_alpha.empty();
    const double r = std::exp(-alpha * dt);
    const double c0 = c[0];
    double s = c0;   // sum_k r^(j-k) c_k
    double q = 0.0;  // sum_k (t_j - t_k) r^(j-k) c_k
    double rj = 1.0; // r^j
    out[0] = 0.0;
    if (with_derivative)
        d_alpha[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        if (with_derivative)
            q = r * (q + dt * s);
        s = r * s + c[j];
        rj *= r;
        out[j] = dt * (s - 0.5 * rj * c0 - 0.5 * c[j]);
        if (with_derivative)
            d_alpha[j] = -dt * (q - 0.5 * static_cast<double>(j) * dt * rj * c0);
    }
}

SampledCurve tissue_response(const KineticParams &p, const SampledCurve &ca, const FineGrid &g) {
    p.validate();
    if (g.n < 2)
        throw ValidationError("fine grid needs at least two nodes");
    const std::vector<double> input = ca.on_grid(g);
    const double dt = g.dt / kSecondsPerMinute;
    std::vector<double> times(g.n), ct(g.n, 0.0);
    for (std::size_t j = 0; j < g.n; ++j)
        times[j] = g.time(j);
    if (p.K1 > 0.0) {
        const double alpha = p.k2 + p.k3;
        const std::vector<double> integral = cumulative_trapezoid(input, dt);
        std::vector<double> conv(g.n);
        exp_convolution(input, alpha, dt, conv);
        for (std::size_t j = 0; j < g.n; ++j)
            ct[j] = std::max(0.0, p.K1 / alpha * (p.k3 * integral[j] + p.k2 * conv[j]));
    }
    return SampledCurve(std::move(times), std::move(ct));
}

ForwardModel::ForwardModel(const SampledCurve &ca, const FrameSchedule &s, FrameMode mode, double dt)
    : schedule_(s), grid_(fine_grid(s, dt)), mode_(mode), op_(schedule_, grid_, mode) {
    input_ = ca.on_grid(grid_, &extrapolated_);
    init();
}

ForwardModel::ForwardModel(std::vector<double> input_on_grid, const FrameSchedule &s, FrameMode mode, double dt)
    : schedule_(s), grid_(fine_grid(s, dt)), mode_(mode), op_(schedule_, grid_, mode),
      input_(std::move(input_on_grid)) {
    if (input_.size() != grid_.n) {
        std::ostringstream msg;
        msg << "input has " << input_.size() << " grid samples, grid has " << grid_.n;
        throw ValidationError(msg.str());
    }
    init();
}

void ForwardModel::init() {
    const double dt = grid_.dt / kSecondsPerMinute;
    integral_ = cumulative_trapezoid(input_, dt);
    const std::vector<double> double_integral = cumulative_trapezoid(integral_, dt);
    input_frames_ = op_.apply(input_);
    integral_frames_ = op_.apply(integral_);
    double_integral_frames_ = op_.apply(double_integral);
}

void ForwardModel::frames(const KineticParams &p, std::span<double> out) const {
    const std::size_t nf = frames();
    if (out.size() != nf)
        throw ValidationError("output span does not match the frame count");
    if (p.K1 == 0.0) {
        for (std::size_t i = 0; i < nf; ++i)
            out[i] = p.Vb * input_frames_[i];
        return;
    }
    const double alpha = p.k2 + p.k3;
    if (!(alpha > 0.0))
        throw ValidationError("degenerate kernel: k2 + k3 = 0 with K1 > 0");
    std::vector<double> conv(grid_.n);
    exp_convolution(input_, alpha, grid_.dt / kSecondsPerMinute, conv);
    op_.apply(conv, out);
    const double scale = (1.0 - p.Vb) * p.K1 / alpha;
    for (std::size_t i = 0; i < nf; ++i)
        out[i] = p.Vb * input_frames_[i] + scale * (p.k3 * integral_frames_[i] + p.k2 * out[i]);
}

std::vector<double> ForwardModel::frames(const KineticParams &p) const {
    std::vector<double> out(frames());
    this->frames(p, out);
    return out;
}

std::vector<double> ForwardModel::output_integral_frames(const KineticParams &p) const {
    const std::size_t nf = frames();
    std::vector<double> out(nf);
    if (p.K1 == 0.0) {
        for (std::size_t i = 0; i < nf; ++i)
            out[i] = p.Vb * integral_frames_[i];
        return out;
    }
    const double alpha = p.k2 + p.k3;
    if (!(alpha > 0.0))
        throw ValidationError("degenerate kernel: k2 + k3 = 0 with K1 > 0");
    const double dt = grid_.dt / kSecondsPerMinute;
    std::vector<double> conv(grid_.n);
    exp_convolution(input_, alpha, dt, conv);
    op_.apply(cumulative_trapezoid(conv, dt), out);
    const double scale = (1.0 - p.Vb) * p.K1 / alpha;
    for (std::size_t i = 0; i < nf; ++i)
        out[i] = p.Vb * integral_frames_[i] + scale * (p.k3 * double_integral_frames_[i] + p.k2 * out[i]);
    return out;
}

void ForwardModel::frames_with_jacobian(const KineticParams &p, std::span<double> out, std::span<double> jac) const {
    const std::size_t nf = frames();
    if (out.size() != nf || jac.size() != 4 * nf)
        throw ValidationError("output spans do not match the frame count");
    const double alpha = p.k2 + p.k3;
    if (!(alpha > 0.0)) {
        if (p.K1 > 0.0)
            throw ValidationError("degenerate kernel: k2 + k3 = 0 with K1 > 0");
        // K1 = k2 = k3 = 0: derivative in K1 of the k3 -> 0, k2 -> 0 limit.
        for (std::size_t i = 0; i < nf; ++i) {
            out[i] = p.Vb * input_frames_[i];
            jac[4 * i + 0] = (1.0 - p.Vb) * integral_frames_[i];
            jac[4 * i + 1] = 0.0;
            jac[4 * i + 2] = 0.0;
            jac[4 * i + 3] = input_frames_[i];
        }
        return;
    }
    std::vector<double> conv(grid_.n), dconv(grid_.n);
    exp_convolution(input_, alpha, grid_.dt / kSecondsPerMinute, conv, dconv);
    std::vector<double> conv_f(nf), dconv_f(nf);
    op_.apply(conv, conv_f);
    op_.apply(dconv, dconv_f);
    const double tissue_w = 1.0 - p.Vb;
    for (std::size_t i = 0; i < nf; ++i) {
        const double a = integral_frames_[i];
        const double e = conv_f[i];
        const double ea = dconv_f[i];
        const double g = p.k3 * a + p.k2 * e;
        const double ct = p.K1 * g / alpha;
        out[i] = p.Vb * input_frames_[i] + tissue_w * ct;
        jac[4 * i + 0] = tissue_w * g / alpha;
        jac[4 * i + 1] = tissue_w * p.K1 * ((e + p.k2 * ea) / alpha - g / (alpha * alpha));
        jac[4 * i + 2] = tissue_w * p.K1 * ((a + p.k2 * ea) / alpha - g / (alpha * alpha));
        jac[4 * i + 3] = input_frames_[i] - ct;
    }
}

std::vector<double> forward_model(const KineticParams &p, const SampledCurve &ca, const FrameSchedule &s,
                                  FrameMode mode, double dt) {
    p.validate();
    return ForwardModel(ca, s, mode, dt).frames(p);
}

DynamicImage forward_volume(const ParametricMaps &maps, const SampledCurve &ca, const FrameSchedule &s,
                            const ForwardOptions &opts) {
    maps.validate();
    const ForwardModel model(ca, s, opts.mode, opts.dt);
    DynamicImage img(s, maps.dims);
    const std::size_t nf = s.size();
    parallel_for(maps.voxels(), opts.threads, [&](std::size_t v) {
        if (!maps.mask[v])
            return;
        std::vector<double> tac(nf);
        model.frames(maps.at(v), tac);
        img.set_tac(v, tac);
    });
    return img;
}

} // namespace petkin
