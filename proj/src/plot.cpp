#include "petkin/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "petkin/error.hpp"
#include "petkin/storage.hpp"

namespace petkin {

namespace {

constexpr double kLeft = 90, kRight = 40, kTop = 60, kBottom = 70;

const char *const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

double nice_step(double range) {
    const double raw = range / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

struct Axis {
    double lo = 0, hi = 1, step = 0.2;

    static Axis fit(double lo, double hi) {
        if (!(hi > lo)) {
            const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= pad;
            hi += pad;
        }
        Axis a;
        a.step = nice_step(hi - lo);
        a.lo = std::floor(lo / a.step) * a.step;
        a.hi = std::ceil(hi / a.step) * a.step;
        return a;
    }
};

class Canvas {
public:
    Canvas() {
        out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kPlotWidth) + "\" height=\"" +
                std::to_string(kPlotHeight) + "\" viewBox=\"0 0 " + std::to_string(kPlotWidth) + " " +
                std::to_string(kPlotHeight) + "\">\n";
        out_ += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(kPlotWidth) + "\" height=\"" +
                std::to_string(kPlotHeight) + "\" fill=\"#ffffff\"/>\n";
    }

    void raw(const std::string &s) { out_ += s; }

    void text(double x, double y, const std::string &s, const char *anchor = "middle", int size = 14,
              const std::string &extra = {}) {
        out_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
                std::to_string(size) + "\" text-anchor=\"" + anchor + "\"" + extra + ">" + escape(s) + "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const char *stroke, double width = 1.0,
              const char *dash = nullptr) {
        out_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"";
        if (dash)
            out_ += std::string(" stroke-dasharray=\"") + dash + "\"";
        out_ += "/>\n";
    }

    std::string finish() {
        out_ += "</svg>\n";
        return std::move(out_);
    }

private:
    std::string out_;
};

struct Frame {
    double x0, y0, w, h;
    Axis ax, ay;

    double px(double x) const { return x0 + (x - ax.lo) / (ax.hi - ax.lo) * w; }
    double py(double y) const { return y0 + h - (y - ay.lo) / (ay.hi - ay.lo) * h; }
};

void draw_axes(Canvas &c, const Frame &f, const std::string &title, const std::string &xlabel,
               const std::string &ylabel) {
    c.raw("<rect x=\"" + num(f.x0) + "\" y=\"" + num(f.y0) + "\" width=\"" + num(f.w) + "\" height=\"" + num(f.h) +
          "\" fill=\"none\" stroke=\"#000000\"/>\n");
    const int nx = static_cast<int>(std::lround((f.ax.hi - f.ax.lo) / f.ax.step));
    for (int i = 0; i <= nx; ++i) {
        const double v = f.ax.lo + i * f.ax.step;
        const double x = f.px(v);
        c.line(x, f.y0 + f.h, x, f.y0 + f.h + 5, "#000000");
        c.text(x, f.y0 + f.h + 20, tick_label(v), "middle", 12);
    }
    const int ny = static_cast<int>(std::lround((f.ay.hi - f.ay.lo) / f.ay.step));
    for (int i = 0; i <= ny; ++i) {
        const double v = f.ay.lo + i * f.ay.step;
        const double y = f.py(v);
        c.line(f.x0 - 5, y, f.x0, y, "#000000");
        c.text(f.x0 - 8, y + 4, tick_label(v), "end", 12);
    }
    c.text(f.x0 + f.w / 2, 30, title, "middle", 18);
    c.text(f.x0 + f.w / 2, f.y0 + f.h + 50, xlabel);
    const double yl = f.y0 + f.h / 2;
    c.text(25, yl, ylabel, "middle", 14, " transform=\"rotate(-90 25 " + num(yl) + ")\"");
}

void draw_legend(Canvas &c, const Frame &f, const std::vector<std::pair<std::string, std::string>> &entries,
                 const std::vector<const char *> &dashes) {
    double y = f.y0 + 20;
    const double x = f.x0 + f.w - 190;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        c.line(x, y - 4, x + 30, y - 4, entries[i].second.c_str(), 2.0, dashes[i]);
        c.text(x + 38, y, entries[i].first, "start", 12);
        y += 20;
    }
}

std::string gray(double u) {
    const int g = static_cast<int>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", g, g, g);
    return buf;
}

} // namespace

PlotKind plot_kind_from_string(const std::string &s) {
    if (s == "aif-overlay") return PlotKind::AifOverlay;
    if (s == "identity-scatter") return PlotKind::IdentityScatter;
    if (s == "map-slice") return PlotKind::MapSlice;
    throw ValidationError("unknown plot kind '" + s + "' (aif-overlay, identity-scatter, map-slice)");
}

std::string svg_aif_overlay(const std::vector<NamedCurve> &curves, const std::string &title) {
    if (curves.empty())
        throw ValidationError("aif-overlay needs at least one curve");
    double tmax = 0.0, vmax = 0.0;
    for (const auto &nc : curves) {
        if (nc.curve.size() == 0)
            throw ValidationError("aif-overlay: curve '" + nc.label + "' is empty");
        tmax = std::max(tmax, nc.curve.times().back());
        for (double v : nc.curve.values())
            vmax = std::max(vmax, v);
    }
    Frame f{kLeft, kTop, kPlotWidth - kLeft - kRight, kPlotHeight - kTop - kBottom, Axis::fit(0.0, tmax),
            Axis::fit(0.0, vmax)};
    Canvas c;
    draw_axes(c, f, title, "time (s)", "activity (kBq/mL)");
    std::vector<std::pair<std::string, std::string>> legend;
    std::vector<const char *> dashes;
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const char *color = kPalette[k % std::size(kPalette)];
        std::string pts;
        const auto &t = curves[k].curve.times();
        const auto &v = curves[k].curve.values();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i)
                pts += ' ';
            pts += num(f.px(t[i])) + "," + num(f.py(v[i]));
        }
        c.raw("<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
              "\"/>\n");
        legend.emplace_back(curves[k].label, color);
        dashes.push_back(nullptr);
    }
    draw_legend(c, f, legend, dashes);
    return c.finish();
}

std::string svg_identity_scatter(const SampledCurve &ref, const SampledCurve &est, const std::string &title) {
    if (ref.size() == 0 || est.size() == 0)
        throw ValidationError("identity-scatter needs two non-empty curves");
    std::vector<double> e(ref.size());
    double hi = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        e[i] = est.interp(ref.times()[i]);
        hi = std::max({hi, e[i], ref.values()[i]});
    }
    const double side = std::min(kPlotWidth - kLeft - kRight, kPlotHeight - kTop - kBottom);
    const Axis a = Axis::fit(0.0, hi);
    Frame f{kLeft + (kPlotWidth - kLeft - kRight - side) / 2, kTop, side, side, a, a};
    Canvas c;
    draw_axes(c, f, title, "measured (kBq/mL)", "estimated (kBq/mL)");
    c.line(f.px(a.lo), f.py(a.lo), f.px(a.hi), f.py(a.hi), "#555555", 1.5, "6,4");
    for (std::size_t i = 0; i < ref.size(); ++i)
        c.raw("<circle cx=\"" + num(f.px(ref.values()[i])) + "\" cy=\"" + num(f.py(e[i])) +
              "\" r=\"3.5\" fill=\"#1f77b4\"/>\n");
    draw_legend(c, f, {{"frames", "#1f77b4"}, {"identity", "#555555"}}, {nullptr, "6,4"});
    return c.finish();
}

std::string svg_map_slice(std::span<const double> slice, std::size_t ny, std::size_t nx, const std::string &title) {
    if (ny == 0 || nx == 0 || slice.size() != ny * nx)
        throw ValidationError("map-slice needs a non-empty slice matching its dimensions");
    const auto [mn, mx] = std::minmax_element(slice.begin(), slice.end());
    const double lo = std::min(*mn, 0.0);
    const double hi = *mx;
    const double range = hi > lo ? hi - lo : 0.0;

    const double bar_w = 24, bar_gap = 30, bar_labels = 70;
    const double avail_w = kPlotWidth - kLeft - kRight - bar_gap - bar_w - bar_labels;
    const double avail_h = kPlotHeight - kTop - kBottom;
    const double cell = std::min(avail_w / static_cast<double>(nx), avail_h / static_cast<double>(ny));
    const double w = cell * static_cast<double>(nx), h = cell * static_cast<double>(ny);
    const double x0 = kLeft, y0 = kTop + (avail_h - h) / 2;

    Canvas c;
    c.text(x0 + w / 2, 30, title, "middle", 18);
    c.raw("<g shape-rendering=\"crispEdges\">\n");
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            const double u = range > 0.0 ? (slice[y * nx + x] - lo) / range : 0.0;
            c.raw("<rect x=\"" + num(x0 + cell * static_cast<double>(x)) + "\" y=\"" +
                  num(y0 + cell * static_cast<double>(y)) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
                  "\" fill=\"" + gray(u) + "\"/>\n");
        }
    c.raw("</g>\n");
    c.raw("<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
          "\" fill=\"none\" stroke=\"#000000\"/>\n");
    c.text(x0 + w / 2, y0 + h + 25, "x (voxel)");
    c.text(x0 - 15, y0 + h / 2, "y", "end");

    const double bx = x0 + w + bar_gap;
    c.raw("<defs><linearGradient id=\"cbar\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
          "<stop offset=\"0\" stop-color=\"#000000\"/><stop offset=\"1\" stop-color=\"#ffffff\"/>"
          "</linearGradient></defs>\n");
    c.raw("<rect x=\"" + num(bx) + "\" y=\"" + num(y0) + "\" width=\"" + num(bar_w) + "\" height=\"" + num(h) +
          "\" fill=\"url(#cbar)\" stroke=\"#000000\"/>\n");
    c.text(bx + bar_w + 6, y0 + 5, tick_label(range > 0.0 ? hi : lo), "start", 12);
    c.text(bx + bar_w + 6, y0 + h + 4, tick_label(lo), "start", 12);
    return c.finish();
}

std::string render_plot(const PlotSpec &spec) {
    auto label = [&](std::size_t i) {
        return i < spec.labels.size() ? spec.labels[i] : spec.inputs[i].stem().string();
    };
    switch (spec.kind) {
    case PlotKind::AifOverlay: {
        if (spec.inputs.empty())
            throw ValidationError("aif-overlay needs at least one AIF CSV input");
        std::vector<NamedCurve> curves;
        for (std::size_t i = 0; i < spec.inputs.size(); ++i)
            curves.push_back({label(i), read_aif_csv(spec.inputs[i])});
        return svg_aif_overlay(curves, spec.title.empty() ? "AIF" : spec.title);
    }
    case PlotKind::IdentityScatter: {
        if (spec.inputs.size() != 2)
            throw ValidationError("identity-scatter needs exactly two inputs: measured CSV, estimated CSV");
        return svg_identity_scatter(read_aif_csv(spec.inputs[0]), read_aif_csv(spec.inputs[1]),
                                    spec.title.empty() ? "AIF: estimated vs measured" : spec.title);
    }
    case PlotKind::MapSlice: {
        if (spec.inputs.size() != 1)
            throw ValidationError("map-slice needs exactly one volume input");
        const VolumeFile vf = read_volume(spec.inputs[0]);
        const Dims3 d = vf.header.spatial();
        std::size_t channel = 0;
        std::string name = vf.header.channels.empty() ? std::string(to_string(vf.header.kind))
                                                      : vf.header.channels.front();
        if (!spec.channel.empty()) {
            const auto &ch = vf.header.channels;
            const auto it = std::find(ch.begin(), ch.end(), spec.channel);
            if (it == ch.end())
                throw ValidationError("volume has no channel '" + spec.channel + "'");
            channel = static_cast<std::size_t>(it - ch.begin());
            name = spec.channel;
        } else if (vf.header.kind == VolumeKind::Dynamic) {
            channel = vf.header.dims[0] - 1;
            name = "last frame";
        }
        const std::size_t z = spec.slice.value_or(d.z / 2);
        if (z >= d.z)
            throw ValidationError("slice index " + std::to_string(z) + " is outside 0.." + std::to_string(d.z - 1));
        const std::size_t n = d.y * d.x;
        const std::size_t base = channel * d.count() + z * n;
        const std::vector<double> slice(vf.data.begin() + static_cast<std::ptrdiff_t>(base),
                                        vf.data.begin() + static_cast<std::ptrdiff_t>(base + n));
        const std::string title = spec.title.empty() ? name + ", slice z=" + std::to_string(z) : spec.title;
        return svg_map_slice(slice, d.y, d.x, title);
    }
    }
    throw ValidationError("unknown plot kind");
}

} // namespace petkin
