#include <doctest.h>

#include <cmath>
#include <regex>
#include <set>

#include "helpers.hpp"
#include "petkin/error.hpp"
#include "petkin/plot.hpp"
#include "petkin/storage.hpp"

using namespace petkin;
using testutil::TempDir;

namespace {

std::vector<double> attr_values(const std::string &svg, const std::string &element, const std::string &attr) {
    std::vector<double> out;
    const std::regex re("<" + element + "[^>]*\\b" + attr + "=\"([-0-9.]+)\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
        out.push_back(std::stod((*it)[1]));
    return out;
}

} // namespace

TEST_SUITE("plot") {

TEST_CASE("rendering is deterministic and sized 800x600") {
    const SampledCurve c = sample_feng(FengAif{}, mid_times(mouse_fdg_schedule()));
    const std::string a = svg_aif_overlay({{"truth", c}});
    const std::string b = svg_aif_overlay({{"truth", c}});
    CHECK(a == b);
    CHECK(a.find("width=\"800\" height=\"600\"") != std::string::npos);
    CHECK(a.find("time (s)") != std::string::npos);
    CHECK(a.find(">truth<") != std::string::npos);
}

TEST_CASE("aif overlay of the default curve peaks before 120 s") {
    const SampledCurve c = sample_feng(FengAif{}, mid_times(mouse_fdg_schedule()));
    const auto &v = c.values();
    const auto peak = std::max_element(v.begin(), v.end()) - v.begin();
    CHECK(c.times()[static_cast<std::size_t>(peak)] < 120.0);

    const std::string svg = svg_aif_overlay({{"truth", c}});
    const std::smatch m = [&] {
        std::smatch mm;
        std::regex_search(svg, mm, std::regex("points=\"([^\"]+)\""));
        return mm;
    }();
    REQUIRE(m.size() == 2);
    std::vector<std::pair<double, double>> pts;
    const std::string list = m[1];
    const std::regex pr("([-0-9.]+),([-0-9.]+)");
    for (auto it = std::sregex_iterator(list.begin(), list.end(), pr); it != std::sregex_iterator(); ++it)
        pts.emplace_back(std::stod((*it)[1]), std::stod((*it)[2]));
    REQUIRE(pts.size() == c.size());
    std::size_t top = 0; // smallest y in SVG coordinates
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].second < pts[top].second)
            top = i;
    CHECK(top == static_cast<std::size_t>(peak));
    std::size_t local_max = 0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i)
        if (pts[i].second < pts[i - 1].second && pts[i].second < pts[i + 1].second)
            ++local_max;
    CHECK(local_max == 1);
}

TEST_CASE("identity scatter of identical curves sits on the dashed line") {
    const SampledCurve c = sample_feng(FengAif{}, mid_times(mouse_fdg_schedule()));
    const std::string svg = svg_identity_scatter(c, c);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    const auto cx = attr_values(svg, "circle", "cx");
    const auto cy = attr_values(svg, "circle", "cy");
    REQUIRE(cx.size() == c.size());
    // the dashed identity line runs from (x1, y1) to (x2, y2)
    const std::regex line_re("<line x1=\"([-0-9.]+)\" y1=\"([-0-9.]+)\" x2=\"([-0-9.]+)\" y2=\"([-0-9.]+)\"[^>]*stroke-dasharray");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, line_re));
    const double x1 = std::stod(m[1]), y1 = std::stod(m[2]), x2 = std::stod(m[3]), y2 = std::stod(m[4]);
    for (std::size_t i = 0; i < cx.size(); ++i) {
        const double cross = (x2 - x1) * (cy[i] - y1) - (y2 - y1) * (cx[i] - x1);
        const double len = std::hypot(x2 - x1, y2 - y1);
        CHECK(std::abs(cross / len) < 0.02);
    }
}

TEST_CASE("map slice of a zero map is a uniform raster") {
    const std::vector<double> zero(12 * 10, 0.0);
    const std::string svg = svg_map_slice(zero, 12, 10, "K1");
    const std::size_t g0 = svg.find("<g shape-rendering=\"crispEdges\">");
    REQUIRE(g0 != std::string::npos);
    const std::string raster = svg.substr(g0, svg.find("</g>", g0) - g0);
    std::set<std::string> fills;
    const std::regex re("<rect x=\"[-0-9.]+\" y=\"[-0-9.]+\" width=\"[-0-9.]+\" height=\"[-0-9.]+\" fill=\"(#[0-9a-f]{6})\"/>");
    std::size_t n = 0;
    for (auto it = std::sregex_iterator(raster.begin(), raster.end(), re); it != std::sregex_iterator(); ++it) {
        fills.insert((*it)[1]);
        ++n;
    }
    CHECK(n == 120);
    CHECK(fills.size() == 1);
    CHECK(svg.find("linearGradient") != std::string::npos);
}

TEST_CASE("empty inputs are rejected") {
    CHECK_THROWS_AS(svg_aif_overlay({}), ValidationError);
    CHECK_THROWS_AS(svg_identity_scatter(SampledCurve{}, SampledCurve{}), ValidationError);
    CHECK_THROWS_AS(svg_map_slice({}, 0, 0, "x"), ValidationError);
    CHECK_THROWS_AS(plot_kind_from_string("histogram"), ValidationError);
    PlotSpec spec;
    spec.kind = PlotKind::IdentityScatter;
    CHECK_THROWS_AS(render_plot(spec), ValidationError);
}

TEST_CASE("render_plot loads files") {
    TempDir tmp("plot");
    const SampledCurve c = sample_feng(FengAif{}, mid_times(mouse_fdg_schedule()));
    write_aif_csv(tmp / "ref.csv", c);
    PlotSpec spec;
    spec.kind = PlotKind::AifOverlay;
    spec.inputs = {tmp / "ref.csv"};
    const std::string svg = render_plot(spec);
    CHECK(svg.find(">ref<") != std::string::npos);
    CHECK(render_plot(spec) == svg);

    write_scalar(tmp / "ki", "Ki", "1/min", Dims3{3, 4, 5}, std::vector<double>(60, 0.25));
    PlotSpec ms;
    ms.kind = PlotKind::MapSlice;
    ms.inputs = {tmp / "ki"};
    ms.slice = 2;
    CHECK(render_plot(ms).find("Ki, slice z=2") != std::string::npos);
    ms.slice = 3;
    CHECK_THROWS_AS(render_plot(ms), ValidationError);
    ms.slice.reset();
    ms.channel = "Vb";
    CHECK_THROWS_AS(render_plot(ms), ValidationError);
}

}
