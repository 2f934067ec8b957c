#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "petkin/aif.hpp"

namespace petkin {

enum class PlotKind {
    AifOverlay,
    IdentityScatter,
    MapSlice,
};

PlotKind plot_kind_from_string(const std::string &s);

/// Input files per kind:
///   aif-overlay      one or more AIF CSVs, drawn against time
///   identity-scatter reference (measured) CSV, then estimated CSV
///   map-slice        one volume directory; `channel` picks a maps channel
///                    (default K1), `slice` the axial index (default middle)
struct PlotSpec {
    PlotKind kind = PlotKind::AifOverlay;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::string> labels; // legend entries; file stems by default
    std::optional<std::size_t> slice;
    std::string channel;
    std::string title;
};

inline constexpr int kPlotWidth = 800;
inline constexpr int kPlotHeight = 600;

struct NamedCurve {
    std::string label;
    SampledCurve curve;
};

/// SVG renderers on a fixed 800x600 canvas. Output depends only on the
/// arguments. Empty series throw ValidationError.
std::string svg_aif_overlay(const std::vector<NamedCurve> &curves, const std::string &title = "AIF");

/// Points (reference, estimate resampled to reference times) with a dashed y = x line.
std::string svg_identity_scatter(const SampledCurve &ref, const SampledCurve &est,
                                 const std::string &title = "AIF: estimated vs measured");

/// Grayscale raster of a ny-by-nx slice (row-major) with a colorbar.
std::string svg_map_slice(std::span<const double> slice, std::size_t ny, std::size_t nx,
                          const std::string &title);

/// Loads the inputs named by the spec and renders them.
std::string render_plot(const PlotSpec &spec);

} // namespace petkin
