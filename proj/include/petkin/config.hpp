#pragma once

#include <filesystem>

#include <json.hpp>

#include "petkin/aif.hpp"
#include "petkin/fitting.hpp"
#include "petkin/phantom.hpp"
#include "petkin/sime.hpp"
#include "petkin/timegrid.hpp"

// JSON forms of the engine's configuration types. Parsers throw
// ValidationError naming the offending key; missing optional keys keep
// their defaults.
namespace petkin {

using Json = nlohmann::json;

/// {"segments": [[count, duration_s], ...]} or
/// {"frame_start_s": [...], "frame_duration_s": [...]}.
FrameSchedule schedule_from_json(const Json &j);
Json schedule_to_json(const FrameSchedule &s);

/// Keys tau_s, a1, a2, a3, l1, l2, l3.
FengAif feng_from_json(const Json &j);
Json feng_to_json(const FengAif &p);

KineticParams params_from_json(const Json &j);
Json params_to_json(const KineticParams &p);

/// weights ("uniform" | "frame-duration"), bounds {"K1": [lo, hi], ...},
/// max_iter, tol, dt, mode ("frame-average" | "midpoint").
FitConfig fit_config_from_json(const Json &j);
Json fit_config_to_json(const FitConfig &c);

/// dims [z, y, x], optional preset "mouse", regions [{name, center, semi_axes,
/// params}], aif, noise_sigma0, seed. With the preset, listed regions are
/// painted after the preset ones.
PhantomSpec phantom_spec_from_json(const Json &j);
Json phantom_spec_to_json(const PhantomSpec &s);

/// aif_model, n_outer, voxel_subsample, anchor ("peak-normalization" |
/// "blood-roi"), init_aif, fit (FitConfig), seed, blood_fraction, freeze_aif,
/// aif_max_iter.
SimeConfig sime_config_from_json(const Json &j);
Json sime_config_to_json(const SimeConfig &c);

Json read_json_file(const std::filesystem::path &path);

} // namespace petkin
