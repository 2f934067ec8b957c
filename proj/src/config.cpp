#include "petkin/config.hpp"

#include <initializer_list>
#include <string>

#include "petkin/error.hpp"
#include "petkin/storage.hpp"

namespace petkin {

namespace {

void check_object(const Json &j, const char *what, std::initializer_list<const char *> allowed) {
    if (!j.is_object())
        throw ValidationError(std::string(what) + " must be a JSON object");
    for (const auto &[key, value] : j.items()) {
        bool known = false;
        for (const char *a : allowed)
            known = known || key == a;
        if (!known)
            throw ValidationError(std::string("unknown key '") + key + "' in " + what);
    }
}

template <typename T> T get(const Json &j, const char *key, const char *what) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ValidationError(std::string(what) + ": missing or invalid '" + key + "'");
    }
}

template <typename T> void get_opt(const Json &j, const char *key, const char *what, T &out) {
    if (j.contains(key))
        out = get<T>(j, key, what);
}

Weighting weighting_from(const std::string &s) {
    if (s == "uniform") return Weighting::Uniform;
    if (s == "frame-duration") return Weighting::FrameDuration;
    throw ValidationError("fit config: weights must be 'uniform' or 'frame-duration'");
}

FrameMode mode_from(const std::string &s) {
    if (s == "frame-average") return FrameMode::FrameAverage;
    if (s == "midpoint") return FrameMode::Midpoint;
    throw ValidationError("fit config: mode must be 'frame-average' or 'midpoint'");
}

std::array<double, 3> triple(const Json &j, const char *key, const char *what) {
    const auto v = get<std::vector<double>>(j, key, what);
    if (v.size() != 3)
        throw ValidationError(std::string(what) + ": '" + key + "' needs 3 entries (z, y, x)");
    return {v[0], v[1], v[2]};
}

} // namespace

FrameSchedule schedule_from_json(const Json &j) {
    check_object(j, "schedule", {"segments", "frame_start_s", "frame_duration_s"});
    if (j.contains("segments")) {
        if (j.contains("frame_start_s") || j.contains("frame_duration_s"))
            throw ValidationError("schedule: give either segments or frame_start_s/frame_duration_s");
        std::vector<Segment> segs;
        const Json &arr = j["segments"];
        if (!arr.is_array())
            throw ValidationError("schedule: segments must be an array of [count, duration_s]");
        for (const auto &e : arr) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number())
                throw ValidationError("schedule: each segment must be [count, duration_s]");
            segs.push_back({e[0].get<int>(), e[1].get<double>()});
        }
        return make_schedule(segs);
    }
    return FrameSchedule(get<std::vector<double>>(j, "frame_start_s", "schedule"),
                         get<std::vector<double>>(j, "frame_duration_s", "schedule"));
}

Json schedule_to_json(const FrameSchedule &s) {
    Json segs = Json::array();
    for (const auto &seg : compress_schedule(s))
        segs.push_back({seg.count, seg.duration_s});
    return {{"segments", segs}};
}

FengAif feng_from_json(const Json &j) {
    check_object(j, "aif", {"tau_s", "a1", "a2", "a3", "l1", "l2", "l3"});
    FengAif p;
    p.tau_s = get<double>(j, "tau_s", "aif");
    p.a1 = get<double>(j, "a1", "aif");
    p.a2 = get<double>(j, "a2", "aif");
    p.a3 = get<double>(j, "a3", "aif");
    p.l1 = get<double>(j, "l1", "aif");
    p.l2 = get<double>(j, "l2", "aif");
    p.l3 = get<double>(j, "l3", "aif");
    p.validate();
    return p;
}

Json feng_to_json(const FengAif &p) {
    return {{"tau_s", p.tau_s}, {"a1", p.a1}, {"a2", p.a2}, {"a3", p.a3},
            {"l1", p.l1},       {"l2", p.l2}, {"l3", p.l3}};
}

KineticParams params_from_json(const Json &j) {
    check_object(j, "params", {"K1", "k2", "k3", "Vb"});
    KineticParams p{get<double>(j, "K1", "params"), get<double>(j, "k2", "params"), get<double>(j, "k3", "params"),
                    get<double>(j, "Vb", "params")};
    p.validate();
    return p;
}

Json params_to_json(const KineticParams &p) { return {{"K1", p.K1}, {"k2", p.k2}, {"k3", p.k3}, {"Vb", p.Vb}}; }

FitConfig fit_config_from_json(const Json &j) {
    check_object(j, "fit config", {"weights", "bounds", "max_iter", "tol", "dt", "mode"});
    FitConfig c;
    if (j.contains("weights"))
        c.weights = weighting_from(get<std::string>(j, "weights", "fit config"));
    if (j.contains("mode"))
        c.mode = mode_from(get<std::string>(j, "mode", "fit config"));
    get_opt(j, "max_iter", "fit config", c.max_iter);
    get_opt(j, "tol", "fit config", c.tol);
    get_opt(j, "dt", "fit config", c.dt);
    if (j.contains("bounds")) {
        const Json &b = j["bounds"];
        check_object(b, "fit config bounds", {"K1", "k2", "k3", "Vb"});
        for (std::size_t i = 0; i < 4; ++i) {
            const std::string name(kChannelNames[i]);
            if (!b.contains(name))
                continue;
            const auto v = get<std::vector<double>>(b, name.c_str(), "fit config bounds");
            if (v.size() != 2)
                throw ValidationError("fit config bounds: '" + name + "' needs [lower, upper]");
            c.bounds[i] = {v[0], v[1]};
        }
    }
    c.validate();
    return c;
}

Json fit_config_to_json(const FitConfig &c) {
    Json bounds;
    for (std::size_t i = 0; i < 4; ++i)
        bounds[std::string(kChannelNames[i])] = {c.bounds[i].lower, c.bounds[i].upper};
    return {{"weights", c.weights == Weighting::Uniform ? "uniform" : "frame-duration"},
            {"bounds", bounds},
            {"max_iter", c.max_iter},
            {"tol", c.tol},
            {"dt", c.dt},
            {"mode", c.mode == FrameMode::Midpoint ? "midpoint" : "frame-average"}};
}

PhantomSpec phantom_spec_from_json(const Json &j) {
    check_object(j, "phantom spec", {"dims", "preset", "regions", "aif", "noise_sigma0", "seed"});
    Dims3 dims{32, 32, 32};
    if (j.contains("dims")) {
        const auto d = get<std::vector<long long>>(j, "dims", "phantom spec");
        if (d.size() != 3 || d[0] < 1 || d[1] < 1 || d[2] < 1)
            throw ValidationError("phantom spec: dims must be three positive integers [z, y, x]");
        dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    }
    PhantomSpec spec;
    spec.dims = dims;
    if (j.contains("preset")) {
        const auto preset = get<std::string>(j, "preset", "phantom spec");
        if (preset != "mouse")
            throw ValidationError("phantom spec: unknown preset '" + preset + "'");
        spec = PhantomSpec::mouse(dims);
    }
    if (j.contains("regions")) {
        if (!j["regions"].is_array())
            throw ValidationError("phantom spec: regions must be an array");
        for (const auto &r : j["regions"]) {
            check_object(r, "phantom region", {"name", "center", "semi_axes", "params"});
            Region reg;
            reg.name = get<std::string>(r, "name", "phantom region");
            reg.shape.center = triple(r, "center", "phantom region");
            reg.shape.semi_axes = triple(r, "semi_axes", "phantom region");
            reg.params = params_from_json(r.at("params"));
            spec.regions.push_back(reg);
        }
    }
    if (j.contains("aif"))
        spec.aif = feng_from_json(j["aif"]);
    get_opt(j, "noise_sigma0", "phantom spec", spec.noise_sigma0);
    get_opt(j, "seed", "phantom spec", spec.seed);
    spec.validate();
    return spec;
}

Json phantom_spec_to_json(const PhantomSpec &s) {
    Json regions = Json::array();
    for (const auto &r : s.regions)
        regions.push_back({{"name", r.name},
                           {"center", r.shape.center},
                           {"semi_axes", r.shape.semi_axes},
                           {"params", params_to_json(r.params)}});
    return {{"dims", {s.dims.z, s.dims.y, s.dims.x}},
            {"regions", regions},
            {"aif", feng_to_json(s.aif)},
            {"noise_sigma0", s.noise_sigma0},
            {"seed", s.seed}};
}

SimeConfig sime_config_from_json(const Json &j) {
    check_object(j, "sime config",
                 {"aif_model", "n_outer", "voxel_subsample", "anchor", "init_aif", "fit", "seed", "blood_fraction",
                  "freeze_aif", "aif_max_iter"});
    SimeConfig c;
    if (j.contains("aif_model")) {
        const auto m = get<std::string>(j, "aif_model", "sime config");
        if (m == "feng")
            c.aif_model = AifModel::Feng;
        else if (m == "sampled-with-smoothness")
            c.aif_model = AifModel::SampledSmooth;
        else
            throw ValidationError("sime config: aif_model must be 'feng' or 'sampled-with-smoothness'");
    }
    if (j.contains("anchor")) {
        const auto a = get<std::string>(j, "anchor", "sime config");
        if (a == "peak-normalization")
            c.anchor = Anchor::PeakNormalization;
        else if (a == "blood-roi")
            c.anchor = Anchor::BloodRoi;
        else
            throw ValidationError("sime config: anchor must be 'peak-normalization' or 'blood-roi'");
    }
    get_opt(j, "n_outer", "sime config", c.n_outer);
    get_opt(j, "voxel_subsample", "sime config", c.voxel_subsample);
    get_opt(j, "seed", "sime config", c.seed);
    get_opt(j, "blood_fraction", "sime config", c.blood_fraction);
    get_opt(j, "freeze_aif", "sime config", c.freeze_aif);
    get_opt(j, "aif_max_iter", "sime config", c.aif_max_iter);
    if (j.contains("init_aif"))
        c.init_aif = feng_from_json(j["init_aif"]);
    if (j.contains("fit"))
        c.fit_cfg = fit_config_from_json(j["fit"]);
    c.validate();
    return c;
}

Json sime_config_to_json(const SimeConfig &c) {
    Json j = {{"aif_model", c.aif_model == AifModel::Feng ? "feng" : "sampled-with-smoothness"},
              {"n_outer", c.n_outer},
              {"voxel_subsample", c.voxel_subsample},
              {"init_aif", feng_to_json(c.init_aif)},
              {"fit", fit_config_to_json(c.fit_cfg)},
              {"seed", c.seed},
              {"blood_fraction", c.blood_fraction},
              {"freeze_aif", c.freeze_aif},
              {"aif_max_iter", c.aif_max_iter}};
    if (c.anchor)
        j["anchor"] = *c.anchor == Anchor::BloodRoi ? "blood-roi" : "peak-normalization";
    return j;
}

Json read_json_file(const std::filesystem::path &path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace petkin
