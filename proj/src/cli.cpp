#include "petkin/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "petkin/config.hpp"
#include "petkin/error.hpp"
#include "petkin/metrics.hpp"
#include "petkin/parallel.hpp"
#include "petkin/phantom.hpp"
#include "petkin/plot.hpp"
#include "petkin/sime.hpp"
#include "petkin/storage.hpp"

namespace petkin::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char *kVersion = "0.1.0";

struct Context {
    std::vector<std::string> args;
    std::ostream &out;
};

// Accepts either a volume directory or a run directory holding `sub`.
fs::path volume_dir(const fs::path &p, const char *sub) {
    if (fs::exists(p / "meta.json") || !fs::exists(p / sub / "meta.json"))
        return p;
    return p / sub;
}

std::vector<std::uint8_t> load_mask(const fs::path &p, Dims3 dims, std::optional<int> label) {
    const VolumeFile vf = read_volume(volume_dir(p, "labels"));
    if (!(vf.header.spatial() == dims) || vf.header.dims[0] != 1) {
        std::ostringstream msg;
        msg << "mask " << p.string() << " has dims " << vf.header.dims[1] << "x" << vf.header.dims[2] << "x"
            << vf.header.dims[3] << ", image has " << dims.z << "x" << dims.y << "x" << dims.x;
        throw ValidationError(msg.str());
    }
    std::vector<std::uint8_t> m(vf.data.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = label ? (vf.data[i] == static_cast<float>(*label)) : (vf.data[i] != 0.0f);
    return m;
}

Json manifest(const Context &ctx, const std::string &command, int requested, int threads) {
    return {{"tool", "petkin"},
            {"version", kVersion},
            {"command", command},
            {"args", ctx.args},
            {"threads_requested", requested},
            {"threads", threads}};
}

void write_json(const fs::path &path, const Json &j) { write_text_file(path, j.dump(2) + "\n"); }

Json status_counts_json(const StatusCounts &c) {
    return {{"ok", c.ok}, {"clamped", c.clamped}, {"degenerate", c.degenerate}, {"no_signal", c.no_signal},
            {"fitted", c.fitted()}};
}

void write_fit_outputs(const fs::path &out, const VolumeFit &fit) {
    write_maps(out / "maps", fit.maps);
    write_scalar(out / "ki", "Ki", "1/min", fit.maps.dims, fit.ki);
    write_scalar(out / "residual_rms", "residual_rms", "kBq/mL", fit.maps.dims, fit.residual_rms);
    std::vector<std::int32_t> status(fit.status.size());
    for (std::size_t v = 0; v < status.size(); ++v)
        status[v] = fit.fitted[v] ? static_cast<std::int32_t>(fit.status[v]) : -1;
    write_labels(out / "status", fit.maps.dims, status);
}

Json number_or_inf(double v) { return std::isinf(v) ? Json(v > 0 ? "inf" : "-inf") : Json(v); }

struct SimulateArgs {
    std::string spec, schedule, out;
    std::optional<double> noise;
    std::optional<std::uint64_t> seed;
    std::string mode = "frame-average";
    double dt = kDefaultDt;
};

int cmd_simulate(const Context &ctx, const SimulateArgs &a, int requested) {
    const int threads = resolve_threads(requested);
    PhantomSpec spec = a.spec.empty() ? PhantomSpec::mouse() : phantom_spec_from_json(read_json_file(a.spec));
    if (a.noise)
        spec.noise_sigma0 = *a.noise;
    if (a.seed)
        spec.seed = *a.seed;
    spec.validate();
    const FrameSchedule sched = a.schedule.empty() ? mouse_fdg_schedule() : schedule_from_json(read_json_file(a.schedule));
    SimulationOptions opts;
    opts.dt = a.dt;
    opts.mode = a.mode == "midpoint" ? FrameMode::Midpoint : FrameMode::FrameAverage;
    opts.threads = threads;

    const Phantom ph = build_phantom(spec, sched);
    const DynamicImage img = simulate_scan(ph, sched, spec.noise_sigma0, spec.seed, opts);

    const fs::path out(a.out);
    write_dynamic(out / "image", img);
    write_maps(out / "maps", ph.maps);
    write_scalar(out / "ki", "Ki", "1/min", ph.dims, ki_volume(ph.maps));
    write_labels(out / "labels", ph.dims, ph.labels);
    write_aif_csv(out / "aif.csv", sample_feng(ph.aif, fine_grid(sched, opts.dt)));
    write_aif_csv(out / "aif_mid.csv", ph.truth_aif);
    write_json(out / "aif.json", feng_to_json(ph.aif));
    write_json(out / "schedule.json", schedule_to_json(sched));
    write_json(out / "phantom.json", phantom_spec_to_json(spec));
    Json regions = Json::object();
    for (std::size_t i = 0; i < ph.region_names.size(); ++i)
        regions[ph.region_names[i]] = i + 1;
    write_json(out / "regions.json", regions);

    Json m = manifest(ctx, "simulate", requested, threads);
    m["config"] = {{"phantom", phantom_spec_to_json(spec)},
                   {"schedule", schedule_to_json(sched)},
                   {"mode", a.mode},
                   {"dt", a.dt}};
    m["seed"] = spec.seed;
    write_json(out / "manifest.json", m);
    ctx.out << "simulated " << img.frames() << " frames x " << ph.dims.z << "x" << ph.dims.y << "x" << ph.dims.x
            << " into " << out.string() << "\n";
    return kExitOk;
}

struct FitArgs {
    std::string image, aif, method = "lls+nls", config, out, mask;
};

int cmd_fit(const Context &ctx, const FitArgs &a, int requested) {
    const int threads = resolve_threads(requested);
    const DynamicImage img = read_dynamic(volume_dir(a.image, "image"));
    const SampledCurve ca = read_aif_csv(a.aif);
    const FitConfig cfg = a.config.empty() ? FitConfig{} : fit_config_from_json(read_json_file(a.config));
    const FitMethod method = a.method == "lls" ? FitMethod::Lls : FitMethod::LlsNls;
    const std::vector<std::uint8_t> mask = a.mask.empty() ? std::vector<std::uint8_t>{}
                                                           : load_mask(a.mask, img.dims, std::nullopt);

    const VoxelFitter fitter(ca, img.schedule, cfg);
    const VolumeFit fit = fit_volume(img, fitter, method, mask, threads);

    const fs::path out(a.out);
    write_fit_outputs(out, fit);
    Json summary = {{"method", a.method},
                    {"status_counts", status_counts_json(fit.counts)},
                    {"aif_extrapolated_nodes", fitter.model().extrapolated()}};
    write_json(out / "summary.json", summary);
    Json m = manifest(ctx, "fit", requested, threads);
    m["config"] = {{"fit", fit_config_to_json(cfg)}, {"method", a.method}};
    m["inputs"] = {{"image", a.image}, {"aif", a.aif}, {"mask", a.mask}};
    write_json(out / "manifest.json", m);
    ctx.out << "fitted " << fit.counts.fitted() << " voxels (" << fit.counts.ok << " ok, " << fit.counts.clamped
            << " clamped, " << fit.counts.degenerate << " degenerate, " << fit.counts.no_signal << " no signal)\n";
    return kExitOk;
}

struct SimeArgs {
    std::string image, config, out, mask, blood_mask;
    std::optional<int> blood_label;
};

int cmd_sime(const Context &ctx, const SimeArgs &a, int requested) {
    const int threads = resolve_threads(requested);
    const DynamicImage img = read_dynamic(volume_dir(a.image, "image"));
    const SimeConfig cfg = a.config.empty() ? SimeConfig{} : sime_config_from_json(read_json_file(a.config));
    const std::vector<std::uint8_t> mask = a.mask.empty() ? std::vector<std::uint8_t>{}
                                                           : load_mask(a.mask, img.dims, std::nullopt);
    const std::vector<std::uint8_t> blood = a.blood_mask.empty() ? std::vector<std::uint8_t>{}
                                                                  : load_mask(a.blood_mask, img.dims, a.blood_label);

    const SimeResult r = sime_estimate(img, mask, cfg, blood, threads);

    const fs::path out(a.out);
    write_fit_outputs(out, r.fit);
    write_aif_csv(out / "aif.csv", r.aif_mid);
    write_json(out / "aif.json", feng_to_json(r.aif));
    std::string trace = "iteration,objective\n";
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, r.objective_trace[i]);
        trace += buf;
    }
    write_text_file(out / "objective_trace.csv", trace);
    Json summary = {{"anchor", r.anchor == Anchor::BloodRoi ? "blood-roi" : "peak-normalization"},
                    {"outer_iterations", r.outer_iterations},
                    {"subsample_size", r.subsample.size()},
                    {"status_counts", status_counts_json(r.fit.counts)}};
    write_json(out / "summary.json", summary);
    Json m = manifest(ctx, "sime", requested, threads);
    m["config"] = sime_config_to_json(cfg);
    m["seed"] = cfg.seed;
    m["inputs"] = {{"image", a.image}, {"mask", a.mask}, {"blood_mask", a.blood_mask}};
    write_json(out / "manifest.json", m);
    ctx.out << "sime finished after " << r.outer_iterations << " outer iterations\n";
    return kExitOk;
}

struct MetricsArgs {
    std::string est, ref, aif_est, aif_ref, out;
    int window = 11;
    std::string window_kind = "gaussian";
};

int cmd_metrics(const Context &ctx, const MetricsArgs &a) {
    SsimConfig scfg;
    scfg.window = a.window;
    if (a.window_kind == "uniform")
        scfg.kind = WindowKind::Uniform;
    const ParametricMaps est = read_maps(volume_dir(a.est, "maps"));
    const ParametricMaps ref = read_maps(volume_dir(a.ref, "maps"));
    const MapsScore score = score_maps(est, ref, scfg);

    Json channels = Json::array();
    for (const auto &c : score.channels)
        channels.push_back(
            {{"name", c.name}, {"ssim", c.ssim}, {"psnr", number_or_inf(c.psnr)}, {"dynamic_range", c.dynamic_range}});
    Json report = {{"channels", channels},
                   {"mean_ssim", score.mean_ssim},
                   {"mean_psnr", number_or_inf(score.mean_psnr)},
                   {"ssim_config",
                    {{"window", scfg.window},
                     {"window_kind", a.window_kind},
                     {"sigma", scfg.sigma},
                     {"k1", scfg.k1},
                     {"k2", scfg.k2},
                     {"dynamic_range", "max of reference channel"}}}};
    if (!a.aif_est.empty() || !a.aif_ref.empty()) {
        if (a.aif_est.empty() || a.aif_ref.empty())
            throw ValidationError("--aif-est and --aif-ref must be given together");
        const AifMetrics m = aif_metrics(read_aif_csv(a.aif_est), read_aif_csv(a.aif_ref));
        report["aif"] = {{"rmse", m.rmse},
                         {"nrmse", m.nrmse},
                         {"peak_rel_err", m.peak_rel_err},
                         {"peak_time_diff_s", m.peak_time_diff_s},
                         {"auc_rel_err", m.auc_rel_err}};
    }
    write_json(a.out, report);
    ctx.out << "mean SSIM " << score.mean_ssim << ", mean PSNR " << score.mean_psnr << " dB\n";
    return kExitOk;
}

struct PlotArgs {
    std::string kind, out, channel, title;
    std::vector<std::string> inputs, labels;
    std::optional<std::size_t> slice;
};

int cmd_plot(const Context &ctx, const PlotArgs &a) {
    PlotSpec spec;
    spec.kind = plot_kind_from_string(a.kind);
    for (const auto &i : a.inputs)
        spec.inputs.emplace_back(i);
    spec.labels = a.labels;
    spec.slice = a.slice;
    spec.channel = a.channel;
    spec.title = a.title;
    write_text_file(a.out, render_plot(spec));
    ctx.out << "wrote " << a.out << "\n";
    return kExitOk;
}

void error_line(std::ostream &err, const char *kind, const std::string &message) {
    err << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Dynamic PET tracer-kinetics engine", "petkin"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    int threads = 0;
    auto add_threads = [&](CLI::App *sub) {
        sub->add_option("--threads", threads, "Worker threads; 0 = one per hardware thread")
            ->envname("PETKIN_THREADS")
            ->check(CLI::NonNegativeNumber);
    };

    SimulateArgs sa;
    auto *sim = app.add_subcommand("simulate", "Simulate a phantom scan");
    sim->add_option("--spec", sa.spec, "Phantom spec JSON (default: 32^3 mouse phantom)");
    sim->add_option("--schedule", sa.schedule, "Frame schedule JSON (default: 1x30, 24x5, 9x20, 8x300 s)");
    sim->add_option("--out", sa.out, "Output directory")->required();
    sim->add_option("--noise", sa.noise, "Noise level sigma0");
    sim->add_option("--seed", sa.seed, "Noise seed");
    sim->add_option("--mode", sa.mode, "Frame discretization")->check(CLI::IsMember({"frame-average", "midpoint"}));
    sim->add_option("--dt", sa.dt, "Fine-grid spacing in seconds");
    add_threads(sim);

    FitArgs fa;
    auto *fit = app.add_subcommand("fit", "Fit kinetic parameter maps with a known AIF");
    fit->add_option("--image", fa.image, "Dynamic volume directory")->required();
    fit->add_option("--aif", fa.aif, "AIF CSV (time_s,value_kbq_ml)")->required();
    fit->add_option("--method", fa.method, "Fitting method")->check(CLI::IsMember({"lls", "lls+nls"}));
    fit->add_option("--config", fa.config, "FitConfig JSON");
    fit->add_option("--out", fa.out, "Output directory")->required();
    fit->add_option("--mask", fa.mask, "Mask volume directory (non-zero voxels are fitted)");
    add_threads(fit);

    SimeArgs ea;
    auto *sime = app.add_subcommand("sime", "Estimate the AIF and parameter maps jointly");
    sime->add_option("--image", ea.image, "Dynamic volume directory")->required();
    sime->add_option("--config", ea.config, "SimeConfig JSON");
    sime->add_option("--out", ea.out, "Output directory")->required();
    sime->add_option("--mask", ea.mask, "Mask volume directory");
    sime->add_option("--blood-mask", ea.blood_mask, "Blood-pool ROI volume directory");
    sime->add_option("--blood-label", ea.blood_label, "Label value selecting the ROI inside --blood-mask");
    add_threads(sime);

    MetricsArgs ma;
    auto *met = app.add_subcommand("metrics", "Score estimated maps (and AIF) against a reference");
    met->add_option("--est", ma.est, "Estimated maps directory")->required();
    met->add_option("--ref", ma.ref, "Reference maps directory")->required();
    met->add_option("--aif-est", ma.aif_est, "Estimated AIF CSV");
    met->add_option("--aif-ref", ma.aif_ref, "Reference AIF CSV");
    met->add_option("--out", ma.out, "Report JSON path")->required();
    met->add_option("--ssim-window", ma.window, "SSIM window side");
    met->add_option("--ssim-kind", ma.window_kind, "SSIM window kind")->check(CLI::IsMember({"gaussian", "uniform"}));

    PlotArgs pa;
    auto *plt = app.add_subcommand("plot", "Render an SVG figure");
    plt->add_option("--kind", pa.kind, "aif-overlay | identity-scatter | map-slice")
        ->required()
        ->check(CLI::IsMember({"aif-overlay", "identity-scatter", "map-slice"}));
    plt->add_option("--input", pa.inputs, "Input file or volume directory (repeatable)")->required();
    plt->add_option("--label", pa.labels, "Legend label per input (repeatable)");
    plt->add_option("--slice", pa.slice, "Axial slice index (map-slice)");
    plt->add_option("--channel", pa.channel, "Channel name (map-slice)");
    plt->add_option("--title", pa.title, "Figure title");
    plt->add_option("--out", pa.out, "Output SVG path")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::Success &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        error_line(err, "usage", e.what());
        return kExitValidation;
    }

    const Context ctx{args, out};
    try {
        if (sim->parsed())
            return cmd_simulate(ctx, sa, threads);
        if (fit->parsed())
            return cmd_fit(ctx, fa, threads);
        if (sime->parsed())
            return cmd_sime(ctx, ea, threads);
        if (met->parsed())
            return cmd_metrics(ctx, ma);
        return cmd_plot(ctx, pa);
    } catch (const ValidationError &e) {
        error_line(err, "validation", e.what());
        return kExitValidation;
    } catch (const NumericError &e) {
        error_line(err, "numeric", e.what());
        return kExitNumeric;
    } catch (const fs::filesystem_error &e) {
        error_line(err, "validation", e.what());
        return kExitValidation;
    } catch (const std::exception &e) {
        error_line(err, "internal", e.what());
        return kExitInternal;
    }
}

int run(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace petkin::cli
