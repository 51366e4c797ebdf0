// Command-line front end: decompose, filter and inspect rasters, generate
// phantoms, and run the classifier pipeline on a manifest.

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stv/config.hpp"
#include "stv/dataset.hpp"
#include "stv/ensemble.hpp"
#include "stv/eval.hpp"
#include "stv/features.hpp"
#include "stv/io.hpp"
#include "stv/phantom.hpp"
#include "stv/spectral.hpp"

namespace fs = std::filesystem;
using namespace stv;

namespace {

// Flag values are kept as strings and applied through RunConfig::set, so the
// file and the command line share one parser and one set of error messages.
struct Overrides {
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::vector<std::unique_ptr<std::string>> storage;

    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        storage.push_back(std::make_unique<std::string>());
        options.emplace_back(key, app.add_option(flag, *storage.back(), help));
    }
    void apply(RunConfig& cfg) const {
        for (std::size_t i = 0; i < options.size(); ++i)
            if (options[i].second->count() > 0) cfg.set(options[i].first, *storage[i]);
    }
};

void add_flow_flags(CLI::App& app, Overrides& o) {
    o.add(app, "--dt", "dt", "flow time step");
    o.add(app, "--n-components", "n_components", "number of spectral components");
    o.add(app, "--inner-tol", "inner_tol", "relative duality-gap tolerance of each prox step");
    o.add(app, "--inner-max-iter", "inner_max_iter", "iteration cap of each prox step");
    o.add(app, "--boundary", "boundary", "neumann or periodic");
}

void add_pipeline_flags(CLI::App& app, Overrides& o) {
    add_flow_flags(app, o);
    o.add(app, "--manifest", "manifest", "manifest CSV");
    o.add(app, "--out", "output", "output directory");
    o.add(app, "--cache", "cache", "feature cache file (reused when settings and rasters match)");
    o.add(app, "-s,--scales-per-band", "scales_per_band", "components per band");
    o.add(app, "--overlapping", "overlapping", "sliding bands of stride 1 (true/false)");
    o.add(app, "--mode", "mode", "tree or forest");
    o.add(app, "--cutoff", "cutoff", "vertebra score cutoff (default 0.45)");
    o.add(app, "--seed", "seed", "seed for folds and forests");
    o.add(app, "--p-enh", "p_enh", "signature enhancement exponent");
    o.add(app, "--folds", "folds", "cross-validation folds");
    o.add(app, "--duplicate-lu", "duplicate_lu", "train on PATH_LU patches twice (true/false)");
    o.add(app, "--min-split", "min_split", "smallest node a tree may split");
    o.add(app, "--forest-trees", "forest_trees", "trees per band in forest mode");
    o.add(app, "--forest-max-features", "forest_max_features", "features per split in forest mode (0 = ceil(sqrt(s)))");
}

struct Globals {
    std::string config_file;
    std::size_t threads = 1;
    std::string log_file;
};

std::shared_ptr<spdlog::logger> make_logger(const std::string& file) {
    std::vector<spdlog::sink_ptr> sinks;
    auto console = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    console->set_pattern("%l: %v");
    sinks.push_back(console);
    if (!file.empty()) {
        auto sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(file, true);
        sink->set_pattern("%Y-%m-%d %H:%M:%S.%e %l: %v");
        sinks.push_back(sink);
    }
    auto logger = std::make_shared<spdlog::logger>("stv", sinks.begin(), sinks.end());
    logger->set_level(spdlog::level::info);
    logger->flush_on(spdlog::level::info);
    return logger;
}

RunConfig effective_config(const Globals& g, const Overrides& o) {
    RunConfig cfg = g.config_file.empty() ? RunConfig{} : load_config(g.config_file);
    o.apply(cfg);
    cfg.validate();
    return cfg;
}

fs::path require_output(const RunConfig& cfg) {
    if (cfg.output.empty()) throw ConfigError("an output directory is required (--out or output=)");
    fs::create_directories(cfg.output);
    return cfg.output;
}

void write_config_echo(const RunConfig& cfg, const fs::path& dir) { write_text(dir / "config.txt", format_config(cfg)); }

// Loads the manifest and its features, logging solver warnings.
std::pair<Manifest, FeatureSet> load_inputs(const RunConfig& cfg, std::size_t threads, spdlog::logger& log) {
    if (cfg.manifest.empty()) throw ConfigError("a manifest is required (--manifest or manifest=)");
    Manifest manifest = load_manifest(cfg.manifest);
    log.info("manifest {}: {} patches, {} patients", cfg.manifest.string(), manifest.records.size(),
             manifest.patients().size());
    FeatureSet features = compute_features(manifest, file_loader(manifest), cfg.flow, threads, cfg.cache);
    if (const auto n = features.unconverged_steps(); n > 0)
        log.warn("{} flow steps stopped at the inner iteration cap (best iterate kept)", n);
    return {std::move(manifest), std::move(features)};
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size() || v < 1) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": '" + item + "' is not a positive integer");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

SpectralStack stack_from_input(const std::string& path, const FlowConfig& flow, spdlog::logger& log) {
    const auto bytes = read_file(path);
    if (peek_kind(bytes) == ContainerKind::stack) return decode_stack(bytes);
    const GrayImage img = decode_raster(bytes);
    const ScaleSpace space = tv_flow(img, flow);
    if (space.has_warnings())
        log.warn("{} of {} flow steps stopped at the inner iteration cap", space.unconverged_steps, flow.steps());
    return stv_transform(space);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stv: spectral total-variation decomposition and band-ensemble classification"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_file, "key=value run configuration; flags override it");
    app.add_option("--threads", g.threads, "worker threads (outputs do not depend on it)")->check(CLI::Range(1, 1024));
    app.add_option("--log", g.log_file, "log file (timestamps appear only here)");

    // decompose
    Overrides o_dec;
    std::string dec_in, dec_out;
    auto* dec = app.add_subcommand("decompose", "write the spectral stack of a raster");
    dec->add_option("input", dec_in, "input raster")->required();
    dec->add_option("-o,--output", dec_out, "output stack file")->required();
    add_flow_flags(*dec, o_dec);

    // spectrum
    Overrides o_spec;
    std::string spec_in, spec_out;
    auto* spec = app.add_subcommand("spectrum", "write S(t) of a raster as CSV");
    spec->add_option("input", spec_in, "input raster")->required();
    spec->add_option("-o,--output", spec_out, "output CSV")->required();
    add_flow_flags(*spec, o_spec);

    // filter
    Overrides o_filt;
    std::string filt_in, filt_out;
    std::vector<std::size_t> keep;
    double gain = 1.0, residual_gain = 1.0;
    auto* filt = app.add_subcommand("filter", "keep a range of components and reconstruct");
    filt->add_option("input", filt_in, "input raster or stack")->required();
    filt->add_option("-o,--output", filt_out, "output raster")->required();
    filt->add_option("--keep", keep, "first and last component to keep (1-based, inclusive)")->expected(2)->required();
    filt->add_option("--gain", gain, "gain of the kept components");
    filt->add_option("--residual-gain", residual_gain, "gain of the residual");
    add_flow_flags(*filt, o_filt);

    // phantom
    std::string ph_kind = "disk", ph_label = "NORMAL", ph_out, ph_breaks, ph_levels;
    std::size_t ph_w = 64, ph_h = 64;
    std::optional<std::uint64_t> ph_seed;
    std::vector<std::string> ph_disks;
    double ph_radius = 8.0, ph_contrast = 1.0;
    std::optional<double> ph_cx, ph_cy;
    std::vector<std::size_t> ph_cohort;
    auto* ph = app.add_subcommand("phantom", "generate a phantom raster or a synthetic cohort");
    ph->add_option("--kind", ph_kind, "disk, two_disks, step_1d or noise_texture");
    ph->add_option("--width", ph_w, "grid width (length for step_1d)");
    ph->add_option("--height", ph_h, "grid height");
    ph->add_option("--radius", ph_radius, "disk radius");
    ph->add_option("--contrast", ph_contrast, "disk contrast");
    ph->add_option("--cx", ph_cx, "disk center x (default: grid center)");
    ph->add_option("--cy", ph_cy, "disk center y (default: grid center)");
    ph->add_option("--disk", ph_disks, "cx,cy,radius,contrast (repeat for two_disks)");
    ph->add_option("--breakpoints", ph_breaks, "comma-separated breakpoints for step_1d");
    ph->add_option("--levels", ph_levels, "comma-separated levels for step_1d");
    ph->add_option("--seed", ph_seed, "texture or cohort seed");
    ph->add_option("--label", ph_label, "texture label: NORMAL, PATH_LU or PATH_HU");
    ph->add_option("--cohort", ph_cohort, "normal and pathological patient counts")->expected(2);
    ph->add_option("-o,--output", ph_out, "output raster, or directory for --cohort")->required();

    // pipeline commands
    Overrides o_train, o_eval, o_abl, o_bi, o_sweep, o_sbc;
    auto* train = app.add_subcommand("train", "train a band ensemble on every patient of a manifest");
    add_pipeline_flags(*train, o_train);
    o_train.add(*train, "--model", "model", "model file (default <out>/model.stvm)");

    auto* eval = app.add_subcommand("eval", "cross-validate, or score a manifest with --model");
    add_pipeline_flags(*eval, o_eval);
    o_eval.add(*eval, "--model", "model", "trained model to score the manifest with");

    std::string abl_scales = "3,4,5,6,8,10,12,15", abl_modes = "tree", abl_overlap = "false";
    auto* abl = app.add_subcommand("ablate", "cross-validate over scales per band");
    add_pipeline_flags(*abl, o_abl);
    abl->add_option("--scales", abl_scales, "comma-separated scales per band");
    abl->add_option("--modes", abl_modes, "comma-separated learner modes (tree, forest)");
    abl->add_option("--overlap", abl_overlap, "comma-separated overlap settings (false, true)");

    auto* bi = app.add_subcommand("band-importance", "AUC drop when one band learner is left out");
    add_pipeline_flags(*bi, o_bi);

    std::string sweep_counts;
    auto* sweep = app.add_subcommand("sweep-components", "cross-validate on truncated signatures");
    add_pipeline_flags(*sweep, o_sweep);
    sweep->add_option("--counts", sweep_counts, "comma-separated component counts (default 20,30,...,120)");

    auto* sbc = app.add_subcommand("spectrum-by-class", "mean masked spectrum per label");
    add_pipeline_flags(*sbc, o_sbc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    std::string log_file = g.log_file;
    std::shared_ptr<spdlog::logger> log;
    try {
        // Pipeline commands log into their output directory unless told otherwise.
        auto* pipeline = app.got_subcommand(train)  ? &o_train
                         : app.got_subcommand(eval) ? &o_eval
                         : app.got_subcommand(abl)  ? &o_abl
                         : app.got_subcommand(bi)   ? &o_bi
                         : app.got_subcommand(sweep) ? &o_sweep
                         : app.got_subcommand(sbc)  ? &o_sbc
                                                    : nullptr;
        std::optional<RunConfig> cfg;
        if (pipeline) {
            cfg = effective_config(g, *pipeline);
            if (log_file.empty() && !cfg->output.empty()) {
                fs::create_directories(cfg->output);
                log_file = (cfg->output / "run.log").string();
            }
        }
        log = make_logger(log_file);

        if (app.got_subcommand(dec) || app.got_subcommand(spec) || app.got_subcommand(filt)) {
            const Overrides& o = app.got_subcommand(dec) ? o_dec : app.got_subcommand(spec) ? o_spec : o_filt;
            RunConfig flow_cfg = effective_config(g, o);
            const FlowConfig& flow = flow_cfg.flow;
            if (app.got_subcommand(dec)) {
                const GrayImage img = read_raster(dec_in);
                const ScaleSpace space = tv_flow(img, flow);
                if (space.has_warnings())
                    log->warn("{} of {} flow steps stopped at the inner iteration cap", space.unconverged_steps,
                              flow.steps());
                const SpectralStack stack = stv_transform(space);
                write_file(dec_out, encode(stack));
                std::cout << "components: " << stack.size() << "\n"
                          << "residual_norm: " << format_number(l2_norm(stack.residual)) << "\n";
            } else if (app.got_subcommand(spec)) {
                const GrayImage img = read_raster(spec_in);
                const SpectralStack stack = stack_from_input(spec_in, flow, *log);
                const Spectrum s = spectrum(img, stack);
                std::string csv = "k,t,s\n";
                for (std::size_t k = 0; k < s.values.size(); ++k)
                    csv += std::to_string(k + 1) + "," + format_number(stack.time(k + 1)) + "," +
                           format_number(s.values[k]) + "\n";
                csv += "residual,," + format_number(s.residual_term) + "\n";
                write_text(spec_out, csv);
            } else {
                const SpectralStack stack = stack_from_input(filt_in, flow, *log);
                if (keep[0] < 1 || keep[0] > keep[1] || keep[1] > stack.size())
                    throw ConfigError("--keep must satisfy 1 <= first <= last <= " + std::to_string(stack.size()));
                TransferFunction h;
                h.gains.assign(stack.size(), 0.0);
                for (std::size_t k = keep[0]; k <= keep[1]; ++k) h.gains[k - 1] = gain;
                h.residual_gain = residual_gain;
                write_raster(filt_out, stv_filter(stack, h));
            }
            return 0;
        }

        if (app.got_subcommand(ph)) {
            if (!ph_cohort.empty()) {
                if (!ph_seed) throw ConfigError("--cohort needs --seed");
                const Manifest m = write_cohort(synth_cohort(ph_cohort[0], ph_cohort[1], *ph_seed), ph_out);
                std::cout << "patients: " << m.patients().size() << "\npatches: " << m.records.size() << "\n";
                return 0;
            }
            PhantomSpec spec_ph;
            spec_ph.width = ph_w;
            spec_ph.height = ph_h;
            spec_ph.seed = ph_seed;
            if (ph_kind == "disk" || ph_kind == "two_disks") {
                spec_ph.kind = ph_kind == "disk" ? PhantomKind::disk : PhantomKind::two_disks;
                for (const auto& d : ph_disks) {
                    const auto parts = split_list(d);
                    if (parts.size() != 4) throw ConfigError("--disk expects cx,cy,radius,contrast");
                    spec_ph.disks.push_back({std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]),
                                             std::stod(parts[3])});
                }
                if (spec_ph.disks.empty())
                    spec_ph.disks.push_back({ph_cx.value_or(double(ph_w / 2)), ph_cy.value_or(double(ph_h / 2)),
                                             ph_radius, ph_contrast});
            } else if (ph_kind == "step_1d") {
                spec_ph.kind = PhantomKind::step_1d;
                spec_ph.height = 1;
                if (!ph_breaks.empty()) spec_ph.breakpoints = parse_sizes(ph_breaks, "--breakpoints");
                for (const auto& v : split_list(ph_levels)) spec_ph.levels.push_back(std::stod(v));
            } else if (ph_kind == "noise_texture") {
                spec_ph.kind = PhantomKind::noise_texture;
                spec_ph.width = spec_ph.height = kPatchSize;
                const auto label = parse_label(ph_label);
                if (!label) throw ConfigError("unknown label '" + ph_label + "'");
                spec_ph.label = *label;
            } else {
                throw ConfigError("unknown phantom kind '" + ph_kind + "'");
            }
            write_raster(ph_out, render(spec_ph));
            return 0;
        }

        const fs::path out = require_output(*cfg);
        write_config_echo(*cfg, out);
        auto [manifest, features] = load_inputs(*cfg, g.threads, *log);
        const CvConfig cv_cfg = cfg->cv(g.threads);

        if (app.got_subcommand(train)) {
            const auto rows = training_rows(manifest, cfg->duplicate_lu);
            const SignatureRows data =
                signature_rows(manifest, features, rows.rows, cfg->bands.n_components, cfg->p_enh);
            const EnsembleModel model = fit_band_ensemble(data, cv_cfg.ensemble, cfg->seed, g.threads);
            const fs::path model_path = cfg->model.empty() ? out / "model.stvm" : cfg->model;
            write_file(model_path, encode(model));
            log->info("trained {} learners on {} patches ({} duplicated LU rows)", model.learners.size(), rows.unique,
                      rows.duplicated);
        } else if (app.got_subcommand(eval)) {
            if (!cfg->model.empty()) {
                EnsembleModel model = decode_model(read_file(cfg->model));
                model.cutoff = cfg->cutoff;  // 0.45 unless configured
                const auto patients = score_patients(model, manifest, features, cfg->p_enh);
                write_text(out / "patients.csv", patients_csv(patients));
                write_text(out / "metrics.csv", metrics_csv(patients, model.cutoff));
            } else {
                const CvResult cv = run_cv(manifest, features, cv_cfg, cfg->seed);
                write_text(out / "folds.csv", cv_folds_csv(cv));
                write_text(out / "patients.csv", cv_patients_csv(cv));
                write_text(out / "roc.csv", roc_csv(cv));
                log->info("AUC {} +- {}", format_number(cv.report.auc.mean), format_number(cv.report.auc.sd));
            }
        } else if (app.got_subcommand(abl)) {
            std::vector<bool> overlaps;
            for (const auto& v : split_list(abl_overlap)) {
                if (v == "true" || v == "yes") overlaps.push_back(true);
                else if (v == "false" || v == "no") overlaps.push_back(false);
                else throw ConfigError("--overlap: '" + v + "' is not a boolean");
            }
            std::vector<LearnerMode> modes;
            for (const auto& v : split_list(abl_modes)) {
                if (v == "tree") modes.push_back(LearnerMode::tree);
                else if (v == "forest") modes.push_back(LearnerMode::forest);
                else throw ConfigError("--modes: '" + v + "' is not tree or forest");
            }
            const auto rows = ablation_scales(manifest, features, parse_sizes(abl_scales, "--scales"), overlaps, modes,
                                              cv_cfg, cfg->seed);
            write_text(out / "ablation.csv", ablation_csv(rows));
        } else if (app.got_subcommand(bi)) {
            const CvResult cv = run_cv(manifest, features, cv_cfg, cfg->seed);
            write_text(out / "folds.csv", cv_folds_csv(cv));
            write_text(out / "band_importance.csv", band_importance_csv(band_importance(manifest, cv)));
        } else if (app.got_subcommand(sweep)) {
            const auto counts = sweep_counts.empty() ? default_sweep_counts() : parse_sizes(sweep_counts, "--counts");
            write_text(out / "sweep.csv", sweep_csv(component_sweep(manifest, features, counts, cv_cfg, cfg->seed)));
        } else if (app.got_subcommand(sbc)) {
            write_text(out / "spectra.csv", spectra_csv(mean_spectrum_by_class(manifest, features)));
        }
        return 0;
    } catch (const std::exception& e) {
        if (log) log->error("{}", e.what());
        else std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
