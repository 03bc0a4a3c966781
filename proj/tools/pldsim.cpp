// pldsim: command-line driver for the deceptive-transmission simulator.
//
// Subcommands: train, poison, simulate, sweep, calibrate, report. Global
// options (seed, dataset, paths) may come from a JSON config file; explicit
// flags override it. PLDSIM_WORKERS (or --workers) bounds thread fan-out.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pld/harness.hpp"
#include "pld/parallel.hpp"

namespace {

struct AppOptions {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string dataset = "synthetic";  // synthetic | cifar10
    std::string cifar_path;             // concatenated CIFAR-10 binary batches
    std::size_t per_class = 600;        // synthetic corpus size
    std::string model_path = "model.bin";
    std::string cache_path = "poison_cache.bin";
    std::size_t cache_entries = 200;
    std::size_t benchmark_trials = 1000;  // paper scale: 10000
    std::size_t sweep_trials = 300;       // paper scale: 1000
    bool paper_scale = false;
    int workers = 0;  // 0: leave PLDSIM_WORKERS / hardware default
    pld::TrainConfig train;
    pld::PoisonConfig poison;
    std::map<std::string, pld::SceneConfig> scenes;
};

AppOptions with_preset_scenes() {
    AppOptions o;
    for (int n = 1; n <= 3; ++n) {
        const pld::SceneConfig s = pld::scene_preset(n);
        o.scenes[s.label] = s;
    }
    return o;
}

pld::FadingModel fading_from_name(const std::string& name) {
    if (name == "static") return pld::FadingModel::Static;
    if (name == "rayleigh-block") return pld::FadingModel::RayleighBlock;
    if (name == "rayleigh-symbol") return pld::FadingModel::RayleighPerSymbol;
    throw CLI::ValidationError("fading must be static | rayleigh-block | rayleigh-symbol");
}

std::string fading_name(pld::FadingModel f) {
    switch (f) {
        case pld::FadingModel::Static: return "static";
        case pld::FadingModel::RayleighBlock: return "rayleigh-block";
        case pld::FadingModel::RayleighPerSymbol: return "rayleigh-symbol";
    }
    return "rayleigh-block";
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_config_json(AppOptions& o, const nlohmann::json& j) {
    maybe(j, "seed", o.seed);
    maybe(j, "dataset", o.dataset);
    maybe(j, "cifar_path", o.cifar_path);
    maybe(j, "per_class", o.per_class);
    maybe(j, "model_path", o.model_path);
    maybe(j, "cache_path", o.cache_path);
    maybe(j, "cache_entries", o.cache_entries);
    maybe(j, "benchmark_trials", o.benchmark_trials);
    maybe(j, "sweep_trials", o.sweep_trials);
    maybe(j, "paper_scale", o.paper_scale);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        maybe(t, "learning_rate", o.train.learning_rate);
        maybe(t, "warmup_steps", o.train.warmup_steps);
        maybe(t, "total_steps", o.train.total_steps);
        maybe(t, "batch_size", o.train.batch_size);
        maybe(t, "gradient_clip_norm", o.train.gradient_clip_norm);
        maybe(t, "augment_max_bitflip", o.train.augment_max_bitflip);
        maybe(t, "heldout_every", o.train.heldout_every);
    }
    if (j.contains("poison")) {
        const auto& p = j.at("poison");
        maybe(p, "epsilon", o.poison.epsilon);
        maybe(p, "lambda1", o.poison.lambda1);
        maybe(p, "lambda2", o.poison.lambda2);
        maybe(p, "lambda3", o.poison.lambda3);
        maybe(p, "n_iter", o.poison.n_iter);
        maybe(p, "step_size", o.poison.step_size);
        maybe(p, "stop_margin", o.poison.stop_margin);
        maybe(p, "break_ber", o.poison.break_ber);
        maybe(p, "calib_samples", o.poison.calib_samples);
        maybe(p, "margin_floor", o.poison.margin_floor);
        maybe(p, "inner_train", o.poison.inner_train);
        maybe(p, "inner_batch", o.poison.inner_batch);
        maybe(p, "inner_lr", o.poison.inner_lr);
    }
    if (j.contains("scenes")) {
        for (const auto& sj : j.at("scenes")) {
            pld::SceneConfig s;
            s.label = sj.at("label").get<std::string>();
            maybe(sj, "total_power", s.total_power);
            maybe(sj, "bob_mean_gain_db", s.bob_mean_gain_db);
            maybe(sj, "eve_mean_gain_db", s.eve_mean_gain_db);
            maybe(sj, "bandwidth", s.bandwidth);
            maybe(sj, "noise_psd", s.noise_psd);
            maybe(sj, "bit_rate", s.bit_rate);
            if (sj.contains("fading"))
                s.fading = fading_from_name(sj.at("fading").get<std::string>());
            o.scenes[s.label] = s;
        }
    }
}

nlohmann::json default_config_json(const AppOptions& o) {
    nlohmann::json j;
    j["seed"] = o.seed;
    j["dataset"] = o.dataset;
    j["cifar_path"] = o.cifar_path;
    j["per_class"] = o.per_class;
    j["model_path"] = o.model_path;
    j["cache_path"] = o.cache_path;
    j["cache_entries"] = o.cache_entries;
    j["benchmark_trials"] = o.benchmark_trials;
    j["sweep_trials"] = o.sweep_trials;
    j["paper_scale"] = o.paper_scale;
    j["train"] = {{"learning_rate", o.train.learning_rate},
                  {"warmup_steps", o.train.warmup_steps},
                  {"total_steps", o.train.total_steps},
                  {"batch_size", o.train.batch_size},
                  {"gradient_clip_norm", o.train.gradient_clip_norm},
                  {"augment_max_bitflip", o.train.augment_max_bitflip},
                  {"heldout_every", o.train.heldout_every}};
    j["poison"] = {{"epsilon", o.poison.epsilon},
                   {"lambda1", o.poison.lambda1},
                   {"lambda2", o.poison.lambda2},
                   {"lambda3", o.poison.lambda3},
                   {"n_iter", o.poison.n_iter},
                   {"step_size", o.poison.step_size},
                   {"stop_margin", o.poison.stop_margin},
                   {"break_ber", o.poison.break_ber},
                   {"calib_samples", o.poison.calib_samples},
                   {"margin_floor", o.poison.margin_floor},
                   {"inner_train", o.poison.inner_train},
                   {"inner_batch", o.poison.inner_batch},
                   {"inner_lr", o.poison.inner_lr}};
    j["scenes"] = nlohmann::json::array();
    for (const auto& [label, s] : o.scenes) {
        j["scenes"].push_back({{"label", label},
                               {"total_power", s.total_power},
                               {"bob_mean_gain_db", s.bob_mean_gain_db},
                               {"eve_mean_gain_db", s.eve_mean_gain_db},
                               {"bandwidth", s.bandwidth},
                               {"noise_psd", s.noise_psd},
                               {"bit_rate", s.bit_rate},
                               {"fading", fading_name(s.fading)}});
    }
    return j;
}

pld::SceneConfig resolve_scene(const AppOptions& o, const std::string& token) {
    if (token == "1" || token == "2" || token == "3")
        return o.scenes.count("scene" + token) ? o.scenes.at("scene" + token)
                                               : pld::scene_preset(std::stoi(token));
    const auto it = o.scenes.find(token);
    if (it == o.scenes.end())
        throw CLI::ValidationError("unknown scene '" + token + "' (use 1..3 or a config label)");
    return it->second;
}

pld::Scheme resolve_scheme(const std::string& token, double alpha, double pls_watts) {
    if (token == "venena") return pld::Scheme::venena(alpha);
    if (token == "nve-full-power") return pld::Scheme::nve_full_power();
    if (token == "nve-fixed-power") return pld::Scheme::nve_fixed_power(alpha);
    if (token == "nve-pls-baseline") {
        if (pls_watts <= 0.0)
            throw CLI::ValidationError("nve-pls-baseline needs --pls-watts (see `calibrate`)");
        return pld::Scheme::nve_pls_baseline(pls_watts);
    }
    throw CLI::ValidationError("unknown scheme '" + token + "'");
}

std::uint64_t dataset_seed(const AppOptions& o) {
    return pld::derive_seed(o.seed, pld::fnv1a64("dataset"));
}

std::uint64_t cache_seed(const AppOptions& o) {
    return pld::derive_seed(o.seed, pld::fnv1a64("poison-cache"));
}

pld::ImageDatabase load_dataset(const AppOptions& o) {
    if (o.dataset == "synthetic")
        return pld::generate_synthetic_dataset(o.per_class, pld::kImageSide, dataset_seed(o));
    if (o.dataset == "cifar10") {
        if (o.cifar_path.empty())
            throw CLI::ValidationError("--cifar-path required with --dataset cifar10");
        return pld::load_cifar10(o.cifar_path);
    }
    throw CLI::ValidationError("dataset must be synthetic | cifar10");
}

pld::ModelParams load_model_or_die(const AppOptions& o) {
    if (!std::filesystem::exists(o.model_path))
        throw CLI::ValidationError("model file '" + o.model_path + "' not found; run `train`");
    return pld::load_model(o.model_path);
}

// Loads the poison cache when present and built under the current
// dataset/model/poison configuration; nullopt otherwise.
std::optional<pld::PoisonCache> load_cache_if_fresh(const AppOptions& o,
                                                    const pld::ModelParams& model,
                                                    const pld::ImageDatabase& db) {
    if (!std::filesystem::exists(o.cache_path)) return std::nullopt;
    const std::uint64_t expected =
        pld::PoisonCache::expected_hash(model, db, o.poison, o.cache_entries, cache_seed(o));
    auto cache = pld::PoisonCache::try_load(o.cache_path, expected);
    if (!cache)
        std::cout << "note: " << o.cache_path
                  << " was built under a different configuration; ignoring it\n";
    return cache;
}

void print_point(const std::string& label, double alpha, const pld::Metrics& m) {
    const auto pct = [](double v) {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(2) << 100.0 * v;
        return ss.str();
    };
    std::cout << label << " alpha=" << alpha << " n=" << m.n_trials << "\n"
              << "  bob         acc " << pct(m.bob.accuracy) << "%  dec "
              << pct(m.bob.deception) << "%  (+/- " << pct(m.bob.halfwidth) << ")\n"
              << "  eve-full    acc " << pct(m.eve_full.accuracy) << "%  dec "
              << pct(m.eve_full.deception) << "%  (+/- " << pct(m.eve_full.halfwidth) << ")\n"
              << "  eve-partial acc " << pct(m.eve_partial.accuracy) << "%  dec "
              << pct(m.eve_partial.deception) << "%  (+/- " << pct(m.eve_partial.halfwidth)
              << ")\n"
              << "  tx-success  " << pct(m.tx_success_rate) << "%\n";
}

int run(int argc, char** argv) {
    AppOptions o = with_preset_scenes();

    // First pass: apply the config file (if any) so flags can override it.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw pld::IoError(std::string("cannot open config ") + argv[i + 1]);
            nlohmann::json j;
            in >> j;
            apply_config_json(o, j);
            o.config_path = argv[i + 1];
            break;
        }
    }

    CLI::App app{"deceptive visual transmission simulator"};
    app.fallthrough();
    app.require_subcommand(0, 1);
    std::string dump_config_path;
    app.add_option("--config", o.config_path, "JSON config file (applied before flags)");
    app.add_option("--dump-config", dump_config_path,
                   "write the effective config (with scene presets) to a file and exit");
    app.add_option("--seed", o.seed, "master seed for every derived random stream");
    app.add_option("--dataset", o.dataset, "synthetic | cifar10");
    app.add_option("--cifar-path", o.cifar_path, "concatenated CIFAR-10 binary batches");
    app.add_option("--per-class", o.per_class, "synthetic images per class");
    app.add_option("--model", o.model_path, "victim model file");
    app.add_option("--cache", o.cache_path, "poison cache file");
    app.add_option("--cache-entries", o.cache_entries, "poisoned pairs to precompute");
    app.add_flag("--paper-scale", o.paper_scale,
                 "paper-scale trial counts and training budget");
    app.add_option("--workers", o.workers, "worker threads (default: PLDSIM_WORKERS or cores)");

    auto* cmd_train = app.add_subcommand("train", "build the corpus and train the victim model");
    auto* cmd_poison = app.add_subcommand("poison", "precompute the poisoned-pair cache");
    auto* cmd_sim = app.add_subcommand("simulate", "one scene x scheme benchmark");
    auto* cmd_sweep = app.add_subcommand("sweep", "mixing-ratio sensitivity sweep");
    auto* cmd_cal = app.add_subcommand("calibrate", "match the PLS baseline power to a target");
    auto* cmd_report = app.add_subcommand("report", "re-export CSVs from a saved JSON report");

    std::string scene_token = "1";
    std::string scheme_token = "venena";
    double alpha = 0.75;
    double pls_watts = -1.0;
    std::size_t trials = 0;  // 0: scale default
    bool all_schemes = false;
    std::string out_csv = "report.csv";
    std::string out_curves;
    std::string out_json;
    cmd_sim->add_option("--scene", scene_token, "scene preset 1..3 or config label");
    cmd_sim->add_option("--scheme", scheme_token,
                        "venena | nve-full-power | nve-fixed-power | nve-pls-baseline");
    cmd_sim->add_option("--alpha", alpha, "mixing ratio (also the fixed-power fraction)");
    cmd_sim->add_option("--pls-watts", pls_watts, "calibrated power for nve-pls-baseline");
    cmd_sim->add_option("--trials", trials, "trial count (default 1000; 10000 paper scale)");
    cmd_sim->add_flag("--all-schemes", all_schemes, "benchmark every scheme in one run");
    cmd_sim->add_option("--out", out_csv, "report CSV path");
    cmd_sim->add_option("--curves", out_curves, "plot-data CSV path");
    cmd_sim->add_option("--json", out_json, "JSON report path (for `report` re-export)");

    std::string sweep_scene = "1";
    double grid_start = 0.50, grid_stop = 0.95, grid_step = 0.05;
    std::size_t sweep_trials_opt = 0;
    std::string sweep_csv = "sweep.csv";
    std::string sweep_curves = "sweep_curves.csv";
    std::string sweep_json;
    cmd_sweep->add_option("--scene", sweep_scene, "scene preset 1..3 or config label");
    cmd_sweep->add_option("--grid-start", grid_start, "first mixing ratio");
    cmd_sweep->add_option("--grid-stop", grid_stop, "last mixing ratio (inclusive)");
    cmd_sweep->add_option("--grid-step", grid_step, "grid spacing");
    cmd_sweep->add_option("--trials", sweep_trials_opt,
                          "trials per point (default 300; 1000 paper scale)");
    cmd_sweep->add_option("--out", sweep_csv, "report CSV path");
    cmd_sweep->add_option("--curves", sweep_curves, "plot-data CSV path");
    cmd_sweep->add_option("--json", sweep_json, "JSON report path");

    std::string cal_scene = "1";
    double cal_target = -1.0;
    bool cal_match_venena = false;
    double cal_alpha = 0.75;
    std::size_t cal_trials = 300;
    cmd_cal->add_option("--scene", cal_scene, "scene preset 1..3 or config label");
    cmd_cal->add_option("--target", cal_target, "target accuracy fraction in (0,1)");
    cmd_cal->add_flag("--match-venena", cal_match_venena,
                      "measure the venena Bob accuracy first and use it as the target");
    cmd_cal->add_option("--alpha", cal_alpha, "mixing ratio for --match-venena");
    cmd_cal->add_option("--eval-trials", cal_trials, "trials per bisection evaluation");

    std::string report_in, report_csv = "report.csv", report_curves;
    cmd_report->add_option("--in", report_in, "JSON report produced by simulate/sweep")
        ->required();
    cmd_report->add_option("--out", report_csv, "report CSV path");
    cmd_report->add_option("--curves", report_curves, "plot-data CSV path");

    CLI11_PARSE(app, argc, argv);

    if (o.workers >= 1) {
        const std::string w = std::to_string(o.workers);
        setenv("PLDSIM_WORKERS", w.c_str(), 1);
    }
    if (o.paper_scale) {
        o.benchmark_trials = 10000;
        o.sweep_trials = 1000;
        o.train = pld::paper_scale_train_config();
    }
    o.train.seed = pld::derive_seed(o.seed, pld::fnv1a64("train"));
    o.poison.seed = cache_seed(o);

    if (!dump_config_path.empty()) {
        std::ofstream out(dump_config_path, std::ios::binary);
        if (!out) throw pld::IoError("cannot open " + dump_config_path);
        out << default_config_json(o).dump(2) << "\n";
        std::cout << "wrote " << dump_config_path << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 0;
    }

    if (cmd_train->parsed()) {
        pld::Stopwatch watch;
        const pld::ImageDatabase db = load_dataset(o);
        std::cout << "corpus: " << db.total_images() << " images (" << db.provenance << ")\n";
        const pld::TrainResult result = pld::train(pld::desk_classifier_spec(), db, o.train);
        pld::save_model(result.model, o.model_path);
        std::cout << "trained on " << result.n_train << ", held out " << result.n_heldout
                  << ", held-out accuracy " << 100.0 * result.heldout_accuracy << "%\n"
                  << "model -> " << o.model_path << " (" << result.model.parameter_count()
                  << " parameters)\n"
                  << "[time] train: " << watch.seconds() << " s\n";
        return 0;
    }

    if (cmd_poison->parsed()) {
        pld::Stopwatch watch;
        const pld::ImageDatabase db = load_dataset(o);
        const pld::ModelParams model = load_model_or_die(o);
        const pld::PoisonCache cache = pld::PoisonCache::build(
            model, db, o.cache_entries, o.poison, cache_seed(o),
            [](std::size_t done, std::size_t total) {
                if (done % 10 == 0 || done == total)
                    std::cout << "poisoned " << done << "/" << total << "\r" << std::flush;
            });
        std::cout << "\n";
        cache.save(o.cache_path);
        const double dt = watch.seconds();
        std::cout << "cache -> " << o.cache_path << " (" << cache.entries.size()
                  << " entries, success rate " << 100.0 * cache.success_rate() << "%)\n"
                  << "[time] poison: " << dt << " s ("
                  << dt / double(cache.entries.size()) << " s/image)\n";
        return 0;
    }

    // Remaining subcommands share the full pipeline context.
    const pld::ImageDatabase db = load_dataset(o);
    const pld::ModelParams model = load_model_or_die(o);
    std::optional<pld::PoisonCache> cache = load_cache_if_fresh(o, model, db);
    pld::PipelineContext ctx;
    ctx.db = &db;
    ctx.model = &model;
    ctx.cache = cache ? &*cache : nullptr;
    ctx.poison_cfg = o.poison;

    if (cmd_sim->parsed()) {
        const pld::SceneConfig scene = resolve_scene(o, scene_token);
        const std::size_t n = trials > 0 ? trials : o.benchmark_trials;
        if (all_schemes) {
            const auto reports = pld::run_benchmark(scene, ctx, n, o.seed, alpha, pls_watts);
            for (const auto& r : reports) print_point(r.scheme_token, r.alphas[0], r.points[0]);
            for (const auto& r : reports) {
                const std::string base = out_csv + "." + r.scheme_token;
                pld::export_report_csv(r, base + ".csv");
                std::cout << "report -> " << base << ".csv\n";
            }
        } else {
            const pld::Scheme scheme = resolve_scheme(scheme_token, alpha, pls_watts);
            pld::ExperimentReport r;
            r.scene_label = scene.label;
            r.scheme_token = scheme.token();
            r.alphas = {scheme.alpha};
            r.seed = o.seed;
            r.config_hash = pld::experiment_config_hash(scene, scheme, n, o.seed);
            r.coding_rate = pld::coding_rate(pld::kImageSide, pld::kImageSide,
                                             pld::kImageChannels, 8, pld::kNumClasses);
            pld::Stopwatch watch;
            r.points.push_back(pld::run_monte_carlo(scene, scheme, ctx, n, o.seed));
            const double dt = watch.seconds();
            std::cout << "[time] simulate " << scene.label << "/" << scheme.token() << ": "
                      << dt << " s (" << double(n) / dt << " trials/s)\n";
            print_point(scene.label + "/" + scheme.token(), scheme.alpha, r.points[0]);
            pld::export_report_csv(r, out_csv);
            std::cout << "report -> " << out_csv << "\n";
            if (!out_curves.empty()) pld::export_curves_csv(r, out_curves);
            if (!out_json.empty()) pld::save_report_json(r, out_json);
        }
        return 0;
    }

    if (cmd_sweep->parsed()) {
        const pld::SceneConfig scene = resolve_scene(o, sweep_scene);
        std::vector<double> grid;
        for (double a = grid_start; a <= grid_stop + 1e-9; a += grid_step) grid.push_back(a);
        const std::size_t n = sweep_trials_opt > 0 ? sweep_trials_opt : o.sweep_trials;
        const pld::ExperimentReport r = pld::sweep_alpha(scene, ctx, grid, n, o.seed);
        for (std::size_t i = 0; i < r.alphas.size(); ++i)
            print_point(scene.label + "/venena", r.alphas[i], r.points[i]);
        pld::export_report_csv(r, sweep_csv);
        pld::export_curves_csv(r, sweep_curves);
        std::cout << "report -> " << sweep_csv << ", curves -> " << sweep_curves << "\n";
        if (!sweep_json.empty()) pld::save_report_json(r, sweep_json);
        return 0;
    }

    if (cmd_cal->parsed()) {
        const pld::SceneConfig scene = resolve_scene(o, cal_scene);
        double target = cal_target;
        if (cal_match_venena) {
            const pld::Metrics m = pld::run_monte_carlo(scene, pld::Scheme::venena(cal_alpha),
                                                        ctx, cal_trials, o.seed);
            target = m.bob.accuracy;
            std::cout << "measured venena Bob accuracy: " << 100.0 * target << "%\n";
        }
        if (!(target > 0.0 && target < 1.0))
            throw CLI::ValidationError("provide --target in (0,1) or --match-venena");
        const double watts =
            pld::calibrate_pls_baseline(scene, ctx, target, o.seed, cal_trials);
        std::cout << "calibrated power: " << watts << " W ("
                  << pld::linear_to_db(watts * 1000.0) << " dBm)\n"
                  << "use: simulate --scheme nve-pls-baseline --pls-watts " << watts << "\n";
        return 0;
    }

    if (cmd_report->parsed()) {
        const pld::ExperimentReport r = pld::load_report_json(report_in);
        pld::export_report_csv(r, report_csv);
        std::cout << "report -> " << report_csv << "\n";
        if (!report_curves.empty()) {
            pld::export_curves_csv(r, report_curves);
            std::cout << "curves -> " << report_curves << "\n";
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
