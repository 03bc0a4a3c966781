#include "pld/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "pld/parallel.hpp"
#include "pld/stats.hpp"

namespace pld {

namespace {

std::uint64_t mix_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t mix_f64(std::uint64_t h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return mix_u64(h, bits);
}

// Shortest decimal form that parses back to the same double.
std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_f64(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw MalformedRecord("report csv: bad numeric field '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw MalformedRecord("report csv: bad integer field '" + std::string(s) + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

PartyMetrics party_from_counts(std::size_t acc, std::size_t dec, std::size_t n) {
    PartyMetrics p;
    p.accuracy = double(acc) / double(n);
    p.deception = double(dec) / double(n);
    p.failure = double(n - acc - dec) / double(n);
    p.halfwidth = binomial_halfwidth(p.accuracy, n);
    return p;
}

constexpr char kReportHeader[] =
    "scene,scheme,alpha,party,n_trials,accuracy,deception,failure,halfwidth,"
    "tx_success_rate,mean_gain,seed,config_hash,coding_rate";

}  // namespace

double coding_rate(int height, int width, int channels, int bits_per_channel, int n_tags) {
    if (height <= 0 || width <= 0 || channels <= 0 || bits_per_channel <= 0 || n_tags <= 0)
        throw std::invalid_argument("coding_rate: dimensions and tag count must be positive");
    const double payload = double(height) * width * channels * bits_per_channel;
    return std::log2(double(n_tags)) / payload;
}

std::uint64_t experiment_config_hash(const SceneConfig& scene, const Scheme& scheme,
                                     std::size_t n_trials, std::uint64_t seed) {
    std::uint64_t h = fnv1a64("pld-experiment");
    h = fnv1a64(scene.label, h);
    h = mix_f64(h, scene.total_power);
    h = mix_f64(h, scene.bob_mean_gain_db);
    h = mix_f64(h, scene.eve_mean_gain_db);
    h = mix_f64(h, scene.bandwidth);
    h = mix_f64(h, scene.noise_psd);
    h = mix_f64(h, scene.bit_rate);
    h = mix_u64(h, std::uint64_t(scene.fading));
    h = fnv1a64(scheme.token(), h);
    h = mix_f64(h, scheme.alpha);
    h = mix_f64(h, scheme.power_scale);
    h = mix_f64(h, scheme.power_watts);
    h = mix_u64(h, n_trials);
    h = mix_u64(h, seed);
    return h;
}

Metrics run_monte_carlo(const SceneConfig& scene, const Scheme& scheme,
                        const PipelineContext& ctx, std::size_t n_trials, std::uint64_t seed,
                        std::size_t alpha_index) {
    if (n_trials < 1) throw std::invalid_argument("run_monte_carlo: need at least one trial");
    (void)scheme.budget_for(scene);  // validate configuration before fanning out

    std::vector<TrialRecord> records(n_trials);
    const std::uint64_t scene_h = fnv1a64(scene.label);
    const std::uint64_t scheme_h = fnv1a64(scheme.token());
    parallel_for(n_trials, [&](std::size_t i) {
        const std::uint64_t trial_seed =
            derive_seed(seed, fnv1a64("mc-trial"), scene_h, scheme_h,
                        (std::uint64_t(alpha_index) << 40) | std::uint64_t(i));
        records[i] = run_trial(std::nullopt, scheme, scene, ctx, trial_seed);
    });

    std::size_t bob_acc = 0, bob_dec = 0;
    std::size_t ef_acc = 0, ef_dec = 0;
    std::size_t ep_acc = 0, ep_dec = 0;
    std::size_t tx_ok = 0;
    double gain_bob = 0.0, gain_eve = 0.0;
    for (const TrialRecord& r : records) {
        bob_acc += r.perceived_bob == r.true_message;
        bob_dec += r.perceived_bob == r.falsified_message;
        ef_acc += r.perceived_eve_full == r.true_message;
        ef_dec += r.perceived_eve_full == r.falsified_message;
        ep_acc += r.perceived_eve_partial == r.true_message;
        ep_dec += r.perceived_eve_partial == r.falsified_message;
        tx_ok += r.tx_success;
        gain_bob += r.bob_gain;
        gain_eve += r.eve_gain;
    }

    Metrics m;
    m.n_trials = n_trials;
    m.bob = party_from_counts(bob_acc, bob_dec, n_trials);
    m.eve_full = party_from_counts(ef_acc, ef_dec, n_trials);
    m.eve_partial = party_from_counts(ep_acc, ep_dec, n_trials);
    m.tx_success_rate = double(tx_ok) / double(n_trials);
    m.mean_bob_gain = gain_bob / double(n_trials);
    m.mean_eve_gain = gain_eve / double(n_trials);
    return m;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 9; ++i) grid.push_back(double(50 + 5 * i) / 100.0);
    return grid;
}

ExperimentReport sweep_alpha(const SceneConfig& scene, const PipelineContext& ctx,
                             std::vector<double> grid, std::size_t n_trials_per_point,
                             std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("sweep_alpha: empty grid");
    for (double a : grid)
        if (!(a >= 0.5 && a < 1.0))
            throw std::invalid_argument("sweep_alpha: grid values must lie in [0.5, 1)");
    std::sort(grid.begin(), grid.end());

    ExperimentReport report;
    report.scene_label = scene.label;
    report.scheme_token = "venena";
    report.alphas = grid;
    report.seed = seed;
    report.coding_rate = coding_rate(kImageSide, kImageSide, kImageChannels, 8, kNumClasses);

    std::uint64_t h = experiment_config_hash(scene, Scheme::venena(grid.front()),
                                             n_trials_per_point, seed);
    for (double a : grid) h = mix_f64(h, a);
    report.config_hash = h;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        Stopwatch watch;
        const Scheme scheme = Scheme::venena(grid[i]);
        report.points.push_back(
            run_monte_carlo(scene, scheme, ctx, n_trials_per_point, seed, i));
        const double dt = watch.seconds();
        std::cout << "[time] sweep " << scene.label << " alpha=" << grid[i] << ": " << dt
                  << " s (" << double(n_trials_per_point) / dt << " trials/s)\n";
    }
    return report;
}

std::vector<ExperimentReport> run_benchmark(const SceneConfig& scene, const PipelineContext& ctx,
                                            std::size_t n_trials, std::uint64_t seed,
                                            double venena_alpha, double pls_watts) {
    std::vector<Scheme> schemes = {Scheme::venena(venena_alpha), Scheme::nve_full_power(),
                                   Scheme::nve_fixed_power(venena_alpha)};
    if (pls_watts > 0.0) schemes.push_back(Scheme::nve_pls_baseline(pls_watts));

    std::vector<ExperimentReport> reports;
    for (const Scheme& scheme : schemes) {
        Stopwatch watch;
        ExperimentReport r;
        r.scene_label = scene.label;
        r.scheme_token = scheme.token();
        r.alphas = {scheme.alpha};
        r.seed = seed;
        r.config_hash = experiment_config_hash(scene, scheme, n_trials, seed);
        r.coding_rate = coding_rate(kImageSide, kImageSide, kImageChannels, 8, kNumClasses);
        r.points.push_back(run_monte_carlo(scene, scheme, ctx, n_trials, seed));
        reports.push_back(std::move(r));
        const double dt = watch.seconds();
        std::cout << "[time] benchmark " << scene.label << "/" << scheme.token() << ": " << dt
                  << " s (" << double(n_trials) / dt << " trials/s)\n";
    }
    return reports;
}

double calibrate_pls_baseline(const SceneConfig& scene, const PipelineContext& ctx,
                              double target_accuracy, std::uint64_t seed,
                              std::size_t n_trials_per_eval) {
    if (!(target_accuracy > 0.0 && target_accuracy < 1.0))
        throw std::invalid_argument("calibrate_pls_baseline: target must lie in (0, 1)");
    if (ctx.db == nullptr || ctx.model == nullptr)
        throw std::invalid_argument("calibrate_pls_baseline: pipeline context incomplete");

    // Channel-free ceiling: the best any power level can reach is the
    // classifier's accuracy on the clean encoded images themselves.
    const std::size_t n_ceiling = std::max<std::size_t>(n_trials_per_eval, 300);
    RandomSource rng(derive_seed(seed, fnv1a64("pls-ceiling")));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_ceiling; ++i) {
        const Message m(int(rng.uniform_index(kNumClasses)));
        const ImageRecord& img = encode_visual(m, *ctx.db, ctx.table, rng);
        correct += forward(*ctx.model, img).top_tag == ctx.table.tag_of(m);
    }
    const double ceiling = double(correct) / double(n_ceiling);
    if (target_accuracy > ceiling)
        throw Unreachable("calibrate_pls_baseline: target exceeds the clean ceiling");

    // Every evaluation reuses one seed, so trial noise is common across power
    // levels and measured accuracy is monotone in power.
    const std::uint64_t eval_seed = derive_seed(seed, fnv1a64("pls-eval"));
    const auto accuracy_at = [&](double log_watts) {
        const Scheme s = Scheme::nve_pls_baseline(std::exp(log_watts));
        return run_monte_carlo(scene, s, ctx, n_trials_per_eval, eval_seed).bob.accuracy;
    };

    const double ln10 = std::log(10.0);
    double lo = std::log(scene.total_power) - 6.0 * ln10;
    double hi = std::log(scene.total_power) + 3.0 * ln10;
    if (accuracy_at(hi) + 1e-12 < target_accuracy)
        throw Unreachable("calibrate_pls_baseline: target unreachable within the power range");

    for (int iter = 0; iter < 20; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double acc = accuracy_at(mid);
        if (std::abs(acc - target_accuracy) <= 0.01) return std::exp(mid);
        if (acc < target_accuracy)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

void export_report_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("export_report_csv: cannot open " + path);
    out << kReportHeader << "\n";
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        const Metrics& m = report.points[i];
        const struct {
            const char* name;
            const PartyMetrics* p;
            double gain;
        } parties[] = {{"bob", &m.bob, m.mean_bob_gain},
                       {"eve_full", &m.eve_full, m.mean_eve_gain},
                       {"eve_partial", &m.eve_partial, m.mean_eve_gain}};
        for (const auto& row : parties) {
            out << report.scene_label << ',' << report.scheme_token << ','
                << fmt(report.alphas[i]) << ',' << row.name << ',' << m.n_trials << ','
                << fmt(row.p->accuracy) << ',' << fmt(row.p->deception) << ','
                << fmt(row.p->failure) << ',' << fmt(row.p->halfwidth) << ','
                << fmt(m.tx_success_rate) << ',' << fmt(row.gain) << ',' << report.seed << ','
                << report.config_hash << ',' << fmt(report.coding_rate) << "\n";
        }
    }
    if (!out) throw IoError("export_report_csv: write failed for " + path);
}

void export_curves_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("export_curves_csv: cannot open " + path);
    out << "alpha,bob_accuracy,eve_full_accuracy,eve_partial_accuracy,"
           "bob_deception,eve_full_deception,eve_partial_deception\n";
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        const Metrics& m = report.points[i];
        out << fmt(report.alphas[i]) << ',' << fmt(m.bob.accuracy) << ','
            << fmt(m.eve_full.accuracy) << ',' << fmt(m.eve_partial.accuracy) << ','
            << fmt(m.bob.deception) << ',' << fmt(m.eve_full.deception) << ','
            << fmt(m.eve_partial.deception) << "\n";
    }
    if (!out) throw IoError("export_curves_csv: write failed for " + path);
}

namespace {

nlohmann::json party_to_json(const PartyMetrics& p) {
    return {{"accuracy", p.accuracy},
            {"deception", p.deception},
            {"failure", p.failure},
            {"halfwidth", p.halfwidth}};
}

PartyMetrics party_from_json(const nlohmann::json& j) {
    PartyMetrics p;
    p.accuracy = j.at("accuracy").get<double>();
    p.deception = j.at("deception").get<double>();
    p.failure = j.at("failure").get<double>();
    p.halfwidth = j.at("halfwidth").get<double>();
    return p;
}

}  // namespace

void save_report_json(const ExperimentReport& report, const std::string& path) {
    nlohmann::json j;
    j["scene"] = report.scene_label;
    j["scheme"] = report.scheme_token;
    j["alphas"] = report.alphas;
    j["seed"] = report.seed;
    j["config_hash"] = report.config_hash;
    j["coding_rate"] = report.coding_rate;
    j["points"] = nlohmann::json::array();
    for (const Metrics& m : report.points) {
        j["points"].push_back({{"bob", party_to_json(m.bob)},
                               {"eve_full", party_to_json(m.eve_full)},
                               {"eve_partial", party_to_json(m.eve_partial)},
                               {"n_trials", m.n_trials},
                               {"tx_success_rate", m.tx_success_rate},
                               {"mean_bob_gain", m.mean_bob_gain},
                               {"mean_eve_gain", m.mean_eve_gain}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_report_json: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("save_report_json: write failed for " + path);
}

ExperimentReport load_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_report_json: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        ExperimentReport r;
        r.scene_label = j.at("scene").get<std::string>();
        r.scheme_token = j.at("scheme").get<std::string>();
        r.alphas = j.at("alphas").get<std::vector<double>>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_hash = j.at("config_hash").get<std::uint64_t>();
        r.coding_rate = j.at("coding_rate").get<double>();
        for (const auto& pj : j.at("points")) {
            Metrics m;
            m.bob = party_from_json(pj.at("bob"));
            m.eve_full = party_from_json(pj.at("eve_full"));
            m.eve_partial = party_from_json(pj.at("eve_partial"));
            m.n_trials = pj.at("n_trials").get<std::size_t>();
            m.tx_success_rate = pj.at("tx_success_rate").get<double>();
            m.mean_bob_gain = pj.at("mean_bob_gain").get<double>();
            m.mean_eve_gain = pj.at("mean_eve_gain").get<double>();
            r.points.push_back(m);
        }
        if (r.alphas.size() != r.points.size())
            throw MalformedRecord("load_report_json: alphas/points length mismatch");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(std::string("load_report_json: ") + e.what());
    }
}

std::vector<ExperimentReport> parse_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("parse_report_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader)
        throw MalformedRecord("parse_report_csv: unexpected header");

    std::vector<ExperimentReport> reports;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 14) throw MalformedRecord("parse_report_csv: wrong column count");

        if (reports.empty() || reports.back().scene_label != f[0] ||
            reports.back().scheme_token != f[1]) {
            ExperimentReport r;
            r.scene_label = f[0];
            r.scheme_token = f[1];
            reports.push_back(std::move(r));
        }
        ExperimentReport& r = reports.back();
        r.seed = parse_u64(f[11]);
        r.config_hash = parse_u64(f[12]);
        r.coding_rate = parse_f64(f[13]);

        const double alpha = parse_f64(f[2]);
        if (r.alphas.empty() || r.alphas.back() != alpha) {
            r.alphas.push_back(alpha);
            r.points.emplace_back();
        }
        Metrics& m = r.points.back();
        m.n_trials = parse_u64(f[4]);
        m.tx_success_rate = parse_f64(f[9]);

        PartyMetrics p;
        p.accuracy = parse_f64(f[5]);
        p.deception = parse_f64(f[6]);
        p.failure = parse_f64(f[7]);
        p.halfwidth = parse_f64(f[8]);
        if (f[3] == "bob") {
            m.bob = p;
            m.mean_bob_gain = parse_f64(f[10]);
        } else if (f[3] == "eve_full") {
            m.eve_full = p;
            m.mean_eve_gain = parse_f64(f[10]);
        } else if (f[3] == "eve_partial") {
            m.eve_partial = p;
            m.mean_eve_gain = parse_f64(f[10]);
        } else {
            throw MalformedRecord("parse_report_csv: unknown party " + f[3]);
        }
    }
    return reports;
}

}  // namespace pld
