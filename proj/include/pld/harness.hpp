#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "pld/actors.hpp"
#include "pld/scene.hpp"

namespace pld {

// Outcome rates for one receiving party over a batch of trials. The three
// rates partition the trials exactly (they are computed from integer counts),
// and the half-width is the binomial 95% interval around the accuracy.
struct PartyMetrics {
    double accuracy = 0.0;   // perceived the true message
    double deception = 0.0;  // perceived the falsified message
    double failure = 0.0;    // perceived neither
    double halfwidth = 0.0;  // 1.96 * sqrt(acc (1-acc) / n)
};

struct Metrics {
    PartyMetrics bob;
    PartyMetrics eve_full;
    PartyMetrics eve_partial;
    std::size_t n_trials = 0;
    double tx_success_rate = 0.0;  // transmitter-side content classification
    double mean_bob_gain = 0.0;    // average |h|^2 over the batch
    double mean_eve_gain = 0.0;
};

// One experiment: a scene, a scheme, and per-alpha-point metrics. Benchmarks
// hold a single point; sweeps hold the full grid, sorted ascending.
struct ExperimentReport {
    std::string scene_label;
    std::string scheme_token;
    std::vector<double> alphas;
    std::vector<Metrics> points;  // parallel to alphas
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    double coding_rate = 0.0;
};

// Wall-clock stage timer; throughput lines go to stdout only so exported
// files stay byte-deterministic.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// log2(n_tags) / (H * W * C * bits_per_channel): information rate of carrying
// one tag per image.
double coding_rate(int height, int width, int channels, int bits_per_channel, int n_tags);

// Stable hash of everything that determines an experiment's outcome.
std::uint64_t experiment_config_hash(const SceneConfig& scene, const Scheme& scheme,
                                     std::size_t n_trials, std::uint64_t seed);

// Runs n_trials independent trials and aggregates the counts. Per-trial seeds
// derive from (seed, scene, scheme, alpha_index, trial index), so the result
// is bit-identical regardless of worker count or scheduling. alpha_index
// distinguishes sweep grid points; single benchmarks pass 0.
Metrics run_monte_carlo(const SceneConfig& scene, const Scheme& scheme,
                        const PipelineContext& ctx, std::size_t n_trials, std::uint64_t seed,
                        std::size_t alpha_index = 0);

// Default sensitivity grid: 0.50 to 0.95 in steps of 0.05.
std::vector<double> default_alpha_grid();

// Runs the venena pipeline at every grid point (sorted ascending) and reports
// the three parties' metrics per point.
ExperimentReport sweep_alpha(const SceneConfig& scene, const PipelineContext& ctx,
                             std::vector<double> grid, std::size_t n_trials_per_point,
                             std::uint64_t seed);

// One single-point report per scheme: venena, full-power, fixed-power, and
// (when pls_watts > 0) the power-calibrated baseline.
std::vector<ExperimentReport> run_benchmark(const SceneConfig& scene, const PipelineContext& ctx,
                                            std::size_t n_trials, std::uint64_t seed,
                                            double venena_alpha = 0.75, double pls_watts = -1.0);

// Log-domain bisection over total power until Bob's direct-decode accuracy is
// within one percentage point of target (or 20 iterations elapse). Every
// evaluation reuses the same trial seeds, making accuracy monotone in power.
// Throws Unreachable when the target exceeds the classifier's clean ceiling.
double calibrate_pls_baseline(const SceneConfig& scene, const PipelineContext& ctx,
                              double target_accuracy, std::uint64_t seed,
                              std::size_t n_trials_per_eval = 300);

// CSV with one row per (alpha, party) carrying every Metrics field plus the
// config hash; identical reports produce byte-identical files.
void export_report_csv(const ExperimentReport& report, const std::string& path);

// Plot-data companion: one row per alpha with the accuracy and deception
// series of all three parties as columns.
void export_curves_csv(const ExperimentReport& report, const std::string& path);

// JSON container round-trip, used by the re-export subcommand.
void save_report_json(const ExperimentReport& report, const std::string& path);
ExperimentReport load_report_json(const std::string& path);

// Parses a file written by export_report_csv back into reports (one per
// scheme found). Numeric fields round-trip exactly.
std::vector<ExperimentReport> parse_report_csv(const std::string& path);

}  // namespace pld
