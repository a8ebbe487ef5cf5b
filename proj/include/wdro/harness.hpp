#pragma once

// Repeated train/test experiment comparing LR and WRLR out-of-sample AUC.
//
// Output files:
//   results CSV    one row per repetition, deterministic for a fixed config
//   aggregate JSON summary statistics, deterministic for a fixed config
//   timing CSV     wall-clock breakdown per repetition (optional)

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/dataset_io.hpp"
#include "wdro/model.hpp"
#include "wdro/wrlr.hpp"

namespace wdro {

struct ExperimentConfig {
    std::string dataset_path;
    CsvOptions csv;
    std::size_t m = 50;
    int repetitions = 30;
    Vector r0_grid{0.0, 0.01, 0.05, 0.1, 0.5, 1.0};
    int folds = 4;
    double eps = 1e-5;
    std::uint64_t seed = 0;
    SolverChoice solver = SolverChoice::CuttingSurface;
    bool drop_cuts = false;
    double alpha = 2.0;
    double theta_radius = 10.0;
    bool include_atoms = true;
    bool welch = false;
    unsigned threads = 1;
    std::string results_csv;
    std::string aggregate_json;
    std::string timing_csv;

    void validate() const;
    WrlrOptions wrlr_options() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct RepetitionResult {
    int rep = 0;
    std::uint64_t seed = 0;
    double chosen_r0 = 0.0;
    double auc_lr = 0.0;
    double auc_wrlr = 0.0;
    int iters = 0;         // outer iterations of the final WRLR fit
    std::size_t cuts = 0;  // master constraints of the final WRLR fit, seed cuts included

    bool operator==(const RepetitionResult&) const = default;
};

struct RepetitionTiming {
    int rep = 0;
    double master_fraction = 0.0;      // of the final WRLR fit's wall time
    double separation_fraction = 0.0;  // of the final WRLR fit's wall time
    double fit_seconds = 0.0;
    double wall_seconds = 0.0;  // whole repetition including cross-validation

    bool operator==(const RepetitionTiming&) const = default;
};

struct Aggregate {
    int repetitions = 0;
    double mean_auc_lr = 0.0;
    double se_auc_lr = 0.0;
    double mean_auc_wrlr = 0.0;
    double se_auc_wrlr = 0.0;
    double mean_diff = 0.0;
    std::optional<double> relative_diff;  // absent when mean AUC_LR == 1
    double p_value = 0.0;                 // one-sided paired t
    std::optional<double> welch_p_value;  // one-sided Welch, when requested
    double mean_iters = 0.0;
    double mean_cuts = 0.0;

    bool operator==(const Aggregate&) const = default;
};

struct ExperimentResult {
    std::vector<RepetitionResult> repetitions;
    std::vector<RepetitionTiming> timing;
    Aggregate aggregate;
};

/// One-sided paired t-test of H1: mean(a - b) > 0 with n - 1 degrees of freedom.
/// Zero-variance differences give 0, 1 or 1/2 by the sign of the mean.
double paired_pvalue(std::span<const double> a, std::span<const double> b);
/// One-sided Welch test of H1: mean(a) > mean(b).
double welch_pvalue(std::span<const double> a, std::span<const double> b);

Aggregate aggregate(const std::vector<RepetitionResult>& reps, bool welch = false);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Uniform draw of m training rows without replacement; the rest is the test
/// set. Redraws (up to 20 times) until both parts hold both classes.
Split draw_split(const Dataset& data, std::size_t m, std::mt19937_64& rng);

RepetitionResult run_repetition(const ExperimentConfig& config, const Dataset& data, int rep,
                                RepetitionTiming* timing = nullptr);
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data);
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Exact column set of the results CSV, in order.
const std::vector<std::string>& results_csv_columns();
const std::vector<std::string>& timing_csv_columns();

void write_results_csv(std::ostream& out, const std::vector<RepetitionResult>& reps);
std::vector<RepetitionResult> read_results_csv(std::istream& in);
void write_timing_csv(std::ostream& out, const std::vector<RepetitionTiming>& timing);
std::vector<RepetitionTiming> read_timing_csv(std::istream& in);
nlohmann::json aggregate_to_json(const Aggregate& agg);
Aggregate aggregate_from_json(const nlohmann::json& j);

/// Writes every configured output path; empty paths are skipped.
void emit_results(const ExperimentResult& result, const ExperimentConfig& config);

}  // namespace wdro
