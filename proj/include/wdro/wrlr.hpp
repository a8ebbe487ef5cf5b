#pragma once

// Wasserstein-robust logistic regression: class boxes mean +- sd, the plain LR
// baseline, prediction, AUC and radius selection by cross-validation.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/model.hpp"
#include "wdro/reformulation.hpp"
#include "wdro/sip.hpp"

namespace wdro {

enum class ModelKind { LR, WRLR };
enum class SolverChoice { CuttingSurface, Exchange };

std::string_view to_string(ModelKind kind);
std::string_view to_string(SolverChoice choice);
SolverChoice parse_solver(std::string_view name);

struct WrlrOptions {
    double theta_radius = 10.0;
    SolverChoice solver = SolverChoice::CuttingSurface;
    /// eps, alpha, drop_cuts, threads and max_iters are taken from here.
    SipOptions sip = [] {
        SipOptions s;
        s.eps = 1e-5;
        return s;
    }();
    /// Join each class box with the observed atoms of that class.
    bool include_atoms = true;
};

struct FittedModel {
    ModelKind kind = ModelKind::LR;
    double r0_used = 0.0;
    Vector theta;  // intercept first
    std::vector<std::string> feature_names;
    std::optional<SolveTrace> trace;
};

/// Per-class boxes mean_j +- sd_j (sample sd, zero for a single sample).
std::array<BoxRegion, 2> build_regions(const Dataset& train);
std::array<UncertaintySet, 2> build_support(const Dataset& train, bool include_atoms = true);
ProblemData make_wrlr_problem(const Dataset& train, double r0, const WrlrOptions& options = {});

FittedModel fit_lr(const Dataset& train, const WrlrOptions& options = {});
FittedModel fit_wrlr(const Dataset& train, double r0, const WrlrOptions& options = {});
/// r0 == 0 routes to fit_lr.
FittedModel fit_model(const Dataset& train, double r0, const WrlrOptions& options = {});

double predict_score(const FittedModel& model, std::span<const double> features);
Vector predict_scores(const FittedModel& model, const Dataset& data);

/// P(score+ > score-) + P(tie) / 2 via average ranks.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(const FittedModel& model, const Dataset& data);

struct CvReport {
    Vector grid;
    Vector mean_auc;  // one per grid entry
    double chosen_r0 = 0.0;
    std::vector<int> fold_of;  // per training row
    int resamples = 0;         // extra fold draws needed
    std::size_t scored_folds = 0;
};

/// Stratified seeded k-fold selection. Folds whose held-out part lacks a
/// class are left out of the means.
CvReport select_r0(const Dataset& train, std::span<const double> grid, const WrlrOptions& options,
                   int folds = 4, std::uint64_t seed = 0, unsigned threads = 1);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

}  // namespace wdro
