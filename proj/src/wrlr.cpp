#include "wdro/wrlr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wdro/parallel.hpp"

namespace wdro {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::LR ? "LR" : "WRLR"; }

std::string_view to_string(SolverChoice choice) {
    return choice == SolverChoice::CuttingSurface ? "cutting_surface" : "exchange";
}

SolverChoice parse_solver(std::string_view name) {
    if (name == "cutting_surface" || name == "cutting-surface") return SolverChoice::CuttingSurface;
    if (name == "exchange") return SolverChoice::Exchange;
    throw Error("unknown solver '" + std::string(name) + "'");
}

std::array<BoxRegion, 2> build_regions(const Dataset& train) {
    const std::size_t n = train.dimension();
    std::array<BoxRegion, 2> regions;
    for (int y : {0, 1}) {
        const std::size_t my = train.count_label(y);
        if (my == 0) throw Error("class " + std::to_string(y) + " is absent from the training data");
        Vector mean(n, 0.0), sq(n, 0.0);
        for (const Sample& s : train.samples())
            if (s.label == y)
                for (std::size_t j = 0; j < n; ++j) mean[j] += s.features[j];
        for (double& v : mean) v /= static_cast<double>(my);
        for (const Sample& s : train.samples())
            if (s.label == y)
                for (std::size_t j = 0; j < n; ++j) sq[j] += (s.features[j] - mean[j]) * (s.features[j] - mean[j]);
        Vector lo(n), hi(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double sd = my > 1 ? std::sqrt(sq[j] / static_cast<double>(my - 1)) : 0.0;
            lo[j] = mean[j] - sd;
            hi[j] = mean[j] + sd;
        }
        regions[y] = BoxRegion(std::move(lo), std::move(hi), y);
    }
    return regions;
}

std::array<UncertaintySet, 2> build_support(const Dataset& train, bool include_atoms) {
    const std::array<BoxRegion, 2> regions = build_regions(train);
    std::array<UncertaintySet, 2> support;
    for (int y : {0, 1}) {
        support[y].label = y;
        support[y].box = regions[y];
    }
    if (include_atoms)
        for (const Sample& s : train.samples()) support[s.label].points.push_back(s.features);
    return support;
}

ProblemData make_wrlr_problem(const Dataset& train, double r0, const WrlrOptions& options) {
    return make_problem(train, build_support(train, options.include_atoms), std::make_shared<LogisticLoss>(), r0,
                        ThetaBox::symmetric(train.dimension() + 1, options.theta_radius));
}

FittedModel fit_lr(const Dataset& train, const WrlrOptions& options) {
    if (train.empty()) throw Error("training data is empty");
    // The empirical problem needs no support or derived constants.
    ProblemData data;
    data.dataset = train;
    data.loss = std::make_shared<LogisticLoss>();
    data.theta_box = ThetaBox::symmetric(train.dimension() + 1, options.theta_radius);
    SolverOptions solver;
    solver.tolerance = options.sip.effective_master_tolerance();
    solver.feasibility_tolerance = std::max(solver.feasibility_tolerance, solver.tolerance);
    const EdoSolution sol = solve_edo(data, solver);

    FittedModel model;
    model.kind = ModelKind::LR;
    model.r0_used = 0.0;
    model.theta = sol.theta;
    model.feature_names = train.feature_names();
    return model;
}

FittedModel fit_wrlr(const Dataset& train, double r0, const WrlrOptions& options) {
    if (!(r0 > 0.0)) throw Error("WRLR needs a positive radius; use fit_lr for r0 = 0");
    const ProblemData data = make_wrlr_problem(train, r0, options);
    const SipResult result = options.solver == SolverChoice::CuttingSurface ? solve_cutting_surface(data, options.sip)
                                                                            : solve_exchange(data, options.sip);
    FittedModel model;
    model.kind = ModelKind::WRLR;
    model.r0_used = r0;
    model.theta = result.x.theta;
    model.feature_names = train.feature_names();
    model.trace = result.trace;
    return model;
}

FittedModel fit_model(const Dataset& train, double r0, const WrlrOptions& options) {
    return r0 == 0.0 ? fit_lr(train, options) : fit_wrlr(train, r0, options);
}

double predict_score(const FittedModel& model, std::span<const double> features) {
    if (features.size() + 1 != model.theta.size()) throw Error("feature dimension does not match the model");
    return sigmoid(link_value(model.theta, features));
}

Vector predict_scores(const FittedModel& model, const Dataset& data) {
    Vector out;
    out.reserve(data.size());
    for (const Sample& s : data.samples()) out.push_back(predict_score(model, s.features));
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t end = k;
        while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
        const double rank = 0.5 * static_cast<double>(k + 1 + end);  // average of ranks k+1..end
        for (std::size_t q = k; q < end; ++q) {
            if (labels[order[q]] == 1) {
                pos_rank_sum += rank;
                ++pos;
            } else {
                ++neg;
            }
        }
        k = end;
    }
    if (pos == 0 || neg == 0) throw Error("AUC needs both classes");
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double auc(const FittedModel& model, const Dataset& data) {
    const Vector scores = predict_scores(model, data);
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const Sample& s : data.samples()) labels.push_back(s.label);
    return auc(scores, labels);
}

namespace {

std::vector<int> stratified_folds(const Dataset& d, int folds, std::mt19937_64& rng) {
    std::vector<int> fold_of(d.size(), 0);
    for (int y : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d[i].label == y) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

bool has_both(const Dataset& d, const std::vector<int>& fold_of, int fold, bool inside) {
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < d.size(); ++i)
        if ((fold_of[i] == fold) == inside) seen[d[i].label] = true;
    return seen[0] && seen[1];
}

}  // namespace

CvReport select_r0(const Dataset& train, std::span<const double> grid, const WrlrOptions& options, int folds,
                   std::uint64_t seed, unsigned threads) {
    if (grid.empty()) throw Error("radius grid is empty");
    if (folds < 2) throw Error("cross-validation needs at least 2 folds");
    for (double r : grid)
        if (!(r >= 0.0)) throw Error("radius grid entries must be nonnegative");

    CvReport report;
    report.grid.assign(grid.begin(), grid.end());
    std::mt19937_64 rng(seed);
    constexpr int kMaxDraws = 20;
    bool ok = false;
    for (int draw = 0; draw < kMaxDraws && !ok; ++draw) {
        report.fold_of = stratified_folds(train, folds, rng);
        report.resamples = draw;
        ok = true;
        for (int f = 0; f < folds && ok; ++f) ok = has_both(train, report.fold_of, f, false);
    }
    if (!ok) throw Error("could not draw folds whose training parts contain both classes");

    std::vector<int> scored;
    std::vector<Dataset> fit_parts, test_parts;
    for (int f = 0; f < folds; ++f) {
        if (!has_both(train, report.fold_of, f, true)) continue;
        std::vector<std::size_t> in, out;
        for (std::size_t i = 0; i < train.size(); ++i) (report.fold_of[i] == f ? out : in).push_back(i);
        scored.push_back(f);
        fit_parts.push_back(train.subset(in));
        test_parts.push_back(train.subset(out));
    }
    if (scored.empty()) throw Error("no held-out fold contains both classes");
    report.scored_folds = scored.size();

    WrlrOptions inner = options;
    inner.sip.threads = 1;
    inner.sip.on_iteration = nullptr;
    const std::size_t jobs = scored.size() * grid.size();
    Vector fold_auc(jobs, 0.0);
    parallel_for(jobs, threads, [&](std::size_t job) {
        const std::size_t f = job / grid.size(), g = job % grid.size();
        fold_auc[job] = auc(fit_model(fit_parts[f], grid[g], inner), test_parts[f]);
    });

    report.mean_auc.assign(grid.size(), 0.0);
    for (std::size_t job = 0; job < jobs; ++job) report.mean_auc[job % grid.size()] += fold_auc[job];
    for (double& a : report.mean_auc) a /= static_cast<double>(scored.size());
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double a = report.mean_auc[g], b = report.mean_auc[best];
        if (a > b || (a == b && grid[g] < grid[best])) best = g;
    }
    report.chosen_r0 = grid[best];
    return report;
}

nlohmann::json model_to_json(const FittedModel& model) {
    return {{"kind", std::string(to_string(model.kind))},
            {"r0", model.r0_used},
            {"theta", model.theta},
            {"n", model.theta.empty() ? 0 : model.theta.size() - 1},
            {"feature_names", model.feature_names}};
}

FittedModel model_from_json(const nlohmann::json& j) {
    FittedModel model;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "LR")
        model.kind = ModelKind::LR;
    else if (kind == "WRLR")
        model.kind = ModelKind::WRLR;
    else
        throw Error("unknown model kind '" + kind + "'");
    model.r0_used = j.at("r0").get<double>();
    model.theta = j.at("theta").get<Vector>();
    if (j.at("n").get<std::size_t>() + 1 != model.theta.size()) throw Error("model n does not match theta");
    model.feature_names = j.value("feature_names", std::vector<std::string>{});
    return model;
}

}  // namespace wdro
