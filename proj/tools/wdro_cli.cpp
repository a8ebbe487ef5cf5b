// Command-line front end: fit, solve, experiment, separate-debug.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wdro/harness.hpp"
#include "wdro/instance_io.hpp"
#include "wdro/separation.hpp"
#include "wdro/trace_io.hpp"
#include "wdro/wrlr.hpp"

using namespace wdro;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    std::optional<unsigned> threads;
    std::string trace;
    bool drop_cuts = false;
    std::optional<double> alpha;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
    auto* opt = app->add_option("--config", c.config, "JSON input file");
    if (config_required) opt->required();
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--eps", c.eps, "Feasibility tolerance")->check(CLI::PositiveNumber);
    app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--trace", c.trace, "JSON-lines trace output");
    app->add_flag("--drop-cuts", c.drop_cuts, "Enable cut dropping in the cutting-surface method");
    app->add_option("--alpha", c.alpha, "Cut dropping factor (> 1)");
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return json::parse(in);
}

void apply(const Common& c, SipOptions& sip) {
    if (c.eps) sip.eps = *c.eps;
    if (c.threads) sip.threads = *c.threads;
    if (c.seed) sip.seed = *c.seed;
    if (c.alpha) sip.alpha = *c.alpha;
    if (c.drop_cuts) sip.drop_cuts = true;
}

// Streams iteration records when --trace is given.
std::unique_ptr<TraceFile> attach_trace(const Common& c, SipOptions& sip) {
    if (c.trace.empty()) return nullptr;
    auto file = std::make_unique<TraceFile>(c.trace);
    TraceFile* raw = file.get();
    sip.on_iteration = [raw](const IterationRecord& r) { raw->write(r); };
    return file;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

struct FitArgs {
    std::string data;
    std::string label;
    std::string positive_label;
    std::vector<std::string> drop;
    std::optional<double> r0;
    std::vector<double> grid;
    int folds = 4;
    std::string solver = "cutting_surface";
    double theta_radius = 10.0;
    std::string out;
};

int run_fit(const Common& c, const FitArgs& a) {
    ExperimentConfig cfg;
    if (!c.config.empty()) cfg = config_from_json(read_json(c.config));
    if (!a.data.empty()) cfg.dataset_path = a.data;
    if (!a.label.empty()) cfg.csv.label_column = a.label;
    if (!a.positive_label.empty()) cfg.csv.positive_label = a.positive_label;
    if (!a.drop.empty()) cfg.csv.drop_columns = a.drop;
    if (!a.grid.empty()) cfg.r0_grid = a.grid;
    if (cfg.dataset_path.empty()) throw Error("fit needs --data or a config with a dataset");
    if (cfg.csv.label_column.empty()) throw Error("fit needs --label or a config with label_column");

    WrlrOptions options = cfg.wrlr_options();
    options.solver = parse_solver(a.solver);
    options.theta_radius = a.theta_radius;
    apply(c, options.sip);
    const Dataset data = read_csv_file(cfg.dataset_path, cfg.csv);

    double r0 = 0.0;
    if (a.r0) {
        r0 = *a.r0;
    } else {
        const CvReport cv = select_r0(data, cfg.r0_grid, options, a.folds, c.seed.value_or(cfg.seed),
                                      c.threads.value_or(1));
        r0 = cv.chosen_r0;
        std::cerr << "cross-validated r0 = " << r0 << '\n';
    }
    auto trace = attach_trace(c, options.sip);
    const FittedModel model = fit_model(data, r0, options);
    if (trace && model.trace) trace->finish(*model.trace);
    write_output(a.out, model_to_json(model).dump(2) + "\n");
    return 0;
}

int run_solve(const Common& c, const std::string& method, const std::string& out) {
    const ProblemData data = problem_from_json(read_json(c.config));
    SipOptions sip;
    apply(c, sip);
    auto trace = attach_trace(c, sip);
    SipResult result;
    if (method == "exchange")
        result = solve_exchange(data, sip);
    else if (method == "enumeration")
        result = solve_full_enumeration(data, sip.eps);
    else
        result = solve_cutting_surface(data, sip);
    if (trace) trace->finish(result.trace);
    json summary = summary_json(result.trace);
    summary["objective"] = result.objective;
    write_output(out, summary.dump(2) + "\n");
    return result.trace.status == SipStatus::Converged ? 0 : 2;
}

int run_experiment_cmd(const Common& c) {
    ExperimentConfig cfg = config_from_json(read_json(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (c.eps) cfg.eps = *c.eps;
    if (c.threads) cfg.threads = *c.threads;
    if (c.alpha) cfg.alpha = *c.alpha;
    if (c.drop_cuts) cfg.drop_cuts = true;
    const ExperimentResult result = run_experiment(cfg);
    emit_results(result, cfg);
    if (!c.trace.empty()) {
        std::ofstream t(c.trace);
        if (!t) throw Error("cannot write " + c.trace);
        for (std::size_t k = 0; k < result.repetitions.size(); ++k) {
            const RepetitionResult& r = result.repetitions[k];
            const RepetitionTiming& tm = result.timing[k];
            t << json{{"type", "repetition"},   {"rep", r.rep},           {"seed", r.seed},
                      {"chosen_r0", r.chosen_r0}, {"auc_lr", r.auc_lr},   {"auc_wrlr", r.auc_wrlr},
                      {"iters", r.iters},         {"cuts", r.cuts},       {"wall_seconds", tm.wall_seconds}}
                     .dump()
              << '\n';
        }
    }
    std::cout << aggregate_to_json(result.aggregate).dump(2) << '\n';
    return 0;
}

// Input: {"theta": [..], "anchor": [..], "lower": [..], "upper": [..]} with
// optional "v_i" and "lambda" to also report the separation maximum.
int run_separate_debug(const Common& c, const std::string& out) {
    const json j = read_json(c.config);
    const Vector theta = j.at("theta").get<Vector>();
    const Vector anchor = j.at("anchor").get<Vector>();
    const BoxRegion box(j.at("lower").get<Vector>(), j.at("upper").get<Vector>(), j.value("label", 0));
    const TransportProfile profile(theta, anchor, box);
    std::ostringstream csv;
    write_profile_csv(csv, profile);
    write_output(out, csv.str());

    if (j.contains("lambda")) {
        const int label = j.value("label", 0);
        ProblemData data;
        data.dataset = Dataset({{anchor, label}});
        data.support[label] = {label, box, {}};
        data.support[1 - label].label = 1 - label;
        data.loss = std::make_shared<LogisticLoss>();
        const DualPoint x{theta, {j.value("v_i", 0.0), j.at("lambda").get<double>()}};
        const SeparationResult r = separate_exact(0, x, data, c.eps.value_or(1e-9));
        std::cerr << json{{"violation", r.violation}, {"witness", r.scenario.point}}.dump() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein-robust logistic regression via semi-infinite programming"};
    app.require_subcommand(1);

    Common common;
    FitArgs fit_args;
    std::string solve_method = "cutting_surface", solve_out, debug_out;

    auto* fit = app.add_subcommand("fit", "Fit LR or WRLR on a CSV dataset");
    add_common(fit, common, false);
    fit->add_option("--data", fit_args.data, "Dataset CSV");
    fit->add_option("--label", fit_args.label, "Label column");
    fit->add_option("--positive-label", fit_args.positive_label, "Label token mapped to class 1");
    fit->add_option("--drop", fit_args.drop, "Columns to ignore");
    fit->add_option("--r0", fit_args.r0, "Wasserstein radius; 0 fits plain LR; omitted selects by CV")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--grid", fit_args.grid, "Radius grid for cross-validation");
    fit->add_option("--folds", fit_args.folds, "Cross-validation folds");
    fit->add_option("--solver", fit_args.solver, "cutting_surface or exchange");
    fit->add_option("--theta-radius", fit_args.theta_radius, "Half-width of the parameter box");
    fit->add_option("--out", fit_args.out, "Model JSON output (default stdout)");

    auto* solve = app.add_subcommand("solve", "Solve a raw dual-program instance from JSON");
    add_common(solve, common, true);
    solve->add_option("--method", solve_method, "cutting_surface, exchange or enumeration")
        ->check(CLI::IsMember({"cutting_surface", "exchange", "enumeration"}));
    solve->add_option("--out", solve_out, "Summary JSON output (default stdout)");

    auto* experiment = app.add_subcommand("experiment", "Run a repeated LR vs WRLR experiment");
    add_common(experiment, common, true);

    auto* debug = app.add_subcommand("separate-debug", "Dump a transport profile as CSV");
    add_common(debug, common, true);
    debug->add_option("--out", debug_out, "Profile CSV output (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (common.alpha && !(*common.alpha > 1.0)) throw Error("--alpha must exceed 1");
        if (*fit) return run_fit(common, fit_args);
        if (*solve) return run_solve(common, solve_method, solve_out);
        if (*experiment) return run_experiment_cmd(common);
        if (*debug) return run_separate_debug(common, debug_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
