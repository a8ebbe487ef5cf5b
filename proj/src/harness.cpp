#include "wdro/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "wdro/parallel.hpp"

namespace wdro {
namespace {

using Clock = std::chrono::steady_clock;

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

double upper_tail(double t, double df) {
    const boost::math::students_t dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error("malformed number '" + s + "'");
    return v;
}

void expect_header(std::istream& in, const std::vector<std::string>& columns) {
    std::string line;
    if (!std::getline(in, line)) throw Error("missing CSV header");
    if (split_line(line) != columns) throw Error("unexpected CSV header: " + line);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw Error("repetitions must be at least 1");
    if (m < 4) throw Error("training size m must be at least 4");
    if (r0_grid.empty()) throw Error("r0_grid is empty");
    for (double r : r0_grid)
        if (!(r >= 0.0)) throw Error("r0_grid entries must be nonnegative");
    if (folds < 2) throw Error("folds must be at least 2");
    if (!(eps > 0.0)) throw Error("eps must be positive");
    if (!(alpha > 1.0)) throw Error("alpha must exceed 1");
    if (!(theta_radius > 0.0)) throw Error("theta_radius must be positive");
    if (csv.label_column.empty()) throw Error("label_column is required");
}

WrlrOptions ExperimentConfig::wrlr_options() const {
    WrlrOptions o;
    o.theta_radius = theta_radius;
    o.solver = solver;
    o.include_atoms = include_atoms;
    o.sip.eps = eps;
    o.sip.alpha = alpha;
    o.sip.drop_cuts = drop_cuts;
    o.sip.threads = 1;
    return o;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "dataset",  "label_column", "positive_label", "drop_columns", "skip_invalid_rows", "m",
        "repetitions", "r0_grid",   "folds",          "eps",          "seed",              "solver",
        "drop_cuts", "alpha",       "theta_radius",   "include_atoms", "welch",            "threads",
        "results_csv", "aggregate_json", "timing_csv"};
    if (!j.is_object()) throw Error("experiment config must be a JSON object");
    for (const auto& item : j.items())
        if (!known.count(item.key())) throw Error("unknown config key '" + item.key() + "'");

    ExperimentConfig c;
    read_key(j, "dataset", c.dataset_path);
    read_key(j, "label_column", c.csv.label_column);
    if (j.contains("positive_label") && !j.at("positive_label").is_null())
        c.csv.positive_label = j.at("positive_label").get<std::string>();
    read_key(j, "drop_columns", c.csv.drop_columns);
    read_key(j, "skip_invalid_rows", c.csv.skip_invalid_rows);
    read_key(j, "m", c.m);
    read_key(j, "repetitions", c.repetitions);
    read_key(j, "r0_grid", c.r0_grid);
    read_key(j, "folds", c.folds);
    read_key(j, "eps", c.eps);
    read_key(j, "seed", c.seed);
    if (j.contains("solver")) c.solver = parse_solver(j.at("solver").get<std::string>());
    read_key(j, "drop_cuts", c.drop_cuts);
    read_key(j, "alpha", c.alpha);
    read_key(j, "theta_radius", c.theta_radius);
    read_key(j, "include_atoms", c.include_atoms);
    read_key(j, "welch", c.welch);
    read_key(j, "threads", c.threads);
    read_key(j, "results_csv", c.results_csv);
    read_key(j, "aggregate_json", c.aggregate_json);
    read_key(j, "timing_csv", c.timing_csv);
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j{{"dataset", c.dataset_path},
                     {"label_column", c.csv.label_column},
                     {"drop_columns", c.csv.drop_columns},
                     {"skip_invalid_rows", c.csv.skip_invalid_rows},
                     {"m", c.m},
                     {"repetitions", c.repetitions},
                     {"r0_grid", c.r0_grid},
                     {"folds", c.folds},
                     {"eps", c.eps},
                     {"seed", c.seed},
                     {"solver", std::string(to_string(c.solver))},
                     {"drop_cuts", c.drop_cuts},
                     {"alpha", c.alpha},
                     {"theta_radius", c.theta_radius},
                     {"include_atoms", c.include_atoms},
                     {"welch", c.welch},
                     {"threads", c.threads},
                     {"results_csv", c.results_csv},
                     {"aggregate_json", c.aggregate_json},
                     {"timing_csv", c.timing_csv}};
    j["positive_label"] = c.csv.positive_label ? nlohmann::json(*c.csv.positive_label) : nlohmann::json();
    return j;
}

double paired_pvalue(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("paired test needs equal-length samples");
    if (a.size() < 2) throw Error("paired test needs at least 2 pairs");
    Vector d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    const double mean = mean_of(d);
    const double var = sample_variance(d, mean);
    // Differences equal up to roundoff in the AUC subtraction count as constant.
    double scale = 0.0;
    for (double v : d) scale = std::max(scale, std::fabs(v));
    if (std::sqrt(var) <= 1e-12 * scale || var == 0.0) {
        if (mean > 0.0) return 0.0;
        if (mean < 0.0) return 1.0;
        return 0.5;
    }
    const double t = mean / std::sqrt(var / static_cast<double>(d.size()));
    return upper_tail(t, static_cast<double>(d.size() - 1));
}

double welch_pvalue(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw Error("Welch test needs at least 2 values per sample");
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sample_variance(a, ma) / static_cast<double>(a.size());
    const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
    if (va + vb == 0.0) return ma > mb ? 0.0 : ma < mb ? 1.0 : 0.5;
    const double t = (ma - mb) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) /
                      (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    return upper_tail(t, df);
}

Aggregate aggregate(const std::vector<RepetitionResult>& reps, bool welch) {
    if (reps.empty()) throw Error("no repetitions to aggregate");
    Aggregate g;
    g.repetitions = static_cast<int>(reps.size());
    Vector lr, w, iters, cuts;
    for (const RepetitionResult& r : reps) {
        lr.push_back(r.auc_lr);
        w.push_back(r.auc_wrlr);
        iters.push_back(r.iters);
        cuts.push_back(static_cast<double>(r.cuts));
    }
    const double root_n = std::sqrt(static_cast<double>(reps.size()));
    g.mean_auc_lr = mean_of(lr);
    g.mean_auc_wrlr = mean_of(w);
    if (reps.size() > 1) {
        g.se_auc_lr = std::sqrt(sample_variance(lr, g.mean_auc_lr)) / root_n;
        g.se_auc_wrlr = std::sqrt(sample_variance(w, g.mean_auc_wrlr)) / root_n;
    }
    g.mean_diff = g.mean_auc_wrlr - g.mean_auc_lr;
    if (g.mean_auc_lr < 1.0) g.relative_diff = g.mean_diff / (1.0 - g.mean_auc_lr);
    if (reps.size() > 1) {
        g.p_value = paired_pvalue(w, lr);
        if (welch) g.welch_p_value = welch_pvalue(w, lr);
    } else {
        g.p_value = g.mean_diff > 0.0 ? 0.0 : g.mean_diff < 0.0 ? 1.0 : 0.5;
    }
    g.mean_iters = mean_of(iters);
    g.mean_cuts = mean_of(cuts);
    return g;
}

Split draw_split(const Dataset& data, std::size_t m, std::mt19937_64& rng) {
    if (m >= data.size()) throw Error("training size m must be smaller than the dataset");
    std::vector<std::size_t> perm(data.size());
    for (int attempt = 0; attempt < 20; ++attempt) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Split s;
        s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
        s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
        std::size_t train_pos = 0, test_pos = 0;
        for (std::size_t i : s.train) train_pos += data[i].label;
        for (std::size_t i : s.test) test_pos += data[i].label;
        // Both classes need two training rows and one held-out row.
        if (train_pos >= 2 && m - train_pos >= 2 && test_pos >= 1 && s.test.size() - test_pos >= 1) return s;
    }
    throw Error("could not draw a training set with both classes");
}

RepetitionResult run_repetition(const ExperimentConfig& config, const Dataset& data, int rep,
                                RepetitionTiming* timing) {
    const auto start = Clock::now();
    RepetitionResult out;
    out.rep = rep;
    out.seed = config.seed + static_cast<std::uint64_t>(rep);
    std::mt19937_64 rng(out.seed);

    const Split split = draw_split(data, config.m, rng);
    const Dataset train = data.subset(split.train);
    const Dataset test = data.subset(split.test);

    const WrlrOptions options = config.wrlr_options();
    const CvReport cv = select_r0(train, config.r0_grid, options, config.folds, rng(), 1);
    out.chosen_r0 = cv.chosen_r0;
    const FittedModel lr = fit_lr(train, options);
    out.auc_lr = auc(lr, test);

    const auto fit_start = Clock::now();
    const FittedModel wrlr = fit_model(train, cv.chosen_r0, options);
    const double fit_seconds = std::chrono::duration<double>(Clock::now() - fit_start).count();
    out.auc_wrlr = auc(wrlr, test);

    RepetitionTiming t;
    t.rep = rep;
    t.fit_seconds = fit_seconds;
    if (wrlr.trace) {
        out.iters = static_cast<int>(wrlr.trace->iterations.size());
        out.cuts = wrlr.trace->total_cuts();
        double master = 0.0, sep = 0.0;
        for (const IterationRecord& r : wrlr.trace->iterations) {
            master += r.master_time;
            sep += r.separation_time;
        }
        if (fit_seconds > 0.0) {
            t.master_fraction = master / fit_seconds;
            t.separation_fraction = sep / fit_seconds;
        }
    }
    t.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (timing) *timing = t;
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data) {
    config.validate();
    if (config.m >= data.size()) throw Error("training size m must be smaller than the dataset");
    ExperimentResult result;
    result.repetitions.resize(static_cast<std::size_t>(config.repetitions));
    result.timing.resize(result.repetitions.size());
    parallel_for(result.repetitions.size(), config.threads, [&](std::size_t k) {
        result.repetitions[k] = run_repetition(config, data, static_cast<int>(k), &result.timing[k]);
    });
    result.aggregate = aggregate(result.repetitions, config.welch);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    return run_experiment(config, read_csv_file(config.dataset_path, config.csv));
}

const std::vector<std::string>& results_csv_columns() {
    static const std::vector<std::string> cols{"rep", "seed", "chosen_r0", "auc_lr", "auc_wrlr", "iters", "cuts"};
    return cols;
}

const std::vector<std::string>& timing_csv_columns() {
    static const std::vector<std::string> cols{"rep", "master_fraction", "separation_fraction", "fit_seconds",
                                               "wall_seconds"};
    return cols;
}

void write_results_csv(std::ostream& out, const std::vector<RepetitionResult>& reps) {
    const auto& cols = results_csv_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n' << std::setprecision(17);
    for (const RepetitionResult& r : reps)
        out << r.rep << ',' << r.seed << ',' << r.chosen_r0 << ',' << r.auc_lr << ',' << r.auc_wrlr << ','
            << r.iters << ',' << r.cuts << '\n';
}

std::vector<RepetitionResult> read_results_csv(std::istream& in) {
    expect_header(in, results_csv_columns());
    std::vector<RepetitionResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != results_csv_columns().size()) throw Error("results row has wrong width: " + line);
        RepetitionResult r;
        r.rep = std::stoi(cells[0]);
        r.seed = std::stoull(cells[1]);
        r.chosen_r0 = parse_double(cells[2]);
        r.auc_lr = parse_double(cells[3]);
        r.auc_wrlr = parse_double(cells[4]);
        r.iters = std::stoi(cells[5]);
        r.cuts = std::stoull(cells[6]);
        out.push_back(r);
    }
    return out;
}

void write_timing_csv(std::ostream& out, const std::vector<RepetitionTiming>& timing) {
    const auto& cols = timing_csv_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n' << std::setprecision(17);
    for (const RepetitionTiming& t : timing)
        out << t.rep << ',' << t.master_fraction << ',' << t.separation_fraction << ',' << t.fit_seconds << ','
            << t.wall_seconds << '\n';
}

std::vector<RepetitionTiming> read_timing_csv(std::istream& in) {
    expect_header(in, timing_csv_columns());
    std::vector<RepetitionTiming> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != timing_csv_columns().size()) throw Error("timing row has wrong width: " + line);
        out.push_back({std::stoi(cells[0]), parse_double(cells[1]), parse_double(cells[2]), parse_double(cells[3]),
                       parse_double(cells[4])});
    }
    return out;
}

nlohmann::json aggregate_to_json(const Aggregate& g) {
    return {{"repetitions", g.repetitions},
            {"mean_auc_lr", g.mean_auc_lr},
            {"se_auc_lr", g.se_auc_lr},
            {"mean_auc_wrlr", g.mean_auc_wrlr},
            {"se_auc_wrlr", g.se_auc_wrlr},
            {"mean_diff", g.mean_diff},
            {"relative_diff", optional_json(g.relative_diff)},
            {"p_value", g.p_value},
            {"welch_p_value", optional_json(g.welch_p_value)},
            {"mean_iters", g.mean_iters},
            {"mean_cuts", g.mean_cuts}};
}

Aggregate aggregate_from_json(const nlohmann::json& j) {
    Aggregate g;
    g.repetitions = j.at("repetitions").get<int>();
    g.mean_auc_lr = j.at("mean_auc_lr").get<double>();
    g.se_auc_lr = j.at("se_auc_lr").get<double>();
    g.mean_auc_wrlr = j.at("mean_auc_wrlr").get<double>();
    g.se_auc_wrlr = j.at("se_auc_wrlr").get<double>();
    g.mean_diff = j.at("mean_diff").get<double>();
    g.relative_diff = optional_from(j, "relative_diff");
    g.p_value = j.at("p_value").get<double>();
    g.welch_p_value = optional_from(j, "welch_p_value");
    g.mean_iters = j.at("mean_iters").get<double>();
    g.mean_cuts = j.at("mean_cuts").get<double>();
    return g;
}

void emit_results(const ExperimentResult& result, const ExperimentConfig& config) {
    auto open = [](const std::string& path) {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        return f;
    };
    if (!config.results_csv.empty()) {
        std::ofstream f = open(config.results_csv);
        write_results_csv(f, result.repetitions);
    }
    if (!config.aggregate_json.empty()) {
        std::ofstream f = open(config.aggregate_json);
        f << aggregate_to_json(result.aggregate).dump(2) << '\n';
    }
    if (!config.timing_csv.empty()) {
        std::ofstream f = open(config.timing_csv);
        write_timing_csv(f, result.timing);
    }
}

}  // namespace wdro
