#include "wdro/trace_io.hpp"

#include <istream>
#include <ostream>

namespace wdro {

nlohmann::json to_json(const IterationRecord& r) {
    return {{"type", "iteration"},
            {"k", r.k},
            {"w", r.w},
            {"M", r.M},
            {"objective", r.objective},
            {"best_objective", r.best_objective},
            {"violation", r.violation},
            {"feasible", r.feasible},
            {"cuts_added", r.cuts_added},
            {"cuts_dropped", r.cuts_dropped},
            {"pool_size", r.pool_size},
            {"master_newton_steps", r.master_newton_steps},
            {"master_time", r.master_time},
            {"separation_time", r.separation_time}};
}

IterationRecord iteration_from_json(const nlohmann::json& j) {
    IterationRecord r;
    r.k = j.at("k").get<int>();
    r.w = j.at("w").get<double>();
    r.M = j.at("M").get<double>();
    r.objective = j.at("objective").get<double>();
    r.best_objective = j.at("best_objective").get<double>();
    r.violation = j.at("violation").get<double>();
    r.feasible = j.at("feasible").get<bool>();
    r.cuts_added = j.at("cuts_added").get<std::size_t>();
    r.cuts_dropped = j.at("cuts_dropped").get<std::size_t>();
    r.pool_size = j.at("pool_size").get<std::size_t>();
    r.master_newton_steps = j.at("master_newton_steps").get<int>();
    r.master_time = j.at("master_time").get<double>();
    r.separation_time = j.at("separation_time").get<double>();
    return r;
}

nlohmann::json summary_json(const SolveTrace& t) {
    return {{"type", "summary"},
            {"method", t.method},
            {"status", std::string(to_string(t.status))},
            {"iterations", t.iterations.size()},
            {"objective", t.objective},
            {"final_violation", t.final_violation},
            {"oracle_calls", t.oracle_calls},
            {"cuts_generated", t.cuts_generated},
            {"seed_cuts", t.seed_cuts},
            {"theta", t.final_point.theta},
            {"v", t.final_point.v}};
}

void write_trace_jsonl(std::ostream& out, const SolveTrace& trace) {
    for (const IterationRecord& r : trace.iterations) out << to_json(r).dump() << '\n';
    out << summary_json(trace).dump() << '\n';
}

std::vector<IterationRecord> read_trace_jsonl(std::istream& in) {
    std::vector<IterationRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("type", "") == "iteration") out.push_back(iteration_from_json(j));
    }
    return out;
}

TraceFile::TraceFile(const std::string& path) : out_(path) {
    if (!out_) throw Error("cannot open trace file " + path);
}

void TraceFile::write(const IterationRecord& record) { out_ << to_json(record).dump() << '\n' << std::flush; }

void TraceFile::finish(const SolveTrace& trace) { out_ << summary_json(trace).dump() << '\n' << std::flush; }

}  // namespace wdro
