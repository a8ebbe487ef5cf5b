#pragma once

// JSON-lines traces: one {"type":"iteration",...} object per outer iteration,
// then one {"type":"summary",...} object.

#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/sip.hpp"

namespace wdro {

nlohmann::json to_json(const IterationRecord& record);
IterationRecord iteration_from_json(const nlohmann::json& j);
nlohmann::json summary_json(const SolveTrace& trace);

void write_trace_jsonl(std::ostream& out, const SolveTrace& trace);
/// Iteration records of a trace file; the summary line is skipped.
std::vector<IterationRecord> read_trace_jsonl(std::istream& in);

/// Streams iteration records to a file as the solver runs.
class TraceFile {
public:
    explicit TraceFile(const std::string& path);
    void write(const IterationRecord& record);
    void finish(const SolveTrace& trace);

private:
    std::ofstream out_;
};

}  // namespace wdro
