#include "wdro/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace wdro {
namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(trim(field));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

std::optional<double> parse_real(const std::string& token) {
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvOptions& options) {
    std::string line;
    if (!std::getline(in, line)) throw Error("CSV input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split(line, options.delimiter);

    auto label_it = std::find(header.begin(), header.end(), options.label_column);
    if (label_it == header.end()) throw Error("label column '" + options.label_column + "' not found");
    const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_col) continue;
        if (std::find(options.drop_columns.begin(), options.drop_columns.end(), header[c]) !=
            options.drop_columns.end())
            continue;
        feature_cols.push_back(c);
        names.push_back(header[c]);
    }
    if (feature_cols.empty()) throw Error("CSV has no feature columns");

    std::vector<Sample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split(line, options.delimiter);
        const std::string where = "CSV line " + std::to_string(line_no);
        if (fields.size() != header.size()) {
            if (options.skip_invalid_rows) continue;
            throw Error(where + ": expected " + std::to_string(header.size()) + " fields");
        }

        Sample s;
        const std::string& token = fields[label_col];
        if (options.positive_label) {
            s.label = token == *options.positive_label ? 1 : 0;
        } else {
            const auto v = parse_real(token);
            if (!v || (*v != 0.0 && *v != 1.0)) {
                if (options.skip_invalid_rows) continue;
                throw Error(where + ": label must be 0 or 1, got '" + token + "'");
            }
            s.label = static_cast<int>(*v);
        }

        bool ok = true;
        s.features.reserve(feature_cols.size());
        for (std::size_t c : feature_cols) {
            const auto v = parse_real(fields[c]);
            if (!v) {
                ok = false;
                break;
            }
            s.features.push_back(*v);
        }
        if (!ok) {
            if (options.skip_invalid_rows) continue;
            throw Error(where + ": non-numeric feature value");
        }
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw Error("CSV contains no data rows");
    return Dataset(std::move(samples), std::move(names));
}

Dataset read_csv_file(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path);
    return read_csv(in, options);
}

void write_csv(std::ostream& out, const Dataset& data, const std::string& label_column) {
    const std::size_t n = data.dimension();
    for (std::size_t j = 0; j < n; ++j)
        out << (data.feature_names().empty() ? "x" + std::to_string(j) : data.feature_names()[j])
            << ',';
    out << label_column << '\n';
    out << std::setprecision(17);
    for (const Sample& s : data.samples()) {
        for (double v : s.features) out << v << ',';
        out << s.label << '\n';
    }
}

}  // namespace wdro
