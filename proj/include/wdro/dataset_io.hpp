#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wdro/model.hpp"

namespace wdro {

struct CsvOptions {
    std::string label_column;
    /// When set, a row is labeled 1 iff its label token equals this string and
    /// 0 otherwise. When unset the token must parse as 0 or 1.
    std::optional<std::string> positive_label;
    std::vector<std::string> drop_columns;
    /// Skip rows with a missing or non-numeric feature instead of failing.
    bool skip_invalid_rows = false;
    char delimiter = ',';
};

/// Reads a header-prefixed CSV; every non-label, non-dropped column is a feature.
Dataset read_csv(std::istream& in, const CsvOptions& options);
Dataset read_csv_file(const std::string& path, const CsvOptions& options);

void write_csv(std::ostream& out, const Dataset& data, const std::string& label_column = "label");

}  // namespace wdro
