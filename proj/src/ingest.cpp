#include "rewts/ingest.hpp"

#include "rewts/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

namespace rewts {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(delim, pos);
        cells.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return cells;
}

/// NaN when the cell is empty or not a complete decimal number.
double parse_cell(std::string_view cell) {
    if (cell.empty()) return kNaN;
    if (cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) return kNaN;
    return value;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::Schema, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

bool interpolate_missing(std::vector<double>& column) {
    std::size_t first = column.size();
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (std::isfinite(column[i])) {
            first = i;
            break;
        }
    }
    if (first == column.size()) return column.empty();
    for (std::size_t i = 0; i < first; ++i) column[i] = column[first];
    std::size_t last = first;
    for (std::size_t i = first + 1; i < column.size(); ++i) {
        if (!std::isfinite(column[i])) continue;
        const double span = static_cast<double>(i - last);
        for (std::size_t j = last + 1; j < i; ++j) {
            const double frac = static_cast<double>(j - last) / span;
            column[j] = column[last] + frac * (column[i] - column[last]);
        }
        last = i;
    }
    for (std::size_t i = last + 1; i < column.size(); ++i) column[i] = column[last];
    return true;
}

TimeSeriesFrame parse_csv(const std::string& text, const CsvSchema& schema) {
    require(!schema.target.empty(), ErrorKind::Schema, "schema names no target column");
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        for (auto cell : split_line(line, schema.delimiter)) header.emplace_back(cell);
        break;
    }
    if (header.empty()) fail(ErrorKind::EmptyInput, "CSV input is empty");

    // Column 0 of `columns` is the target, then covariates, then (optionally) time.
    std::vector<std::size_t> source{column_of(header, schema.target)};
    for (const auto& cov : schema.covariates) source.push_back(column_of(header, cov.name));
    const bool has_time = schema.time_column.has_value();
    if (has_time) source.push_back(column_of(header, *schema.time_column));

    std::vector<std::vector<double>> columns(source.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split_line(line, schema.delimiter);
        for (std::size_t c = 0; c < source.size(); ++c) {
            const double v = source[c] < cells.size() ? parse_cell(cells[source[c]]) : kNaN;
            if (std::isnan(v) && !schema.lenient)
                fail(ErrorKind::Numeric, "row " + std::to_string(row) + ": unparseable value in column '" +
                                             header[source[c]] + "'");
            columns[c].push_back(v);
        }
    }
    if (row == 0) fail(ErrorKind::EmptyInput, "CSV input has a header but no data rows");

    for (std::size_t c = 0; c < columns.size(); ++c)
        if (!interpolate_missing(columns[c]))
            fail(ErrorKind::Numeric, "column '" + header[source[c]] + "' has no parseable values");

    if (has_time) {
        const auto& t = columns.back();
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]))
                fail(ErrorKind::Ordering, "time column not strictly increasing at row " + std::to_string(i + 1));
    }

    double step = schema.step;
    if (schema.resample_step) {
        require(has_time, ErrorKind::Schema, "resampling requires a time column");
        require(*schema.resample_step > 0.0, ErrorKind::Parameter, "resample step must be positive");
        const double width = *schema.resample_step;
        const auto& t = columns.back();
        const auto ticks = static_cast<std::size_t>(std::floor((t.back() - t.front()) / width)) + 1;
        std::vector<std::vector<double>> sums(columns.size() - 1, std::vector<double>(ticks, 0.0));
        std::vector<std::size_t> counts(ticks, 0);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto k = std::min(ticks - 1, static_cast<std::size_t>(std::floor((t[i] - t.front()) / width)));
            ++counts[k];
            for (std::size_t c = 0; c + 1 < columns.size(); ++c) sums[c][k] += columns[c][i];
        }
        for (std::size_t k = 0; k < ticks; ++k) {
            if (counts[k] == 0 && !schema.lenient)
                fail(ErrorKind::Numeric, "tick window " + std::to_string(k) + " contains no rows");
            for (auto& s : sums) s[k] = counts[k] ? s[k] / static_cast<double>(counts[k]) : kNaN;
        }
        for (auto& s : sums) interpolate_missing(s);
        columns = std::move(sums);
        step = width;
    } else if (has_time) {
        columns.pop_back();
    }

    const auto n = static_cast<Eigen::Index>(columns.front().size());
    Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(columns[0].data(), n);
    Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(schema.covariates.size()));
    std::vector<bool> known;
    for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
        cov.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(columns[j + 1].data(), n);
        known.push_back(schema.covariates[j].future_known);
    }
    TimeSeriesFrame frame(std::move(target), std::move(cov), std::move(known), step);
    frame.target_name = schema.target;
    for (const auto& c : schema.covariates) frame.covariate_names.push_back(c.name);
    return frame;
}

TimeSeriesFrame ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open data file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), schema);
}

}  // namespace rewts
