#pragma once

#include "rewts/timeseries.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rewts {

struct CovariateColumn {
    std::string name;
    bool future_known = false;
};

/// Column mapping for CSV ingestion.
struct CsvSchema {
    std::string target;
    std::vector<CovariateColumn> covariates;
    /// Optional numeric time column. Must be strictly increasing.
    std::optional<std::string> time_column;
    char delimiter = ',';
    /// Lenient mode linearly interpolates unparseable or missing cells;
    /// strict mode rejects the file.
    bool lenient = false;
    /// Tick width in time-column units. When set, rows are pre-aggregated
    /// by taking the mean of all rows falling in each tick window
    /// [t0 + k*step, t0 + (k+1)*step).
    std::optional<double> resample_step;
    double step = 1.0;
};

TimeSeriesFrame ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Same as ingest_csv but reads from an in-memory document.
TimeSeriesFrame parse_csv(const std::string& text, const CsvSchema& schema);

/// Fills NaN entries by linear interpolation between finite neighbours;
/// leading/trailing gaps take the nearest finite value. Returns false when
/// the column has no finite entry at all.
bool interpolate_missing(std::vector<double>& column);

}  // namespace rewts
