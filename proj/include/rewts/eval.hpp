#pragma once

#include "rewts/engine.hpp"
#include "rewts/global_baseline.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rewts {

enum class Normalization { None, PerChunkAmplitude, MaxAmplitude };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

/// Anchors f, f+s, ..., f+psi*s with psi = floor((e-h-f)/s).
struct LossConfig {
    std::size_t h = 30;
    std::size_t s = 30;
    std::size_t f = 0;
    std::size_t e = 0;
    Normalization normalization = Normalization::None;
};

void validate(const LossConfig& cfg);

/// Anchors visited by a LossConfig.
std::vector<std::size_t> loss_anchors(const LossConfig& cfg);

/// (1/h) sum (y_i - yhat_i)^2.
double window_mse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& yhat);

using ForecastMap = std::map<std::size_t, Eigen::VectorXd>;

struct StridedLoss {
    /// Mean over the psi+1 anchors.
    double value = 0.0;
    /// Same sum divided by psi; NaN when psi = 0.
    double literal_value = 0.0;
    std::vector<std::size_t> anchors;
    std::vector<double> per_anchor;
};

/// Throws a coverage error naming the first anchor without a forecast.
StridedLoss strided_loss(const TimeSeriesFrame& frame, const ForecastMap& forecasts, const LossConfig& cfg);

ForecastMap forecast_map(const std::vector<StreamLogRecord>& records);

struct ChunkReport {
    std::size_t chunk_id = 0;
    std::size_t anchor_count = 0;
    double mse = 0.0;
    /// mse / A_c^2 and mse / (max A)^2; NaN without amplitude information.
    double mse_chunk_amplitude = 0.0;
    double mse_max_amplitude = 0.0;
    /// The variant selected by the report's normalization.
    double normalized_mse = 0.0;
    double literal_mse = 0.0;
    std::vector<std::size_t> anchors;
    std::vector<double> per_anchor;
};

struct ChunkReportSet {
    Normalization normalization = Normalization::None;
    std::vector<ChunkReport> chunks;
    double mean_mse = 0.0;
    double mean_normalized_mse = 0.0;
    std::vector<std::string> warnings;
};

struct ReportOptions {
    std::size_t chunk_length = 500;
    std::size_t h = 30;
    std::size_t s = 30;
    Normalization normalization = Normalization::None;
    /// Amplitude in force at each tick; chunk amplitude is the largest value
    /// inside the chunk. Required for amplitude normalisation.
    std::vector<double> tick_amplitude;
    /// Chunks to report; empty reports every chunk holding a logged anchor.
    std::vector<std::size_t> chunks;
    /// Windows end at the last tick of the chunk instead of the next chunk's first.
    bool isolate_chunks = false;
};

/// Strided loss per chunk, the window starting at the chunk's first logged
/// anchor and ending at min(chunk end, n-1). Requested chunks without anchors
/// are skipped with a warning.
ChunkReportSet per_chunk_report(const TimeSeriesFrame& frame, const std::vector<StreamLogRecord>& records,
                                const ReportOptions& options);

struct ChunkComparison {
    std::size_t chunk_id = 0;
    double rewts = 0.0;
    double global = 0.0;
};

struct ComparisonReport {
    /// Metric compared: "mse" or the normalisation name.
    std::string metric;
    std::vector<ChunkComparison> chunks;
    double rewts_mean = 0.0;
    double global_mean = 0.0;
    /// 100 * (global - rewts) / global; positive means the ensemble is better.
    double percent_difference = 0.0;
    std::string axis;
    std::optional<double> axis_value;
};

double percent_difference(double rewts_mean, double global_mean);

/// Throws a comparison error when the chunk sets differ.
ComparisonReport compare_runs(const ChunkReportSet& rewts, const ChunkReportSet& global);

/// Everything needed for one ensemble + baseline evaluation.
struct RunSpec {
    StreamConfig stream;
    LagSpec lags;
    ElasticNetParams params;
    ReportOptions report;
};

void validate(const RunSpec& spec);

struct RunOutcome {
    StreamResult rewts;
    StreamResult global;
    ChunkReportSet rewts_report;
    ChunkReportSet global_report;
    ComparisonReport comparison;
};

/// Runs both methods on `frame` and compares them. Report chunk length,
/// horizon and stride are taken from the stream config.
RunOutcome evaluate(const TimeSeriesFrame& frame, const RunSpec& spec, ModelCache* cache = nullptr);

enum class SweepAxis { ChunkLength, Lookback };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepPoint {
    std::size_t value = 0;
    std::optional<ComparisonReport> report;
    std::optional<std::string> error;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::Lookback;
    std::vector<SweepPoint> points;
    /// Monotonicity of the ensemble mean over successful points in value
    /// order: "increasing", "decreasing", "flat" or "mixed".
    std::string rewts_trend;
};

/// One evaluation per value; an infeasible value yields an error entry and the
/// sweep continues. Points run on up to `jobs` threads sharing `cache`.
SweepResult sweep(const TimeSeriesFrame& frame, SweepAxis axis, const std::vector<std::size_t>& values,
                  const RunSpec& base, std::size_t jobs = 1, ModelCache* cache = nullptr);

struct TimingBench {
    /// Chunk index at whose end each cumulative value is read.
    std::vector<std::size_t> chunk_index;
    std::vector<double> rewts_cumulative_train;
    std::vector<double> global_cumulative_train;
    std::vector<std::size_t> anchor;
    std::vector<std::size_t> model_count;
    /// Weight fit plus forecast.
    std::vector<double> rewts_anchor_seconds;
    std::vector<double> global_anchor_seconds;
    /// Rank correlation of ensemble anchor time with model count.
    double spearman_rho = 0.0;
    /// Largest over smallest per-chunk median of the baseline anchor time.
    double global_time_ratio = 0.0;
    std::size_t repeats = 0;
};

/// Runs both methods `warmup + repeats` times sequentially and keeps the
/// per-entry minimum over the timed repeats.
TimingBench timing_bench(const TimeSeriesFrame& frame, const RunSpec& spec, std::size_t repeats = 3,
                         std::size_t warmup = 1);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json to_json(const ChunkReportSet& r);
/// Inverse of to_json; malformed documents raise a schema error.
ChunkReportSet chunk_report_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ComparisonReport& r);
nlohmann::json to_json(const SweepResult& r);
nlohmann::json to_json(const TimingBench& r);

void write_report_csv(std::ostream& out, const ChunkReportSet& r);
void write_comparison_csv(std::ostream& out, const ComparisonReport& r);
void write_sweep_csv(std::ostream& out, const SweepResult& r);
void write_timing_csv(std::ostream& out, const TimingBench& r);
void write_training_csv(std::ostream& out, const TimingBench& r);

}  // namespace rewts
