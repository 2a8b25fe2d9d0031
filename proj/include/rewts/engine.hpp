#pragma once

#include "rewts/forecasters.hpp"
#include "rewts/simplex_qp.hpp"
#include "rewts/timeseries.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rewts {

using ModelPtr = std::shared_ptr<const ChunkModel>;

/// Weight-fitting configuration of the ensemble.
struct EnsembleConfig {
    /// Look-back length l_b in ticks.
    std::size_t lookback = 160;
    /// Horizon used when fitting weights. Smaller than the forecast horizon
    /// selects the block-recursive forecast (one-step when 1).
    std::size_t fit_horizon = 30;
    /// Spacing of the look-back anchors.
    std::size_t weight_fit_stride = 1;
    /// nullopt selects the default 1e-8 * trace(Q) / m.
    std::optional<double> ridge_eps;
    QpSolverOptions qp;
};

void validate(const EnsembleConfig& cfg);

class EnsembleState {
public:
    explicit EnsembleState(EnsembleConfig config = {}) : config_(std::move(config)) { validate(config_); }

    /// Appends a model; chunk ids must be strictly increasing.
    void add_model(ModelPtr model);

    [[nodiscard]] const std::vector<ModelPtr>& models() const noexcept { return models_; }
    [[nodiscard]] std::size_t size() const noexcept { return models_.size(); }
    [[nodiscard]] const EnsembleConfig& config() const noexcept { return config_; }
    /// Rows of history every model can work with.
    [[nodiscard]] std::size_t min_history() const;

    std::optional<WeightVector> last_weights;

private:
    EnsembleConfig config_;
    std::vector<ModelPtr> models_;
};

/// Look-back anchors used to fit weights at `now`: now-l_b, now-l_b+stride,
/// ..., <= now-h_fit. A window reaching before the first anchor with enough
/// model history after `origin` is truncated, provided at least h_fit+1
/// anchors remain.
std::vector<std::size_t> lookback_anchors(const EnsembleConfig& cfg, std::size_t min_history, std::size_t now,
                                          std::size_t origin = 0);

struct WeightFit {
    WeightVector weights;
    /// Look-back squared error of each model on its own (objective at vertex j).
    std::vector<double> model_sse;
    std::vector<std::size_t> anchors;
    /// Largest frame index read while fitting.
    std::size_t max_index_read = 0;
    bool truncated = false;
};

/// h x m matrix; column j is model j's h-step forecast from `anchor`.
Eigen::MatrixXd forecast_matrix(const std::vector<ModelPtr>& models, const TimeSeriesFrame& frame, std::size_t anchor,
                                std::size_t h);

/// M * w with a fixed summation order (row by row, models in order).
Eigen::VectorXd combine(const Eigen::MatrixXd& M, const Eigen::VectorXd& w);

/// No frame row before `origin` is read.
WeightFit fit_weights(const EnsembleState& state, const TimeSeriesFrame& frame, std::size_t now,
                      std::size_t origin = 0);

struct EnsembleForecast {
    Eigen::VectorXd forecast;
    /// Per-model forecasts that were combined; forecast = combine(matrix, w).
    Eigen::MatrixXd matrix;
};

/// M_h(now) * w with w = state.last_weights.
EnsembleForecast ensemble_forecast(const EnsembleState& state, const TimeSeriesFrame& frame, std::size_t now,
                                   std::size_t h);

/// Weights fitted with horizon b = fit_horizon are reapplied recursively:
/// every model forecasts b steps from the combined path, the weighted
/// combination is appended to the history, repeated until h values exist.
/// With b = 1 this is the one-step variant.
EnsembleForecast ensemble_forecast_recursive(const EnsembleState& state, const TimeSeriesFrame& frame,
                                             std::size_t now, std::size_t h);

enum class StreamProtocol {
    /// Models accrue chunk by chunk; forecasting starts once `initial_chunks`
    /// models exist.
    Streaming,
    /// All models are trained up front on the complete chunks inside
    /// [0, train_end) and the anchors of [eval_begin, eval_end) are evaluated.
    Frozen,
};

struct StreamConfig {
    std::size_t chunk_length = 500;
    std::size_t horizon = 30;
    std::size_t stride = 30;
    EnsembleConfig ensemble;
    /// Refit weights at every Nth anchor (1 = every anchor).
    std::size_t refit_every = 1;
    std::size_t initial_chunks = 2;
    StreamProtocol protocol = StreamProtocol::Streaming;
    /// Frozen protocol only; 0 means the end of the frame.
    std::size_t train_end = 0;
    std::size_t eval_begin = 0;
    std::size_t eval_end = 0;
    /// Frozen protocol only: every evaluated chunk is treated as a stream of
    /// its own, so no history, look-back or target crosses its boundaries.
    bool isolate_chunks = false;
};

void validate(const StreamConfig& cfg);

struct Anchor {
    std::size_t time = 0;
    std::size_t chunk = 0;
    /// First row the forecast may read.
    std::size_t origin = 0;
};

/// Evaluation anchors shared by the ensemble and the global baseline. Within
/// chunk c (window f = c*l_c, e = min((c+1)*l_c, n-1), or (c+1)*l_c-1 for
/// isolated chunks) anchors are f + k*s for k = 0..floor((e-h-f)/s); anchors
/// without enough history for weight fitting are dropped.
std::vector<Anchor> anchor_schedule(const StreamConfig& cfg, std::size_t series_length, std::size_t min_history);

struct StreamLogRecord {
    std::size_t anchor = 0;
    std::size_t chunk = 0;
    Eigen::VectorXd forecast;
    /// Empty for the global baseline.
    Eigen::VectorXd weights;
    std::vector<std::int64_t> model_ids;
    Eigen::MatrixXd matrix;
    std::vector<double> model_sse;
    double kkt_residual = 0.0;
    bool weights_refit = false;
    double weight_fit_seconds = 0.0;
    double forecast_seconds = 0.0;
};

struct TrainingEvent {
    std::int64_t model_id = 0;
    ChunkIndex range;
    /// Tick at which the model became available.
    std::size_t available_at = 0;
    double seconds = 0.0;
    double cumulative_seconds = 0.0;
    bool converged = true;
};

struct StreamResult {
    std::vector<StreamLogRecord> records;
    std::vector<TrainingEvent> training;
    std::vector<ModelPtr> models;
    std::size_t retrain_count = 0;
    std::vector<std::string> warnings;
};

/// Shares fitted models between runs over the same frame (sweeps). Fitting
/// is deterministic, so a hit returns exactly what a refit would.
class ModelCache {
public:
    ModelPtr get_or_fit(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags,
                        const ElasticNetParams& params, std::int64_t model_id, double* fit_seconds = nullptr);
    [[nodiscard]] std::size_t hits() const;
    [[nodiscard]] std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, ModelPtr> models_;
    std::size_t hits_ = 0;
};

/// Trains one model per chunk and forecasts with the look-back weighted
/// ensemble at every scheduled anchor.
StreamResult run_stream(const TimeSeriesFrame& frame, const StreamConfig& cfg, const LagSpec& lags,
                        const ElasticNetParams& params, ModelCache* cache = nullptr);

nlohmann::json to_json(const StreamLogRecord& record);
void write_log_jsonl(std::ostream& out, const std::vector<StreamLogRecord>& records);
/// anchor, chunk, yhat_1..yhat_h, argmax model, max weight, model count, timings.
void write_log_csv(std::ostream& out, const std::vector<StreamLogRecord>& records);

nlohmann::json to_json(const StreamConfig& cfg);
StreamConfig stream_config_from_json(const nlohmann::json& j);

}  // namespace rewts
