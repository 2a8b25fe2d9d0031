#pragma once

#include "rewts/timeseries.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace rewts {

/// Lag embedding used by the autoregressive models.
struct LagSpec {
    /// Number of lagged target values y[t-1] ... y[t-input_length].
    std::size_t input_length = 80;
    /// Per-covariate lag sets. Lag l >= 1 reads X[t-l]; lag 0 reads X[t] and
    /// is only legal for future-known covariates. Empty means no lagged
    /// covariate features.
    std::vector<std::vector<std::size_t>> covariate_lags;
    /// Adds the current value X[t] of every future-known covariate.
    bool use_future_covariates = false;

    friend bool operator==(const LagSpec&, const LagSpec&) = default;
};

/// Elastic-net regularisation for the linear autoregressive model:
/// minimise (1/2n)||y - X b - b0||^2 + lambda (alpha ||b||_1 + (1 - alpha)/2 ||b||_2^2).
struct ElasticNetParams {
    double lambda = 1e-4;
    double alpha = 0.5;
    std::size_t max_iter = 20000;
    double tol = 1e-9;
    bool fit_intercept = true;

    friend bool operator==(const ElasticNetParams&, const ElasticNetParams&) = default;
};

void validate(const LagSpec& lags, std::size_t covariate_count, const std::vector<bool>& future_known);
void validate(const ElasticNetParams& params);

/// Lags with the future-covariate flag folded in: one sorted lag list per covariate.
struct ResolvedLags {
    std::size_t input_length = 0;
    std::vector<std::vector<std::size_t>> covariate;

    [[nodiscard]] std::size_t feature_count() const;
    /// History rows needed before the first labelled row.
    [[nodiscard]] std::size_t warmup() const;
};

ResolvedLags resolve(const LagSpec& lags, std::size_t covariate_count, const std::vector<bool>& future_known);

struct Design {
    Eigen::MatrixXd features;
    Eigen::VectorXd labels;
    /// Absolute tick of the first labelled row.
    std::size_t first_label = 0;
};

/// One-step lag embedding of feature rows (column 0 = target). Row r predicts
/// rows(warmup + r, 0); rows lacking history are dropped.
Design build_design(const Eigen::Ref<const Eigen::MatrixXd>& rows, const ResolvedLags& lags);

/// Unscaled lag embedding of `range` of `frame`.
Design build_design(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags);

struct LinearFit {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Cyclic coordinate descent with soft-thresholding; stops once the largest
/// coefficient update of a full sweep is below params.tol. Running out of
/// iterations leaves `converged` false rather than failing.
LinearFit fit_elastic_net(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const ElasticNetParams& params);

/// One-step forecaster working in scaled feature space. Multi-step forecasts
/// are produced recursively by feeding predictions back as target lags.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    [[nodiscard]] virtual std::string kind() const = 0;
    /// Rows of history the forecaster needs, including the anchor row.
    [[nodiscard]] virtual std::size_t min_history() const = 0;
    [[nodiscard]] virtual std::size_t param_count() const = 0;

    /// `history` holds feature rows ending at the anchor; `future` holds the
    /// future-known covariates for the next h ticks (h x K_known), in the
    /// order given by `known_columns`.
    [[nodiscard]] virtual Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                                   const Eigen::Ref<const Eigen::MatrixXd>& future,
                                                   const std::vector<std::size_t>& known_columns,
                                                   std::size_t h) const = 0;

    [[nodiscard]] virtual nlohmann::json to_json() const = 0;
};

class LinearArForecaster final : public Forecaster {
public:
    LinearArForecaster(ResolvedLags lags, LinearFit fit);

    [[nodiscard]] std::string kind() const override { return "linear_ar"; }
    [[nodiscard]] std::size_t min_history() const override { return lags_.warmup(); }
    [[nodiscard]] std::size_t param_count() const override {
        return static_cast<std::size_t>(fit_.coef.size()) + 1;
    }
    [[nodiscard]] Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                           const Eigen::Ref<const Eigen::MatrixXd>& future,
                                           const std::vector<std::size_t>& known_columns,
                                           std::size_t h) const override;
    [[nodiscard]] nlohmann::json to_json() const override;

    [[nodiscard]] const LinearFit& fit() const noexcept { return fit_; }
    [[nodiscard]] const ResolvedLags& lags() const noexcept { return lags_; }

private:
    ResolvedLags lags_;
    LinearFit fit_;
};

/// y[t+i] = y[t].
class PersistenceForecaster final : public Forecaster {
public:
    [[nodiscard]] std::string kind() const override { return "persistence"; }
    [[nodiscard]] std::size_t min_history() const override { return 1; }
    [[nodiscard]] std::size_t param_count() const override { return 0; }
    [[nodiscard]] Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                           const Eigen::Ref<const Eigen::MatrixXd>& future,
                                           const std::vector<std::size_t>& known_columns,
                                           std::size_t h) const override;
    [[nodiscard]] nlohmann::json to_json() const override;
};

/// Always predicts the same value.
class ConstantForecaster final : public Forecaster {
public:
    explicit ConstantForecaster(double value) : value_(value) {}

    [[nodiscard]] std::string kind() const override { return "constant"; }
    [[nodiscard]] std::size_t min_history() const override { return 1; }
    [[nodiscard]] std::size_t param_count() const override { return 1; }
    [[nodiscard]] Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                           const Eigen::Ref<const Eigen::MatrixXd>& future,
                                           const std::vector<std::size_t>& known_columns,
                                           std::size_t h) const override;
    [[nodiscard]] nlohmann::json to_json() const override;

private:
    double value_;
};

/// A fitted forecaster bound to the scaler of the data it was trained on.
/// Chunk models carry their chunk id; the global model uses id -1.
struct ChunkModel {
    std::shared_ptr<const Forecaster> forecaster;
    Scaler scaler;
    std::int64_t chunk_id = 0;
    ChunkIndex range;
    std::size_t param_count = 0;
    bool converged = true;
    /// Covariate indices whose future values the forecaster consumes.
    std::vector<std::size_t> known_columns;

    [[nodiscard]] std::size_t min_history() const { return forecaster->min_history(); }

    /// h-step forecast from raw feature rows ending at the anchor. The inputs
    /// are scaled with the model's own scaler and the output is returned in
    /// original units.
    [[nodiscard]] Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::MatrixXd>& history_rows,
                                           const Eigen::Ref<const Eigen::MatrixXd>& future_known,
                                           std::size_t h) const;
};

/// Forecast y[anchor+1 .. anchor+h] using frame data up to and including `anchor`.
Eigen::VectorXd forecast_recursive(const ChunkModel& model, const TimeSeriesFrame& frame, std::size_t anchor,
                                   std::size_t h);

/// Fits scaler, lag design and elastic net on `range` of `frame`.
ChunkModel fit_model(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags,
                     const ElasticNetParams& params, std::int64_t model_id);

ChunkModel fit_chunk_model(const TimeSeriesFrame& frame, const ChunkIndex& chunk, const LagSpec& lags,
                           const ElasticNetParams& params);

/// Persistence baseline wrapped as a model (identity scaler).
ChunkModel make_persistence_model(std::size_t covariate_count, std::int64_t model_id = 0);
/// Constant-value baseline wrapped as a model (identity scaler).
ChunkModel make_constant_model(double value, std::size_t covariate_count, std::int64_t model_id = 0);
/// Linear AR model with given coefficients in original units (identity scaler).
ChunkModel make_linear_model(Eigen::VectorXd coef, double intercept, std::size_t covariate_count = 0,
                             std::int64_t model_id = 0);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const ChunkModel& model);
ChunkModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LagSpec& lags);
LagSpec lags_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ElasticNetParams& params);
ElasticNetParams params_from_json(const nlohmann::json& j);

}  // namespace rewts
