#include "rewts/engine.hpp"

#include "rewts/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace rewts {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct LookbackPlan {
    std::vector<std::size_t> anchors;
    bool truncated = false;
    std::string problem;
};

LookbackPlan plan_lookback(const EnsembleConfig& cfg, std::size_t min_history, std::size_t now, std::size_t origin) {
    LookbackPlan plan;
    const std::size_t b = cfg.fit_horizon;
    if (now < b) {
        plan.problem = "anchor " + std::to_string(now) + " precedes the first complete look-back window";
        return plan;
    }
    const std::size_t last = now - b;
    const std::size_t earliest = origin + (min_history == 0 ? 0 : min_history - 1);
    std::size_t first = 0;
    if (now >= cfg.lookback && now - cfg.lookback >= earliest) {
        first = now - cfg.lookback;
    } else {
        plan.truncated = true;
        first = earliest;
        if (last < first) {
            plan.problem = "no look-back anchor at " + std::to_string(now) + " has enough model history";
            return plan;
        }
    }
    for (std::size_t k = first; k <= last; k += cfg.weight_fit_stride) plan.anchors.push_back(k);
    if (plan.truncated && plan.anchors.size() < b + 1) {
        plan.problem = "truncated look-back at " + std::to_string(now) + " keeps " +
                       std::to_string(plan.anchors.size()) + " anchors, needs " + std::to_string(b + 1);
        plan.anchors.clear();
    }
    return plan;
}

std::string cache_key(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags,
                      const ElasticNetParams& params, std::int64_t id) {
    nlohmann::json key = {{"frame", reinterpret_cast<std::uintptr_t>(&frame)},
                          {"n", frame.size()},
                          {"range", {range.start, range.end}},
                          {"id", id},
                          {"lags", to_json(lags)},
                          {"params", to_json(params)}};
    return key.dump();
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void validate(const EnsembleConfig& cfg) {
    require(cfg.fit_horizon >= 1, ErrorKind::Parameter, "fit_horizon must be >= 1");
    require(cfg.lookback >= cfg.fit_horizon, ErrorKind::Parameter,
            "look-back length (" + std::to_string(cfg.lookback) + ") must be >= fit horizon (" +
                std::to_string(cfg.fit_horizon) + ")");
    require(cfg.weight_fit_stride >= 1, ErrorKind::Parameter, "weight_fit_stride must be >= 1");
}

void EnsembleState::add_model(ModelPtr model) {
    require(model && model->forecaster, ErrorKind::Parameter, "null model");
    require(models_.empty() || model->chunk_id > models_.back()->chunk_id, ErrorKind::Parameter,
            "chunk ids must be strictly increasing");
    models_.push_back(std::move(model));
    last_weights.reset();
}

std::size_t EnsembleState::min_history() const {
    std::size_t need = 1;
    for (const auto& m : models_) need = std::max(need, m->min_history());
    return need;
}

std::vector<std::size_t> lookback_anchors(const EnsembleConfig& cfg, std::size_t min_history, std::size_t now,
                                          std::size_t origin) {
    validate(cfg);
    auto plan = plan_lookback(cfg, min_history, now, origin);
    if (plan.anchors.empty()) fail(ErrorKind::InsufficientData, plan.problem);
    return plan.anchors;
}

Eigen::MatrixXd forecast_matrix(const std::vector<ModelPtr>& models, const TimeSeriesFrame& frame, std::size_t anchor,
                                std::size_t h) {
    require(!models.empty(), ErrorKind::Parameter, "forecast matrix needs at least one model");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(models.size()));
    for (std::size_t j = 0; j < models.size(); ++j)
        M.col(static_cast<Eigen::Index>(j)) = forecast_recursive(*models[j], frame, anchor, h);
    return M;
}

Eigen::VectorXd combine(const Eigen::MatrixXd& M, const Eigen::VectorXd& w) {
    require(M.cols() == w.size(), ErrorKind::Shape, "weight count does not match model count");
    Eigen::VectorXd out(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < M.cols(); ++j) acc += M(i, j) * w[j];
        out[i] = acc;
    }
    return out;
}

WeightFit fit_weights(const EnsembleState& state, const TimeSeriesFrame& frame, std::size_t now, std::size_t origin) {
    require(state.size() >= 1, ErrorKind::Parameter, "ensemble has no models");
    require(now < frame.size(), ErrorKind::Index, "anchor beyond end of frame");
    const auto& cfg = state.config();
    auto plan = plan_lookback(cfg, state.min_history(), now, origin);
    if (plan.anchors.empty()) fail(ErrorKind::InsufficientData, plan.problem);

    const std::size_t b = cfg.fit_horizon;
    const std::size_t m = state.size();
    std::vector<Eigen::MatrixXd> mats;
    std::vector<Eigen::VectorXd> targets;
    mats.reserve(plan.anchors.size());
    targets.reserve(plan.anchors.size());
    WeightFit fit;
    fit.model_sse.assign(m, 0.0);
    for (const auto k : plan.anchors) {
        mats.push_back(forecast_matrix(state.models(), frame, k, b));
        targets.push_back(frame.target().segment(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(b)));
        const Eigen::MatrixXd err = mats.back().colwise() - targets.back();
        for (std::size_t j = 0; j < m; ++j) fit.model_sse[j] += err.col(static_cast<Eigen::Index>(j)).squaredNorm();
    }
    fit.anchors = std::move(plan.anchors);
    fit.truncated = plan.truncated;
    fit.max_index_read = fit.anchors.back() + b;

    if (m == 1) {
        fit.weights.w = Eigen::VectorXd::Ones(1);
        return fit;
    }
    const SimplexQP qp = assemble_qp(mats, targets, cfg.ridge_eps);
    fit.weights = solve_simplex_qp(qp, cfg.qp);
    return fit;
}

EnsembleForecast ensemble_forecast(const EnsembleState& state, const TimeSeriesFrame& frame, std::size_t now,
                                   std::size_t h) {
    require(state.last_weights.has_value(), ErrorKind::Parameter, "weights have not been fitted");
    EnsembleForecast out;
    out.matrix = forecast_matrix(state.models(), frame, now, h);
    out.forecast = combine(out.matrix, state.last_weights->w);
    return out;
}

EnsembleForecast ensemble_forecast_recursive(const EnsembleState& state, const TimeSeriesFrame& frame,
                                             std::size_t now, std::size_t h) {
    require(state.last_weights.has_value(), ErrorKind::Parameter, "weights have not been fitted");
    require(now < frame.size(), ErrorKind::Index, "anchor beyond end of frame");
    const auto& w = state.last_weights->w;
    const std::size_t block = state.config().fit_horizon;
    const std::size_t need = state.min_history();
    require(now + 1 >= need, ErrorKind::InsufficientData, "not enough history before anchor");

    const auto W = static_cast<Eigen::Index>(need);
    const auto H = static_cast<Eigen::Index>(h);
    const auto K = static_cast<Eigen::Index>(frame.covariate_count());
    Eigen::MatrixXd ext(W + H, 1 + K);
    ext.topRows(W) = feature_rows(frame, now + 1 - need, now + 1);
    ext.bottomRows(H).setConstant(std::numeric_limits<double>::quiet_NaN());
    const auto known = frame.future_known_columns();
    for (Eigen::Index i = 0; i < H; ++i) {
        const auto tick = now + 1 + static_cast<std::size_t>(i);
        if (tick >= frame.size()) break;
        for (const auto c : known)
            ext(W + i, static_cast<Eigen::Index>(c) + 1) = frame.covariates()(static_cast<Eigen::Index>(tick),
                                                                            static_cast<Eigen::Index>(c));
    }

    EnsembleForecast out;
    out.matrix.resize(H, static_cast<Eigen::Index>(state.size()));
    out.forecast.resize(H);
    for (Eigen::Index i = 0; i < H; i += static_cast<Eigen::Index>(block)) {
        const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(block), H - i);
        for (std::size_t j = 0; j < state.size(); ++j) {
            const auto& model = *state.models()[j];
            Eigen::MatrixXd future(len, static_cast<Eigen::Index>(model.known_columns.size()));
            for (std::size_t q = 0; q < model.known_columns.size(); ++q)
                future.col(static_cast<Eigen::Index>(q)) =
                    ext.col(static_cast<Eigen::Index>(model.known_columns[q]) + 1).segment(W + i, len);
            if (model.known_columns.size() > 0)
                require(future.allFinite(), ErrorKind::InsufficientData, "future covariates unavailable for horizon");
            out.matrix.col(static_cast<Eigen::Index>(j)).segment(i, len) =
                model.forecast(ext.topRows(W + i), future, static_cast<std::size_t>(len));
        }
        const Eigen::VectorXd combined = combine(out.matrix.middleRows(i, len), w);
        out.forecast.segment(i, len) = combined;
        ext.col(0).segment(W + i, len) = combined;
    }
    return out;
}

void validate(const StreamConfig& cfg) {
    require(cfg.chunk_length >= 1, ErrorKind::Parameter, "chunk_length must be >= 1");
    require(cfg.horizon >= 1, ErrorKind::Parameter, "horizon must be >= 1");
    require(cfg.stride >= 1, ErrorKind::Parameter, "stride must be >= 1");
    require(cfg.refit_every >= 1, ErrorKind::Parameter, "refit_every must be >= 1");
    require(cfg.initial_chunks >= 1, ErrorKind::Parameter, "initial_chunks must be >= 1");
    require(cfg.ensemble.fit_horizon <= cfg.horizon, ErrorKind::Parameter, "fit horizon must not exceed horizon");
    require(!cfg.isolate_chunks || cfg.protocol == StreamProtocol::Frozen, ErrorKind::Parameter,
            "isolated chunks need the frozen protocol");
    validate(cfg.ensemble);
}

std::vector<Anchor> anchor_schedule(const StreamConfig& cfg, std::size_t series_length, std::size_t min_history) {
    validate(cfg);
    std::size_t begin = cfg.initial_chunks * cfg.chunk_length;
    std::size_t end = series_length;
    if (cfg.protocol == StreamProtocol::Frozen) {
        begin = cfg.eval_begin;
        end = cfg.eval_end == 0 ? series_length : std::min(cfg.eval_end, series_length);
    }
    std::vector<Anchor> out;
    if (series_length == 0) return out;
    const std::size_t last_index = series_length - 1;
    const std::size_t first_chunk = (begin + cfg.chunk_length - 1) / cfg.chunk_length;
    for (std::size_t c = first_chunk; c * cfg.chunk_length < end; ++c) {
        const std::size_t f = c * cfg.chunk_length;
        const std::size_t e = std::min((c + 1) * cfg.chunk_length - (cfg.isolate_chunks ? 1 : 0), last_index);
        if (e < f + cfg.horizon) continue;
        const std::size_t origin = cfg.isolate_chunks ? f : 0;
        const std::size_t psi = (e - cfg.horizon - f) / cfg.stride;
        for (std::size_t k = 0; k <= psi; ++k) {
            const std::size_t t = f + k * cfg.stride;
            if (t + 1 < origin + min_history) continue;
            if (plan_lookback(cfg.ensemble, min_history, t, origin).anchors.empty()) continue;
            out.push_back({t, c, origin});
        }
    }
    return out;
}

ModelPtr ModelCache::get_or_fit(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags,
                                const ElasticNetParams& params, std::int64_t model_id, double* fit_seconds) {
    const auto key = cache_key(frame, range, lags, params, model_id);
    {
        std::lock_guard lock(mutex_);
        if (const auto it = models_.find(key); it != models_.end()) {
            ++hits_;
            if (fit_seconds) *fit_seconds = 0.0;
            return it->second;
        }
    }
    const auto t0 = Clock::now();
    auto model = std::make_shared<const ChunkModel>(fit_model(frame, range, lags, params, model_id));
    if (fit_seconds) *fit_seconds = seconds_since(t0);
    std::lock_guard lock(mutex_);
    return models_.emplace(key, std::move(model)).first->second;
}

std::size_t ModelCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t ModelCache::size() const {
    std::lock_guard lock(mutex_);
    return models_.size();
}

StreamResult run_stream(const TimeSeriesFrame& frame, const StreamConfig& cfg, const LagSpec& lags,
                        const ElasticNetParams& params, ModelCache* cache) {
    validate(cfg);
    validate(params);
    const std::size_t n = frame.size();
    const auto split = split_chunks(n, cfg.chunk_length);
    const std::size_t warm = resolve(lags, frame.covariate_count(), frame.future_known()).warmup();

    std::vector<ChunkIndex> trainable;
    if (cfg.protocol == StreamProtocol::Streaming) {
        require(split.complete.size() >= std::max<std::size_t>(2, cfg.initial_chunks), ErrorKind::InsufficientData,
                "stream of " + std::to_string(n) + " ticks holds fewer than " +
                    std::to_string(std::max<std::size_t>(2, cfg.initial_chunks)) + " chunks of " +
                    std::to_string(cfg.chunk_length));
        trainable = split.complete;
    } else {
        const std::size_t train_end = cfg.train_end == 0 ? n : std::min(cfg.train_end, n);
        for (const auto& c : split.complete)
            if (c.end <= train_end) trainable.push_back(c);
        require(!trainable.empty(), ErrorKind::InsufficientData, "no complete chunk inside the training range");
    }

    StreamResult result;
    EnsembleState state(cfg.ensemble);
    double cumulative = 0.0;
    std::size_t next_chunk = 0;
    auto train_next = [&](std::size_t available_at) {
        const auto& chunk = trainable[next_chunk++];
        double secs = 0.0;
        ModelPtr model;
        if (cache) {
            model = cache->get_or_fit(frame, chunk, lags, params, static_cast<std::int64_t>(chunk.chunk_id), &secs);
        } else {
            const auto t0 = Clock::now();
            model = std::make_shared<const ChunkModel>(fit_chunk_model(frame, chunk, lags, params));
            secs = seconds_since(t0);
        }
        cumulative += secs;
        result.training.push_back(
            {model->chunk_id, chunk, available_at, secs, cumulative, model->converged});
        if (!model->converged)
            result.warnings.push_back("model for chunk " + std::to_string(chunk.chunk_id) +
                                      " stopped at max_iter before converging");
        state.add_model(std::move(model));
    };

    if (cfg.protocol == StreamProtocol::Streaming) {
        for (std::size_t c = 0; c < cfg.initial_chunks; ++c) train_next(trainable[c].end);
    } else {
        while (next_chunk < trainable.size()) train_next(0);
    }

    const auto schedule = anchor_schedule(cfg, n, warm);
    const bool recursive = cfg.ensemble.fit_horizon != cfg.horizon;
    std::size_t since_refit = 0;
    for (const auto& anchor : schedule) {
        if (cfg.protocol == StreamProtocol::Streaming) {
            while (next_chunk < trainable.size() && trainable[next_chunk].end <= anchor.time + 1)
                train_next(trainable[next_chunk].end);
        }
        StreamLogRecord rec;
        rec.anchor = anchor.time;
        rec.chunk = anchor.chunk;
        for (const auto& m : state.models()) rec.model_ids.push_back(m->chunk_id);

        if (cfg.isolate_chunks && !result.records.empty() && result.records.back().chunk != anchor.chunk)
            state.last_weights.reset();
        const bool stale = !state.last_weights || state.last_weights->w.size() != static_cast<Eigen::Index>(state.size());
        auto t0 = Clock::now();
        if (stale || since_refit % cfg.refit_every == 0) {
            WeightFit fit = fit_weights(state, frame, anchor.time, anchor.origin);
            state.last_weights = std::move(fit.weights);
            rec.model_sse = std::move(fit.model_sse);
            rec.weights_refit = true;
            since_refit = 0;
        }
        ++since_refit;
        rec.weight_fit_seconds = seconds_since(t0);
        rec.weights = state.last_weights->w;
        rec.kkt_residual = state.last_weights->diagnostics.kkt_residual;

        t0 = Clock::now();
        auto fc = recursive ? ensemble_forecast_recursive(state, frame, anchor.time, cfg.horizon)
                            : ensemble_forecast(state, frame, anchor.time, cfg.horizon);
        rec.forecast_seconds = seconds_since(t0);
        rec.forecast = std::move(fc.forecast);
        rec.matrix = std::move(fc.matrix);
        result.records.push_back(std::move(rec));
    }
    if (cfg.protocol == StreamProtocol::Streaming)
        while (next_chunk < trainable.size()) train_next(trainable[next_chunk].end);
    result.models = state.models();
    return result;
}

nlohmann::json to_json(const StreamLogRecord& r) {
    nlohmann::json matrix = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.matrix.rows(); ++i) matrix.push_back(to_vec(r.matrix.row(i).transpose()));
    nlohmann::json j = {{"anchor", r.anchor},
                        {"chunk", r.chunk},
                        {"forecast", to_vec(r.forecast)},
                        {"model_ids", r.model_ids},
                        {"model_count", r.model_ids.size()},
                        {"matrix", matrix},
                        {"weight_fit_seconds", r.weight_fit_seconds},
                        {"forecast_seconds", r.forecast_seconds}};
    if (r.weights.size() > 0) {
        j["weights"] = to_vec(r.weights);
        j["model_sse"] = r.model_sse;
        j["kkt_residual"] = r.kkt_residual;
        j["weights_refit"] = r.weights_refit;
    }
    return j;
}

void write_log_jsonl(std::ostream& out, const std::vector<StreamLogRecord>& records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_log_csv(std::ostream& out, const std::vector<StreamLogRecord>& records) {
    const Eigen::Index h = records.empty() ? 0 : records.front().forecast.size();
    out << "anchor,chunk";
    for (Eigen::Index i = 1; i <= h; ++i) out << ",yhat_" << i;
    out << ",argmax_model,max_weight,model_count,weight_fit_seconds,forecast_seconds\n";
    const auto old_precision = out.precision(17);
    for (const auto& r : records) {
        out << r.anchor << ',' << r.chunk;
        for (Eigen::Index i = 0; i < r.forecast.size(); ++i) out << ',' << r.forecast[i];
        if (r.weights.size() > 0) {
            Eigen::Index best = 0;
            r.weights.maxCoeff(&best);
            out << ',' << r.model_ids[static_cast<std::size_t>(best)] << ',' << r.weights[best];
        } else {
            out << ",,";
        }
        out << ',' << r.model_ids.size() << ',' << r.weight_fit_seconds << ',' << r.forecast_seconds << '\n';
    }
    out.precision(old_precision);
}

nlohmann::json to_json(const StreamConfig& cfg) {
    nlohmann::json j = {{"chunk_length", cfg.chunk_length},
                        {"horizon", cfg.horizon},
                        {"stride", cfg.stride},
                        {"lookback", cfg.ensemble.lookback},
                        {"fit_horizon", cfg.ensemble.fit_horizon},
                        {"weight_fit_stride", cfg.ensemble.weight_fit_stride},
                        {"ridge_eps", nullptr},
                        {"qp_tol", cfg.ensemble.qp.tol},
                        {"qp_max_iter", cfg.ensemble.qp.max_iter},
                        {"refit_every", cfg.refit_every},
                        {"initial_chunks", cfg.initial_chunks},
                        {"protocol", cfg.protocol == StreamProtocol::Streaming ? "streaming" : "frozen"},
                        {"train_end", cfg.train_end},
                        {"eval_begin", cfg.eval_begin},
                        {"eval_end", cfg.eval_end},
                        {"isolate_chunks", cfg.isolate_chunks}};
    if (cfg.ensemble.ridge_eps) j["ridge_eps"] = *cfg.ensemble.ridge_eps;
    return j;
}

StreamConfig stream_config_from_json(const nlohmann::json& j) {
    StreamConfig cfg;
    try {
        cfg.chunk_length = j.value("chunk_length", cfg.chunk_length);
        cfg.horizon = j.value("horizon", cfg.horizon);
        cfg.stride = j.value("stride", cfg.stride);
        cfg.ensemble.lookback = j.value("lookback", cfg.ensemble.lookback);
        cfg.ensemble.fit_horizon = j.value("fit_horizon", cfg.horizon);
        cfg.ensemble.weight_fit_stride = j.value("weight_fit_stride", cfg.ensemble.weight_fit_stride);
        if (j.contains("ridge_eps") && !j["ridge_eps"].is_null()) cfg.ensemble.ridge_eps = j["ridge_eps"].get<double>();
        cfg.ensemble.qp.tol = j.value("qp_tol", cfg.ensemble.qp.tol);
        cfg.ensemble.qp.max_iter = j.value("qp_max_iter", cfg.ensemble.qp.max_iter);
        cfg.refit_every = j.value("refit_every", cfg.refit_every);
        cfg.initial_chunks = j.value("initial_chunks", cfg.initial_chunks);
        const auto protocol = j.value("protocol", std::string("streaming"));
        if (protocol == "streaming") cfg.protocol = StreamProtocol::Streaming;
        else if (protocol == "frozen") cfg.protocol = StreamProtocol::Frozen;
        else fail(ErrorKind::Config, "protocol: expected 'streaming' or 'frozen', got '" + protocol + "'");
        cfg.train_end = j.value("train_end", cfg.train_end);
        cfg.eval_begin = j.value("eval_begin", cfg.eval_begin);
        cfg.eval_end = j.value("eval_end", cfg.eval_end);
        cfg.isolate_chunks = j.value("isolate_chunks", cfg.isolate_chunks);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("stream config: ") + e.what());
    }
    return cfg;
}

}  // namespace rewts
