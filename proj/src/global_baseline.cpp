#include "rewts/global_baseline.hpp"

#include "rewts/error.hpp"

#include <chrono>

namespace rewts {

StreamResult run_global_stream(const TimeSeriesFrame& frame, const StreamConfig& cfg, const LagSpec& lags,
                               const ElasticNetParams& params, ModelCache* cache) {
    validate(cfg);
    validate(params);
    const std::size_t n = frame.size();
    const std::size_t lc = cfg.chunk_length;
    const std::size_t complete = n / lc;
    const std::size_t warm = resolve(lags, frame.covariate_count(), frame.future_known()).warmup();

    std::size_t first_end = 0;
    if (cfg.protocol == StreamProtocol::Streaming) {
        const std::size_t initial = std::max<std::size_t>(2, cfg.initial_chunks);
        require(complete >= initial, ErrorKind::InsufficientData,
                "stream of " + std::to_string(n) + " ticks holds fewer than " + std::to_string(initial) +
                    " chunks of " + std::to_string(lc));
        first_end = cfg.initial_chunks * lc;
    } else {
        const std::size_t train_end = cfg.train_end == 0 ? n : std::min(cfg.train_end, n);
        first_end = (train_end / lc) * lc;
        require(first_end > 0, ErrorKind::InsufficientData, "no complete chunk inside the training range");
    }

    StreamResult result;
    GlobalState state;
    double cumulative = 0.0;
    auto train_through = [&](std::size_t end) {
        const ChunkIndex range{end / lc - 1, 0, end};
        double secs = 0.0;
        if (cache) {
            state.model = cache->get_or_fit(frame, range, lags, params, kGlobalModelId, &secs);
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            state.model = std::make_shared<const ChunkModel>(fit_model(frame, range, lags, params, kGlobalModelId));
            secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        cumulative += secs;
        if (state.trained_through > 0) ++state.retrain_count;
        state.trained_through = end;
        result.training.push_back({kGlobalModelId, range, end, secs, cumulative, state.model->converged});
        if (!state.model->converged)
            result.warnings.push_back("global model on [0, " + std::to_string(end) +
                                      ") stopped at max_iter before converging");
    };

    train_through(first_end);
    const bool streaming = cfg.protocol == StreamProtocol::Streaming;
    for (const auto& anchor : anchor_schedule(cfg, n, warm)) {
        while (streaming && state.trained_through + lc <= complete * lc && state.trained_through + lc <= anchor.time + 1)
            train_through(state.trained_through + lc);
        StreamLogRecord rec;
        rec.anchor = anchor.time;
        rec.chunk = anchor.chunk;
        rec.model_ids = {kGlobalModelId};
        const auto t0 = std::chrono::steady_clock::now();
        rec.forecast = forecast_recursive(*state.model, frame, anchor.time, cfg.horizon);
        rec.forecast_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.matrix = rec.forecast;
        result.records.push_back(std::move(rec));
    }
    while (streaming && state.trained_through + lc <= complete * lc) train_through(state.trained_through + lc);

    result.models = {state.model};
    result.retrain_count = state.retrain_count;
    return result;
}

}  // namespace rewts
