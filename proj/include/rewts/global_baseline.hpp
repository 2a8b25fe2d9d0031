#pragma once

#include "rewts/engine.hpp"

namespace rewts {

/// Model id carried by the global baseline.
inline constexpr std::int64_t kGlobalModelId = -1;

struct GlobalState {
    ModelPtr model;
    /// End of the training range; always a multiple of the chunk length.
    std::size_t trained_through = 0;
    std::size_t retrain_count = 0;

    [[nodiscard]] const Scaler& scaler() const { return model->scaler; }
};

/// Single model refit from scratch on [0, boundary) every time a chunk
/// completes, forecasting at the same anchors as run_stream. In streaming
/// mode the first fit covers the initial chunks; in frozen mode one fit
/// covers [0, train_end).
StreamResult run_global_stream(const TimeSeriesFrame& frame, const StreamConfig& cfg, const LagSpec& lags,
                               const ElasticNetParams& params, ModelCache* cache = nullptr);

}  // namespace rewts
