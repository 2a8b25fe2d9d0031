#pragma once

#include "rewts/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace rewts {

struct SineChunkSpec {
    double amplitude = 1.0;
    double frequency = 1.0;
    std::size_t n_points = 500;
};

struct SineDatasetSpec {
    std::vector<SineChunkSpec> chunks;
    /// Sampling interval of the sine argument.
    double dt = 0.01;
    std::uint64_t seed = 0;
    /// Standard deviation of optional additive Gaussian noise; 0 disables it.
    double noise_std = 0.0;
};

/// Ground truth of one generated chunk: y_k = A sin(omega * k * dt + phase)
/// for k in [start, end).
struct SineChunkTruth {
    double amplitude;
    double frequency;
    double phase;
    std::size_t start;
    std::size_t end;
};

struct SineDataset {
    TimeSeriesFrame frame;
    std::vector<SineChunkTruth> truth;
    SineDatasetSpec spec;
};

enum class PaperSplit { Train, Test, Full };

void validate(const SineDatasetSpec& spec);

/// Piecewise sinusoid, value-continuous across chunk boundaries.
///
/// The first chunk starts at phase 0. Every later chunk picks its phase so its
/// first sample repeats the previous chunk's last sample when |y_prev| <= A;
/// otherwise the value is clamped to sign(y_prev) * A. Of the two arcsin
/// branches the one whose slope sign matches the previous chunk's slope at its
/// last sample is used.
SineDataset generate_sine_dataset(const SineDatasetSpec& spec);

/// The eight-chunk train or test configuration (or both concatenated as one
/// continuous sixteen-chunk series), 500 points per chunk.
SineDatasetSpec default_paper_spec(PaperSplit split);

/// Amplitudes of each chunk in order.
std::vector<double> chunk_amplitudes(const SineDatasetSpec& spec);
/// Amplitude in force at every tick.
std::vector<double> tick_amplitudes(const SineDatasetSpec& spec);

nlohmann::json sidecar_json(const SineDataset& dataset);
SineDatasetSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SineDatasetSpec& spec);

}  // namespace rewts
