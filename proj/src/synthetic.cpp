#include "rewts/synthetic.hpp"

#include "rewts/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rewts {
namespace {

constexpr double kTrainAmplitude[] = {0.5, 2, 20, 2, 2, 0.5, 2, 5};
constexpr double kTrainFrequency[] = {10, 2, 5, 1, 0.5, 8, 3, 1};
constexpr double kTestAmplitude[] = {0.75, 10, 3, 0.5, 5, 1.25, 3, 4};
constexpr double kTestFrequency[] = {8, 0.75, 7, 11, 0.65, 4, 2, 5};

void append_chunks(std::vector<SineChunkSpec>& out, const double (&amp)[8], const double (&freq)[8]) {
    for (int i = 0; i < 8; ++i) out.push_back({amp[i], freq[i], 500});
}

}  // namespace

void validate(const SineDatasetSpec& spec) {
    require(!spec.chunks.empty(), ErrorKind::Config, "chunks: list is empty");
    require(spec.dt > 0.0 && std::isfinite(spec.dt), ErrorKind::Config, "dt: must be positive");
    require(spec.noise_std >= 0.0, ErrorKind::Config, "noise_std: must be >= 0");
    for (std::size_t i = 0; i < spec.chunks.size(); ++i) {
        const auto& c = spec.chunks[i];
        const std::string at = "chunks[" + std::to_string(i) + "].";
        require(c.amplitude > 0.0, ErrorKind::Config, at + "amplitude: must be > 0");
        require(c.frequency > 0.0, ErrorKind::Config, at + "frequency: must be > 0");
        require(c.n_points >= 2, ErrorKind::Config, at + "n_points: must be >= 2");
    }
}

SineDataset generate_sine_dataset(const SineDatasetSpec& spec) {
    validate(spec);
    std::size_t total = 0;
    for (const auto& c : spec.chunks) total += c.n_points;

    Eigen::VectorXd y(static_cast<Eigen::Index>(total));
    std::vector<SineChunkTruth> truth;
    std::size_t start = 0;
    for (std::size_t i = 0; i < spec.chunks.size(); ++i) {
        const auto& c = spec.chunks[i];
        double phase = 0.0;
        if (i > 0) {
            const auto& prev = truth.back();
            const double t_last = static_cast<double>(start - 1) * spec.dt;
            const double y_prev = y[static_cast<Eigen::Index>(start - 1)];
            const double prev_slope = std::cos(prev.frequency * t_last + prev.phase);
            const double theta0 = std::asin(std::clamp(y_prev / c.amplitude, -1.0, 1.0));
            const double theta = prev_slope >= 0.0 ? theta0 : std::numbers::pi - theta0;
            phase = theta - c.frequency * static_cast<double>(start) * spec.dt;
        }
        for (std::size_t k = start; k < start + c.n_points; ++k)
            y[static_cast<Eigen::Index>(k)] =
                c.amplitude * std::sin(c.frequency * (static_cast<double>(k) * spec.dt) + phase);
        truth.push_back({c.amplitude, c.frequency, phase, start, start + c.n_points});
        start += c.n_points;
    }

    if (spec.noise_std > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (Eigen::Index k = 0; k < y.size(); ++k) y[k] += noise(rng);
    }
    return {TimeSeriesFrame(std::move(y)), std::move(truth), spec};
}

SineDatasetSpec default_paper_spec(PaperSplit split) {
    SineDatasetSpec spec;
    if (split != PaperSplit::Test) append_chunks(spec.chunks, kTrainAmplitude, kTrainFrequency);
    if (split != PaperSplit::Train) append_chunks(spec.chunks, kTestAmplitude, kTestFrequency);
    return spec;
}

std::vector<double> chunk_amplitudes(const SineDatasetSpec& spec) {
    std::vector<double> out;
    for (const auto& c : spec.chunks) out.push_back(c.amplitude);
    return out;
}

std::vector<double> tick_amplitudes(const SineDatasetSpec& spec) {
    std::vector<double> out;
    for (const auto& c : spec.chunks) out.insert(out.end(), c.n_points, c.amplitude);
    return out;
}

nlohmann::json to_json(const SineDatasetSpec& spec) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : spec.chunks)
        chunks.push_back({{"amplitude", c.amplitude}, {"frequency", c.frequency}, {"n_points", c.n_points}});
    return {{"chunks", chunks}, {"dt", spec.dt}, {"seed", spec.seed}, {"noise_std", spec.noise_std}};
}

SineDatasetSpec spec_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::Config, "synthetic spec: expected an object");
    require(j.contains("chunks") && j["chunks"].is_array(), ErrorKind::Config, "chunks: expected an array");
    SineDatasetSpec spec;
    for (std::size_t i = 0; i < j["chunks"].size(); ++i) {
        const auto& c = j["chunks"][i];
        const std::string at = "chunks[" + std::to_string(i) + "]";
        require(c.is_object() && c.contains("amplitude") && c.contains("frequency"), ErrorKind::Config,
                at + ": needs amplitude and frequency");
        try {
            spec.chunks.push_back({c.at("amplitude").get<double>(), c.at("frequency").get<double>(),
                                   c.value("n_points", std::size_t{500})});
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::Config, at + ": fields must be numeric");
        }
    }
    spec.dt = j.value("dt", spec.dt);
    spec.seed = j.value("seed", spec.seed);
    spec.noise_std = j.value("noise_std", spec.noise_std);
    validate(spec);
    return spec;
}

nlohmann::json sidecar_json(const SineDataset& dataset) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& t : dataset.truth)
        chunks.push_back({{"amplitude", t.amplitude},
                          {"frequency", t.frequency},
                          {"phase", t.phase},
                          {"start", t.start},
                          {"end", t.end}});
    return {{"version", 1},
            {"model", "y[k] = amplitude * sin(frequency * k * dt + phase)"},
            {"phase_rule",
             "first chunk phase 0; later chunks repeat the previous last sample (clamped to +-amplitude), "
             "arcsin branch matching the previous slope sign"},
            {"dt", dataset.spec.dt},
            {"seed", dataset.spec.seed},
            {"noise_std", dataset.spec.noise_std},
            {"length", dataset.frame.size()},
            {"chunks", chunks}};
}

}  // namespace rewts
