#pragma once

#include "rewts/eval.hpp"
#include "rewts/ingest.hpp"
#include "rewts/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rewts::cli {

/// Either a CSV file or a synthetic sine specification.
struct DataSource {
    std::optional<std::filesystem::path> csv;
    CsvSchema schema;
    /// Preset name ("paper-train", "paper-test", "paper-full") or "custom".
    std::string synthetic_name;
    std::optional<SineDatasetSpec> synthetic;
    /// Ground-truth sidecar written by `generate`; supplies amplitudes for a CSV source.
    std::optional<std::filesystem::path> amplitude_sidecar;
};

struct RunConfig {
    DataSource data;
    RunSpec run;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    std::string method = "rewts";
};

/// Parses the JSON run configuration. Errors name the offending field.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

struct LoadedData {
    TimeSeriesFrame frame;
    /// Empty when no amplitude information exists.
    std::vector<double> tick_amplitude;
};

LoadedData load_data(const RunConfig& cfg);

/// Amplitude in force at every tick according to a generator sidecar.
std::vector<double> tick_amplitudes_from_sidecar(const nlohmann::json& sidecar);

/// Writes `y` with a time column t = k * dt and the JSON sidecar next to it
/// (same stem, ".sidecar.json").
void write_dataset(const SineDataset& dataset, const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Machine-readable error document.
nlohmann::json error_json(const std::string& command, const std::string& kind, const std::string& message);

/// Entry point of the `rewts` executable.
int main(int argc, char** argv);

}  // namespace rewts::cli
