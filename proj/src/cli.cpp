#include "rewts/cli.hpp"

#include "rewts/error.hpp"
#include "rewts/global_baseline.hpp"
#include "rewts/svg.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

namespace rewts::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + what + " '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, what + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

template <class Writer>
void write_with(const fs::path& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
    writer(out);
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

void prepare_output(const fs::path& dir) {
    require(!dir.empty(), ErrorKind::Config, "output_dir: required (config field or --out)");
    std::error_code ec;
    fs::create_directories(dir / "figures", ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
}

SineDatasetSpec preset(const std::string& name) {
    if (name == "paper-train") return default_paper_spec(PaperSplit::Train);
    if (name == "paper-test") return default_paper_spec(PaperSplit::Test);
    if (name == "paper-full") return default_paper_spec(PaperSplit::Full);
    fail(ErrorKind::Config, "data.synthetic: unknown preset '" + name + "' (paper-train, paper-test, paper-full)");
}

CsvSchema schema_from_json(const json& j) {
    CsvSchema s;
    s.target = j.value("target", std::string("y"));
    if (j.contains("covariates")) {
        const auto& cov = j.at("covariates");
        require(cov.is_array(), ErrorKind::Config, "data.schema.covariates: expected an array");
        for (std::size_t i = 0; i < cov.size(); ++i) {
            const std::string at = "data.schema.covariates[" + std::to_string(i) + "]";
            if (cov[i].is_string()) {
                s.covariates.push_back({cov[i].get<std::string>(), false});
            } else {
                require(cov[i].is_object() && cov[i].contains("name"), ErrorKind::Config, at + ": needs a name");
                s.covariates.push_back({cov[i].at("name").get<std::string>(), cov[i].value("future_known", false)});
            }
        }
    }
    if (j.contains("time_column") && !j.at("time_column").is_null())
        s.time_column = j.at("time_column").get<std::string>();
    const auto delim = j.value("delimiter", std::string(","));
    require(delim.size() == 1, ErrorKind::Config, "data.schema.delimiter: expected a single character");
    s.delimiter = delim[0];
    s.lenient = j.value("lenient", false);
    if (j.contains("resample_step") && !j.at("resample_step").is_null())
        s.resample_step = j.at("resample_step").get<double>();
    s.step = j.value("step", 1.0);
    return s;
}

json to_json(const CsvSchema& s) {
    json cov = json::array();
    for (const auto& c : s.covariates) cov.push_back({{"name", c.name}, {"future_known", c.future_known}});
    return {{"target", s.target},
            {"covariates", cov},
            {"time_column", s.time_column ? json(*s.time_column) : json(nullptr)},
            {"delimiter", std::string(1, s.delimiter)},
            {"lenient", s.lenient},
            {"resample_step", s.resample_step ? json(*s.resample_step) : json(nullptr)},
            {"step", s.step}};
}

template <class Fn>
auto in_section(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, name + ": " + e.what());
    }
}

void log_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) spdlog::warn("{}", w);
}

json stream_summary(const StreamResult& r, const std::string& method) {
    return {{"method", method},
            {"anchor_count", r.records.size()},
            {"model_count", method == "global" ? std::size_t{1} : r.models.size()},
            {"retrain_count", r.retrain_count}};
}

std::string loss_figure(const ChunkReportSet& report, const std::string& method) {
    svg::Series s{method, {}, {}};
    for (const auto& c : report.chunks) {
        s.x.push_back(static_cast<double>(c.chunk_id));
        s.y.push_back(c.normalized_mse);
    }
    return svg::line_chart({s}, {"Loss per chunk", "chunk", report.normalization == Normalization::None
                                                                 ? "MSE"
                                                                 : "MSE (" + to_string(report.normalization) + ")",
                                 true});
}

ReportOptions report_options(const RunSpec& spec, std::vector<double> amplitudes) {
    ReportOptions opts = spec.report;
    opts.chunk_length = spec.stream.chunk_length;
    opts.h = spec.stream.horizon;
    opts.s = spec.stream.stride;
    opts.isolate_chunks = spec.stream.isolate_chunks;
    opts.tick_amplitude = std::move(amplitudes);
    return opts;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Command implementations ----------------------------------------------------

struct GenerateOptions {
    bool paper_train = false, paper_test = false, paper_full = false;
    std::string spec_file;
    std::string out;
    std::optional<double> dt, noise;
    std::optional<std::uint64_t> seed;
};

void cmd_generate(const GenerateOptions& o) {
    const int presets = int(o.paper_train) + int(o.paper_test) + int(o.paper_full) + int(!o.spec_file.empty());
    require(presets == 1, ErrorKind::Config, "generate: choose exactly one of --paper-train, --paper-test, --paper-full, --spec");
    SineDatasetSpec spec = o.paper_train  ? default_paper_spec(PaperSplit::Train)
                           : o.paper_test ? default_paper_spec(PaperSplit::Test)
                           : o.paper_full ? default_paper_spec(PaperSplit::Full)
                                          : spec_from_json(read_json_file(o.spec_file, "spec file"));
    if (o.dt) spec.dt = *o.dt;
    if (o.noise) spec.noise_std = *o.noise;
    if (o.seed) spec.seed = *o.seed;
    validate(spec);
    const auto ds = generate_sine_dataset(spec);
    write_dataset(ds, o.out);
    spdlog::info("generate: {} chunks, {} rows -> {}", spec.chunks.size(), ds.frame.size(), o.out);
}

void cmd_run(const RunConfig& cfg) {
    require(cfg.method == "rewts" || cfg.method == "global", ErrorKind::Config,
            "method: expected rewts or global, got '" + cfg.method + "'");
    validate(cfg.run);
    const auto t0 = std::chrono::steady_clock::now();
    prepare_output(cfg.output_dir);
    const auto data = load_data(cfg);
    write_text(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");

    const auto result = cfg.method == "rewts"
                            ? run_stream(data.frame, cfg.run.stream, cfg.run.lags, cfg.run.params)
                            : run_global_stream(data.frame, cfg.run.stream, cfg.run.lags, cfg.run.params);
    const auto report = per_chunk_report(data.frame, result.records, report_options(cfg.run, data.tick_amplitude));

    write_with(cfg.output_dir / "log.jsonl", [&](std::ostream& o) { write_log_jsonl(o, result.records); });
    write_with(cfg.output_dir / "log.csv", [&](std::ostream& o) { write_log_csv(o, result.records); });
    json doc = stream_summary(result, cfg.method);
    doc["report"] = to_json(report);
    std::vector<std::string> warnings = result.warnings;
    warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
    doc["warnings"] = warnings;
    write_text(cfg.output_dir / "report.json", doc.dump(2) + "\n");
    write_with(cfg.output_dir / "report.csv", [&](std::ostream& o) { write_report_csv(o, report); });
    json models = json::array();
    for (const auto& m : result.models) models.push_back(rewts::to_json(*m));
    write_text(cfg.output_dir / "models.json", models.dump(2) + "\n");
    write_text(cfg.output_dir / "figures" / "loss_per_chunk.svg", loss_figure(report, cfg.method));

    log_warnings(warnings);
    spdlog::info("run: method={} anchors={} models={} retrains={} mean_mse={:.6g} mean_normalized={:.6g} in {:.2f}s",
                 cfg.method, result.records.size(), result.models.size(), result.retrain_count, report.mean_mse,
                 report.mean_normalized_mse, seconds_since(t0));
}

void cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
    const auto ja = read_json_file(fs::path(a) / "report.json", "run report");
    const auto jb = read_json_file(fs::path(b) / "report.json", "run report");
    require(ja.contains("report") && jb.contains("report"), ErrorKind::Schema, "run report lacks a 'report' section");
    const auto cmp = compare_runs(chunk_report_set_from_json(ja["report"]), chunk_report_set_from_json(jb["report"]));
    json doc = rewts::to_json(cmp);
    doc["rewts_run"] = a;
    doc["global_run"] = b;
    if (out.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        prepare_output(out);
        write_text(fs::path(out) / "report.json", doc.dump(2) + "\n");
        write_with(fs::path(out) / "report.csv", [&](std::ostream& o) { write_comparison_csv(o, cmp); });
        svg::Series r{"rewts", {}, {}}, g{"global", {}, {}};
        for (const auto& c : cmp.chunks) {
            r.x.push_back(static_cast<double>(c.chunk_id));
            r.y.push_back(c.rewts);
            g.x.push_back(static_cast<double>(c.chunk_id));
            g.y.push_back(c.global);
        }
        write_text(fs::path(out) / "figures" / "comparison.svg",
                   svg::line_chart({r, g}, {"Loss per chunk", "chunk", cmp.metric, true}));
    }
    spdlog::info("compare: rewts mean {:.6g}, global mean {:.6g}, difference {:.4g}%", cmp.rewts_mean,
                 cmp.global_mean, cmp.percent_difference);
}

void cmd_sweep(const RunConfig& cfg, const std::string& axis_name, const std::vector<std::size_t>& values,
               std::size_t jobs) {
    const auto axis = sweep_axis_from_string(axis_name);
    const auto t0 = std::chrono::steady_clock::now();
    prepare_output(cfg.output_dir);
    const auto data = load_data(cfg);
    write_text(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");
    RunSpec spec = cfg.run;
    spec.report.tick_amplitude = data.tick_amplitude;
    ModelCache cache;
    const auto result = sweep(data.frame, axis, values, spec, jobs, &cache);

    write_text(cfg.output_dir / "report.json", rewts::to_json(result).dump(2) + "\n");
    write_with(cfg.output_dir / "report.csv", [&](std::ostream& o) { write_sweep_csv(o, result); });
    svg::Series r{"rewts", {}, {}}, g{"global", {}, {}};
    for (const auto& p : result.points) {
        if (p.error) spdlog::warn("sweep {}={}: {}", axis_name, p.value, *p.error);
        if (!p.report) continue;
        r.x.push_back(static_cast<double>(p.value));
        r.y.push_back(p.report->rewts_mean);
        g.x.push_back(static_cast<double>(p.value));
        g.y.push_back(p.report->global_mean);
    }
    write_text(cfg.output_dir / "figures" / "sweep.svg",
               svg::line_chart({r, g}, {"Mean loss over chunks", axis_name, "mean loss", true}));
    spdlog::info("sweep: {} points over {}, trend {}, {} cached models ({} hits), {:.2f}s", values.size(), axis_name,
                 result.rewts_trend, cache.size(), cache.hits(), seconds_since(t0));
}

void cmd_bench(const RunConfig& cfg, std::size_t repeats, std::size_t warmup) {
    prepare_output(cfg.output_dir);
    const auto data = load_data(cfg);
    write_text(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");
    RunSpec spec = cfg.run;
    spec.report.tick_amplitude = data.tick_amplitude;
    const auto bench = timing_bench(data.frame, spec, repeats, warmup);

    write_text(cfg.output_dir / "report.json", rewts::to_json(bench).dump(2) + "\n");
    write_with(cfg.output_dir / "report.csv", [&](std::ostream& o) { write_timing_csv(o, bench); });
    write_with(cfg.output_dir / "training.csv", [&](std::ostream& o) { write_training_csv(o, bench); });
    std::vector<double> chunks(bench.chunk_index.begin(), bench.chunk_index.end());
    for (auto& c : chunks) c += 1.0;
    write_text(cfg.output_dir / "figures" / "training_time.svg",
               svg::line_chart({{"rewts", chunks, bench.rewts_cumulative_train},
                                {"global", chunks, bench.global_cumulative_train}},
                               {"Cumulative training time", "chunks completed", "seconds", false}));
    std::vector<double> anchors(bench.anchor.begin(), bench.anchor.end());
    write_text(cfg.output_dir / "figures" / "forecast_time.svg",
               svg::line_chart({{"rewts", anchors, bench.rewts_anchor_seconds},
                                {"global", anchors, bench.global_anchor_seconds}},
                               {"Time per forecast", "anchor", "seconds", true}));
    spdlog::info("bench: {} anchors, spearman rho {:.3f}, global time ratio {:.2f}", bench.anchor.size(),
                 bench.spearman_rho, bench.global_time_ratio);
}

// Flag handling --------------------------------------------------------------

struct RunFlags {
    std::string config;
    std::optional<std::string> out, data, target, time_column, sidecar, synthetic, protocol, normalization, method;
    std::optional<std::size_t> chunk_length, lookback, horizon, stride, fit_horizon, weight_fit_stride, refit_every,
        input_length, train_end, eval_begin, eval_end;
    std::optional<double> lambda, alpha;
    std::optional<std::uint64_t> seed;
    bool isolate_chunks = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("-c,--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", f.out, "Output directory");
    cmd->add_option("--data", f.data, "CSV data file (replaces the configured source)");
    cmd->add_option("--target", f.target, "Target column of the CSV");
    cmd->add_option("--time-column", f.time_column, "Time column of the CSV");
    cmd->add_option("--sidecar", f.sidecar, "Generator sidecar with per-chunk amplitudes");
    cmd->add_option("--synthetic", f.synthetic, "Synthetic preset: paper-train, paper-test, paper-full");
    cmd->add_option("--chunk-length", f.chunk_length, "Chunk length l_c");
    cmd->add_option("--lookback", f.lookback, "Look-back length l_b");
    cmd->add_option("--horizon", f.horizon, "Forecast horizon h");
    cmd->add_option("--stride", f.stride, "Evaluation stride s");
    cmd->add_option("--fit-horizon", f.fit_horizon, "Horizon used to fit weights");
    cmd->add_option("--weight-fit-stride", f.weight_fit_stride, "Stride of look-back anchors");
    cmd->add_option("--refit-every", f.refit_every, "Refit weights every N anchors");
    cmd->add_option("--protocol", f.protocol, "streaming or frozen");
    cmd->add_option("--train-end", f.train_end, "Frozen protocol: end of training data");
    cmd->add_option("--eval-begin", f.eval_begin, "Frozen protocol: first evaluated tick");
    cmd->add_option("--eval-end", f.eval_end, "Frozen protocol: end of evaluation");
    cmd->add_flag("--isolate-chunks", f.isolate_chunks, "Frozen protocol: forecast each chunk on its own data");
    cmd->add_option("--input-length", f.input_length, "Number of target lags");
    cmd->add_option("--lambda", f.lambda, "Elastic-net strength");
    cmd->add_option("--alpha", f.alpha, "Elastic-net l1 ratio");
    cmd->add_option("--normalization", f.normalization, "none, per-chunk-amplitude or max-amplitude");
    cmd->add_option("--seed", f.seed, "Seed for synthetic noise");
}

RunConfig resolve_config(const RunFlags& f) {
    json j = f.config.empty() ? json::object() : read_json_file(f.config, "config file");
    require(j.is_object(), ErrorKind::Config, "config: expected a JSON object");
    if (f.data) {
        json d = {{"csv", *f.data}};
        if (j.contains("data") && j["data"].contains("schema")) d["schema"] = j["data"]["schema"];
        j["data"] = d;
    }
    if (f.synthetic) j["data"] = {{"synthetic", *f.synthetic}};
    if (f.target) j["data"]["schema"]["target"] = *f.target;
    if (f.time_column) j["data"]["schema"]["time_column"] = *f.time_column;
    if (f.sidecar) j["data"]["amplitude_sidecar"] = *f.sidecar;
    auto set = [&](const char* section, const char* key, const auto& v) {
        if (v) j[section][key] = *v;
    };
    set("stream", "chunk_length", f.chunk_length);
    set("stream", "lookback", f.lookback);
    set("stream", "horizon", f.horizon);
    set("stream", "stride", f.stride);
    set("stream", "fit_horizon", f.fit_horizon);
    set("stream", "weight_fit_stride", f.weight_fit_stride);
    set("stream", "refit_every", f.refit_every);
    set("stream", "protocol", f.protocol);
    set("stream", "train_end", f.train_end);
    set("stream", "eval_begin", f.eval_begin);
    set("stream", "eval_end", f.eval_end);
    if (f.isolate_chunks) j["stream"]["isolate_chunks"] = true;
    set("lags", "input_length", f.input_length);
    set("model", "lambda", f.lambda);
    set("model", "alpha", f.alpha);
    if (f.horizon && !f.fit_horizon && !(j["stream"].contains("fit_horizon"))) j["stream"]["fit_horizon"] = *f.horizon;
    if (f.normalization) j["normalization"] = *f.normalization;
    if (f.out) j["output_dir"] = *f.out;
    if (f.seed) j["seed"] = *f.seed;
    if (f.method) j["method"] = *f.method;
    return run_config_from_json(j);
}

void setup_logging() {
    spdlog::drop("rewts");
    auto logger = spdlog::stderr_color_mt("rewts");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    const char* env = std::getenv("REWTS_LOG");
    const std::string level = env ? env : "info";
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && level != "off") {
        spdlog::set_level(spdlog::level::info);
        spdlog::warn("REWTS_LOG='{}' is not a log level; using info", level);
    } else {
        spdlog::set_level(parsed);
    }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    require(j.is_object(), ErrorKind::Config, "config: expected a JSON object");
    static const std::set<std::string> known = {"data", "stream", "lags", "model", "normalization",
                                                "output_dir", "seed", "method"};
    for (const auto& [k, v] : j.items())
        require(known.count(k) > 0, ErrorKind::Config, "'" + k + "': unknown config field");

    RunConfig cfg;
    cfg.seed = in_section("seed", [&] { return j.value("seed", std::uint64_t{0}); });
    cfg.method = in_section("method", [&] { return j.value("method", std::string("rewts")); });
    cfg.output_dir = in_section("output_dir", [&] { return j.value("output_dir", std::string()); });

    require(j.contains("data") && j["data"].is_object(), ErrorKind::Config, "data: required object");
    const auto& d = j["data"];
    for (const auto& [k, v] : d.items())
        require(k == "csv" || k == "schema" || k == "synthetic" || k == "amplitude_sidecar", ErrorKind::Config,
                "data." + k + ": unknown config field");
    require(d.contains("csv") != d.contains("synthetic"), ErrorKind::Config,
            "data: needs exactly one of 'csv' or 'synthetic'");
    in_section("data", [&] {
        if (d.contains("csv")) {
            cfg.data.csv = d["csv"].get<std::string>();
            cfg.data.schema = schema_from_json(d.value("schema", json::object()));
        } else if (d["synthetic"].is_string()) {
            cfg.data.synthetic_name = d["synthetic"].get<std::string>();
            cfg.data.synthetic = preset(cfg.data.synthetic_name);
        } else {
            cfg.data.synthetic_name = "custom";
            cfg.data.synthetic = spec_from_json(d["synthetic"]);
        }
        if (d.contains("amplitude_sidecar")) cfg.data.amplitude_sidecar = d["amplitude_sidecar"].get<std::string>();
        return 0;
    });
    if (cfg.data.synthetic) cfg.data.synthetic->seed = cfg.seed;

    cfg.run.stream = stream_config_from_json(j.value("stream", json::object()));
    cfg.run.lags = in_section("lags", [&] { return lags_from_json(j.value("lags", json::object())); });
    cfg.run.params = in_section("model", [&] { return params_from_json(j.value("model", json::object())); });
    cfg.run.report.normalization = normalization_from_string(
        in_section("normalization", [&] { return j.value("normalization", std::string("none")); }));

    const auto& s = cfg.run.stream;
    require(s.ensemble.lookback >= s.ensemble.fit_horizon, ErrorKind::Config,
            "stream.lookback: must be >= fit_horizon (" + std::to_string(s.ensemble.fit_horizon) + ")");
    require(s.stride >= 1, ErrorKind::Config, "stream.stride: must be >= 1");
    require(s.horizon >= 1, ErrorKind::Config, "stream.horizon: must be >= 1");
    try {
        validate(cfg.run);
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    }
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json data = json::object();
    if (cfg.data.csv) {
        data["csv"] = cfg.data.csv->string();
        data["schema"] = to_json(cfg.data.schema);
    } else if (cfg.data.synthetic_name != "custom") {
        data["synthetic"] = cfg.data.synthetic_name;
    } else {
        data["synthetic"] = rewts::to_json(*cfg.data.synthetic);
    }
    if (cfg.data.amplitude_sidecar) data["amplitude_sidecar"] = cfg.data.amplitude_sidecar->string();
    return {{"data", data},
            {"stream", rewts::to_json(cfg.run.stream)},
            {"lags", rewts::to_json(cfg.run.lags)},
            {"model", rewts::to_json(cfg.run.params)},
            {"normalization", to_string(cfg.run.report.normalization)},
            {"output_dir", cfg.output_dir.string()},
            {"seed", cfg.seed},
            {"method", cfg.method}};
}

RunConfig load_run_config(const fs::path& path) { return run_config_from_json(read_json_file(path, "config file")); }

std::vector<double> tick_amplitudes_from_sidecar(const json& sidecar) {
    std::vector<double> out;
    try {
        for (const auto& c : sidecar.at("chunks")) {
            const auto start = c.at("start").get<std::size_t>();
            const auto end = c.at("end").get<std::size_t>();
            require(start == out.size() && end >= start, ErrorKind::Schema, "sidecar chunks must be contiguous");
            out.insert(out.end(), end - start, c.at("amplitude").get<double>());
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Schema, std::string("sidecar: ") + e.what());
    }
    return out;
}

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.data.synthetic) {
        auto ds = generate_sine_dataset(*cfg.data.synthetic);
        return {std::move(ds.frame), tick_amplitudes(*cfg.data.synthetic)};
    }
    LoadedData out{ingest_csv(*cfg.data.csv, cfg.data.schema), {}};
    if (cfg.data.amplitude_sidecar) {
        out.tick_amplitude = tick_amplitudes_from_sidecar(read_json_file(*cfg.data.amplitude_sidecar, "sidecar"));
        require(out.tick_amplitude.size() >= out.frame.size(), ErrorKind::Config,
                "data.amplitude_sidecar: covers " + std::to_string(out.tick_amplitude.size()) + " ticks, data has " +
                    std::to_string(out.frame.size()));
    }
    return out;
}

fs::path sidecar_path(const fs::path& csv_path) {
    fs::path p = csv_path;
    p.replace_extension(".sidecar.json");
    return p;
}

void write_dataset(const SineDataset& ds, const fs::path& csv_path) {
    if (csv_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(csv_path.parent_path(), ec);
        if (ec) fail(ErrorKind::Io, "cannot create '" + csv_path.parent_path().string() + "': " + ec.message());
    }
    write_with(csv_path, [&](std::ostream& o) {
        o.precision(17);
        o << "t,y\n";
        for (std::size_t k = 0; k < ds.frame.size(); ++k)
            o << static_cast<double>(k) * ds.spec.dt << ',' << ds.frame.target()[static_cast<Eigen::Index>(k)]
              << '\n';
    });
    write_text(sidecar_path(csv_path), sidecar_json(ds).dump(2) + "\n");
}

json error_json(const std::string& command, const std::string& kind, const std::string& message) {
    return {{"error", {{"command", command}, {"kind", kind}, {"message", message}}}};
}

int main(int argc, char** argv) {
    CLI::App app{"Chunk-model ensembles for streaming time series forecasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rewts 1.0.0");

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Write a piecewise sine dataset (CSV + ground-truth sidecar)");
    g->add_flag("--paper-train", gen.paper_train, "Eight train chunks");
    g->add_flag("--paper-test", gen.paper_test, "Eight test chunks");
    g->add_flag("--paper-full", gen.paper_full, "Train and test chunks as one series");
    g->add_option("--spec", gen.spec_file, "JSON chunk specification")->check(CLI::ExistingFile);
    g->add_option("--dt", gen.dt, "Sampling interval");
    g->add_option("--noise", gen.noise, "Gaussian noise standard deviation");
    g->add_option("--seed", gen.seed, "Noise seed");
    g->add_option("-o,--out", gen.out, "Output CSV path")->required();

    RunFlags run_flags;
    auto* r = app.add_subcommand("run", "Run the ensemble or the global baseline over a stream");
    add_run_flags(r, run_flags);
    r->add_option("--method", run_flags.method, "rewts or global")->check(CLI::IsMember({"rewts", "global"}));

    std::string cmp_a, cmp_b, cmp_out;
    auto* c = app.add_subcommand("compare", "Compare two run directories (first = ensemble, second = baseline)");
    c->add_option("rewts_dir", cmp_a, "Ensemble run directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("global_dir", cmp_b, "Baseline run directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("-o,--out", cmp_out, "Output directory (stdout when omitted)");

    RunFlags sweep_flags;
    std::string axis;
    std::vector<std::size_t> values;
    std::size_t jobs = 1;
    auto* s = app.add_subcommand("sweep", "Evaluate both methods over chunk or look-back lengths");
    add_run_flags(s, sweep_flags);
    s->add_option("--axis", axis, "chunk_length or lookback_length")
        ->required()
        ->check(CLI::IsMember({"chunk_length", "lookback_length"}));
    s->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');
    s->add_option("--jobs", jobs, "Parallel sweep points")->check(CLI::PositiveNumber);

    RunFlags bench_flags;
    std::size_t repeats = 3, warmup = 1;
    auto* b = app.add_subcommand("bench", "Time training and forecasting of both methods");
    add_run_flags(b, bench_flags);
    b->add_option("--repeats", repeats, "Timed repetitions (per-entry minimum is kept)")->check(CLI::PositiveNumber);
    b->add_option("--warmup", warmup, "Untimed warm-up repetitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        std::cout << error_json(sub ? sub->get_name() : "", "usage", e.what()).dump() << std::endl;
        std::cerr << e.what() << "\nRun with --help for more information.\n";
        return e.get_exit_code();
    }

    setup_logging();
    std::string command = app.get_subcommands().front()->get_name();
    fs::path out_dir;
    try {
        if (command == "generate") {
            cmd_generate(gen);
        } else if (command == "run") {
            const auto cfg = resolve_config(run_flags);
            out_dir = cfg.output_dir;
            cmd_run(cfg);
        } else if (command == "compare") {
            out_dir = cmp_out;
            cmd_compare(cmp_a, cmp_b, cmp_out);
        } else if (command == "sweep") {
            const auto cfg = resolve_config(sweep_flags);
            out_dir = cfg.output_dir;
            cmd_sweep(cfg, axis, values, jobs);
        } else {
            const auto cfg = resolve_config(bench_flags);
            out_dir = cfg.output_dir;
            cmd_bench(cfg, repeats, warmup);
        }
    } catch (const Error& e) {
        const auto doc = error_json(command, std::string(to_string(e.kind())), e.what());
        std::cout << doc.dump() << std::endl;
        std::error_code ec;
        if (!out_dir.empty() && fs::is_directory(out_dir, ec)) {
            std::ofstream f(out_dir / "error.json");
            f << doc.dump(2) << "\n";
        }
        spdlog::error("{}: {}", std::string(to_string(e.kind())), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::cout << error_json(command, "internal", e.what()).dump() << std::endl;
        spdlog::error("internal: {}", e.what());
        return 2;
    }
    return 0;
}

}  // namespace rewts::cli
