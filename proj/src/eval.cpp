#include "rewts/eval.hpp"

#include "rewts/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

namespace rewts {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    double acc = 0.0;
    for (const double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double metric_of(const ChunkReport& c, Normalization n) { return n == Normalization::None ? c.mse : c.normalized_mse; }

}  // namespace

std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::None: return "none";
        case Normalization::PerChunkAmplitude: return "per-chunk-amplitude";
        case Normalization::MaxAmplitude: return "max-amplitude";
    }
    return "none";
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "none") return Normalization::None;
    if (s == "per-chunk-amplitude") return Normalization::PerChunkAmplitude;
    if (s == "max-amplitude") return Normalization::MaxAmplitude;
    fail(ErrorKind::Config, "normalization: expected none, per-chunk-amplitude or max-amplitude, got '" + s + "'");
}

void validate(const LossConfig& cfg) {
    require(cfg.h >= 1, ErrorKind::Parameter, "loss horizon must be >= 1");
    require(cfg.s >= 1, ErrorKind::Parameter, "loss stride must be >= 1");
    require(cfg.e > cfg.f && cfg.e - cfg.f > cfg.h, ErrorKind::Parameter,
            "loss window [" + std::to_string(cfg.f) + ", " + std::to_string(cfg.e) + "] is not longer than h = " +
                std::to_string(cfg.h));
}

std::vector<std::size_t> loss_anchors(const LossConfig& cfg) {
    validate(cfg);
    const std::size_t psi = (cfg.e - cfg.h - cfg.f) / cfg.s;
    std::vector<std::size_t> out;
    out.reserve(psi + 1);
    for (std::size_t k = 0; k <= psi; ++k) out.push_back(cfg.f + k * cfg.s);
    return out;
}

double window_mse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& yhat) {
    require(y.size() == yhat.size(), ErrorKind::Shape,
            "window lengths differ: " + std::to_string(y.size()) + " vs " + std::to_string(yhat.size()));
    require(y.size() >= 1, ErrorKind::Shape, "empty forecast window");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

StridedLoss strided_loss(const TimeSeriesFrame& frame, const ForecastMap& forecasts, const LossConfig& cfg) {
    StridedLoss out;
    out.anchors = loss_anchors(cfg);
    require(cfg.e < frame.size(), ErrorKind::Index, "loss window ends beyond the frame");
    const auto h = static_cast<Eigen::Index>(cfg.h);
    double sum = 0.0;
    for (const auto a : out.anchors) {
        const auto it = forecasts.find(a);
        require(it != forecasts.end(), ErrorKind::Coverage, "no forecast at anchor " + std::to_string(a));
        require(it->second.size() >= h, ErrorKind::Shape, "forecast at anchor " + std::to_string(a) + " too short");
        const double l = window_mse(frame.target().segment(static_cast<Eigen::Index>(a) + 1, h), it->second.head(h));
        out.per_anchor.push_back(l);
        sum += l;
    }
    const auto psi = out.anchors.size() - 1;
    out.value = sum / static_cast<double>(psi + 1);
    out.literal_value = psi == 0 ? kNaN : sum / static_cast<double>(psi);
    return out;
}

ForecastMap forecast_map(const std::vector<StreamLogRecord>& records) {
    ForecastMap m;
    for (const auto& r : records) m[r.anchor] = r.forecast;
    return m;
}

ChunkReportSet per_chunk_report(const TimeSeriesFrame& frame, const std::vector<StreamLogRecord>& records,
                                const ReportOptions& options) {
    require(options.chunk_length >= 1, ErrorKind::Parameter, "chunk_length must be >= 1");
    const std::size_t n = frame.size();
    const bool have_amp = !options.tick_amplitude.empty();
    if (have_amp)
        require(options.tick_amplitude.size() >= n, ErrorKind::Parameter, "amplitude profile shorter than the frame");
    require(options.normalization == Normalization::None || have_amp, ErrorKind::Parameter,
            "amplitude normalisation needs an amplitude profile");

    std::map<std::size_t, std::size_t> first_anchor;
    for (const auto& r : records) {
        auto [it, inserted] = first_anchor.emplace(r.chunk, r.anchor);
        if (!inserted) it->second = std::min(it->second, r.anchor);
    }
    std::vector<std::size_t> chunks = options.chunks;
    if (chunks.empty())
        for (const auto& [c, a] : first_anchor) chunks.push_back(c);

    const auto fmap = forecast_map(records);
    ChunkReportSet out;
    out.normalization = options.normalization;
    std::vector<double> amps;
    for (const auto c : chunks) {
        const auto it = first_anchor.find(c);
        if (it == first_anchor.end()) {
            out.warnings.push_back("chunk " + std::to_string(c) + " has no anchors and is excluded");
            continue;
        }
        const std::size_t end = (c + 1) * options.chunk_length - (options.isolate_chunks ? 1 : 0);
        LossConfig cfg{options.h, options.s, it->second, std::min(end, n - 1), options.normalization};
        if (cfg.e <= cfg.f + cfg.h) {
            out.warnings.push_back("chunk " + std::to_string(c) + " is too short for a full horizon and is excluded");
            continue;
        }
        const auto loss = strided_loss(frame, fmap, cfg);
        ChunkReport rep;
        rep.chunk_id = c;
        rep.anchor_count = loss.anchors.size();
        rep.mse = loss.value;
        rep.literal_mse = loss.literal_value;
        rep.anchors = loss.anchors;
        rep.per_anchor = loss.per_anchor;
        double amp = kNaN;
        if (have_amp) {
            const std::size_t lo = c * options.chunk_length;
            const std::size_t hi = std::min((c + 1) * options.chunk_length, n);
            amp = *std::max_element(options.tick_amplitude.begin() + static_cast<std::ptrdiff_t>(lo),
                                    options.tick_amplitude.begin() + static_cast<std::ptrdiff_t>(hi));
        }
        amps.push_back(amp);
        rep.mse_chunk_amplitude = rep.mse / (amp * amp);
        out.chunks.push_back(std::move(rep));
    }

    double max_amp = kNaN;
    if (have_amp && !amps.empty()) max_amp = *std::max_element(amps.begin(), amps.end());
    std::vector<double> raw, norm;
    for (auto& rep : out.chunks) {
        rep.mse_max_amplitude = rep.mse / (max_amp * max_amp);
        switch (options.normalization) {
            case Normalization::None: rep.normalized_mse = rep.mse; break;
            case Normalization::PerChunkAmplitude: rep.normalized_mse = rep.mse_chunk_amplitude; break;
            case Normalization::MaxAmplitude: rep.normalized_mse = rep.mse_max_amplitude; break;
        }
        raw.push_back(rep.mse);
        norm.push_back(rep.normalized_mse);
    }
    out.mean_mse = mean_of(raw);
    out.mean_normalized_mse = mean_of(norm);
    return out;
}

double percent_difference(double rewts_mean, double global_mean) {
    if (rewts_mean == global_mean) return 0.0;
    if (global_mean == 0.0) return kNaN;
    return 100.0 * (global_mean - rewts_mean) / global_mean;
}

ComparisonReport compare_runs(const ChunkReportSet& rewts, const ChunkReportSet& global) {
    require(rewts.normalization == global.normalization, ErrorKind::Comparison, "reports use different normalisations");
    std::set<std::size_t> a, b;
    for (const auto& c : rewts.chunks) a.insert(c.chunk_id);
    for (const auto& c : global.chunks) b.insert(c.chunk_id);
    require(a == b && a.size() == rewts.chunks.size() && b.size() == global.chunks.size(), ErrorKind::Comparison,
            "reports cover different chunk sets");

    ComparisonReport out;
    out.metric = rewts.normalization == Normalization::None ? "mse" : to_string(rewts.normalization);
    std::map<std::size_t, double> g;
    for (const auto& c : global.chunks) g[c.chunk_id] = metric_of(c, global.normalization);
    for (const auto& c : rewts.chunks)
        out.chunks.push_back({c.chunk_id, metric_of(c, rewts.normalization), g.at(c.chunk_id)});
    std::sort(out.chunks.begin(), out.chunks.end(),
              [](const auto& x, const auto& y) { return x.chunk_id < y.chunk_id; });
    std::vector<double> rv, gv;
    for (const auto& c : out.chunks) {
        rv.push_back(c.rewts);
        gv.push_back(c.global);
    }
    out.rewts_mean = mean_of(rv);
    out.global_mean = mean_of(gv);
    out.percent_difference = percent_difference(out.rewts_mean, out.global_mean);
    return out;
}

void validate(const RunSpec& spec) {
    validate(spec.stream);
    validate(spec.params);
}

RunOutcome evaluate(const TimeSeriesFrame& frame, const RunSpec& spec, ModelCache* cache) {
    validate(spec);
    RunOutcome out;
    out.rewts = run_stream(frame, spec.stream, spec.lags, spec.params, cache);
    out.global = run_global_stream(frame, spec.stream, spec.lags, spec.params, cache);
    ReportOptions opts = spec.report;
    opts.chunk_length = spec.stream.chunk_length;
    opts.h = spec.stream.horizon;
    opts.s = spec.stream.stride;
    opts.isolate_chunks = spec.stream.isolate_chunks;
    out.rewts_report = per_chunk_report(frame, out.rewts.records, opts);
    out.global_report = per_chunk_report(frame, out.global.records, opts);
    out.comparison = compare_runs(out.rewts_report, out.global_report);
    return out;
}

std::string to_string(SweepAxis a) { return a == SweepAxis::ChunkLength ? "chunk_length" : "lookback_length"; }

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "chunk_length") return SweepAxis::ChunkLength;
    if (s == "lookback_length") return SweepAxis::Lookback;
    fail(ErrorKind::Config, "axis: expected chunk_length or lookback_length, got '" + s + "'");
}

SweepResult sweep(const TimeSeriesFrame& frame, SweepAxis axis, const std::vector<std::size_t>& values,
                  const RunSpec& base, std::size_t jobs, ModelCache* cache) {
    require(!values.empty(), ErrorKind::Parameter, "sweep needs at least one value");
    SweepResult out;
    out.axis = axis;
    out.points.resize(values.size());
    ModelCache local;
    ModelCache* shared = cache ? cache : &local;

    auto run_point = [&](std::size_t i) {
        SweepPoint& p = out.points[i];
        p.value = values[i];
        try {
            require(values[i] >= 1, ErrorKind::Parameter, "sweep values must be positive");
            RunSpec spec = base;
            if (axis == SweepAxis::ChunkLength) spec.stream.chunk_length = values[i];
            else spec.stream.ensemble.lookback = values[i];
            auto outcome = evaluate(frame, spec, shared);
            outcome.comparison.axis = to_string(axis);
            outcome.comparison.axis_value = static_cast<double>(values[i]);
            p.report = std::move(outcome.comparison);
        } catch (const Error& e) {
            p.error = std::string(to_string(e.kind())) + ": " + e.what();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, values.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < values.size(); ++i) run_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < values.size(); i = next++) run_point(i);
            });
        for (auto& t : pool) t.join();
    }

    std::vector<double> means;
    for (const auto& p : out.points)
        if (p.report) means.push_back(p.report->rewts_mean);
    if (means.size() < 2) {
        out.rewts_trend = "flat";
    } else {
        bool up = true, down = true;
        for (std::size_t i = 1; i < means.size(); ++i) {
            up = up && means[i] >= means[i - 1];
            down = down && means[i] <= means[i - 1];
        }
        out.rewts_trend = up && down ? "flat" : up ? "increasing" : down ? "decreasing" : "mixed";
    }
    return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), ErrorKind::Shape, "spearman inputs differ in length");
    if (x.size() < 2) return kNaN;
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return kNaN;
    return sxy / std::sqrt(sxx * syy);
}

TimingBench timing_bench(const TimeSeriesFrame& frame, const RunSpec& spec, std::size_t repeats, std::size_t warmup) {
    validate(spec);
    require(repeats >= 1, ErrorKind::Parameter, "timing bench needs at least one repeat");
    StreamConfig cfg = spec.stream;
    cfg.protocol = StreamProtocol::Streaming;
    const std::size_t lc = cfg.chunk_length;
    const std::size_t complete = frame.size() / lc;

    auto cumulative_at = [&](const std::vector<TrainingEvent>& events) {
        std::vector<double> out;
        for (std::size_t c = cfg.initial_chunks - 1; c < complete; ++c) {
            double total = 0.0;
            for (const auto& e : events)
                if (e.available_at <= (c + 1) * lc) total += e.seconds;
            out.push_back(total);
        }
        return out;
    };
    auto keep_min = [](std::vector<double>& acc, const std::vector<double>& v) {
        if (acc.empty()) acc = v;
        else
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = std::min(acc[i], v[i]);
    };

    TimingBench out;
    out.repeats = repeats;
    for (std::size_t c = cfg.initial_chunks - 1; c < complete; ++c) out.chunk_index.push_back(c);
    for (std::size_t r = 0; r < warmup + repeats; ++r) {
        const auto rw = run_stream(frame, cfg, spec.lags, spec.params);
        const auto gl = run_global_stream(frame, cfg, spec.lags, spec.params);
        if (r < warmup) continue;
        std::vector<double> ra, ga;
        for (const auto& rec : rw.records) ra.push_back(rec.weight_fit_seconds + rec.forecast_seconds);
        for (const auto& rec : gl.records) ga.push_back(rec.forecast_seconds);
        keep_min(out.rewts_cumulative_train, cumulative_at(rw.training));
        keep_min(out.global_cumulative_train, cumulative_at(gl.training));
        keep_min(out.rewts_anchor_seconds, ra);
        keep_min(out.global_anchor_seconds, ga);
        if (out.anchor.empty())
            for (const auto& rec : rw.records) {
                out.anchor.push_back(rec.anchor);
                out.model_count.push_back(rec.model_ids.size());
            }
    }

    std::vector<double> counts(out.model_count.begin(), out.model_count.end());
    out.spearman_rho = spearman(counts, out.rewts_anchor_seconds);

    std::map<std::size_t, std::vector<double>> per_chunk;
    for (std::size_t i = 0; i < out.anchor.size(); ++i) per_chunk[out.anchor[i] / lc].push_back(out.global_anchor_seconds[i]);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (auto& [c, v] : per_chunk) {
        const double m = median_of(v);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    out.global_time_ratio = per_chunk.empty() || lo <= 0 ? kNaN : hi / lo;
    return out;
}

nlohmann::json to_json(const ChunkReportSet& r) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : r.chunks)
        chunks.push_back({{"chunk_id", c.chunk_id},
                          {"anchor_count", c.anchor_count},
                          {"mse", c.mse},
                          {"mse_chunk_amplitude", number_or_null(c.mse_chunk_amplitude)},
                          {"mse_max_amplitude", number_or_null(c.mse_max_amplitude)},
                          {"normalized_mse", number_or_null(c.normalized_mse)},
                          {"mse_divided_by_psi", number_or_null(c.literal_mse)},
                          {"anchors", c.anchors},
                          {"per_anchor", c.per_anchor}});
    return {{"normalization", to_string(r.normalization)},
            {"chunks", chunks},
            {"mean_mse", number_or_null(r.mean_mse)},
            {"mean_normalized_mse", number_or_null(r.mean_normalized_mse)},
            {"warnings", r.warnings}};
}

ChunkReportSet chunk_report_set_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); };
    ChunkReportSet r;
    try {
        r.normalization = normalization_from_string(j.at("normalization").get<std::string>());
        for (const auto& c : j.at("chunks")) {
            ChunkReport rep;
            rep.chunk_id = c.at("chunk_id").get<std::size_t>();
            rep.anchor_count = c.at("anchor_count").get<std::size_t>();
            rep.mse = c.at("mse").get<double>();
            rep.mse_chunk_amplitude = num(c.at("mse_chunk_amplitude"));
            rep.mse_max_amplitude = num(c.at("mse_max_amplitude"));
            rep.normalized_mse = num(c.at("normalized_mse"));
            rep.literal_mse = num(c.at("mse_divided_by_psi"));
            rep.anchors = c.at("anchors").get<std::vector<std::size_t>>();
            rep.per_anchor = c.at("per_anchor").get<std::vector<double>>();
            r.chunks.push_back(std::move(rep));
        }
        r.mean_mse = num(j.at("mean_mse"));
        r.mean_normalized_mse = num(j.at("mean_normalized_mse"));
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Schema, std::string("chunk report: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::Schema, std::string("chunk report: ") + e.what());
    }
    return r;
}

nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : r.chunks) chunks.push_back({{"chunk_id", c.chunk_id}, {"rewts", c.rewts}, {"global", c.global}});
    nlohmann::json j = {{"metric", r.metric},
                        {"chunks", chunks},
                        {"rewts_mean", number_or_null(r.rewts_mean)},
                        {"global_mean", number_or_null(r.global_mean)},
                        {"percent_difference", number_or_null(r.percent_difference)},
                        {"percent_difference_formula", "100 * (global - rewts) / global"}};
    if (!r.axis.empty()) {
        j["axis"] = r.axis;
        j["axis_value"] = r.axis_value ? nlohmann::json(*r.axis_value) : nlohmann::json(nullptr);
    }
    return j;
}

nlohmann::json to_json(const SweepResult& r) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points) {
        nlohmann::json j = {{"value", p.value}};
        if (p.report) j["report"] = to_json(*p.report);
        if (p.error) j["error"] = *p.error;
        pts.push_back(j);
    }
    return {{"axis", to_string(r.axis)}, {"points", pts}, {"rewts_trend", r.rewts_trend}};
}

nlohmann::json to_json(const TimingBench& r) {
    return {{"chunk_index", r.chunk_index},
            {"rewts_cumulative_train_seconds", r.rewts_cumulative_train},
            {"global_cumulative_train_seconds", r.global_cumulative_train},
            {"anchor", r.anchor},
            {"model_count", r.model_count},
            {"rewts_anchor_seconds", r.rewts_anchor_seconds},
            {"global_anchor_seconds", r.global_anchor_seconds},
            {"spearman_rho", number_or_null(r.spearman_rho)},
            {"global_time_ratio", number_or_null(r.global_time_ratio)},
            {"repeats", r.repeats}};
}

namespace {

void put(std::ostream& out, double v) {
    if (std::isfinite(v)) out << v;
}

}  // namespace

void write_report_csv(std::ostream& out, const ChunkReportSet& r) {
    const auto p = out.precision(17);
    out << "chunk_id,anchor_count,mse,mse_chunk_amplitude,mse_max_amplitude,normalized_mse\n";
    for (const auto& c : r.chunks) {
        out << c.chunk_id << ',' << c.anchor_count << ',' << c.mse << ',';
        put(out, c.mse_chunk_amplitude);
        out << ',';
        put(out, c.mse_max_amplitude);
        out << ',';
        put(out, c.normalized_mse);
        out << '\n';
    }
    out.precision(p);
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& r) {
    const auto p = out.precision(17);
    out << "chunk_id,rewts,global\n";
    for (const auto& c : r.chunks) out << c.chunk_id << ',' << c.rewts << ',' << c.global << '\n';
    out << "mean," << r.rewts_mean << ',' << r.global_mean << '\n';
    out << "percent_difference,";
    put(out, r.percent_difference);
    out << ",\n";
    out.precision(p);
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    const auto p = out.precision(17);
    out << to_string(r.axis) << ",rewts_mean,global_mean,percent_difference,error\n";
    for (const auto& pt : r.points) {
        out << pt.value << ',';
        if (pt.report) {
            put(out, pt.report->rewts_mean);
            out << ',';
            put(out, pt.report->global_mean);
            out << ',';
            put(out, pt.report->percent_difference);
            out << ',';
        } else {
            out << ",,,";
        }
        if (pt.error) {
            std::string e = *pt.error;
            std::replace(e.begin(), e.end(), '"', '\'');
            out << '"' << e << '"';
        }
        out << '\n';
    }
    out.precision(p);
}

void write_timing_csv(std::ostream& out, const TimingBench& r) {
    const auto p = out.precision(17);
    out << "anchor,model_count,rewts_anchor_seconds,global_anchor_seconds\n";
    for (std::size_t i = 0; i < r.anchor.size(); ++i)
        out << r.anchor[i] << ',' << r.model_count[i] << ',' << r.rewts_anchor_seconds[i] << ','
            << r.global_anchor_seconds[i] << '\n';
    out.precision(p);
}

void write_training_csv(std::ostream& out, const TimingBench& r) {
    const auto p = out.precision(17);
    out << "chunk_index,rewts_cumulative_train_seconds,global_cumulative_train_seconds\n";
    for (std::size_t i = 0; i < r.chunk_index.size(); ++i)
        out << r.chunk_index[i] << ',' << r.rewts_cumulative_train[i] << ',' << r.global_cumulative_train[i] << '\n';
    out.precision(p);
}

}  // namespace rewts
