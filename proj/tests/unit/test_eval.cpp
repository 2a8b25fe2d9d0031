#include "rewts/error.hpp"
#include "rewts/eval.hpp"

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace rewts;
using testing::Gen;
using testing::vec;

namespace {

ErrorKind kind_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

StreamLogRecord record(std::size_t anchor, std::size_t chunk, Eigen::VectorXd forecast) {
    StreamLogRecord r;
    r.anchor = anchor;
    r.chunk = chunk;
    r.forecast = std::move(forecast);
    return r;
}

// Direct evaluation of the strided loss: every anchor f + k*s with
// f + k*s + h <= e, squared errors summed element by element.
double brute_force_loss(const Eigen::VectorXd& y, const ForecastMap& fc, std::size_t h, std::size_t s,
                        std::size_t f, std::size_t e) {
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t a = f; a + h <= e; a += s) {
        double sq = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double d = y[static_cast<Eigen::Index>(a + 1 + i)] - fc.at(a)[static_cast<Eigen::Index>(i)];
            sq += d * d;
        }
        total += sq / static_cast<double>(h);
        ++windows;
    }
    return total / static_cast<double>(windows);
}

ChunkReportSet report_of(std::vector<std::pair<std::size_t, double>> chunks) {
    ChunkReportSet r;
    for (const auto& [id, mse] : chunks) {
        ChunkReport c;
        c.chunk_id = id;
        c.mse = mse;
        c.normalized_mse = mse;
        c.anchor_count = 1;
        r.chunks.push_back(c);
    }
    return r;
}

RunSpec small_spec() {
    RunSpec s;
    s.stream.chunk_length = 200;
    s.stream.horizon = 10;
    s.stream.stride = 10;
    s.stream.ensemble.lookback = 40;
    s.stream.ensemble.fit_horizon = 10;
    s.lags.input_length = 8;
    return s;
}

TimeSeriesFrame regime_series(Gen& g, std::size_t chunks, std::size_t len) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(chunks * len));
    for (std::size_t c = 0; c < chunks; ++c)
        y.segment(static_cast<Eigen::Index>(c * len), static_cast<Eigen::Index>(len)) =
            g.ar_series(len) * g.uniform(0.5, 5.0);
    return TimeSeriesFrame(y);
}

}  // namespace

TEST_CASE("window mse examples") {
    CHECK(window_mse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(window_mse(vec({0, 0}), vec({1, 1})) == 1.0);
    CHECK(window_mse(vec({1, 2, 3}), vec({2, 2, 2})) == doctest::Approx(2.0 / 3.0));
    CHECK(kind_of([] { window_mse(vec({1, 2}), vec({1})); }) == ErrorKind::Shape);
}

TEST_CASE("strided loss examples") {
    const TimeSeriesFrame f(Eigen::VectorXd::LinSpaced(10, 0, 9));
    SUBCASE("single anchor equals its window mse") {
        const ForecastMap fc{{0, vec({0, 0})}};
        const auto l = strided_loss(f, fc, {2, 3, 0, 3, Normalization::None});
        CHECK(l.anchors.size() == 1);
        CHECK(l.value == window_mse(vec({1, 2}), vec({0, 0})));
        CHECK(std::isnan(l.literal_value));
    }
    SUBCASE("two anchors with window losses 1 and 3") {
        // y[1] = 1, y[4] = 4: forecasts off by 1 and by sqrt(3).
        const ForecastMap fc{{0, vec({0})}, {3, vec({4 - std::sqrt(3.0)})}};
        const auto l = strided_loss(f, fc, {1, 3, 0, 4, Normalization::None});
        REQUIRE(l.anchors == std::vector<std::size_t>{0, 3});
        CHECK(l.value == doctest::Approx(2.0));
        CHECK(l.literal_value == doctest::Approx(4.0));
    }
    SUBCASE("persistence on y = t against brute force") {
        ForecastMap fc;
        for (std::size_t a = 0; a < 10; ++a) fc[a] = Eigen::VectorXd::Constant(2, static_cast<double>(a));
        const auto l = strided_loss(f, fc, {2, 3, 0, 9, Normalization::None});
        CHECK(l.anchors == std::vector<std::size_t>{0, 3, 6});
        CHECK(l.value == doctest::Approx(brute_force_loss(f.target(), fc, 2, 3, 0, 9)));
        CHECK(l.value == doctest::Approx(2.5));
    }
    SUBCASE("missing anchor") {
        const ForecastMap fc{{0, vec({0, 0})}};
        CHECK(kind_of([&] { strided_loss(f, fc, {2, 3, 0, 9, Normalization::None}); }) == ErrorKind::Coverage);
    }
    CHECK(kind_of([] { validate(LossConfig{5, 1, 0, 5, Normalization::None}); }) == ErrorKind::Parameter);
    CHECK(kind_of([] { validate(LossConfig{2, 0, 0, 9, Normalization::None}); }) == ErrorKind::Parameter);
}

TEST_CASE("property: strided loss against brute force on random frames") {
    Gen g(61);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = g.index(20, 300);
        const TimeSeriesFrame frame(g.vector(static_cast<Eigen::Index>(n)));
        const auto h = g.index(1, 10), s = g.index(1, 15);
        const auto f = g.index(0, n / 3);
        const auto e = g.index(f + h + 1, n - 1);
        ForecastMap fc;
        for (std::size_t a = f; a <= e; ++a) fc[a] = g.vector(static_cast<Eigen::Index>(h));
        const auto l = strided_loss(frame, fc, {h, s, f, e, Normalization::None});
        CHECK(l.anchors.size() == (e - h - f) / s + 1);
        CHECK(l.value == doctest::Approx(brute_force_loss(frame.target(), fc, h, s, f, e)).epsilon(1e-12));
    }
}

TEST_CASE("per chunk report") {
    // Sine with a period of exactly 40 ticks: every 40-tick window has mean square A^2/2.
    const double A = 3.0;
    const std::size_t lc = 400, h = 40;
    Eigen::VectorXd y(static_cast<Eigen::Index>(2 * lc + 1));
    for (Eigen::Index k = 0; k < y.size(); ++k) y[k] = A * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / 40.0);
    const TimeSeriesFrame f(y);
    ReportOptions opts;
    opts.chunk_length = lc;
    opts.h = h;
    opts.s = h;
    opts.tick_amplitude.assign(y.size(), A);

    SUBCASE("zero forecast against a sine gives A^2/2") {
        std::vector<StreamLogRecord> recs;
        for (std::size_t a = 0; a + h <= 2 * lc; a += h) recs.push_back(record(a, a / lc, Eigen::VectorXd::Zero(h)));
        opts.normalization = Normalization::PerChunkAmplitude;
        const auto r = per_chunk_report(f, recs, opts);
        REQUIRE(r.chunks.size() == 2);
        for (const auto& c : r.chunks) {
            CHECK(c.mse == doctest::Approx(A * A / 2.0).epsilon(1e-12));
            CHECK(c.normalized_mse == doctest::Approx(0.5).epsilon(1e-12));
        }
        CHECK(r.mean_normalized_mse == doctest::Approx(0.5));
    }
    SUBCASE("perfect forecasts give zero") {
        std::vector<StreamLogRecord> recs;
        for (std::size_t a = 0; a + h <= 2 * lc; a += h)
            recs.push_back(record(a, a / lc, y.segment(static_cast<Eigen::Index>(a) + 1, h)));
        const auto r = per_chunk_report(f, recs, opts);
        for (const auto& c : r.chunks) CHECK(c.mse == 0.0);
    }
    SUBCASE("requested chunk without anchors is skipped with a warning") {
        std::vector<StreamLogRecord> recs;
        for (std::size_t a = 0; a + h <= lc; a += h) recs.push_back(record(a, 0, Eigen::VectorXd::Zero(h)));
        opts.chunks = {0, 1};
        const auto r = per_chunk_report(f, recs, opts);
        CHECK(r.chunks.size() == 1);
        CHECK(r.warnings.size() == 1);
    }
    SUBCASE("amplitude normalisation without amplitudes is rejected") {
        std::vector<StreamLogRecord> recs{record(0, 0, Eigen::VectorXd::Zero(h))};
        opts.tick_amplitude.clear();
        opts.normalization = Normalization::MaxAmplitude;
        CHECK_THROWS_AS(per_chunk_report(f, recs, opts), Error);
    }
}

TEST_CASE("property: amplitude normalisation is scale free") {
    Gen g(62);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t lc = 100, h = 5;
        const Eigen::VectorXd y = g.vector(301);
        std::vector<double> amp(301);
        for (std::size_t c = 0; c < 3; ++c) {
            const double a = g.uniform(0.5, 10.0);
            std::fill(amp.begin() + static_cast<long>(c * lc), amp.begin() + static_cast<long>(std::min<std::size_t>((c + 1) * lc, 301)), a);
        }
        amp[300] = amp[299];
        std::vector<StreamLogRecord> recs;
        for (std::size_t a = 0; a + h <= 300; a += 5) recs.push_back(record(a, a / lc, g.vector(h)));
        ReportOptions opts;
        opts.chunk_length = lc;
        opts.h = h;
        opts.s = 5;
        opts.normalization = Normalization::PerChunkAmplitude;
        opts.tick_amplitude = amp;
        const auto base = per_chunk_report(TimeSeriesFrame(y), recs, opts);

        const double gamma = g.uniform(0.1, 20.0);
        auto scaled_recs = recs;
        for (auto& r : scaled_recs) r.forecast *= gamma;
        for (auto& a : opts.tick_amplitude) a *= gamma;
        const auto scaled = per_chunk_report(TimeSeriesFrame(Eigen::VectorXd(y * gamma)), scaled_recs, opts);
        for (std::size_t c = 0; c < base.chunks.size(); ++c) {
            CHECK(scaled.chunks[c].mse == doctest::Approx(gamma * gamma * base.chunks[c].mse).epsilon(1e-10));
            CHECK(scaled.chunks[c].normalized_mse == doctest::Approx(base.chunks[c].normalized_mse).epsilon(1e-10));
        }
    }
}

TEST_CASE("comparison") {
    CHECK(percent_difference(0.73, 0.81) == doctest::Approx(9.8765432).epsilon(1e-6));
    CHECK(percent_difference(0.9, 0.81) < 0.0);
    CHECK(percent_difference(2.0, 2.0) == 0.0);
    CHECK(std::isnan(percent_difference(1.0, 0.0)));

    const auto a = report_of({{2, 0.5}, {3, 1.0}, {4, 0.2}});
    CHECK(compare_runs(a, a).percent_difference == 0.0);
    const auto b = report_of({{2, 0.7}, {3, 0.4}, {4, 0.9}});
    CHECK(kind_of([&] { compare_runs(a, report_of({{2, 0.5}, {3, 1.0}})); }) == ErrorKind::Comparison);
    auto other_norm = b;
    other_norm.normalization = Normalization::MaxAmplitude;
    CHECK(kind_of([&] { compare_runs(a, other_norm); }) == ErrorKind::Comparison);
}

TEST_CASE("property: comparison antisymmetry and permutation invariance") {
    Gen g(63);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = g.index(1, 12);
        std::vector<std::pair<std::size_t, double>> ra, rb;
        for (std::size_t c = 0; c < n; ++c) {
            ra.emplace_back(c, g.uniform(0.01, 5.0));
            rb.emplace_back(c, g.uniform(0.01, 5.0));
        }
        const auto ab = compare_runs(report_of(ra), report_of(rb));
        const auto ba = compare_runs(report_of(rb), report_of(ra));
        // The percentage is relative to the second run, so swapping flips its sign;
        // the difference of means is exactly negated.
        CHECK((ab.percent_difference > 0) == (ba.percent_difference < 0));
        CHECK(ab.global_mean - ab.rewts_mean == -(ba.global_mean - ba.rewts_mean));

        std::shuffle(ra.begin(), ra.end(), g.engine());
        std::shuffle(rb.begin(), rb.end(), g.engine());
        const auto shuffled = compare_runs(report_of(ra), report_of(rb));
        CHECK(shuffled.rewts_mean == ab.rewts_mean);
        CHECK(shuffled.global_mean == ab.global_mean);
        CHECK(shuffled.percent_difference == ab.percent_difference);
    }
}

TEST_CASE("report JSON round trip") {
    Gen g(64);
    const auto frame = regime_series(g, 4, 200);
    const auto spec = small_spec();
    const auto out = evaluate(frame, spec);
    const auto back = chunk_report_set_from_json(to_json(out.rewts_report));
    CHECK(to_json(back) == to_json(out.rewts_report));
    const auto cmp = compare_runs(back, chunk_report_set_from_json(to_json(out.global_report)));
    CHECK(cmp.percent_difference == out.comparison.percent_difference);
    CHECK_THROWS_AS(chunk_report_set_from_json(nlohmann::json::parse(R"({"chunks":3})")), Error);
}

TEST_CASE("sweeps") {
    Gen g(65);
    const auto frame = regime_series(g, 6, 200);
    const auto spec = small_spec();

    SUBCASE("single value equals a direct evaluation") {
        const auto s = sweep(frame, SweepAxis::Lookback, {40}, spec);
        REQUIRE(s.points.size() == 1);
        REQUIRE(s.points[0].report);
        const auto direct = evaluate(frame, spec);
        CHECK(to_json(*s.points[0].report)["chunks"] == to_json(direct.comparison)["chunks"]);
        CHECK(s.points[0].report->percent_difference == direct.comparison.percent_difference);
    }
    SUBCASE("infeasible value becomes an error entry") {
        const auto s = sweep(frame, SweepAxis::Lookback, {5, 40, 80}, spec);
        REQUIRE(s.points.size() == 3);
        CHECK(s.points[0].error);
        CHECK_FALSE(s.points[0].report);
        CHECK(s.points[1].report);
        CHECK(s.points[2].report);
    }
    SUBCASE("cached and threaded sweeps match the plain one") {
        const std::vector<std::size_t> values{100, 200, 400};
        const auto plain = sweep(frame, SweepAxis::ChunkLength, values, spec);
        ModelCache cache;
        const auto cached = sweep(frame, SweepAxis::ChunkLength, values, spec, 3, &cache);
        CHECK(to_json(plain) == to_json(cached));
        CHECK(cache.size() > 0);
        CHECK(plain.rewts_trend != "");
    }
}

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3, 4}, {1, 4, 9, 16}) == doctest::Approx(1.0));
    // Ties get average ranks: x ranks (1.5, 1.5, 3), y ranks (1, 2, 3).
    CHECK(spearman({1, 1, 2}, {1, 2, 3}) == doctest::Approx(std::sqrt(3.0) / 2.0));
}

TEST_CASE("timing bench shapes") {
    Gen g(66);
    const auto frame = regime_series(g, 5, 200);
    const auto b = timing_bench(frame, small_spec(), 1, 0);
    CHECK(b.repeats == 1);
    CHECK(b.chunk_index.size() == b.rewts_cumulative_train.size());
    CHECK(b.chunk_index.size() == b.global_cumulative_train.size());
    CHECK(b.anchor.size() == b.rewts_anchor_seconds.size());
    CHECK(b.anchor.size() == b.global_anchor_seconds.size());
    CHECK(std::is_sorted(b.rewts_cumulative_train.begin(), b.rewts_cumulative_train.end()));
    CHECK(std::is_sorted(b.model_count.begin(), b.model_count.end()));
    std::ostringstream csv;
    write_timing_csv(csv, b);
    CHECK(csv.str().find('\n') != std::string::npos);
}
