// Acceptance suite: one PASS/FAIL line per criterion.

#include "rewts/eval.hpp"
#include "rewts/presets.hpp"
#include "rewts/simplex_qp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace rewts;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<double> train_frequencies() {
    std::vector<double> out;
    for (const auto& c : default_paper_spec(PaperSplit::Train).chunks) out.push_back(c.frequency);
    return out;
}

double grid_minimum(const SimplexQP& qp) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd w(qp.m());
    if (qp.m() == 2) {
        for (int i = 0; i <= 100; ++i) {
            w << i / 100.0, 1.0 - i / 100.0;
            best = std::min(best, qp.objective(w));
        }
    } else {
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; i + j <= 100; ++j) {
                w << i / 100.0, j / 100.0, (100 - i - j) / 100.0;
                best = std::min(best, qp.objective(w));
            }
    }
    return best;
}

Outcome qp_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240501);
    std::normal_distribution<double> g;
    double worst_gap = -1e300, worst_kkt = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int m = trial % 2 ? 3 : 2;
        Eigen::MatrixXd A(m + 2, m);
        for (int i = 0; i < A.size(); ++i) A.data()[i] = g(rng);
        SimplexQP qp;
        qp.Q = A.transpose() * A;
        qp.c.resize(m);
        for (int i = 0; i < m; ++i) qp.c[i] = 2.0 * g(rng);
        const auto sol = solve_simplex_qp(qp);
        worst_gap = std::max(worst_gap, qp.objective(sol.w) - grid_minimum(qp));
        worst_kkt = std::max(worst_kkt, kkt_residual(qp, sol.w));
    }
    const double secs = elapsed(t0);
    return {worst_gap <= 1e-6 && worst_kkt <= 1e-6 && secs < 10.0,
            "worst objective - grid min " + fmt("%.3e", worst_gap) + ", worst KKT " + fmt("%.3e", worst_kkt) +
                ", " + fmt("%.2f s", secs)};
}

Outcome qp_analytic() {
    SimplexQP qp;
    qp.Q = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    qp.c = Eigen::Vector2d(1.0, 2.0);
    const auto sol = solve_simplex_qp(qp);
    const double err = std::max(std::abs(sol.w[0] - 1.0 / 3.0), std::abs(sol.w[1] - 2.0 / 3.0));
    return {err <= 1e-6, "w = (" + fmt("%.9f", sol.w[0]) + ", " + fmt("%.9f", sol.w[1]) + "), max error " +
                             fmt("%.2e", err)};
}

Outcome strided_oracle() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(12, 60), hd(1, 6), sd(1, 7);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = len(rng);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = g(rng) * 3.0;
        const TimeSeriesFrame frame(y);
        const std::size_t h = hd(rng), s = sd(rng);
        const std::size_t f = std::uniform_int_distribution<std::size_t>(0, n / 3)(rng);
        const std::size_t e = std::uniform_int_distribution<std::size_t>(f + h + 1, n - 1)(rng);
        ForecastMap forecasts;
        for (std::size_t a = 0; a + h < static_cast<std::size_t>(n); ++a) {
            Eigen::VectorXd yh(h);
            for (std::size_t i = 0; i < h; ++i) yh[i] = g(rng);
            forecasts[a] = yh;
        }
        const double value = strided_loss(frame, forecasts, {h, s, f, e}).value;

        double total = 0.0;
        int count = 0;
        for (std::size_t t = f; t + h <= e; ++t) {
            if ((t - f) % s != 0) continue;
            double acc = 0.0;
            for (std::size_t i = 1; i <= h; ++i) {
                const double d = y[t + i] - forecasts[t][i - 1];
                acc += d * d;
            }
            total += acc / h;
            ++count;
        }
        const double brute = total / count;
        worst = std::max(worst, std::abs(value - brute) / std::max(std::abs(brute), 1e-300));
    }
    return {worst <= 1e-12, "worst relative error " + fmt("%.2e", worst)};
}

Outcome sine_direction() {
    const auto t0 = Clock::now();
    const auto train = paper_sine_experiment(PaperSplit::Train, true);
    const auto test = paper_sine_experiment(PaperSplit::Test, true);
    const auto rt = evaluate(train.data.frame, train.run).comparison;
    const auto rs = evaluate(test.data.frame, test.run).comparison;
    const double secs = elapsed(t0);
    std::printf("    per-chunk evaluation, normalised by the largest amplitude\n");
    std::printf("    %-6s %5s %12s %12s\n", "split", "chunk", "rewts", "global");
    for (const auto* r : {&rt, &rs})
        for (const auto& c : r->chunks)
            std::printf("    %-6s %5zu %12.4e %12.4e\n", r == &rt ? "train" : "test", c.chunk_id, c.rewts, c.global);
    std::printf("    train mean %.4e vs %.4e, test mean %.4e vs %.4e\n", rt.rewts_mean, rt.global_mean, rs.rewts_mean,
                rs.global_mean);

    const auto train_stream = paper_sine_experiment(PaperSplit::Train, false);
    const auto test_stream = paper_sine_experiment(PaperSplit::Test, false);
    const auto ct = evaluate(train_stream.data.frame, train_stream.run).comparison;
    const auto cs = evaluate(test_stream.data.frame, test_stream.run).comparison;
    std::printf("    for reference, concatenated-stream means: train %.4e vs %.4e, test %.4e vs %.4e\n", ct.rewts_mean,
                ct.global_mean, cs.rewts_mean, cs.global_mean);

    const bool ok = rt.rewts_mean <= 0.5 * rt.global_mean && rs.rewts_mean < rs.global_mean && secs < 300.0;
    return {ok, "train ratio " + fmt("%.4f", rt.rewts_mean / rt.global_mean) + ", test ratio " +
                    fmt("%.4f", rs.rewts_mean / rs.global_mean) + ", " + fmt("%.1f s", secs)};
}

/// Weight share and argmax accuracy on the frequency class of the active
/// chunk, over anchors at least l_b past a chunk boundary.
struct ClassStats {
    double mean_share = 0.0;
    double argmax_accuracy = 0.0;
    std::size_t anchors = 0;
};

ClassStats class_stats(std::size_t fit_horizon) {
    auto ex = paper_sine_experiment(PaperSplit::Train, false);
    ex.run.stream.ensemble.fit_horizon = fit_horizon;
    const auto result = run_stream(ex.data.frame, ex.run.stream, ex.run.lags, ex.run.params);
    const auto freq = train_frequencies();
    const std::size_t lc = ex.run.stream.chunk_length, lb = ex.run.stream.ensemble.lookback;
    ClassStats st;
    double share = 0.0, hits = 0.0;
    for (const auto& r : result.records) {
        if (r.anchor - r.chunk * lc < lb) continue;
        const double active = freq[r.chunk];
        double s = 0.0;
        Eigen::Index best = 0;
        r.weights.maxCoeff(&best);
        for (Eigen::Index j = 0; j < r.weights.size(); ++j)
            if (freq[static_cast<std::size_t>(r.model_ids[j])] == active) s += r.weights[j];
        share += s;
        hits += freq[static_cast<std::size_t>(r.model_ids[best])] == active ? 1.0 : 0.0;
        ++st.anchors;
    }
    st.mean_share = share / static_cast<double>(st.anchors);
    st.argmax_accuracy = hits / static_cast<double>(st.anchors);
    return st;
}

Outcome weight_concentration() {
    const auto st = class_stats(30);
    return {st.mean_share >= 0.8,
            "mean weight on active frequency class " + fmt("%.4f", st.mean_share) + " over " +
                std::to_string(st.anchors) + " interior anchors"};
}

Outcome horizon_vs_one_step() {
    const auto multi = class_stats(30);
    const auto one = class_stats(1);
    return {multi.argmax_accuracy >= one.argmax_accuracy,
            "argmax accuracy h_fit=30 " + fmt("%.4f", multi.argmax_accuracy) + ", h_fit=1 " +
                fmt("%.4f", one.argmax_accuracy)};
}

Outcome edge_effects() {
    const auto ex = paper_sine_experiment(PaperSplit::Test, false);
    const auto result = run_stream(ex.data.frame, ex.run.stream, ex.run.lags, ex.run.params);
    const std::size_t lc = ex.run.stream.chunk_length, lb = ex.run.stream.ensemble.lookback, h = ex.run.stream.horizon;
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> split;
    for (const auto& r : result.records) {
        const double l = window_mse(ex.data.frame.target().segment(static_cast<Eigen::Index>(r.anchor) + 1,
                                                                   static_cast<Eigen::Index>(h)),
                                    r.forecast);
        auto& [early, late] = split[r.chunk];
        (r.anchor - r.chunk * lc < lb ? early : late).push_back(l);
    }
    auto mean = [](const std::vector<double>& v) {
        double a = 0.0;
        for (const double x : v) a += x;
        return v.empty() ? std::numeric_limits<double>::quiet_NaN() : a / static_cast<double>(v.size());
    };
    std::printf("    %-10s %14s %14s %8s\n", "transition", "first l_b MSE", "remainder MSE", "edge");
    int edges = 0;
    for (const auto& [c, parts] : split) {
        const double a = mean(parts.first), b = mean(parts.second);
        const bool edge = a > b;
        edges += edge;
        std::printf("    %3zu -> %-3zu %14.4e %14.4e %8s\n", c - 1, c, a, b, edge ? "yes" : "no");
    }
    return {edges >= 5 && split.size() == 8, std::to_string(edges) + " of " + std::to_string(split.size()) +
                                                  " transitions show the edge effect"};
}

Outcome perfect_recovery() {
    // y_t = 2 cos(theta) y_{t-1} - y_{t-2}, generated by the recurrence itself.
    const double theta = 0.07;
    const int n = 600;
    Eigen::VectorXd y(n);
    y[0] = 0.0;
    y[1] = std::sin(theta);
    for (int t = 2; t < n; ++t) y[t] = 2.0 * std::cos(theta) * y[t - 1] - y[t - 2];
    const TimeSeriesFrame frame(y);

    EnsembleConfig cfg;
    cfg.lookback = 160;
    cfg.fit_horizon = 30;
    cfg.ridge_eps = 0.0;
    EnsembleState state(cfg);
    const double others[] = {0.02, 0.05, 0.11, 0.2};
    std::int64_t id = 0;
    std::int64_t truth_id = -1;
    for (int k = 0; k < 5; ++k) {
        const double th = k == 2 ? theta : others[k < 2 ? k : k - 1];
        Eigen::VectorXd coef(2);
        coef << 2.0 * std::cos(th), -1.0;
        if (k == 2) truth_id = id;
        state.add_model(std::make_shared<const ChunkModel>(make_linear_model(coef, 0.0, 0, id++)));
    }
    const auto fit = fit_weights(state, frame, 500);
    double objective = 0.0;
    for (const auto k : fit.anchors) {
        const auto M = forecast_matrix(state.models(), frame, k, cfg.fit_horizon);
        objective += (y.segment(static_cast<Eigen::Index>(k) + 1, 30) - M * fit.weights.w).squaredNorm();
    }
    const double mass = fit.weights.w[truth_id];
    return {mass >= 1.0 - 1e-4 && objective <= 1e-10,
            "weight on exact model " + fmt("%.10f", mass) + ", look-back objective " + fmt("%.3e", objective)};
}

Outcome timing_directions() {
    const auto ex = paper_sine_stream(PaperSplit::Train);
    const auto bench = timing_bench(ex.data.frame, ex.run, 3, 1);
    std::printf("    %-7s %18s %18s\n", "chunks", "rewts cum. train", "global cum. train");
    bool ok = true;
    std::size_t first_lead = 0;
    for (std::size_t i = 0; i < bench.chunk_index.size(); ++i) {
        const std::size_t chunks = bench.chunk_index[i] + 1;
        const bool lead = bench.global_cumulative_train[i] > bench.rewts_cumulative_train[i];
        std::printf("    %-7zu %16.4f s %16.4f s\n", chunks, bench.rewts_cumulative_train[i],
                    bench.global_cumulative_train[i]);
        if (chunks >= 4) ok = ok && lead;
        if (lead && first_lead == 0) first_lead = chunks;
        if (!lead) first_lead = 0;
    }
    ok = ok && bench.spearman_rho > 0.0;
    return {ok, "global training time leads from " + (first_lead ? std::to_string(first_lead) : std::string("no")) +
                    " chunks on, Spearman rho (anchor time vs model count) " + fmt("%.3f", bench.spearman_rho) +
                    ", global anchor-time ratio " + fmt("%.2f", bench.global_time_ratio)};
}

Outcome invariants() {
    std::vector<std::string> broken;
    std::size_t checked = 0;

    for (const bool isolate : {false, true}) {
        for (const auto split : {PaperSplit::Train, PaperSplit::Test}) {
            const auto ex = paper_sine_experiment(split, isolate);
            const auto a = run_stream(ex.data.frame, ex.run.stream, ex.run.lags, ex.run.params);
            const auto b = run_stream(ex.data.frame, ex.run.stream, ex.run.lags, ex.run.params);
            for (std::size_t i = 0; i < a.records.size(); ++i) {
                const auto& r = a.records[i];
                ++checked;
                if (r.weights.minCoeff() < 0.0 || std::abs(r.weights.sum() - 1.0) > 1e-12)
                    broken.push_back("simplex at anchor " + std::to_string(r.anchor));
                const Eigen::VectorXd again = combine(r.matrix, r.weights);
                if ((again - r.forecast).cwiseAbs().maxCoeff() != 0.0)
                    broken.push_back("recombination at anchor " + std::to_string(r.anchor));
                if (b.records[i].forecast != r.forecast || b.records[i].weights != r.weights)
                    broken.push_back("determinism at anchor " + std::to_string(r.anchor));
            }
        }
    }

    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd y(40);
        Eigen::MatrixXd X(40, 2);
        for (int i = 0; i < 40; ++i) {
            y[i] = 5.0 * g(rng) + 3.0;
            X(i, 0) = g(rng);
            X(i, 1) = 100.0 * g(rng);
        }
        const TimeSeriesFrame frame(y, X, {false, true});
        const auto sc = fit_scaler(frame, {0, 0, 40});
        const Eigen::MatrixXd rows = feature_rows(frame, 0, 40);
        ++checked;
        if ((sc.invert(sc.apply(rows)) - rows).cwiseAbs().maxCoeff() > 1e-9) broken.push_back("scaler round trip");
    }

    {
        const auto ex = paper_sine_stream(PaperSplit::Train);
        const auto r1 = evaluate(ex.data.frame, ex.run);
        const auto r2 = evaluate(ex.data.frame, ex.run);
        ++checked;
        if (to_json(r1.comparison).dump() != to_json(r2.comparison).dump()) broken.push_back("report determinism");
        std::set<std::size_t> sa, sb;
        for (const auto& r : r1.rewts.records) sa.insert(r.anchor);
        for (const auto& r : r1.global.records) sb.insert(r.anchor);
        if (sa != sb) broken.push_back("anchor schedules differ");
        if (r1.rewts.models.size() != 8 || r1.global.retrain_count != 6) broken.push_back("streaming model counts");
    }

    std::string detail = std::to_string(checked) + " checks";
    if (!broken.empty()) detail += ", first failure: " + broken.front();
    return {broken.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 QP oracle equivalence", qp_oracle},
        {"2 analytic QP case", qp_analytic},
        {"3 strided-loss oracle", strided_oracle},
        {"4 sine experiment direction", sine_direction},
        {"5 weight concentration", weight_concentration},
        {"6 h-step vs one-step weight fitting", horizon_vs_one_step},
        {"7 edge effects", edge_effects},
        {"8 perfect-model recovery", perfect_recovery},
        {"9 timing directions", timing_directions},
        {"10 invariant suite", invariants},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        failed += !out.pass;
        std::printf("%s criterion %s: %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
