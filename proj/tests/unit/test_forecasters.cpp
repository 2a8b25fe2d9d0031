#include "rewts/error.hpp"
#include "rewts/forecasters.hpp"
#include "rewts/presets.hpp"
#include "rewts/synthetic.hpp"

#include "support.hpp"

using namespace rewts;
using testing::Gen;
using testing::vec;

namespace {

LagSpec lags_of(std::size_t L) {
    LagSpec l;
    l.input_length = L;
    return l;
}

double in_sample_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LinearFit& f) {
    const Eigen::VectorXd r = y - X * f.coef - Eigen::VectorXd::Constant(y.size(), f.intercept);
    return 0.5 * r.squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("lag embedding examples") {
    const TimeSeriesFrame f(vec({1, 2, 3, 4}));
    const auto d = build_design(f, {0, 0, 4}, lags_of(2));
    REQUIRE(d.features.rows() == 2);
    CHECK(d.features.row(0) == Eigen::RowVector2d(2, 1));
    CHECK(d.features.row(1) == Eigen::RowVector2d(3, 2));
    CHECK(d.labels == vec({3, 4}));
    CHECK(d.first_label == 2);

    const auto z = build_design(TimeSeriesFrame(vec({0, 0, 0})), {0, 0, 3}, lags_of(1));
    CHECK(z.features.isZero());
    CHECK(z.labels.isZero());

    const auto long_design = build_design(TimeSeriesFrame(Eigen::VectorXd::LinSpaced(500, 0, 1)), {0, 0, 500}, lags_of(80));
    CHECK(long_design.features.rows() == 420);

    CHECK_THROWS_AS(build_design(f, {0, 0, 2}, lags_of(2)), Error);
}

TEST_CASE("covariate lags and the lag-0 rule") {
    Eigen::MatrixXd cov(5, 1);
    cov << 10, 20, 30, 40, 50;
    const TimeSeriesFrame known(vec({1, 2, 3, 4, 5}), cov, {true});
    LagSpec l = lags_of(1);
    l.covariate_lags = {{0, 1}};
    const auto d = build_design(known, {0, 0, 5}, l);
    CHECK(d.features.row(0) == Eigen::RowVector3d(1, 20, 10));

    const TimeSeriesFrame unknown(vec({1, 2, 3, 4, 5}), cov, {false});
    CHECK_THROWS_AS(build_design(unknown, {0, 0, 5}, l), Error);
}

TEST_CASE("least squares oracle: exact AR(1)") {
    Eigen::VectorXd y(60);
    y[0] = 3.0;
    for (Eigen::Index t = 1; t < y.size(); ++t) y[t] = 0.5 * y[t - 1] + (t % 7 == 0 ? 1.0 : 0.0);
    // Pure recurrence rows only: y[t] = 0.5 y[t-1] exactly.
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 1; t < y.size(); ++t)
        if (t % 7 != 0) rows.push_back(t);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), 1);
    Eigen::VectorXd lab(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        X(i, 0) = y[rows[static_cast<std::size_t>(i)] - 1];
        lab[i] = y[rows[static_cast<std::size_t>(i)]];
    }
    ElasticNetParams p;
    p.lambda = 0.0;
    p.tol = 1e-14;
    p.max_iter = 100000;
    const auto fit = fit_elastic_net(X, lab, p);
    CHECK(fit.coef[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(fit.intercept) < 1e-8);
}

TEST_CASE("full shrinkage predicts the mean") {
    Gen g(31);
    const Eigen::MatrixXd X = g.matrix(30, 4);
    const Eigen::VectorXd y = g.vector(30);
    ElasticNetParams p;
    p.alpha = 1.0;
    p.lambda = 1e6;
    const auto fit = fit_elastic_net(X, y, p);
    CHECK(fit.coef.isZero());
    CHECK(fit.intercept == doctest::Approx(y.mean()));
}

TEST_CASE("property: unpenalised square system matches a direct solve") {
    Gen g(32);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(5, 5) + 0.3 * g.matrix(5, 5);
        const Eigen::VectorXd y = g.vector(5);
        ElasticNetParams p;
        p.lambda = 0.0;
        p.alpha = g.uniform(0.0, 1.0);
        p.fit_intercept = false;
        p.tol = 1e-13;
        p.max_iter = 500000;
        const auto fit = fit_elastic_net(X, y, p);
        const Eigen::VectorXd direct = X.fullPivLu().solve(y);
        CHECK((fit.coef - direct).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("property: ridge matches the closed form on random 20x5 problems") {
    Gen g(33);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd X = g.matrix(20, 5);
        const Eigen::VectorXd y = g.vector(20);
        ElasticNetParams p;
        p.alpha = 0.0;
        p.lambda = g.uniform(0.01, 2.0);
        p.tol = 1e-13;
        p.max_iter = 200000;
        const auto fit = fit_elastic_net(X, y, p);
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const Eigen::VectorXd yc = y.array() - y.mean();
        const Eigen::MatrixXd A = Xc.transpose() * Xc / 20.0 + p.lambda * Eigen::MatrixXd::Identity(5, 5);
        const Eigen::VectorXd b = A.ldlt().solve(Xc.transpose() * yc / 20.0);
        CHECK((fit.coef - b).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(fit.intercept == doctest::Approx(y.mean() - X.colwise().mean().dot(b)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("property: in-sample loss is non-decreasing in lambda") {
    Gen g(34);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd X = g.matrix(40, 6);
        const Eigen::VectorXd y = X * g.vector(6) + 0.3 * g.vector(40);
        ElasticNetParams p;
        p.alpha = g.uniform(0.0, 1.0);
        p.tol = 1e-12;
        p.max_iter = 200000;
        double prev = -1.0;
        for (double lambda : {0.0, 1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0, 3.0}) {
            p.lambda = lambda;
            const double loss = in_sample_loss(X, y, fit_elastic_net(X, y, p));
            CHECK(loss >= prev - 1e-9);
            prev = loss;
        }
    }
}

TEST_CASE("solver errors and non-convergence flag") {
    ElasticNetParams p;
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd y = vec({1, NAN, 2});
    CHECK_THROWS_AS(fit_elastic_net(X, y, p), Error);
    p.max_iter = 1;
    p.tol = 1e-300;
    Gen g(35);
    const auto fit = fit_elastic_net(g.matrix(20, 5), g.vector(20), p);
    CHECK_FALSE(fit.converged);
    p.lambda = -1.0;
    CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("baseline forecasts") {
    const TimeSeriesFrame f(vec({1, 2, 3, 4, 5}));
    CHECK(forecast_recursive(make_persistence_model(0), f, 4, 3) == vec({5, 5, 5}));
    const TimeSeriesFrame two(vec({1, 2}));
    CHECK(forecast_recursive(make_linear_model(vec({1}), 0.0), two, 1, 3) == vec({2, 2, 2}));
    CHECK(forecast_recursive(make_constant_model(7.0, 0), f, 2, 2) == vec({7, 7}));
    CHECK_THROWS_AS(forecast_recursive(make_linear_model(vec({1, 1, 1}), 0.0), two, 1, 1), Error);
}

TEST_CASE("chunk models") {
    SUBCASE("constant chunk predicts the constant") {
        const TimeSeriesFrame f(Eigen::VectorXd::Constant(100, 4.0));
        const auto m = fit_model(f, {0, 0, 100}, lags_of(5), {}, 0);
        const auto fc = forecast_recursive(m, f, 99, 10);
        CHECK((fc.array() - 4.0).abs().maxCoeff() < 1e-9);
    }
    SUBCASE("identical chunks give bitwise identical models") {
        Gen g(36);
        const Eigen::VectorXd half = g.ar_series(200);
        Eigen::VectorXd y(400);
        y << half, half;
        const TimeSeriesFrame f(y);
        const auto a = fit_model(f, {0, 0, 200}, lags_of(10), {}, 0);
        const auto b = fit_model(f, {1, 200, 400}, lags_of(10), {}, 1);
        const auto& fa = dynamic_cast<const LinearArForecaster&>(*a.forecaster).fit();
        const auto& fb = dynamic_cast<const LinearArForecaster&>(*b.forecaster).fit();
        CHECK(testing::bit_equal(fa.coef, fb.coef));
        CHECK(fa.intercept == fb.intercept);
        CHECK(a.scaler == b.scaler);
    }
    SUBCASE("train sine chunk 3 is forecast well inside the chunk") {
        const auto ds = generate_sine_dataset(default_paper_spec(PaperSplit::Train));
        const auto m = fit_model(ds.frame, {2, 1000, 1500}, lags_of(80), sine_params(), 2);
        CHECK(m.converged);
        double sum = 0.0;
        int count = 0;
        for (std::size_t a = 1079; a + 30 < 1500; a += 30) {
            const Eigen::VectorXd err = forecast_recursive(m, ds.frame, a, 30) -
                                        ds.frame.target().segment(static_cast<Eigen::Index>(a) + 1, 30);
            sum += err.squaredNorm() / 30.0;
            ++count;
        }
        const double normalized = sum / count / (20.0 * 20.0);
        MESSAGE("normalized in-chunk MSE " << normalized);
        CHECK(normalized < 0.05);
    }
    SUBCASE("param count and JSON round trip") {
        Gen g(37);
        const TimeSeriesFrame f(g.ar_series(300));
        const auto m = fit_model(f, {0, 0, 300}, lags_of(12), {}, 0);
        CHECK(m.param_count == 13);
        const auto back = model_from_json(to_json(m));
        CHECK(forecast_recursive(back, f, 299, 20) == forecast_recursive(m, f, 299, 20));
    }
}

TEST_CASE("property: shifting the data shifts the forecasts") {
    Gen g(38);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd y = g.ar_series(300);
        const double c = g.uniform(-100.0, 100.0);
        const TimeSeriesFrame base(y), shifted(Eigen::VectorXd(y.array() + c));
        const auto ma = fit_model(base, {0, 0, 250}, lags_of(8), {}, 0);
        const auto mb = fit_model(shifted, {0, 0, 250}, lags_of(8), {}, 0);
        const Eigen::VectorXd fa = forecast_recursive(ma, base, 280, 15);
        const Eigen::VectorXd fb = forecast_recursive(mb, shifted, 280, 15);
        CHECK(((fb.array() - c) - fa.array()).abs().maxCoeff() < 1e-8 * (1.0 + std::abs(c)));
    }
}

TEST_CASE("lags and params JSON") {
    LagSpec l = lags_of(12);
    l.covariate_lags = {{0, 2}};
    l.use_future_covariates = true;
    CHECK(lags_from_json(to_json(l)) == l);
    ElasticNetParams p;
    p.lambda = 0.25;
    CHECK(params_from_json(to_json(p)) == p);
}
