#include "rewts/forecasters.hpp"

#include "rewts/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rewts {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// Writes the feature vector predicting row `t` of `rows` into `out`.
/// Returns false when a covariate value it needs is unknown (NaN).
template <typename Rows>
bool fill_features(const Rows& rows, Eigen::Index t, const ResolvedLags& lags, double* out) {
    const auto L = static_cast<Eigen::Index>(lags.input_length);
    for (Eigen::Index l = 1; l <= L; ++l) *out++ = rows(t - l, 0);
    for (std::size_t c = 0; c < lags.covariate.size(); ++c) {
        for (const auto lag : lags.covariate[c]) {
            const double v = rows(t - static_cast<Eigen::Index>(lag), static_cast<Eigen::Index>(c) + 1);
            if (std::isnan(v)) return false;
            *out++ = v;
        }
    }
    return true;
}

}  // namespace

void validate(const LagSpec& lags, std::size_t covariate_count, const std::vector<bool>& future_known) {
    require(lags.input_length >= 1, ErrorKind::Parameter, "input_length must be >= 1");
    require(lags.covariate_lags.empty() || lags.covariate_lags.size() == covariate_count, ErrorKind::Parameter,
            "covariate_lags must list one lag set per covariate");
    for (std::size_t c = 0; c < lags.covariate_lags.size(); ++c)
        for (const auto l : lags.covariate_lags[c])
            require(l >= 1 || (c < future_known.size() && future_known[c]), ErrorKind::Parameter,
                    "lag 0 is only allowed for future-known covariates (covariate " + std::to_string(c) + ")");
}

void validate(const ElasticNetParams& p) {
    require(p.lambda >= 0.0 && std::isfinite(p.lambda), ErrorKind::Parameter, "lambda must be >= 0");
    require(p.alpha >= 0.0 && p.alpha <= 1.0, ErrorKind::Parameter, "alpha must lie in [0, 1]");
    require(p.max_iter >= 1, ErrorKind::Parameter, "max_iter must be >= 1");
    require(p.tol > 0.0, ErrorKind::Parameter, "tol must be > 0");
}

std::size_t ResolvedLags::feature_count() const {
    std::size_t n = input_length;
    for (const auto& c : covariate) n += c.size();
    return n;
}

std::size_t ResolvedLags::warmup() const {
    std::size_t w = input_length;
    for (const auto& c : covariate)
        if (!c.empty()) w = std::max(w, c.back());
    return w;
}

ResolvedLags resolve(const LagSpec& lags, std::size_t covariate_count, const std::vector<bool>& future_known) {
    validate(lags, covariate_count, future_known);
    ResolvedLags out;
    out.input_length = lags.input_length;
    out.covariate.resize(covariate_count);
    for (std::size_t c = 0; c < covariate_count; ++c) {
        auto& set = out.covariate[c];
        if (!lags.covariate_lags.empty()) set = lags.covariate_lags[c];
        if (lags.use_future_covariates && c < future_known.size() && future_known[c]) set.push_back(0);
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    return out;
}

Design build_design(const Eigen::Ref<const Eigen::MatrixXd>& rows, const ResolvedLags& lags) {
    const auto warm = static_cast<Eigen::Index>(lags.warmup());
    require(rows.rows() > warm, ErrorKind::InsufficientData,
            "range of " + std::to_string(rows.rows()) + " rows is too short for a warm-up of " +
                std::to_string(warm));
    require(rows.cols() == static_cast<Eigen::Index>(lags.covariate.size()) + 1, ErrorKind::Shape,
            "feature rows do not match the lag specification");
    const Eigen::Index n = rows.rows() - warm;
    Design d;
    d.features.resize(n, static_cast<Eigen::Index>(lags.feature_count()));
    d.labels = rows.col(0).tail(n);
    d.first_label = static_cast<std::size_t>(warm);
    std::vector<double> buf(lags.feature_count());
    for (Eigen::Index r = 0; r < n; ++r) {
        fill_features(rows, warm + r, lags, buf.data());
        d.features.row(r) = Eigen::Map<const Eigen::RowVectorXd>(buf.data(), static_cast<Eigen::Index>(buf.size()));
    }
    return d;
}

Design build_design(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags) {
    require(range.start <= range.end && range.end <= frame.size(), ErrorKind::Index, "design range out of bounds");
    const auto resolved = resolve(lags, frame.covariate_count(), frame.future_known());
    Design d = build_design(feature_rows(frame, range.start, range.end), resolved);
    d.first_label += range.start;
    return d;
}

LinearFit fit_elastic_net(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const ElasticNetParams& params) {
    validate(params);
    require(X.rows() == y.size() && y.size() >= 1, ErrorKind::Shape, "design rows must match label count (>= 1)");
    require(X.allFinite() && y.allFinite(), ErrorKind::Numeric, "elastic net inputs must be finite");

    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(p);
    double y_mean = 0.0;
    if (params.fit_intercept) {
        x_mean = X.colwise().mean();
        y_mean = y.mean();
    }
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    Eigen::VectorXd residual = y.array() - y_mean;
    const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose() * inv_n;

    const double l1 = params.lambda * params.alpha;
    const double l2 = params.lambda * (1.0 - params.alpha);

    LinearFit fit;
    fit.coef = Eigen::VectorXd::Zero(p);
    for (std::size_t iter = 1; iter <= params.max_iter; ++iter) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double denom = col_sq[j] + l2;
            if (denom <= 0.0) continue;
            const double old = fit.coef[j];
            const double rho = Xc.col(j).dot(residual) * inv_n + col_sq[j] * old;
            const double updated = soft_threshold(rho, l1) / denom;
            const double delta = updated - old;
            if (delta != 0.0) {
                residual.noalias() -= delta * Xc.col(j);
                fit.coef[j] = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        fit.iterations = iter;
        if (max_delta <= params.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.intercept = params.fit_intercept ? y_mean - x_mean.dot(fit.coef) : 0.0;
    return fit;
}

LinearArForecaster::LinearArForecaster(ResolvedLags lags, LinearFit fit) : lags_(std::move(lags)), fit_(std::move(fit)) {
    require(static_cast<std::size_t>(fit_.coef.size()) == lags_.feature_count(), ErrorKind::Shape,
            "coefficient count does not match lag layout");
}

Eigen::VectorXd LinearArForecaster::forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                             const Eigen::Ref<const Eigen::MatrixXd>& future,
                                             const std::vector<std::size_t>& known_columns, std::size_t h) const {
    const auto warm = static_cast<Eigen::Index>(lags_.warmup());
    require(history.rows() >= warm, ErrorKind::InsufficientData,
            "history of " + std::to_string(history.rows()) + " rows, model needs " + std::to_string(warm));
    const auto H = static_cast<Eigen::Index>(h);
    const Eigen::Index cols = history.cols();
    require(future.cols() == static_cast<Eigen::Index>(known_columns.size()) && (future.cols() == 0 || future.rows() >= H),
            ErrorKind::Shape, "future covariates must be h x K_known");

    Eigen::MatrixXd ext(warm + H, cols);
    ext.topRows(warm) = history.bottomRows(warm);
    ext.bottomRows(H).setConstant(kNaN);
    for (std::size_t j = 0; j < known_columns.size(); ++j)
        ext.col(static_cast<Eigen::Index>(known_columns[j]) + 1).tail(H) =
            future.col(static_cast<Eigen::Index>(j)).head(H);

    Eigen::VectorXd out(H);
    std::vector<double> buf(lags_.feature_count());
    const Eigen::Map<const Eigen::VectorXd> row(buf.data(), static_cast<Eigen::Index>(buf.size()));
    for (Eigen::Index i = 0; i < H; ++i) {
        if (!fill_features(ext, warm + i, lags_, buf.data()))
            fail(ErrorKind::InsufficientData, "forecast needs a covariate value beyond the anchor that is not future-known");
        const double next = row.dot(fit_.coef) + fit_.intercept;
        ext(warm + i, 0) = next;
        out[i] = next;
    }
    return out;
}

nlohmann::json LinearArForecaster::to_json() const {
    return {{"kind", kind()},
            {"input_length", lags_.input_length},
            {"covariate_lags", lags_.covariate},
            {"coef", std::vector<double>(fit_.coef.data(), fit_.coef.data() + fit_.coef.size())},
            {"intercept", fit_.intercept},
            {"converged", fit_.converged},
            {"iterations", fit_.iterations}};
}

Eigen::VectorXd PersistenceForecaster::forecast(const Eigen::Ref<const Eigen::MatrixXd>& history,
                                                const Eigen::Ref<const Eigen::MatrixXd>&,
                                                const std::vector<std::size_t>&, std::size_t h) const {
    require(history.rows() >= 1, ErrorKind::InsufficientData, "persistence needs one observation");
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(h), history(history.rows() - 1, 0));
}

nlohmann::json PersistenceForecaster::to_json() const { return {{"kind", kind()}}; }

Eigen::VectorXd ConstantForecaster::forecast(const Eigen::Ref<const Eigen::MatrixXd>&,
                                             const Eigen::Ref<const Eigen::MatrixXd>&,
                                             const std::vector<std::size_t>&, std::size_t h) const {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(h), value_);
}

nlohmann::json ConstantForecaster::to_json() const { return {{"kind", kind()}, {"value", value_}}; }

Eigen::VectorXd ChunkModel::forecast(const Eigen::Ref<const Eigen::MatrixXd>& history_rows,
                                     const Eigen::Ref<const Eigen::MatrixXd>& future_known, std::size_t h) const {
    const auto need = static_cast<Eigen::Index>(min_history());
    require(history_rows.rows() >= need, ErrorKind::InsufficientData,
            "history of " + std::to_string(history_rows.rows()) + " rows, model needs " + std::to_string(need));
    const Eigen::MatrixXd scaled = scaler.apply(history_rows.bottomRows(need));
    Eigen::MatrixXd future(future_known.rows(), future_known.cols());
    for (std::size_t j = 0; j < known_columns.size(); ++j)
        for (Eigen::Index i = 0; i < future_known.rows(); ++i)
            future(i, static_cast<Eigen::Index>(j)) =
                scaler.apply_feature(known_columns[j] + 1, future_known(i, static_cast<Eigen::Index>(j)));
    Eigen::VectorXd out = forecaster->forecast(scaled, future, known_columns, h);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = scaler.invert_feature(0, out[i]);
    return out;
}

Eigen::VectorXd forecast_recursive(const ChunkModel& model, const TimeSeriesFrame& frame, std::size_t anchor,
                                   std::size_t h) {
    const std::size_t need = model.min_history();
    require(anchor < frame.size(), ErrorKind::Index, "anchor beyond end of frame");
    require(anchor + 1 >= need, ErrorKind::InsufficientData,
            "anchor " + std::to_string(anchor) + " has fewer than " + std::to_string(need) + " history rows");
    const Eigen::MatrixXd rows = feature_rows(frame, anchor + 1 - need, anchor + 1);
    Eigen::MatrixXd future(0, static_cast<Eigen::Index>(model.known_columns.size()));
    if (!model.known_columns.empty()) {
        require(anchor + h < frame.size(), ErrorKind::InsufficientData, "future covariates unavailable for horizon");
        future.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(model.known_columns.size()));
        for (std::size_t j = 0; j < model.known_columns.size(); ++j)
            future.col(static_cast<Eigen::Index>(j)) = frame.covariates()
                                                           .col(static_cast<Eigen::Index>(model.known_columns[j]))
                                                           .segment(static_cast<Eigen::Index>(anchor + 1),
                                                                    static_cast<Eigen::Index>(h));
    }
    return model.forecast(rows, future, h);
}

ChunkModel fit_model(const TimeSeriesFrame& frame, const ChunkIndex& range, const LagSpec& lags,
                     const ElasticNetParams& params, std::int64_t model_id) {
    const auto resolved = resolve(lags, frame.covariate_count(), frame.future_known());
    require(range.start <= range.end && range.end <= frame.size(), ErrorKind::Index, "training range out of bounds");
    require(range.length() > resolved.warmup(), ErrorKind::InsufficientData,
            "training range of " + std::to_string(range.length()) + " ticks needs more than " +
                std::to_string(resolved.warmup()));

    ChunkModel model;
    model.scaler = fit_scaler(frame, range);
    const Eigen::MatrixXd scaled = model.scaler.apply(feature_rows(frame, range.start, range.end));
    const Design design = build_design(scaled, resolved);
    LinearFit fit = fit_elastic_net(design.features, design.labels, params);
    model.converged = fit.converged;
    if (!params.fit_intercept) fit.intercept = 0.0;
    auto forecaster = std::make_shared<LinearArForecaster>(resolved, std::move(fit));
    model.param_count = forecaster->param_count() - (params.fit_intercept ? 0 : 1);
    model.forecaster = std::move(forecaster);
    model.chunk_id = model_id;
    model.range = range;
    for (std::size_t c = 0; c < resolved.covariate.size(); ++c)
        if (!resolved.covariate[c].empty() && resolved.covariate[c].front() == 0) model.known_columns.push_back(c);
    return model;
}

ChunkModel fit_chunk_model(const TimeSeriesFrame& frame, const ChunkIndex& chunk, const LagSpec& lags,
                           const ElasticNetParams& params) {
    return fit_model(frame, chunk, lags, params, static_cast<std::int64_t>(chunk.chunk_id));
}

ChunkModel make_persistence_model(std::size_t covariate_count, std::int64_t model_id) {
    ChunkModel m;
    m.forecaster = std::make_shared<PersistenceForecaster>();
    m.scaler = Scaler::identity(covariate_count + 1);
    m.chunk_id = model_id;
    m.param_count = 0;
    return m;
}

ChunkModel make_constant_model(double value, std::size_t covariate_count, std::int64_t model_id) {
    ChunkModel m;
    m.forecaster = std::make_shared<ConstantForecaster>(value);
    m.scaler = Scaler::identity(covariate_count + 1);
    m.chunk_id = model_id;
    m.param_count = 1;
    return m;
}

ChunkModel make_linear_model(Eigen::VectorXd coef, double intercept, std::size_t covariate_count,
                             std::int64_t model_id) {
    ResolvedLags lags;
    lags.input_length = static_cast<std::size_t>(coef.size());
    lags.covariate.resize(covariate_count);
    LinearFit fit{std::move(coef), intercept, true, 0};
    ChunkModel m;
    auto f = std::make_shared<LinearArForecaster>(std::move(lags), std::move(fit));
    m.param_count = f->param_count();
    m.forecaster = std::move(f);
    m.scaler = Scaler::identity(covariate_count + 1);
    m.chunk_id = model_id;
    return m;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ChunkModel& model) {
    return {{"version", kModelFormatVersion},
            {"chunk_id", model.chunk_id},
            {"range", {model.range.start, model.range.end}},
            {"param_count", model.param_count},
            {"converged", model.converged},
            {"known_columns", model.known_columns},
            {"scaler", {{"means", to_vec(model.scaler.means())}, {"stds", to_vec(model.scaler.stds())}}},
            {"forecaster", model.forecaster->to_json()}};
}

ChunkModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("version").get<int>();
        require(version == kModelFormatVersion, ErrorKind::Schema,
                "unsupported model format version " + std::to_string(version));
        ChunkModel m;
        m.chunk_id = j.at("chunk_id").get<std::int64_t>();
        const auto range = j.at("range").get<std::vector<std::size_t>>();
        require(range.size() == 2, ErrorKind::Schema, "model range must have two entries");
        m.range = {m.chunk_id >= 0 ? static_cast<std::size_t>(m.chunk_id) : 0, range[0], range[1]};
        m.param_count = j.at("param_count").get<std::size_t>();
        m.converged = j.at("converged").get<bool>();
        m.known_columns = j.at("known_columns").get<std::vector<std::size_t>>();
        m.scaler = Scaler(from_vec(j.at("scaler").at("means").get<std::vector<double>>()),
                          from_vec(j.at("scaler").at("stds").get<std::vector<double>>()));
        const auto& f = j.at("forecaster");
        const auto kind = f.at("kind").get<std::string>();
        if (kind == "linear_ar") {
            ResolvedLags lags;
            lags.input_length = f.at("input_length").get<std::size_t>();
            lags.covariate = f.at("covariate_lags").get<std::vector<std::vector<std::size_t>>>();
            LinearFit fit{from_vec(f.at("coef").get<std::vector<double>>()), f.at("intercept").get<double>(),
                          f.at("converged").get<bool>(), f.at("iterations").get<std::size_t>()};
            m.forecaster = std::make_shared<LinearArForecaster>(std::move(lags), std::move(fit));
        } else if (kind == "persistence") {
            m.forecaster = std::make_shared<PersistenceForecaster>();
        } else if (kind == "constant") {
            m.forecaster = std::make_shared<ConstantForecaster>(f.at("value").get<double>());
        } else {
            fail(ErrorKind::Schema, "unknown forecaster kind '" + kind + "'");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Schema, std::string("malformed model document: ") + e.what());
    }
}

nlohmann::json to_json(const LagSpec& lags) {
    return {{"input_length", lags.input_length},
            {"covariate_lags", lags.covariate_lags},
            {"use_future_covariates", lags.use_future_covariates}};
}

LagSpec lags_from_json(const nlohmann::json& j) {
    LagSpec lags;
    lags.input_length = j.value("input_length", lags.input_length);
    lags.covariate_lags = j.value("covariate_lags", lags.covariate_lags);
    lags.use_future_covariates = j.value("use_future_covariates", lags.use_future_covariates);
    return lags;
}

nlohmann::json to_json(const ElasticNetParams& p) {
    return {{"lambda", p.lambda},
            {"alpha", p.alpha},
            {"max_iter", p.max_iter},
            {"tol", p.tol},
            {"fit_intercept", p.fit_intercept}};
}

ElasticNetParams params_from_json(const nlohmann::json& j) {
    ElasticNetParams p;
    p.lambda = j.value("lambda", p.lambda);
    p.alpha = j.value("alpha", p.alpha);
    p.max_iter = j.value("max_iter", p.max_iter);
    p.tol = j.value("tol", p.tol);
    p.fit_intercept = j.value("fit_intercept", p.fit_intercept);
    return p;
}

}  // namespace rewts
