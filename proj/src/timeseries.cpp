#include "rewts/timeseries.hpp"

#include "rewts/error.hpp"

#include <cmath>
#include <string>

namespace rewts {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Ordering: return "ordering";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Index: return "index";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Convergence: return "convergence";
        case ErrorKind::Coverage: return "coverage";
        case ErrorKind::Comparison: return "comparison";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

TimeSeriesFrame::TimeSeriesFrame(Eigen::VectorXd target, Eigen::MatrixXd covariates, std::vector<bool> future_known,
                                 double step, std::int64_t start_index)
    : target_(std::move(target)),
      covariates_(std::move(covariates)),
      future_known_(std::move(future_known)),
      step_(step),
      start_index_(start_index) {
    if (covariates_.cols() == 0) covariates_.resize(target_.size(), 0);
    require(covariates_.rows() == target_.size(), ErrorKind::Shape,
            "covariate rows (" + std::to_string(covariates_.rows()) + ") != target length (" +
                std::to_string(target_.size()) + ")");
    if (future_known_.empty()) future_known_.assign(static_cast<std::size_t>(covariates_.cols()), false);
    require(future_known_.size() == static_cast<std::size_t>(covariates_.cols()), ErrorKind::Shape,
            "future_known flags do not match covariate count");
    require(step_ > 0.0 && std::isfinite(step_), ErrorKind::Parameter, "step must be positive");
    require(target_.allFinite(), ErrorKind::Numeric, "target contains non-finite values");
    require(covariates_.allFinite(), ErrorKind::Numeric, "covariates contain non-finite values");
}

TimeSeriesFrame::TimeSeriesFrame(Eigen::VectorXd target, double step, std::int64_t start_index)
    : TimeSeriesFrame(std::move(target), Eigen::MatrixXd(), {}, step, start_index) {}

std::vector<std::size_t> TimeSeriesFrame::future_known_columns() const {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < future_known_.size(); ++j)
        if (future_known_[j]) cols.push_back(j);
    return cols;
}

Eigen::MatrixXd TimeSeriesFrame::known_future(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= size(), ErrorKind::Index, "known_future range out of bounds");
    const auto cols = future_known_columns();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) =
            covariates_.col(static_cast<Eigen::Index>(cols[j]))
                .segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    return out;
}

ChunkSplit split_chunks(std::size_t series_length, std::size_t chunk_length) {
    require(chunk_length >= 1, ErrorKind::Parameter, "chunk length must be >= 1");
    ChunkSplit split;
    const std::size_t n = series_length / chunk_length;
    split.complete.reserve(n);
    for (std::size_t c = 0; c < n; ++c) split.complete.push_back({c, c * chunk_length, (c + 1) * chunk_length});
    if (n * chunk_length < series_length) split.incomplete = ChunkIndex{n, n * chunk_length, series_length};
    return split;
}

ChunkSplit split_chunks(const TimeSeriesFrame& frame, std::size_t chunk_length) {
    return split_chunks(frame.size(), chunk_length);
}

Scaler::Scaler(Eigen::VectorXd means, Eigen::VectorXd stds) : means_(std::move(means)), stds_(std::move(stds)) {
    require(means_.size() == stds_.size(), ErrorKind::Shape, "scaler means/stds length mismatch");
    require((stds_.array() > 0.0).all() && stds_.allFinite() && means_.allFinite(), ErrorKind::Numeric,
            "scaler stds must be finite and strictly positive");
}

Scaler Scaler::identity(std::size_t features) {
    const auto n = static_cast<Eigen::Index>(features);
    return Scaler(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n));
}

Eigen::MatrixXd Scaler::apply(const Eigen::Ref<const Eigen::MatrixXd>& rows) const {
    require(rows.cols() == means_.size(), ErrorKind::Shape,
            "scaler expects " + std::to_string(means_.size()) + " columns, got " + std::to_string(rows.cols()));
    return (rows.rowwise() - means_.transpose()).array().rowwise() / stds_.transpose().array();
}

Eigen::MatrixXd Scaler::invert(const Eigen::Ref<const Eigen::MatrixXd>& rows) const {
    require(rows.cols() == means_.size(), ErrorKind::Shape,
            "scaler expects " + std::to_string(means_.size()) + " columns, got " + std::to_string(rows.cols()));
    return (rows.array().rowwise() * stds_.transpose().array()).rowwise() + means_.transpose().array();
}

Eigen::MatrixXd feature_rows(const TimeSeriesFrame& frame, std::size_t begin, std::size_t end) {
    require(begin <= end && end <= frame.size(), ErrorKind::Index, "feature row range out of bounds");
    const auto n = static_cast<Eigen::Index>(end - begin);
    const auto k = static_cast<Eigen::Index>(frame.covariate_count());
    Eigen::MatrixXd out(n, 1 + k);
    out.col(0) = frame.target().segment(static_cast<Eigen::Index>(begin), n);
    if (k > 0) out.rightCols(k) = frame.covariates().middleRows(static_cast<Eigen::Index>(begin), n);
    return out;
}

Scaler fit_scaler(const TimeSeriesFrame& frame, const ChunkIndex& range) {
    require(range.start < range.end && range.end <= frame.size(), ErrorKind::Index,
            "scaler range [" + std::to_string(range.start) + ", " + std::to_string(range.end) +
                ") out of bounds for length " + std::to_string(frame.size()));
    require(range.length() >= 2, ErrorKind::Index, "scaler range must hold at least two rows");
    const Eigen::MatrixXd rows = feature_rows(frame, range.start, range.end);
    const double n = static_cast<double>(rows.rows());
    Eigen::VectorXd means = rows.colwise().sum().transpose() / n;
    Eigen::VectorXd stds(means.size());
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const double var = (rows.col(j).array() - means[j]).square().sum() / n;
        stds[j] = std::max(std::sqrt(var), kStdFloor);
    }
    return Scaler(std::move(means), std::move(stds));
}

}  // namespace rewts
