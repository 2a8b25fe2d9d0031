#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rewts {

/// Equidistant multivariate series: one target column plus K covariates.
///
/// Ticks are integer indices starting at `start_index`; `step` is the
/// abstract time delta between consecutive ticks. Instances are immutable
/// once constructed and validate their invariants on construction (aligned
/// lengths, finite values).
class TimeSeriesFrame {
public:
    TimeSeriesFrame() = default;

    TimeSeriesFrame(Eigen::VectorXd target, Eigen::MatrixXd covariates, std::vector<bool> future_known,
                    double step = 1.0, std::int64_t start_index = 0);

    /// Univariate convenience constructor (K = 0).
    explicit TimeSeriesFrame(Eigen::VectorXd target, double step = 1.0, std::int64_t start_index = 0);

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(target_.size()); }
    [[nodiscard]] std::size_t covariate_count() const noexcept {
        return static_cast<std::size_t>(covariates_.cols());
    }
    [[nodiscard]] std::int64_t start_index() const noexcept { return start_index_; }
    [[nodiscard]] double step() const noexcept { return step_; }
    [[nodiscard]] const Eigen::VectorXd& target() const noexcept { return target_; }
    [[nodiscard]] const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
    [[nodiscard]] const std::vector<bool>& future_known() const noexcept { return future_known_; }

    /// Indices of the covariates whose future values are known at forecast time.
    [[nodiscard]] std::vector<std::size_t> future_known_columns() const;

    /// Rows [begin, end) of the future-known covariates, h x K_known.
    [[nodiscard]] Eigen::MatrixXd known_future(std::size_t begin, std::size_t end) const;

    std::vector<std::string> covariate_names;
    std::string target_name = "y";

private:
    Eigen::VectorXd target_;
    Eigen::MatrixXd covariates_;
    std::vector<bool> future_known_;
    double step_ = 1.0;
    std::int64_t start_index_ = 0;
};

/// Half-open tick range [start, end) of one chunk.
struct ChunkIndex {
    std::size_t chunk_id = 0;
    std::size_t start = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t length() const noexcept { return end - start; }
    friend bool operator==(const ChunkIndex&, const ChunkIndex&) = default;
};

struct ChunkSplit {
    std::vector<ChunkIndex> complete;
    /// Trailing partial segment; never trained on until it fills.
    std::optional<ChunkIndex> incomplete;
};

ChunkSplit split_chunks(std::size_t series_length, std::size_t chunk_length);
ChunkSplit split_chunks(const TimeSeriesFrame& frame, std::size_t chunk_length);

inline constexpr double kStdFloor = 1e-8;

/// Per-feature z-score scaler over (target, covariates...).
class Scaler {
public:
    Scaler() = default;
    Scaler(Eigen::VectorXd means, Eigen::VectorXd stds);

    /// Scaler that leaves `features` columns untouched.
    static Scaler identity(std::size_t features);

    [[nodiscard]] std::size_t features() const noexcept { return static_cast<std::size_t>(means_.size()); }
    [[nodiscard]] const Eigen::VectorXd& means() const noexcept { return means_; }
    [[nodiscard]] const Eigen::VectorXd& stds() const noexcept { return stds_; }

    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;
    [[nodiscard]] Eigen::MatrixXd invert(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;

    [[nodiscard]] double apply_feature(std::size_t feature, double x) const noexcept {
        return (x - means_[static_cast<Eigen::Index>(feature)]) / stds_[static_cast<Eigen::Index>(feature)];
    }
    [[nodiscard]] double invert_feature(std::size_t feature, double z) const noexcept {
        return z * stds_[static_cast<Eigen::Index>(feature)] + means_[static_cast<Eigen::Index>(feature)];
    }

    friend bool operator==(const Scaler& a, const Scaler& b) {
        return a.means_ == b.means_ && a.stds_ == b.stds_;
    }

private:
    Eigen::VectorXd means_;
    Eigen::VectorXd stds_;
};

/// Population mean/std of every feature over `range`; std floored at kStdFloor.
Scaler fit_scaler(const TimeSeriesFrame& frame, const ChunkIndex& range);

/// The (target, covariates...) feature matrix of rows [begin, end).
Eigen::MatrixXd feature_rows(const TimeSeriesFrame& frame, std::size_t begin, std::size_t end);

}  // namespace rewts
