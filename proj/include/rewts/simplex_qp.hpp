#pragma once

#include "rewts/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace rewts {

/// min 1/2 w'Qw - c'w  subject to  w >= 0, sum(w) = 1.
struct SimplexQP {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    double ridge_eps = 0.0;

    [[nodiscard]] Eigen::Index m() const noexcept { return c.size(); }
    [[nodiscard]] double objective(const Eigen::Ref<const Eigen::VectorXd>& w) const {
        return 0.5 * w.dot(Q * w) - c.dot(w);
    }
};

struct SolveDiagnostics {
    std::size_t iterations = 0;
    std::size_t active_set_steps = 0;
    double kkt_residual = 0.0;
    double objective = 0.0;
};

class QpConvergenceError : public Error {
public:
    QpConvergenceError(const std::string& what, SolveDiagnostics diagnostics)
        : Error(ErrorKind::Convergence, what), diagnostics_(diagnostics) {}

    [[nodiscard]] const SolveDiagnostics& diagnostics() const noexcept { return diagnostics_; }

private:
    SolveDiagnostics diagnostics_;
};

struct WeightVector {
    Eigen::VectorXd w;
    SolveDiagnostics diagnostics;
};

/// Q = sum_k M_k' M_k + ridge I and c = sum_k M_k' y_k over the look-back
/// anchors, each M_k being h x m. Without an explicit ridge the default
/// 1e-8 * trace(Q) / m is used. Summation follows list order.
SimplexQP assemble_qp(const std::vector<Eigen::MatrixXd>& forecast_mats, const std::vector<Eigen::VectorXd>& targets,
                      std::optional<double> ridge_eps = std::nullopt);

/// Euclidean projection of `v` onto the probability simplex (sort-based).
Eigen::VectorXd project_to_simplex(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration(const Eigen::Ref<const Eigen::MatrixXd>& A, std::size_t iterations = 100);

/// KKT violation of a simplex point. With g = Qw - c and mu the mean of g
/// over the support {w_j > support_tol}, returns the largest of
/// |g_j - mu| on the support and max(0, mu - g_j) off it.
double kkt_residual(const SimplexQP& qp, const Eigen::Ref<const Eigen::VectorXd>& w, double support_tol = 1e-10);

struct QpSolverOptions {
    /// KKT tolerance, relative to max(1, max|Q|, max|c|).
    double tol = 1e-9;
    std::size_t max_iter = 5000;
    /// Optional feasible starting point.
    std::optional<Eigen::VectorXd> initial;
};

/// Accelerated projected gradient (step 1/lambda_max(Q)) followed by a primal
/// active-set pass that polishes the support. Weights below 1e-12 are zeroed
/// and the vector renormalised. Throws a convergence error carrying the
/// diagnostics when the KKT residual stays above tolerance.
WeightVector solve_simplex_qp(const SimplexQP& qp, const QpSolverOptions& options = {});

nlohmann::json debug_json(const SimplexQP& qp, const WeightVector& w);

}  // namespace rewts
