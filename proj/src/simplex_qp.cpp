#include "rewts/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace rewts {
namespace {

constexpr double kZeroWeight = 1e-12;

double problem_scale(const SimplexQP& qp) {
    double s = 1.0;
    if (qp.Q.size() > 0) s = std::max(s, qp.Q.cwiseAbs().maxCoeff());
    if (qp.c.size() > 0) s = std::max(s, qp.c.cwiseAbs().maxCoeff());
    return s;
}

void clamp_and_normalise(Eigen::VectorXd& w) {
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w[j] < kZeroWeight) w[j] = 0.0;
    const double sum = w.sum();
    if (sum > 0.0) w /= sum;
}

/// Stationary point of the QP restricted to `support` with the equality
/// constraint; false when the reduced KKT system cannot be solved.
bool solve_on_support(const SimplexQP& qp, const std::vector<Eigen::Index>& support, Eigen::VectorXd& x) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs(k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) K(a, b) = qp.Q(support[a], support[b]);
        K(a, k) = 1.0;
        K(k, a) = 1.0;
        rhs[a] = qp.c[support[a]];
    }
    rhs[k] = 1.0;
    Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const double tol = 1e-10 * std::max(1.0, rhs.cwiseAbs().maxCoeff()) * std::max(1.0, K.cwiseAbs().maxCoeff());
    if (!sol.allFinite() || (K * sol - rhs).cwiseAbs().maxCoeff() > tol) {
        sol = K.completeOrthogonalDecomposition().solve(rhs);
        if (!sol.allFinite() || (K * sol - rhs).cwiseAbs().maxCoeff() > tol) return false;
    }
    x = sol.head(k);
    return true;
}

/// Primal active-set iterations from a feasible point.
std::size_t polish_active_set(const SimplexQP& qp, Eigen::VectorXd& w, double add_tol) {
    const Eigen::Index m = qp.m();
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < m; ++j)
        if (w[j] > kZeroWeight) support.push_back(j);
        else w[j] = 0.0;
    w /= w.sum();

    const std::size_t max_steps = 4 * static_cast<std::size_t>(m) + 20;
    std::size_t steps = 0;
    Eigen::VectorXd x;
    while (steps < max_steps) {
        ++steps;
        if (!solve_on_support(qp, support, x)) break;
        double alpha = 1.0;
        std::size_t blocking = support.size();
        for (std::size_t a = 0; a < support.size(); ++a) {
            const double wj = w[support[a]];
            const double pj = x[static_cast<Eigen::Index>(a)] - wj;
            if (pj < 0.0 && x[static_cast<Eigen::Index>(a)] < 0.0) {
                const double step = wj / -pj;
                if (step < alpha) {
                    alpha = step;
                    blocking = a;
                }
            }
        }
        for (std::size_t a = 0; a < support.size(); ++a)
            w[support[a]] += alpha * (x[static_cast<Eigen::Index>(a)] - w[support[a]]);
        if (blocking < support.size()) {
            w[support[blocking]] = 0.0;
            support.erase(support.begin() + static_cast<std::ptrdiff_t>(blocking));
            for (auto it = support.begin(); it != support.end();) {
                if (w[*it] <= 0.0) {
                    w[*it] = 0.0;
                    it = support.erase(it);
                } else {
                    ++it;
                }
            }
            w /= w.sum();
            continue;
        }
        const Eigen::VectorXd g = qp.Q * w - qp.c;
        double mu = 0.0;
        for (auto j : support) mu += g[j];
        mu /= static_cast<double>(support.size());
        Eigen::Index enter = -1;
        double worst = -add_tol;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (std::find(support.begin(), support.end(), j) != support.end()) continue;
            if (g[j] - mu < worst) {
                worst = g[j] - mu;
                enter = j;
            }
        }
        if (enter < 0) break;
        support.insert(std::upper_bound(support.begin(), support.end(), enter), enter);
    }
    return steps;
}

}  // namespace

SimplexQP assemble_qp(const std::vector<Eigen::MatrixXd>& forecast_mats, const std::vector<Eigen::VectorXd>& targets,
                      std::optional<double> ridge_eps) {
    require(!forecast_mats.empty(), ErrorKind::Parameter, "assemble_qp needs at least one anchor");
    require(forecast_mats.size() == targets.size(), ErrorKind::Shape, "forecast and target lists differ in length");
    const Eigen::Index h = forecast_mats.front().rows();
    const Eigen::Index m = forecast_mats.front().cols();
    require(m >= 1 && h >= 1, ErrorKind::Shape, "forecast matrices must be non-empty");
    SimplexQP qp;
    qp.Q = Eigen::MatrixXd::Zero(m, m);
    qp.c = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < forecast_mats.size(); ++k) {
        const auto& M = forecast_mats[k];
        require(M.rows() == h && M.cols() == m && targets[k].size() == h, ErrorKind::Shape,
                "anchor " + std::to_string(k) + ": forecast matrix / target shape mismatch");
        qp.Q.noalias() += M.transpose() * M;
        qp.c.noalias() += M.transpose() * targets[k];
    }
    qp.Q = 0.5 * (qp.Q + qp.Q.transpose());
    qp.ridge_eps = ridge_eps ? *ridge_eps : 1e-8 * qp.Q.trace() / static_cast<double>(m);
    require(qp.ridge_eps >= 0.0, ErrorKind::Parameter, "ridge_eps must be >= 0");
    qp.Q.diagonal().array() += qp.ridge_eps;
    return qp;
}

Eigen::VectorXd project_to_simplex(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumsum += u[static_cast<std::size_t>(i)];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0);
}

double power_iteration(const Eigen::Ref<const Eigen::MatrixXd>& A, std::size_t iterations) {
    const Eigen::Index n = A.rows();
    if (n == 0) return 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    // Deterministic perturbation so x is not orthogonal to the top eigenvector
    // of structured matrices.
    for (Eigen::Index i = 0; i < n; ++i) x[i] += 1e-3 * static_cast<double>(i % 7);
    x.normalize();
    double lambda = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        Eigen::VectorXd y = A * x;
        const double norm = y.norm();
        if (norm == 0.0) return 0.0;
        lambda = x.dot(y);
        x = y / norm;
    }
    return std::max(lambda, (A * x).norm());
}

double kkt_residual(const SimplexQP& qp, const Eigen::Ref<const Eigen::VectorXd>& w, double support_tol) {
    const Eigen::VectorXd g = qp.Q * w - qp.c;
    double mu = 0.0;
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w[j] > support_tol) {
            mu += g[j];
            ++count;
        }
    }
    if (count == 0) return std::numeric_limits<double>::infinity();
    mu /= static_cast<double>(count);
    double residual = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        const double v = w[j] > support_tol ? std::abs(g[j] - mu) : std::max(0.0, mu - g[j]);
        residual = std::max(residual, v);
    }
    return residual;
}

WeightVector solve_simplex_qp(const SimplexQP& qp, const QpSolverOptions& options) {
    const Eigen::Index m = qp.m();
    require(m >= 1, ErrorKind::Parameter, "QP has no variables");
    require(qp.Q.rows() == m && qp.Q.cols() == m, ErrorKind::Shape, "Q must be m x m");
    require(qp.Q.allFinite() && qp.c.allFinite(), ErrorKind::Numeric, "QP data must be finite");

    WeightVector out;
    if (m == 1) {
        out.w = Eigen::VectorXd::Ones(1);
        out.diagnostics.objective = qp.objective(out.w);
        return out;
    }

    const double scale = problem_scale(qp);
    const double tol = options.tol * scale;
    double lipschitz = power_iteration(qp.Q);
    if (!(lipschitz > 0.0)) lipschitz = 1.0;
    const double step = 1.0 / lipschitz;

    Eigen::VectorXd w = options.initial ? project_to_simplex(*options.initial)
                                        : Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    Eigen::VectorXd y = w;
    double t = 1.0;
    double f_prev = qp.objective(w);
    std::size_t iter = 0;
    while (iter < options.max_iter) {
        ++iter;
        const Eigen::VectorXd g = qp.Q * y - qp.c;
        Eigen::VectorXd w_next = project_to_simplex(y - step * g);
        const double f_next = qp.objective(w_next);
        if (f_next > f_prev) {
            // Adaptive restart: drop momentum and take a plain projected step.
            t = 1.0;
            y = w;
            w_next = project_to_simplex(w - step * (qp.Q * w - qp.c));
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = (w_next - w).cwiseAbs().maxCoeff();
        y = w_next + ((t - 1.0) / t_next) * (w_next - w);
        w = std::move(w_next);
        t = t_next;
        f_prev = qp.objective(w);
        if (change == 0.0 || (iter % 10 == 0 && kkt_residual(qp, w) <= 0.1 * tol)) break;
    }

    Eigen::VectorXd polished = w;
    out.diagnostics.active_set_steps = polish_active_set(qp, polished, 0.1 * tol);
    clamp_and_normalise(polished);
    clamp_and_normalise(w);
    const double r_pg = kkt_residual(qp, w);
    const double r_as = kkt_residual(qp, polished);
    const bool use_polished = r_as <= r_pg;
    out.w = use_polished ? polished : w;
    out.diagnostics.iterations = iter;
    out.diagnostics.kkt_residual = use_polished ? r_as : r_pg;
    out.diagnostics.objective = qp.objective(out.w);
    if (!(out.diagnostics.kkt_residual <= tol))
        throw QpConvergenceError("simplex QP did not reach KKT tolerance (residual " +
                                     std::to_string(out.diagnostics.kkt_residual) + ", tol " + std::to_string(tol) +
                                     ")",
                                 out.diagnostics);
    return out;
}

nlohmann::json debug_json(const SimplexQP& qp, const WeightVector& w) {
    nlohmann::json Q = nlohmann::json::array();
    for (Eigen::Index i = 0; i < qp.Q.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(qp.Q.cols()));
        for (Eigen::Index j = 0; j < qp.Q.cols(); ++j) row[static_cast<std::size_t>(j)] = qp.Q(i, j);
        Q.push_back(row);
    }
    return {{"Q", Q},
            {"c", std::vector<double>(qp.c.data(), qp.c.data() + qp.c.size())},
            {"ridge_eps", qp.ridge_eps},
            {"w", std::vector<double>(w.w.data(), w.w.data() + w.w.size())},
            {"kkt_residual", w.diagnostics.kkt_residual},
            {"objective", w.diagnostics.objective},
            {"iterations", w.diagnostics.iterations}};
}

}  // namespace rewts
