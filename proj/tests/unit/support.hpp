#pragma once

#include "rewts/forecasters.hpp"
#include "rewts/timeseries.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

namespace testing {

// Seeded generators for the property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }

    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }
    Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
        return m;
    }
    /// AR(2) with a little noise: stable, forecastable.
    Eigen::VectorXd ar_series(std::size_t n, double noise = 0.05) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        const double theta = uniform(0.05, 0.3);
        const double a1 = 2.0 * std::cos(theta) * 0.99, a2 = -0.98;
        y[0] = normal();
        if (n > 1) y[1] = normal();
        for (Eigen::Index t = 2; t < y.size(); ++t) y[t] = a1 * y[t - 1] + a2 * y[t - 2] + noise * normal();
        return y;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) return false;
    return true;
}

}  // namespace testing
