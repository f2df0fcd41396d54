#pragma once

// Brute-force reference for small standard-form LPs: every basis of m
// columns is tried and the best feasible basic solution kept.

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/LU>

#include "rsddp/model.hpp"

namespace rsddp::testing {

struct VertexOptimum {
    double objective = std::numeric_limits<double>::infinity();
    Vector y;
};

inline std::optional<VertexOptimum> enumerate_vertices(const Vector& c, const Matrix& A, const Vector& b,
                                                       double tol = 1e-9) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    std::optional<VertexOptimum> best;
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (;;) {
        Matrix Bm(m, m);
        for (int i = 0; i < m; ++i) Bm.col(i) = A.col(idx[static_cast<std::size_t>(i)]);
        Eigen::FullPivLU<Matrix> lu(Bm);
        if (lu.rank() == m) {
            const Vector xb = lu.solve(b);
            if (xb.minCoeff() >= -tol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
                Vector y = Vector::Zero(n);
                for (int i = 0; i < m; ++i) y[idx[static_cast<std::size_t>(i)]] = std::max(0.0, xb[i]);
                const double obj = c.dot(y);
                if (!best || obj < best->objective) best = VertexOptimum{obj, y};
            }
        }
        int k = m - 1;
        while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - m + k) --k;
        if (k < 0) break;
        ++idx[static_cast<std::size_t>(k)];
        for (int j = k + 1; j < m; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

/// Random bounded LP with m rows (the last one a budget row with its own
/// slack) and n columns.
struct RandomLp {
    Vector c;
    Matrix A;
    Vector b;
};

inline RandomLp random_bounded_lp(Rng& rng, int m, int n, bool feasible = true) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RandomLp lp;
    lp.A = Matrix::Zero(m, n);
    for (int i = 0; i < m - 1; ++i)
        for (int j = 0; j < n - 1; ++j) lp.A(i, j) = std::round(u(rng) * 5.0);
    for (int j = 0; j < n; ++j) lp.A(m - 1, j) = 1.0;
    lp.c.resize(n);
    for (int j = 0; j < n - 1; ++j) lp.c[j] = std::round(u(rng) * 10.0);
    lp.c[n - 1] = 0.0;
    Vector x0 = Vector::Zero(n - 1);
    for (int j = 0; j < n - 1; ++j) x0[j] = (u(rng) + 1.0) * 0.5;
    lp.b.resize(m);
    lp.b.head(m - 1) = lp.A.topLeftCorner(m - 1, n - 1) * x0;
    lp.b[m - 1] = x0.sum() + 1.0;
    if (!feasible) lp.b[m - 1] = -1.0;
    return lp;
}

}  // namespace rsddp::testing
