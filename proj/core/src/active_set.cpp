// Primal active-set QP in reduced-gradient form.
//
// Variables are split into basic (B, a nonsingular simplex basis), superbasic
// (S, free to move) and nonbasic (N, fixed at zero). Search directions live in
// the null space of the equality system:
//
//     p_S free,   p_B = -B^{-1} A_S p_S,   p_N = 0.
//
// The quadratic term has the rank of the resource map, so the superbasic set
// and with it the reduced Hessian stay small.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rsddp/errors.hpp"
#include "simplex_core.hpp"

namespace rsddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDegenerateSwitch = 50;
constexpr int kStallLimit = 200;
constexpr double kZeroCurvature = 1e-13;

void check_quadratic(const SubproblemSpec& spec) {
    const auto& quad = *spec.quad;
    if (!(quad.rho >= 0.0) || !std::isfinite(quad.rho)) {
        throw InvalidArgument("solve_qp: rho must be a finite non-negative number");
    }
    if (quad.H.rows() != quad.H.cols() || quad.H.rows() > spec.cols()) {
        throw DimensionMismatch("solve_qp: H must be square and no larger than the variable count");
    }
    if (quad.H.size() == 0) return;
    const double scale = std::max(1.0, quad.H.cwiseAbs().maxCoeff());
    if ((quad.H - quad.H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidArgument("solve_qp: H is not symmetric");
    }
    Eigen::LDLT<Matrix> ldlt(quad.H);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-10 * scale) {
        throw InvalidArgument("solve_qp: H is not positive semidefinite");
    }
}

SubproblemSolution solve_scaled_qp(const SubproblemSpec& spec, const Scaling& sc, const SolverOptions& options,
                                   WarmStart* warm) {
    const double rho = spec.quad->rho;
    const Matrix& H = spec.quad->H;
    const int q = static_cast<int>(H.rows());
    const int m = spec.rows();
    const int n = spec.cols();

    // Feasible start: the vertex of the linear part, or the last feasible
    // vertex when the linear part alone is unbounded.
    SubproblemSolution sol;
    SimplexCore core(spec, options, spec.c, sc);
    bool warm_loaded = false;
    if (warm != nullptr) {
        try {
            warm_loaded = core.load_warm(*warm);
        } catch (const NumericalBreakdown&) {
            warm_loaded = false;
        }
    }
    bool feasible = false;
    try {
        feasible = core.make_feasible(warm_loaded);
    } catch (const NumericalBreakdown&) {
        if (!warm_loaded) throw;
        feasible = core.make_feasible(false);
    }
    if (!feasible && warm_loaded) feasible = core.make_feasible(false);
    if (!feasible) {
        sol.status = SolveStatus::Infeasible;
        if (warm) warm->clear();
        return sol;
    }
    core.optimize();
    core.recompute_primal();
    if (warm) core.store_warm(*warm);

    Vector y = core.solution();
    std::vector<int> super;
    std::vector<char> in_super(static_cast<std::size_t>(n), 0);

    // y_B = B^{-1} (rhs - A_S y_S), refined once.
    auto refresh_basic_values = [&]() {
        Vector r = spec.rhs;
        for (int s : super) r.noalias() -= spec.A.col(s) * y[s];
        Vector xb = core.solve_basis(r);
        Vector res = r;
        for (int i = 0; i < m; ++i) {
            const int col = core.basic_[static_cast<std::size_t>(i)];
            if (col >= 0) res.noalias() -= spec.A.col(col) * xb[i];
        }
        xb.noalias() += core.solve_basis(res);
        for (int i = 0; i < m; ++i) {
            const int col = core.basic_[static_cast<std::size_t>(i)];
            if (col >= 0) y[col] = xb[i];
        }
    };

    auto gradient = [&]() {
        Vector g = spec.c;
        if (q > 0) g.head(q).noalias() += rho * (H * y.head(q));
        return g;
    };

    const int max_iter = 20 * (n + m) + 1000;
    const double feas_tol = 1e-9;
    bool unbounded = false;
    bool at_subspace_min = false;  // last step was an unblocked Newton step
    int degenerate = 0;
    int stalled = 0;
    double best_obj = kInf;
    int iter = 0;
    for (;; ++iter) {
        if (iter > max_iter) throw NumericalBreakdown("active-set iteration limit reached");
        // On a badly conditioned basis the reduced gradient can stay above
        // tolerance while the objective no longer moves; stop there.
        const double obj = evaluate_objective(spec, y);
        if (obj < best_obj - 1e-12 * std::max(1.0, std::abs(obj))) {
            best_obj = obj;
            stalled = 0;
        } else if (++stalled > kStallLimit) {
            break;
        }

        const Vector g = gradient();
        const Vector pi = core.multipliers(g);
        const double tol_g = 1e-9 * std::max(1.0, g.lpNorm<Eigen::Infinity>());

        Vector dS(static_cast<Eigen::Index>(super.size()));
        for (std::size_t k = 0; k < super.size(); ++k) {
            const int s = super[k];
            dS[static_cast<Eigen::Index>(k)] = g[s] - spec.A.col(s).dot(pi);
        }
        int entered = -1;
        if (dS.size() == 0 || at_subspace_min || dS.lpNorm<Eigen::Infinity>() <= tol_g) {
            // Dantzig pricing, or the lowest index after a run of degenerate steps.
            const bool bland = degenerate > kDegenerateSwitch;
            int entering = -1;
            double best = -tol_g;
            for (int j = 0; j < n; ++j) {
                if (core.position_[static_cast<std::size_t>(j)] >= 0 || in_super[static_cast<std::size_t>(j)]) continue;
                const double dj = g[j] - spec.A.col(j).dot(pi);
                if (dj < best) {
                    best = dj;
                    entering = j;
                    if (bland) break;
                }
            }
            if (entering < 0) break;
            super.push_back(entering);
            in_super[static_cast<std::size_t>(entering)] = 1;
            dS.conservativeResize(dS.size() + 1);
            dS[dS.size() - 1] = best;
            entered = static_cast<int>(dS.size()) - 1;
        }

        const int ns = static_cast<int>(super.size());
        Matrix W(m, ns);
        for (int k = 0; k < ns; ++k) W.col(k) = core.ftran(super[static_cast<std::size_t>(k)]);

        // Leading-block rows of the null-space basis Z.
        Matrix Zq = Matrix::Zero(q, ns);
        for (int i = 0; i < m; ++i) {
            const int col = core.basic_[static_cast<std::size_t>(i)];
            if (col >= 0 && col < q) Zq.row(col) = -W.row(i);
        }
        for (int k = 0; k < ns; ++k) {
            const int s = super[static_cast<std::size_t>(k)];
            if (s < q) Zq(s, k) += 1.0;
        }
        Matrix RH = rho * (Zq.transpose() * (H * Zq));
        RH = 0.5 * (RH + RH.transpose()).eval();

        Eigen::SelfAdjointEigenSolver<Matrix> eig(RH);
        const Vector& lam = eig.eigenvalues();
        const Matrix& V = eig.eigenvectors();
        const double lam_scale = std::max(1.0, lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0);
        const Vector a = V.transpose() * dS;

        Vector pS = Vector::Zero(ns);
        double null_descent = 0.0;
        for (int k = 0; k < ns; ++k) {
            if (lam[k] <= kZeroCurvature * lam_scale) null_descent += a[k] * a[k];
        }
        double alpha_max = 1.0;
        bool newton = null_descent <= tol_g * tol_g;
        if (!newton) {
            // Zero-curvature descent: follow it until a bound blocks.
            for (int k = 0; k < ns; ++k)
                if (lam[k] <= kZeroCurvature * lam_scale) pS.noalias() -= a[k] * V.col(k);
            const double slope = dS.dot(pS);
            const double curv = pS.dot(RH * pS);
            alpha_max = curv > 1e-14 * std::abs(slope) ? -slope / curv : kInf;
        } else {
            for (int k = 0; k < ns; ++k)
                if (lam[k] > kZeroCurvature * lam_scale) pS.noalias() -= (a[k] / lam[k]) * V.col(k);
        }
        if (entered >= 0 && pS[entered] <= 1e-12 * std::max(1.0, pS.lpNorm<Eigen::Infinity>())) {
            // The subspace step would push the new column below zero; move it alone.
            pS.setZero();
            pS[entered] = 1.0;
            const double curv = RH(entered, entered);
            alpha_max = curv > 1e-14 * std::abs(dS[entered]) ? -dS[entered] / curv : kInf;
            newton = false;
        }
        const Vector pB = -(W * pS);

        const double ptiny = 1e-11 * std::max(1.0, std::max(pS.lpNorm<Eigen::Infinity>(),
                                                            pB.size() ? pB.lpNorm<Eigen::Infinity>() : 0.0));
        // Blocking candidates: (row, superbasic slot, rate of decrease, value).
        struct Block {
            int row;
            int slot;
            int key;
            double rate;
            double value;
        };
        std::vector<Block> blocks;
        for (int i = 0; i < m; ++i) {
            const int col = core.basic_[static_cast<std::size_t>(i)];
            if (col < 0) {
                if (std::abs(pB[i]) > ptiny) blocks.push_back({i, -1, -1, std::abs(pB[i]), 0.0});
            } else if (pB[i] < -ptiny) {
                blocks.push_back({i, -1, col, -pB[i], std::max(y[col], 0.0)});
            }
        }
        for (int k = 0; k < ns; ++k) {
            const int s = super[static_cast<std::size_t>(k)];
            if (pS[k] < -ptiny) blocks.push_back({-1, k, s, -pS[k], std::max(y[s], 0.0)});
        }
        // Harris: a bound relaxed by the feasibility tolerance, then the
        // largest rate among candidates that block within it.
        double relaxed = alpha_max;
        for (const auto& bk : blocks) relaxed = std::min(relaxed, (bk.value + feas_tol) / bk.rate);
        double alpha = alpha_max;
        int block_row = -1;    // basic row that blocks
        int block_super = -1;  // superbasic slot that blocks
        double best_rate = 0.0;
        int best_key = 0;
        for (const auto& bk : blocks) {
            const double ratio = bk.value / bk.rate;
            if (ratio > relaxed) continue;
            const bool better = (block_row < 0 && block_super < 0) || bk.rate > best_rate * (1.0 + 1e-12) ||
                                (bk.rate >= best_rate * (1.0 - 1e-12) && bk.key < best_key);
            if (better) {
                alpha = ratio;
                block_row = bk.row;
                block_super = bk.slot;
                best_rate = bk.rate;
                best_key = bk.key;
            }
        }
        if (alpha == kInf) {
            unbounded = true;
            break;
        }

        at_subspace_min = newton && block_row < 0 && block_super < 0;
        if (alpha * std::max(pS.lpNorm<Eigen::Infinity>(), pB.size() ? pB.lpNorm<Eigen::Infinity>() : 0.0) > feas_tol)
            degenerate = 0;
        else
            ++degenerate;
        for (int k = 0; k < ns; ++k) y[super[static_cast<std::size_t>(k)]] += alpha * pS[k];
        for (int i = 0; i < m; ++i) {
            const int col = core.basic_[static_cast<std::size_t>(i)];
            if (col >= 0) y[col] += alpha * pB[i];
        }

        if (block_super >= 0) {
            const int s = super[static_cast<std::size_t>(block_super)];
            y[s] = 0.0;
            in_super[static_cast<std::size_t>(s)] = 0;
            super.erase(super.begin() + block_super);
        } else if (block_row >= 0) {
            // Swap the blocking basic variable for the superbasic with the
            // largest pivot in its row; failing that, for a nonbasic column
            // entering at zero.
            const int leaving = core.basic_[static_cast<std::size_t>(block_row)];
            int best_k = -1;
            double best_piv = 0.0;
            for (int k = 0; k < ns; ++k) {
                const double v = std::abs(W(block_row, k));
                if (v > best_piv * (1.0 + 1e-12)) {
                    best_piv = v;
                    best_k = k;
                }
            }
            bool swapped = false;
            if (best_k >= 0 && best_piv > 1e-11 * std::max(1.0, W.col(best_k).lpNorm<Eigen::Infinity>())) {
                const int s = super[static_cast<std::size_t>(best_k)];
                swapped = core.pivot(block_row, s, W.col(best_k));
                if (swapped) {
                    in_super[static_cast<std::size_t>(s)] = 0;
                    super.erase(super.begin() + best_k);
                }
            }
            if (!swapped) {
                // The replacement must grow along the step, so that the
                // blocking variable can rest at zero.
                const Vector row = core.solve_basis_row(block_row);
                const double sgn = pB[block_row] < 0.0 ? 1.0 : -1.0;
                int best_j = -1;
                double best_rel = 1e-9;
                for (int j = 0; j < n; ++j) {
                    if (core.position_[static_cast<std::size_t>(j)] >= 0 || in_super[static_cast<std::size_t>(j)]) continue;
                    const double v = -sgn * spec.A.col(j).dot(row);
                    if (v > best_rel * (1.0 + 1e-12)) {
                        best_rel = v;
                        best_j = j;
                    }
                }
                if (best_j >= 0 && core.pivot(block_row, best_j, core.ftran(best_j))) {
                } else {
                    throw NumericalBreakdown("active-set: no column can replace a blocking basic variable");
                }
            }
            if (leaving >= 0) y[leaving] = 0.0;
        }
        refresh_basic_values();
        for (int j = 0; j < n; ++j)
            if (y[j] < 0.0 && y[j] > -1e-9 * std::max(1.0, std::abs(y[j]))) y[j] = 0.0;
    }

    refresh_basic_values();
    for (int j = 0; j < n; ++j)
        if (y[j] < 0.0 && y[j] > -1e-9) y[j] = 0.0;

    const Vector g = gradient();
    sol.status = unbounded ? SolveStatus::Unbounded : SolveStatus::Optimal;
    sol.y = y;
    sol.duals = core.multipliers(g);
    sol.reduced_costs = g - spec.A.transpose() * sol.duals;
    for (int i = 0; i < m; ++i) {
        const int col = core.basic_[static_cast<std::size_t>(i)];
        if (col >= 0) sol.reduced_costs[col] = 0.0;
    }
    sol.objective = evaluate_objective(spec, y);
    sol.basis = core.basic_;
    sol.is_basic_dual = false;
    sol.iterations = core.iterations_ + iter;
    return sol;
}

}  // namespace

SubproblemSolution solve_qp(const SubproblemSpec& spec, const SolverOptions& options, WarmStart* warm) {
    if (!spec.quad || spec.quad->rho == 0.0) return solve_lp(spec, options, warm);
    if (spec.rhs.size() != spec.rows() || spec.c.size() != spec.cols()) {
        throw DimensionMismatch("solve_qp: inconsistent spec dimensions");
    }
    check_quadratic(spec);
    SubproblemSolution sol = solve_with_fallback(spec, options, warm, solve_scaled_qp);
    if (!options.dump_path.empty() &&
        (sol.status == SolveStatus::Infeasible ||
         (sol.status == SolveStatus::Optimal && !verify_residuals(sol, spec, options.eps_f)))) {
        dump_subproblem(spec, &sol, options.dump_path);
    }
    return sol;
}

}  // namespace rsddp
