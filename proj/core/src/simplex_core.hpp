#pragma once

#include <vector>

#include "rsddp/subproblem.hpp"

namespace rsddp {

/// Basis bookkeeping shared by the LP (simplex) and QP (active-set) paths.
///
/// Columns 0..n-1 are the structural columns of A. Row i also owns an
/// artificial column sign_i * e_i, encoded in the basis as -(i + 1). In
/// phase 2 artificials are fixed at zero and never re-enter.
/// Power-of-two equilibration: the solver works on diag(row) A diag(col).
struct Scaling {
    Vector row;
    Vector col;
};

/// Geometric-mean row and column scaling, rounded to powers of two. With
/// columns == false only the rows are equilibrated.
Scaling compute_scaling(const Matrix& A, bool columns = true);
SubproblemSpec apply_scaling(const SubproblemSpec& spec, const Scaling& sc);
/// Maps a solution of the scaled spec back to the original one.
void unscale_solution(SubproblemSolution& sol, const SubproblemSpec& spec, const Scaling& sc);

class SimplexCore {
public:
    enum class Outcome { Optimal, Unbounded, Infeasible };

    /// `spec` is already scaled by `scaling`, which must outlive the core.
    SimplexCore(const SubproblemSpec& spec, const SolverOptions& options, const Vector& cost,
                const Scaling& scaling);

    int m() const { return m_; }
    int n() const { return n_; }

    /// Loads the caller's basis if it is compatible with this spec.
    bool load_warm(const WarmStart& warm);
    void store_warm(WarmStart& warm) const;
    /// Crash basis from singleton columns, artificials elsewhere.
    void cold_start();

    /// Finds a primal feasible basis from whatever basis is loaded.
    /// Returns false if the problem is infeasible.
    bool make_feasible(bool warm_loaded);

    /// Primal simplex on the phase-2 cost from a feasible basis.
    Outcome optimize();

    Vector solution() const;
    /// Simplex multipliers for the given cost vector (artificial cost 0).
    Vector multipliers(const Vector& cost) const;

    /// Throws NumericalBreakdown if the basis is singular.
    void refactor();
    /// Applies one basis change: column `entering` replaces row `row`;
    /// `dir` must be B^{-1} a_entering. Returns false, with the basis left
    /// as it was, when the exchange would make the basis singular.
    bool pivot(int row, int entering, const Vector& dir);
    Vector ftran(int column) const;
    /// B^{-1} r
    Vector solve_basis(const Vector& r) const { return binv_ * r; }
    /// Row i of B^{-1}.
    Vector solve_basis_row(int i) const { return binv_.row(i).transpose(); }
    double column_dot(int column, const Vector& v) const;
    void recompute_primal();

    bool is_artificial(int b) const { return b < 0; }
    bool has_artificial_basic() const;

    // Exposed to the active-set QP.
    std::vector<int> basic_;
    std::vector<int> position_;  // structural column -> basis row, -1 if nonbasic
    Vector xb_;
    int iterations_ = 0;

private:
    bool try_refactor();
    Outcome primal(bool phase1);
    Outcome dual(double tol);
    void drive_out_artificials();
    Vector reduced_costs(const Vector& mu) const;

    std::uint64_t original_fingerprint(int rows, int cols) const;

    const Matrix& A_;
    const Vector& b_;
    const Scaling& scaling_;
    const SolverOptions& options_;
    Vector cost_;       // phase-2 cost, possibly shifted during the dual phase
    Vector true_cost_;  // phase-2 cost as given
    std::vector<double> sign_;
    Matrix binv_;
    int m_;
    int n_;
    int updates_ = 0;
    int last_rank_ = 0;
    double opt_tol_;
    double feas_tol_;
};

std::uint64_t fingerprint(const Matrix& A, int rows, int cols);

using ScaledSolve = SubproblemSolution (*)(const SubproblemSpec&, const Scaling&, const SolverOptions&, WarmStart*);

/// Solves with full scaling; a breakdown, an infeasible verdict or a failed
/// residual check triggers a cold retry with row scaling only.
SubproblemSolution solve_with_fallback(const SubproblemSpec& spec, const SolverOptions& options, WarmStart* warm,
                                       ScaledSolve solve);

}  // namespace rsddp
