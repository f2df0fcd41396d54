#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsddp/model.hpp"

namespace rsddp {

/// (rho / 2) * y_q' H y_q acting on the leading H.rows() entries of y.
struct QuadraticTerm {
    double rho = 0.0;
    Matrix H;
};

/// min c'y + [quad] + offset  s.t.  A y = rhs,  y >= 0.
struct SubproblemSpec {
    Vector c;
    Matrix A;
    Vector rhs;
    std::optional<QuadraticTerm> quad;
    double offset = 0.0;

    int rows() const { return static_cast<int>(A.rows()); }
    int cols() const { return static_cast<int>(A.cols()); }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

const char* to_string(SolveStatus s);

struct SubproblemSolution {
    SolveStatus status = SolveStatus::Infeasible;
    Vector y;
    double objective = 0.0;
    Vector duals;          // mu, one per equality row
    Vector reduced_costs;  // lambda = c + rho H y - A' mu
    bool is_basic_dual = false;
    std::vector<int> basis;  // basic column per row; negative = artificial of row (-idx - 1)
    int iterations = 0;
};

struct SolverOptions {
    double eps_f = 1e-8;  // relative primal feasibility, ||Ay - rhs|| / (1 + ||rhs||)
    double eps_c = 1e-8;  // complementarity |y_i lambda_i|
    int refactor_interval = 100;
    int max_iterations = 200000;
    /// When non-empty, every solve that fails its checks writes spec and
    /// solution to this file.
    std::string dump_path;
};

/// Caller-owned simplex state reused across solves of structurally growing
/// subproblems (same leading block, rows and slack columns appended).
/// Not thread-safe; use one per worker slot.
class WarmStart {
public:
    bool empty() const { return basic_.empty(); }
    void clear();

private:
    friend class SimplexCore;
    std::vector<int> basic_;
    Matrix binv_;
    Vector row_scale_;
    Vector col_scale_;
    int rows_ = 0;
    int cols_ = 0;
    std::uint64_t fingerprint_ = 0;
    int updates_ = 0;
};

/// Revised simplex: dense LU refactorization, Dantzig pricing with a Bland
/// fallback under degeneracy, lowest-index ratio-test ties. Duals are basic.
/// Throws NumericalBreakdown when the basis cannot be factorized.
SubproblemSolution solve_lp(const SubproblemSpec& spec, const SolverOptions& options = {},
                            WarmStart* warm = nullptr);

/// Convex QP via a primal active-set (reduced-gradient) method started from
/// a feasible simplex vertex. A spec without quad, or with rho == 0, is
/// routed to solve_lp.
SubproblemSolution solve_qp(const SubproblemSpec& spec, const SolverOptions& options = {},
                            WarmStart* warm = nullptr);

/// ||A y - rhs||_2 / (1 + ||rhs||_2); infinite when y has the wrong length.
double relative_residual(const SubproblemSolution& sol, const SubproblemSpec& spec);
/// Also rejects any y_j below -eps_f * (1 + ||y||_inf).
bool verify_residuals(const SubproblemSolution& sol, const SubproblemSpec& spec, double eps_f);
/// max_i |y_i lambda_i|
double complementarity(const SubproblemSolution& sol);
/// Objective of spec evaluated at y, including the quadratic term and offset.
double evaluate_objective(const SubproblemSpec& spec, const Vector& y);

/// Writes a human-readable dump of a spec/solution pair.
void dump_subproblem(const SubproblemSpec& spec, const SubproblemSolution* sol,
                     const std::string& path);

/// Solver contract used by the engine, so that an external LP/QP solver can
/// stand in for the bundled one.
class SubproblemSolver {
public:
    virtual ~SubproblemSolver() = default;
    virtual SubproblemSolution solve(const SubproblemSpec& spec, WarmStart* warm) const = 0;
    virtual const SolverOptions& options() const = 0;
};

class BundledSolver final : public SubproblemSolver {
public:
    explicit BundledSolver(SolverOptions options = {}) : options_(std::move(options)) {}

    SubproblemSolution solve(const SubproblemSpec& spec, WarmStart* warm) const override {
        return spec.quad ? solve_qp(spec, options_, warm) : solve_lp(spec, options_, warm);
    }
    const SolverOptions& options() const override { return options_; }

private:
    SolverOptions options_;
};

}  // namespace rsddp
