#include "rsddp/oracle.hpp"

#include "rsddp/engine.hpp"
#include "rsddp/errors.hpp"

namespace rsddp {

namespace {

class TreeBuilder {
public:
    TreeBuilder(const MultistageProblem& problem, std::uint64_t max_nodes) : problem_(problem), max_nodes_(max_nodes) {}

    void add_root_stage0() {
        push(0, 0, -1, 1.0);
        expand(0);
    }

    /// Children of a virtual root holding the fixed post-decision state R.
    void add_subtree(int t, int info, const Vector& R) {
        fixed_R_ = R;
        for (int j = 0; j < problem_.outcome_count(t + 1); ++j) {
            const double p = problem_.conditional_probability(t + 1, info, j);
            if (p == 0.0) continue;
            const int id = push(t + 1, j, -1, p);
            expand(id);
        }
    }

    ExtensiveForm finish() {
        ExtensiveForm ef;
        ef.nodes = nodes_;
        SubproblemSpec& s = ef.spec;
        s.c = Vector::Zero(cols_);
        s.A = Matrix::Zero(rows_, cols_);
        s.rhs = Vector::Zero(rows_);
        for (const auto& nd : nodes_) {
            const StageRealization& w = problem_.realization(nd.stage, nd.outcome);
            s.c.segment(nd.col, w.cols()) = nd.probability * w.c;
            s.A.block(nd.row, nd.col, w.rows(), w.cols()) = w.A;
            s.rhs.segment(nd.row, w.rows()) = w.b;
            if (nd.parent >= 0) {
                const auto& par = nodes_[static_cast<std::size_t>(nd.parent)];
                const Matrix& B = problem_.realization(par.stage, par.outcome).B;
                s.A.block(nd.row, par.col, B.rows(), B.cols()) = B;
            } else if (nd.stage > 0 && fixed_R_.size() > 0) {
                s.rhs.segment(nd.row, fixed_R_.size()) -= fixed_R_;
            }
        }
        return ef;
    }

private:
    int push(int t, int outcome, int parent, double prob) {
        if (nodes_.size() >= max_nodes_) {
            throw TooManyPaths("scenario tree has more than " + std::to_string(max_nodes_) + " nodes");
        }
        const StageRealization& w = problem_.realization(t, outcome);
        ExtensiveForm::Node nd;
        nd.stage = t;
        nd.outcome = outcome;
        nd.parent = parent;
        nd.probability = prob;
        nd.col = cols_;
        nd.row = rows_;
        cols_ += w.cols();
        rows_ += w.rows();
        nodes_.push_back(nd);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void expand(int id) {
        const auto nd = nodes_[static_cast<std::size_t>(id)];
        if (nd.stage == problem_.T) return;
        const int info = problem_.info_index(nd.stage, nd.outcome);
        for (int j = 0; j < problem_.outcome_count(nd.stage + 1); ++j) {
            const double p = problem_.conditional_probability(nd.stage + 1, info, j);
            if (p == 0.0) continue;
            const int child = push(nd.stage + 1, j, id, nd.probability * p);
            expand(child);
        }
    }

    const MultistageProblem& problem_;
    std::uint64_t max_nodes_;
    std::vector<ExtensiveForm::Node> nodes_;
    Vector fixed_R_;
    int rows_ = 0;
    int cols_ = 0;
};

SubproblemSolution solve_tree(const SubproblemSpec& spec) {
    const auto sol = solve_lp(spec);
    if (sol.status == SolveStatus::Infeasible) {
        throw SubproblemFailure("extensive form infeasible (relatively complete recourse violated)", -1, -1);
    }
    if (sol.status == SolveStatus::Unbounded) throw SubproblemFailure("extensive form unbounded", -1, -1);
    if (!verify_residuals(sol, spec, 1e-8)) {
        throw NumericalBreakdown("extensive form solution failed the residual check");
    }
    return sol;
}

}  // namespace

ExtensiveForm build_extensive_form(const MultistageProblem& problem, std::uint64_t max_nodes) {
    require_valid(problem);
    TreeBuilder builder(problem, max_nodes);
    builder.add_root_stage0();
    return builder.finish();
}

ExtensiveFormSolution build_and_solve_extensive_form(const MultistageProblem& problem, std::uint64_t max_nodes) {
    const auto ef = build_extensive_form(problem, max_nodes);
    const auto sol = solve_tree(ef.spec);
    ExtensiveFormSolution out;
    out.value = sol.objective;
    out.x0 = sol.y.head(problem.stage0.cols());
    out.nodes = static_cast<int>(ef.nodes.size());
    return out;
}

double exact_value_function(const MultistageProblem& problem, int t, int info, const Vector& R,
                            std::uint64_t max_nodes) {
    if (t < 0 || t > problem.T) throw InvalidArgument("exact_value_function: stage out of range");
    if (t == problem.T) return 0.0;
    if (info < 0 || info >= problem.info_count(t)) {
        throw InvalidArgument("exact_value_function: information state out of range");
    }
    if (R.size() != problem.resource_dim(t)) {
        throw DimensionMismatch("exact_value_function: R has dimension " + std::to_string(R.size()) +
                                ", stage " + std::to_string(t) + " expects " +
                                std::to_string(problem.resource_dim(t)));
    }
    TreeBuilder builder(problem, max_nodes);
    builder.add_subtree(t, info, R);
    return solve_tree(builder.finish().spec).objective;
}

double evaluate_policy_exact(const MultistageProblem& problem, const CutPool& pool, std::uint64_t max_nodes) {
    pool.check_compatible(problem);
    std::uint64_t visited = 0;
    const BundledSolver solver;
    auto recurse = [&](auto&& self, int t, int outcome, const Vector& R_prev) -> double {
        if (++visited > max_nodes) {
            throw TooManyPaths("scenario tree has more than " + std::to_string(max_nodes) + " nodes");
        }
        const auto d = policy_decision(problem, pool, t, R_prev, outcome, &solver);
        double value = d.stage_cost;
        if (t == problem.T) return value;
        const int info = problem.info_index(t, outcome);
        for (int j = 0; j < problem.outcome_count(t + 1); ++j) {
            const double p = problem.conditional_probability(t + 1, info, j);
            if (p == 0.0) continue;
            value += p * self(self, t + 1, j, d.R);
        }
        return value;
    };
    return recurse(recurse, 0, 0, Vector());
}

}  // namespace rsddp
