#include "rsddp/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rsddp/errors.hpp"

namespace rsddp {

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string bounds_csv(const SolveReport& report, bool include_wall_ms) {
    std::ostringstream out;
    out << "iter,lower_bound,rho_k,sampled_cost,ub_mean,ub_stderr,wall_ms\n";
    for (const auto& it : report.iterations) {
        out << it.k << ',' << format_number(it.lower_bound) << ',' << format_number(it.rho) << ','
            << format_number(it.sampled_cost) << ',';
        if (it.ub) out << format_number(it.ub->mean) << ',' << format_number(it.ub->std_error);
        else out << ',';
        out << ',';
        if (include_wall_ms) out << format_number(it.wall_ms);
        out << '\n';
    }
    return out.str();
}

VerifyReport verify_pool(const MultistageProblem& problem, const CutPool& pool, double tolerance,
                         std::uint64_t max_nodes) {
    pool.check_compatible(problem);
    VerifyReport r;
    r.tolerance = tolerance;
    const auto ef = build_and_solve_extensive_form(problem, max_nodes);
    r.optimal_value = ef.value;
    r.tree_nodes = ef.nodes;
    const double scale = std::max(1.0, std::abs(ef.value));

    SubproblemSpec spec = stage_spec(problem, 0, 0, Vector());
    spec = embed(pool, 0, 0, spec, problem.stage0.B);
    const auto sol = solve_lp(spec);
    if (sol.status != SolveStatus::Optimal) {
        throw SubproblemFailure("stage 0: lower-bound problem is " + std::string(to_string(sol.status)), 0, 0);
    }
    r.lower_bound = sol.objective;
    r.gap = r.optimal_value - r.lower_bound;
    r.lower_bound_valid = r.lower_bound <= r.optimal_value + tolerance * scale;

    for (int t = 0; t < pool.stages(); ++t) {
        for (int i = 0; i < pool.info_count(t); ++i) {
            for (const auto& cut : pool.cuts(t, i)) {
                ++r.cuts;
                const double exact = exact_value_function(problem, t, i, cut.anchor, max_nodes);
                const double excess = cut.alpha - exact;
                r.worst_cut_excess = std::max(r.worst_cut_excess, excess);
                if (excess > tolerance * std::max(1.0, std::abs(exact))) ++r.cut_violations;
            }
        }
    }
    r.policy_value = evaluate_policy_exact(problem, pool, max_nodes);
    return r;
}

std::string to_string(const VerifyReport& r) {
    const double scale = std::max(1.0, std::abs(r.optimal_value));
    const double shown_gap = std::abs(r.gap) <= 1e-9 * scale ? 0.0 : r.gap;
    char summary[160];
    std::snprintf(summary, sizeof(summary), "LB = %.6f, V* = %.6f, gap %g", r.lower_bound, r.optimal_value,
                  shown_gap);
    std::ostringstream out;
    out << "lower_bound: " << format_number(r.lower_bound) << '\n'
        << "optimal_value: " << format_number(r.optimal_value) << '\n'
        << "gap: " << format_number(r.gap) << '\n'
        << "relative_gap: " << format_number(r.gap / scale) << '\n'
        << "tolerance: " << format_number(r.tolerance) << '\n'
        << "policy_value: " << format_number(r.policy_value) << '\n'
        << "tree_nodes: " << r.tree_nodes << '\n'
        << "cuts: " << r.cuts << '\n'
        << "cut_violations: " << r.cut_violations << '\n'
        << "worst_cut_excess: " << format_number(r.worst_cut_excess) << '\n'
        << "lower_bound_valid: " << (r.lower_bound_valid ? "yes" : "no") << '\n'
        << "status: " << (r.ok() ? "pass" : "fail") << '\n'
        << summary << '\n';
    return out.str();
}

}  // namespace rsddp
