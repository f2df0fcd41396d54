#pragma once

#include <cstdint>
#include <string>

#include "rsddp/cutpool.hpp"
#include "rsddp/engine.hpp"
#include "rsddp/model.hpp"
#include "rsddp/oracle.hpp"

namespace rsddp {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Comma-separated bounds table: iter, lower_bound, rho_k, sampled_cost,
/// ub_mean, ub_stderr, wall_ms. Fields that were not evaluated are empty;
/// wall_ms stays empty unless include_wall_ms is set.
std::string bounds_csv(const SolveReport& report, bool include_wall_ms = false);

struct VerifyReport {
    double lower_bound = 0.0;
    double optimal_value = 0.0;
    double gap = 0.0;  // V* - LB
    double tolerance = 0.0;
    double policy_value = 0.0;
    std::size_t cuts = 0;
    std::size_t cut_violations = 0;
    double worst_cut_excess = 0.0;
    int tree_nodes = 0;
    bool lower_bound_valid = true;

    bool ok() const { return lower_bound_valid && cut_violations == 0; }
};

/// Compares a cut pool against the exact oracle: stage-0 bound versus V*,
/// every cut at its anchor versus V_t^*, and the exact policy cost.
/// Tolerances are relative to max(1, |V*|).
VerifyReport verify_pool(const MultistageProblem& problem, const CutPool& pool, double tolerance = 1e-6,
                         std::uint64_t max_nodes = kDefaultNodeLimit);

/// key: value lines followed by "LB = x, V* = y, gap z".
std::string to_string(const VerifyReport& report);

}  // namespace rsddp
