#pragma once

#include <cstdint>
#include <vector>

#include "rsddp/cutpool.hpp"
#include "rsddp/model.hpp"
#include "rsddp/subproblem.hpp"

namespace rsddp {

inline constexpr std::uint64_t kDefaultNodeLimit = 100000;

/// Deterministic equivalent over the scenario tree. Node k owns the column
/// block [col, col + n) and the row block [row, row + m); its constraint is
/// B_parent x_parent + A x_node = b_node with the objective weighted by the
/// node probability. Zero-probability branches are omitted.
struct ExtensiveForm {
    struct Node {
        int stage = 0;
        int outcome = 0;
        int parent = -1;
        double probability = 1.0;
        int col = 0;
        int row = 0;
    };
    std::vector<Node> nodes;
    SubproblemSpec spec;
};

ExtensiveForm build_extensive_form(const MultistageProblem& problem,
                                   std::uint64_t max_nodes = kDefaultNodeLimit);

struct ExtensiveFormSolution {
    double value = 0.0;
    Vector x0;
    int nodes = 0;
};

/// Exact optimum V* of the problem. Throws TooManyPaths beyond max_nodes
/// and SubproblemFailure if the tree LP is infeasible.
ExtensiveFormSolution build_and_solve_extensive_form(const MultistageProblem& problem,
                                                     std::uint64_t max_nodes = kDefaultNodeLimit);

/// V_t^*(R, info): expected optimal cost of stages t+1..T given the
/// post-decision state. Zero at t = T.
double exact_value_function(const MultistageProblem& problem, int t, int info, const Vector& R,
                            std::uint64_t max_nodes = kDefaultNodeLimit);

/// Exact expected cost of the unregularized cut policy over the whole tree.
double evaluate_policy_exact(const MultistageProblem& problem, const CutPool& pool,
                             std::uint64_t max_nodes = kDefaultNodeLimit);

}  // namespace rsddp
