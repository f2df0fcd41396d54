#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsddp/model.hpp"
#include "rsddp/subproblem.hpp"

namespace rsddp {

/// Affine minorant alpha + <beta, R - anchor> of a post-decision value function.
struct Cut {
    double alpha = 0.0;
    Vector beta;
    Vector anchor;
    int born_iteration = 0;

    double value_at(const Vector& R) const { return alpha + beta.dot(R - anchor); }
    bool operator==(const Cut& other) const;
};

/// Piecewise-linear outer approximations, one collection per stage
/// t = 0..T-1 and post-decision information state. Append-only.
class CutPool {
public:
    CutPool() = default;
    CutPool(std::vector<int> resource_dims, std::vector<int> info_counts);

    static CutPool for_problem(const MultistageProblem& problem);

    int stages() const { return static_cast<int>(dims_.size()); }
    int resource_dim(int t) const { return dims_.at(static_cast<std::size_t>(t)); }
    int info_count(int t) const { return static_cast<int>(cuts_.at(static_cast<std::size_t>(t)).size()); }

    const std::vector<Cut>& cuts(int t, int info) const;
    std::size_t size() const;

    /// Appends a cut. A cut whose alpha, beta and anchor are bitwise equal to
    /// a stored one leaves the pool unchanged and returns false.
    bool add_cut(int t, int info, Cut cut);

    /// max_j {alpha_j + <beta_j, R - anchor_j>}, or nullopt when the
    /// collection is empty (the -infinity approximation).
    std::optional<double> evaluate(int t, int info, const Vector& R) const;

    /// Throws DimensionMismatch unless the layout matches the problem.
    void check_compatible(const MultistageProblem& problem) const;

    bool operator==(const CutPool& other) const = default;

private:
    void check_index(int t, int info) const;

    std::vector<int> dims_;
    std::vector<std::vector<std::vector<Cut>>> cuts_;
};

/// Adds the epigraph variable theta = theta_plus - theta_minus and one
/// surplus row per cut,
///
///     theta - <beta_j, B x> - s_j = alpha_j - <beta_j, anchor_j>,
///
/// so that the augmented problem is min c'x + Vbar(B x). Columns are
/// ordered [x, theta+, theta-, s_1..s_K]. An empty collection returns the
/// spec unchanged.
SubproblemSpec embed(const CutPool& pool, int t, int info, const SubproblemSpec& stage_spec,
                     const Matrix& B);

/// Cut file I/O: versioned JSON, one record per cut.
std::string pool_to_string(const CutPool& pool);
CutPool pool_from_string(const std::string& text);
void save_pool(const CutPool& pool, const std::string& path);
CutPool load_pool(const std::string& path);

}  // namespace rsddp
