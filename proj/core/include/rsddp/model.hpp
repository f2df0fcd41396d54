#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rsddp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the raw generator output, so sampling is
/// reproducible across standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// One realization W_t = (A_t, B_t, b_t, c_t) of a stage in standard form
///
///     A_t x_t = b_t - [B_{t-1} x_{t-1}; 0],   x_t >= 0.
///
/// B_t maps the decision to the post-decision resource state R_t^x = B_t x_t.
/// The r = B_t.rows() resource components feed the first r rows of the next
/// stage's equality system. The last stage may carry an empty B.
struct StageRealization {
    Matrix A;
    Matrix B;
    Vector b;
    Vector c;

    int rows() const { return static_cast<int>(A.rows()); }
    int cols() const { return static_cast<int>(A.cols()); }
    int resource_dim() const { return static_cast<int>(B.rows()); }
};

enum class ProcessKind { StagewiseIndependent, Markov };

/// Finite uncertainty over stages 1..T. Vectors are indexed by t - 1.
struct UncertaintyProcess {
    ProcessKind kind = ProcessKind::StagewiseIndependent;
    std::vector<std::vector<StageRealization>> outcomes;
    /// Stagewise: per-stage probability vectors over Omega_t.
    std::vector<Vector> probabilities;
    /// Markov: distribution of omega_1 given the deterministic stage 0.
    Vector initial;
    /// Markov: transitions[t - 1] is P_t, shape |Omega_t| x |Omega_{t+1}|, t = 1..T-1.
    std::vector<Matrix> transitions;
};

struct MultistageProblem {
    int T = 0;
    StageRealization stage0;
    UncertaintyProcess process;

    bool markov() const { return process.kind == ProcessKind::Markov; }

    /// |Omega_t|; stage 0 counts as a single deterministic outcome.
    int outcome_count(int t) const;
    const StageRealization& realization(int t, int outcome) const;
    int resource_dim(int t) const { return realization(t, 0).resource_dim(); }

    /// Number of post-decision information states at stage t. The Markov
    /// information state is the realized outcome index.
    int info_count(int t) const;
    int info_index(int t, int outcome) const;
    /// P(omega_t = outcome | I_{t-1}^x = prev_info), t >= 1.
    double conditional_probability(int t, int prev_info, int outcome) const;
};

struct ScenarioPath {
    std::vector<int> indices;  // omega_1..omega_T
    double probability = 1.0;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate(const MultistageProblem& problem);

/// Throws InvalidArgument listing the violations when the problem is malformed.
void require_valid(const MultistageProblem& problem);

ScenarioPath sample_path(const MultistageProblem& problem, Rng& rng);

/// All scenario paths with their probabilities, in lexicographic order.
/// Throws TooManyPaths when prod_t |Omega_t| exceeds max_paths.
std::vector<ScenarioPath> enumerate_paths(const MultistageProblem& problem,
                                          std::uint64_t max_paths);

/// The same model expressed as a Markov chain whose transition rows all
/// equal the stagewise probability vector of the next stage.
MultistageProblem as_markov(const MultistageProblem& problem);

/// Instance file I/O. The canonical text is sorted-key JSON with
/// shortest round-trip doubles, so save(load(save(p))) == save(p) bitwise.
std::string problem_to_string(const MultistageProblem& problem);
MultistageProblem problem_from_string(const std::string& text);
void save_problem(const MultistageProblem& problem, const std::string& path);
MultistageProblem load_problem(const std::string& path);

}  // namespace rsddp
