#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "rsddp/cutpool.hpp"
#include "rsddp/model.hpp"
#include "rsddp/subproblem.hpp"

namespace rsddp {

/// rho^k = rho0 * decay^k.
struct RegularizationSchedule {
    double rho0 = 1.0;
    double decay = 0.95;

    double value(int k) const;
    /// Throws InvalidArgument unless rho0 > 0 and 0 < decay < 1.
    void validate() const;
};

struct EngineConfig {
    int iterations = 300;
    std::uint64_t seed = 0;
    bool regularized = true;
    /// nullopt follows the instance. true on a stagewise instance solves its
    /// Markov form; false on a Markov instance is rejected.
    std::optional<bool> markov;
    RegularizationSchedule schedule;
    /// Per-stage scaling matrices Q_t, t = 0..T-1. Empty means identity.
    std::vector<Matrix> Q;
    double eps_f = 1e-8;
    int ub_samples = 100;
    /// Upper-bound estimate after every ub_every-th iteration; 0 disables.
    int ub_every = 10;
    int workers = 1;
    /// Stop once the lower bound has not changed for this many iterations; 0 disables.
    int stall_iterations = 0;

    void validate() const;
};

struct StageVisit {
    int outcome = 0;
    int info = 0;
    Vector x;
    Vector R;  // B_t x_t, empty at the last stage
    double cost = 0.0;
};

/// Stages 0..T of one forward simulation.
struct Trajectory {
    std::vector<StageVisit> stages;
    double total_cost() const;
};

/// R_bar_t for t = 0..T-1; empty before the first forward pass.
struct Incumbents {
    std::vector<Vector> R;
    bool defined() const { return !R.empty(); }
};

struct UpperBoundEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int samples = 0;
};

struct IterationStats {
    int k = 0;
    double lower_bound = 0.0;
    double rho = 0.0;
    double sampled_cost = 0.0;
    std::optional<UpperBoundEstimate> ub;
    double wall_ms = 0.0;
    int cuts_added = 0;
};

struct SolveReport {
    std::vector<IterationStats> iterations;
    double final_lower_bound() const;
};

/// Regularized (or plain) SDDP over a stagewise-independent or Markov
/// problem. Results depend only on the problem, the config and the seed,
/// never on the worker count.
class Engine {
public:
    Engine(MultistageProblem problem, EngineConfig config,
           std::shared_ptr<const SubproblemSolver> solver = nullptr);
    ~Engine();
    Engine(Engine&&) noexcept;
    Engine& operator=(Engine&&) noexcept;

    const MultistageProblem& problem() const { return problem_; }
    const EngineConfig& config() const { return config_; }
    const CutPool& pool() const { return pool_; }
    /// Replaces the pool, e.g. to resume from a cut file.
    void set_pool(CutPool pool);
    const Incumbents& incumbents() const { return incumbents_; }
    int next_iteration() const { return k_; }

    /// rho^k used by the forward pass of iteration k (0 in plain mode).
    double rho(int k) const;

    /// Myopic at k = 0; otherwise min C + Vbar + (rho^k/2)|R - R_bar|_Q^2
    /// for t < T and a plain LP at t = T.
    Trajectory forward_pass(const ScenarioPath& path, int k);
    Trajectory forward_pass(const ScenarioPath& path, int k, double rho_k);

    /// Adds cuts at stages T-1..0 along the trajectory; returns the count.
    int backward_pass(const Trajectory& trajectory, int k);

    /// Stage-0 optimum under the current pool.
    double lower_bound();

    IterationStats iterate();
    SolveReport run();

    UpperBoundEstimate estimate_upper_bound(int n_samples, Rng& rng);

private:
    struct Impl;
    MultistageProblem problem_;
    EngineConfig config_;
    CutPool pool_;
    Incumbents incumbents_;
    Rng rng_;
    Rng ub_rng_;
    int k_ = 0;
    std::unique_ptr<Impl> impl_;
};

/// Stage-t subproblem A_t x = b_t - [R_prev; 0] for the given outcome. At
/// t = 0 the outcome is ignored and R_prev must be empty.
SubproblemSpec stage_spec(const MultistageProblem& problem, int t, int outcome, const Vector& R_prev);

/// Cuts for every information state at stage t-1, built from the stage-t
/// LPs at R_prev with the stage-t pool (Vbar_T = 0). The returned vector
/// is indexed by information state at t-1.
std::vector<Cut> compute_cuts(const MultistageProblem& problem, const CutPool& pool,
                              const SubproblemSolver& solver, int t, const Vector& R_prev, int k);

struct PolicyDecision {
    Vector x;
    Vector R;
    double stage_cost = 0.0;
    double objective = 0.0;
    /// No cuts were available at a stage t < T, so the decision is myopic.
    bool myopic = false;
};

/// argmin of C + Vbar at one stage. The information state used for the pool
/// is the one revealed by the outcome.
PolicyDecision policy_decision(const MultistageProblem& problem, const CutPool& pool, int t,
                               const Vector& R_prev, int outcome,
                               const SubproblemSolver* solver = nullptr, WarmStart* warm = nullptr);

/// Monte-Carlo cost of the unregularized cut policy. Throws
/// PreconditionError if some stage t < T has no cuts at all.
UpperBoundEstimate estimate_upper_bound(const MultistageProblem& problem, const CutPool& pool,
                                        int n_samples, Rng& rng, int workers = 1,
                                        const SubproblemSolver* solver = nullptr);

}  // namespace rsddp
