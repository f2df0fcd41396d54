#include "rsddp/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include <Eigen/Cholesky>

#include "rsddp/errors.hpp"

namespace rsddp {

namespace {

// Fixed so that upper-bound estimates do not depend on the worker count.
constexpr int kSimulationChunks = 4;

template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    const int w = std::min(workers, count);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(w));
    for (int id = 0; id < w; ++id) {
        threads.emplace_back([&, id] {
            for (int i = id; i < count; i += w) {
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

const Matrix& stage_B(const MultistageProblem& problem, int t, int outcome) {
    return problem.realization(t, t == 0 ? 0 : outcome).B;
}

SubproblemSolution solve_checked(const SubproblemSolver& solver, const SubproblemSpec& spec, WarmStart* warm,
                                 int t, int outcome) {
    const std::string where = "stage " + std::to_string(t) + ", outcome " + std::to_string(outcome);
    auto fail = [&](const std::string& why, const SubproblemSolution* sol) {
        const auto& dump = solver.options().dump_path;
        if (!dump.empty()) dump_subproblem(spec, sol, dump);
        return SubproblemFailure(where + ": " + why, t, outcome);
    };
    auto attempt = [&](WarmStart* w) {
        try {
            return solver.solve(spec, w);
        } catch (const NumericalBreakdown& e) {
            if (w == nullptr) throw fail(e.what(), nullptr);
            w->clear();
        }
        try {
            return solver.solve(spec, w);
        } catch (const NumericalBreakdown& e) {
            throw fail(e.what(), nullptr);
        }
    };
    SubproblemSolution sol = attempt(warm);
    const double eps = solver.options().eps_f;
    if (sol.status != SolveStatus::Optimal || !verify_residuals(sol, spec, eps)) {
        if (warm != nullptr) {
            warm->clear();
            sol = attempt(warm);
        }
    }
    if (sol.status == SolveStatus::Infeasible) {
        throw fail("subproblem infeasible (relatively complete recourse violated)", &sol);
    }
    if (sol.status == SolveStatus::Unbounded) throw fail("subproblem unbounded", &sol);
    if (!verify_residuals(sol, spec, eps)) {
        throw fail("residual check failed (relative residual " + std::to_string(relative_residual(sol, spec)) + ")",
                   &sol);
    }
    return sol;
}

struct OutcomeValue {
    double value = 0.0;
    Vector slope;
};

std::vector<OutcomeValue> solve_outcomes(const MultistageProblem& problem, const CutPool& pool,
                                         const SubproblemSolver& solver, int t, const Vector& R_prev,
                                         std::vector<WarmStart>* slots, int workers) {
    const int n_out = problem.outcome_count(t);
    const int r = static_cast<int>(R_prev.size());
    std::vector<OutcomeValue> out(static_cast<std::size_t>(n_out));
    parallel_for(n_out, workers, [&](int j) {
        SubproblemSpec spec = stage_spec(problem, t, j, R_prev);
        if (t < problem.T) spec = embed(pool, t, problem.info_index(t, j), spec, stage_B(problem, t, j));
        WarmStart* warm = slots ? &(*slots)[static_cast<std::size_t>(j)] : nullptr;
        const auto sol = solve_checked(solver, spec, warm, t, j);
        auto& o = out[static_cast<std::size_t>(j)];
        o.value = sol.objective;
        o.slope = -sol.duals.head(r);
    });
    return out;
}

std::vector<Cut> aggregate(const MultistageProblem& problem, int t, const Vector& R_prev,
                           const std::vector<OutcomeValue>& values, int k) {
    const int infos = problem.info_count(t - 1);
    std::vector<Cut> cuts(static_cast<std::size_t>(infos));
    for (int i = 0; i < infos; ++i) {
        Cut& cut = cuts[static_cast<std::size_t>(i)];
        cut.alpha = 0.0;
        cut.beta = Vector::Zero(R_prev.size());
        cut.anchor = R_prev;
        cut.born_iteration = k;
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double p = problem.conditional_probability(t, i, static_cast<int>(j));
            if (p == 0.0) continue;
            cut.alpha += p * values[j].value;
            cut.beta.noalias() += p * values[j].slope;
        }
    }
    return cuts;
}

const SubproblemSolver& default_solver() {
    static const BundledSolver solver;
    return solver;
}

void require_cuts_everywhere(const MultistageProblem& problem, const CutPool& pool) {
    pool.check_compatible(problem);
    for (int t = 0; t < problem.T; ++t) {
        bool any = false;
        for (int i = 0; i < pool.info_count(t) && !any; ++i) any = !pool.cuts(t, i).empty();
        if (!any) {
            throw PreconditionError("upper-bound estimate needs cuts at every stage; stage " + std::to_string(t) +
                                    " has none");
        }
    }
}

}  // namespace

double RegularizationSchedule::value(int k) const { return rho0 * std::pow(decay, k); }

void RegularizationSchedule::validate() const {
    if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw InvalidArgument("rho0 must be a positive number");
    if (!(decay > 0.0 && decay < 1.0)) throw InvalidArgument("decay must lie in (0, 1)");
}

void EngineConfig::validate() const {
    if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
    if (ub_samples < 1) throw InvalidArgument("ub_samples must be at least 1");
    if (ub_every < 0) throw InvalidArgument("ub_every must be non-negative");
    if (workers < 1) throw InvalidArgument("workers must be at least 1");
    if (stall_iterations < 0) throw InvalidArgument("stall_iterations must be non-negative");
    if (!(eps_f > 0.0)) throw InvalidArgument("eps_f must be positive");
    if (regularized) schedule.validate();
}

double Trajectory::total_cost() const {
    double s = 0.0;
    for (const auto& v : stages) s += v.cost;
    return s;
}

double SolveReport::final_lower_bound() const {
    if (iterations.empty()) throw PreconditionError("empty solve report");
    return iterations.back().lower_bound;
}

SubproblemSpec stage_spec(const MultistageProblem& problem, int t, int outcome, const Vector& R_prev) {
    const StageRealization& w = problem.realization(t, t == 0 ? 0 : outcome);
    SubproblemSpec spec;
    spec.c = w.c;
    spec.A = w.A;
    spec.rhs = w.b;
    if (R_prev.size() > spec.rhs.size()) {
        throw DimensionMismatch("stage " + std::to_string(t) + ": incoming resource of dimension " +
                                std::to_string(R_prev.size()) + " exceeds the row count");
    }
    spec.rhs.head(R_prev.size()) -= R_prev;
    return spec;
}

std::vector<Cut> compute_cuts(const MultistageProblem& problem, const CutPool& pool,
                              const SubproblemSolver& solver, int t, const Vector& R_prev, int k) {
    if (t < 1 || t > problem.T) throw InvalidArgument("compute_cuts: stage must lie in 1..T");
    if (R_prev.size() != problem.resource_dim(t - 1)) {
        throw DimensionMismatch("compute_cuts: resource point has the wrong dimension");
    }
    const auto values = solve_outcomes(problem, pool, solver, t, R_prev, nullptr, 1);
    return aggregate(problem, t, R_prev, values, k);
}

PolicyDecision policy_decision(const MultistageProblem& problem, const CutPool& pool, int t,
                               const Vector& R_prev, int outcome, const SubproblemSolver* solver,
                               WarmStart* warm) {
    if (t < 0 || t > problem.T) throw InvalidArgument("policy_decision: stage out of range");
    if (t > 0 && (outcome < 0 || outcome >= problem.outcome_count(t))) {
        throw InvalidArgument("policy_decision: outcome out of range");
    }
    const int expected = t == 0 ? 0 : problem.resource_dim(t - 1);
    if (R_prev.size() != expected) throw DimensionMismatch("policy_decision: resource point has the wrong dimension");
    const SubproblemSolver& s = solver ? *solver : default_solver();
    const Matrix& B = stage_B(problem, t, outcome);

    PolicyDecision d;
    SubproblemSpec spec = stage_spec(problem, t, outcome, R_prev);
    if (t < problem.T) {
        const int info = problem.info_index(t, outcome);
        d.myopic = pool.cuts(t, info).empty();
        spec = embed(pool, t, info, spec, B);
    }
    const auto sol = solve_checked(s, spec, warm, t, outcome);
    const int n = problem.realization(t, t == 0 ? 0 : outcome).cols();
    d.x = sol.y.head(n);
    if (B.rows() > 0) d.R = B * d.x;
    d.stage_cost = problem.realization(t, t == 0 ? 0 : outcome).c.dot(d.x);
    d.objective = sol.objective;
    return d;
}

UpperBoundEstimate estimate_upper_bound(const MultistageProblem& problem, const CutPool& pool, int n_samples,
                                        Rng& rng, int workers, const SubproblemSolver* solver) {
    if (n_samples < 1) throw InvalidArgument("upper-bound estimate needs at least one sample");
    require_cuts_everywhere(problem, pool);
    std::vector<ScenarioPath> paths;
    paths.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) paths.push_back(sample_path(problem, rng));

    std::vector<double> costs(static_cast<std::size_t>(n_samples), 0.0);
    parallel_for(kSimulationChunks, workers, [&](int chunk) {
        std::vector<WarmStart> slots(static_cast<std::size_t>(problem.T + 1));
        for (int s = chunk; s < n_samples; s += kSimulationChunks) {
            const auto& path = paths[static_cast<std::size_t>(s)];
            Vector R;
            double total = 0.0;
            for (int t = 0; t <= problem.T; ++t) {
                const int j = t == 0 ? 0 : path.indices[static_cast<std::size_t>(t - 1)];
                auto d = policy_decision(problem, pool, t, R, j, solver, &slots[static_cast<std::size_t>(t)]);
                total += d.stage_cost;
                R = std::move(d.R);
            }
            costs[static_cast<std::size_t>(s)] = total;
        }
    });

    UpperBoundEstimate est;
    est.samples = n_samples;
    double sum = 0.0;
    for (double c : costs) sum += c;
    est.mean = sum / n_samples;
    const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
    if (n_samples > 1 && *lo != *hi) {
        double ss = 0.0;
        for (double c : costs) ss += (c - est.mean) * (c - est.mean);
        est.std_error = std::sqrt(ss / (n_samples - 1) / n_samples);
    }
    return est;
}

struct Engine::Impl {
    std::shared_ptr<const SubproblemSolver> solver;
    // forward[t][j], backward[t][j]; backward[0] unused.
    std::vector<std::vector<WarmStart>> forward;
    std::vector<std::vector<WarmStart>> backward;
    WarmStart lower_bound;
    std::vector<Matrix> Q;
    // B' Q and B' Q B per (t, outcome), t < T.
    std::vector<std::vector<Matrix>> BtQ;
    std::vector<std::vector<Matrix>> H;
};

Engine::Engine(MultistageProblem problem, EngineConfig config, std::shared_ptr<const SubproblemSolver> solver)
    : config_(std::move(config)), rng_(config_.seed), ub_rng_(config_.seed ^ 0x9E3779B97F4A7C15ULL),
      impl_(std::make_unique<Impl>()) {
    config_.validate();
    if (config_.markov.has_value()) {
        if (*config_.markov && !problem.markov()) {
            problem = as_markov(problem);
        } else if (!*config_.markov && problem.markov()) {
            throw InvalidArgument("a Markov instance cannot be solved under stagewise independence");
        }
    }
    require_valid(problem);
    problem_ = std::move(problem);
    pool_ = CutPool::for_problem(problem_);

    if (!solver) {
        SolverOptions opts;
        opts.eps_f = config_.eps_f;
        solver = std::make_shared<BundledSolver>(opts);
    }
    impl_->solver = std::move(solver);

    const int T = problem_.T;
    impl_->forward.resize(static_cast<std::size_t>(T + 1));
    impl_->backward.resize(static_cast<std::size_t>(T + 1));
    for (int t = 0; t <= T; ++t) {
        impl_->forward[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(problem_.outcome_count(t)));
        impl_->backward[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(problem_.outcome_count(t)));
    }

    if (!config_.Q.empty() && static_cast<int>(config_.Q.size()) != T) {
        throw DimensionMismatch("expected " + std::to_string(T) + " scaling matrices, got " +
                                std::to_string(config_.Q.size()));
    }
    impl_->Q.resize(static_cast<std::size_t>(T));
    impl_->BtQ.resize(static_cast<std::size_t>(T));
    impl_->H.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        const int r = problem_.resource_dim(t);
        Matrix Q = config_.Q.empty() ? Matrix::Identity(r, r) : config_.Q[static_cast<std::size_t>(t)];
        if (Q.rows() != r || Q.cols() != r) {
            throw DimensionMismatch("scaling matrix of stage " + std::to_string(t) + " must be " +
                                    std::to_string(r) + "x" + std::to_string(r));
        }
        if (r > 0) {
            if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
                throw InvalidArgument("scaling matrix of stage " + std::to_string(t) + " is not symmetric");
            }
            Eigen::LDLT<Matrix> ldlt(Q);
            if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-12) {
                throw InvalidArgument("scaling matrix of stage " + std::to_string(t) + " is not positive semidefinite");
            }
        }
        for (int j = 0; j < problem_.outcome_count(t); ++j) {
            const Matrix& B = stage_B(problem_, t, j);
            Matrix BtQ = B.transpose() * Q;
            Matrix H = BtQ * B;
            impl_->BtQ[static_cast<std::size_t>(t)].push_back(std::move(BtQ));
            impl_->H[static_cast<std::size_t>(t)].push_back(0.5 * (H + H.transpose()));
        }
        impl_->Q[static_cast<std::size_t>(t)] = std::move(Q);
    }
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

void Engine::set_pool(CutPool pool) {
    pool.check_compatible(problem_);
    pool_ = std::move(pool);
}

double Engine::rho(int k) const { return config_.regularized ? config_.schedule.value(k) : 0.0; }

Trajectory Engine::forward_pass(const ScenarioPath& path, int k) { return forward_pass(path, k, rho(k)); }

Trajectory Engine::forward_pass(const ScenarioPath& path, int k, double rho_k) {
    const int T = problem_.T;
    if (static_cast<int>(path.indices.size()) != T) throw DimensionMismatch("forward pass: path length differs from T");
    Trajectory traj;
    traj.stages.resize(static_cast<std::size_t>(T + 1));
    Vector R;
    for (int t = 0; t <= T; ++t) {
        const int j = t == 0 ? 0 : path.indices[static_cast<std::size_t>(t - 1)];
        const StageRealization& w = problem_.realization(t, j);
        SubproblemSpec spec = stage_spec(problem_, t, j, R);
        const int info = problem_.info_index(t, j);
        if (k > 0 && t < T) {
            spec = embed(pool_, t, info, spec, w.B);
            if (rho_k > 0.0 && incumbents_.defined() && w.B.rows() > 0) {
                const Vector& Rbar = incumbents_.R[static_cast<std::size_t>(t)];
                const auto ts = static_cast<std::size_t>(t);
                const auto js = static_cast<std::size_t>(j);
                spec.c.head(w.cols()).noalias() -= rho_k * (impl_->BtQ[ts][js] * Rbar);
                spec.offset += 0.5 * rho_k * Rbar.dot(impl_->Q[ts] * Rbar);
                spec.quad = QuadraticTerm{rho_k, impl_->H[ts][js]};
            }
        }
        WarmStart* warm = &impl_->forward[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        const auto sol = solve_checked(*impl_->solver, spec, warm, t, j);
        StageVisit& v = traj.stages[static_cast<std::size_t>(t)];
        v.outcome = j;
        v.info = info;
        v.x = sol.y.head(w.cols()).cwiseMax(0.0);
        if (w.B.rows() > 0) v.R = w.B * v.x;
        v.cost = w.c.dot(v.x);
        R = v.R;
    }
    return traj;
}

int Engine::backward_pass(const Trajectory& trajectory, int k) {
    const int T = problem_.T;
    if (static_cast<int>(trajectory.stages.size()) != T + 1) {
        throw DimensionMismatch("backward pass: trajectory length differs from T + 1");
    }
    int added = 0;
    for (int t = T; t >= 1; --t) {
        const Vector& R_prev = trajectory.stages[static_cast<std::size_t>(t - 1)].R;
        const auto values = solve_outcomes(problem_, pool_, *impl_->solver, t, R_prev,
                                           &impl_->backward[static_cast<std::size_t>(t)], config_.workers);
        auto cuts = aggregate(problem_, t, R_prev, values, k);
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            if (pool_.add_cut(t - 1, static_cast<int>(i), std::move(cuts[i]))) ++added;
        }
    }
    return added;
}

double Engine::lower_bound() {
    SubproblemSpec spec = stage_spec(problem_, 0, 0, Vector());
    spec = embed(pool_, 0, 0, spec, problem_.stage0.B);
    return solve_checked(*impl_->solver, spec, &impl_->lower_bound, 0, 0).objective;
}

IterationStats Engine::iterate() {
    const auto start = std::chrono::steady_clock::now();
    IterationStats stats;
    stats.k = k_;
    stats.rho = rho(k_);
    const ScenarioPath path = sample_path(problem_, rng_);
    const Trajectory traj = forward_pass(path, k_, stats.rho);
    stats.sampled_cost = traj.total_cost();
    stats.cuts_added = backward_pass(traj, k_);
    stats.lower_bound = lower_bound();
    incumbents_.R.resize(static_cast<std::size_t>(problem_.T));
    for (int t = 0; t < problem_.T; ++t) incumbents_.R[static_cast<std::size_t>(t)] = traj.stages[static_cast<std::size_t>(t)].R;
    if (config_.ub_every > 0 && (k_ + 1) % config_.ub_every == 0) {
        stats.ub = estimate_upper_bound(config_.ub_samples, ub_rng_);
    }
    ++k_;
    stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

SolveReport Engine::run() {
    SolveReport report;
    int unchanged = 0;
    while (k_ < config_.iterations) {
        report.iterations.push_back(iterate());
        const auto& its = report.iterations;
        if (its.size() >= 2 && its.back().lower_bound == its[its.size() - 2].lower_bound) {
            ++unchanged;
        } else {
            unchanged = 0;
        }
        if (config_.stall_iterations > 0 && unchanged >= config_.stall_iterations) break;
    }
    return report;
}

UpperBoundEstimate Engine::estimate_upper_bound(int n_samples, Rng& rng) {
    return rsddp::estimate_upper_bound(problem_, pool_, n_samples, rng, config_.workers, impl_->solver.get());
}

}  // namespace rsddp
