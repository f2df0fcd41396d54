#include "rsddp/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "rsddp/errors.hpp"

namespace rsddp {

namespace {

constexpr double kProbabilitySumTol = 1e-12;

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

void check_realization(const StageRealization& w, const std::string& where,
                       std::vector<std::string>& out) {
    const auto m = w.A.rows();
    const auto n = w.A.cols();
    if (w.b.size() != m) {
        out.push_back(where + ": b has length " + std::to_string(w.b.size()) + " but A has " +
                      std::to_string(m) + " rows");
    }
    if (w.c.size() != n) {
        out.push_back(where + ": c has length " + std::to_string(w.c.size()) + " but A has " +
                      std::to_string(n) + " columns");
    }
    if (w.B.rows() > 0 && w.B.cols() != n) {
        out.push_back(where + ": B has " + std::to_string(w.B.cols()) + " columns but n = " +
                      std::to_string(n));
    }
    if (!all_finite(w.A) || !all_finite(w.B) || !all_finite(w.b) || !all_finite(w.c)) {
        out.push_back(where + ": non-finite entry");
    }
}

void check_distribution(const Vector& p, const std::string& name, std::vector<std::string>& out,
                        bool allow_zero = false) {
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (allow_zero && p[j] == 0.0) continue;
        if (!(p[j] > 0.0)) {
            out.push_back("entry " + std::to_string(j + 1) + " of " + name +
                          " is not strictly positive (" + fmt_num(p[j]) + ")");
        }
    }
    const double s = p.sum();
    if (std::abs(s - 1.0) > kProbabilitySumTol) {
        out.push_back(name + " sums to " + fmt_num(s));
    }
}

}  // namespace

int MultistageProblem::outcome_count(int t) const {
    if (t == 0) return 1;
    return static_cast<int>(process.outcomes.at(static_cast<std::size_t>(t - 1)).size());
}

const StageRealization& MultistageProblem::realization(int t, int outcome) const {
    if (t == 0) return stage0;
    return process.outcomes.at(static_cast<std::size_t>(t - 1)).at(static_cast<std::size_t>(outcome));
}

int MultistageProblem::info_count(int t) const {
    if (!markov() || t == 0) return 1;
    return outcome_count(t);
}

int MultistageProblem::info_index(int t, int outcome) const {
    if (!markov() || t == 0) return 0;
    return outcome;
}

double MultistageProblem::conditional_probability(int t, int prev_info, int outcome) const {
    if (!markov()) return process.probabilities.at(static_cast<std::size_t>(t - 1))[outcome];
    if (t == 1) return process.initial[outcome];
    return process.transitions.at(static_cast<std::size_t>(t - 2))(prev_info, outcome);
}

ValidationReport validate(const MultistageProblem& problem) {
    ValidationReport report;
    auto& out = report.violations;
    const int T = problem.T;
    if (T < 1) {
        out.push_back("T must be at least 1 (got " + std::to_string(T) + ")");
        return report;
    }
    check_realization(problem.stage0, "stage 0", out);
    const auto& proc = problem.process;
    if (static_cast<int>(proc.outcomes.size()) != T) {
        out.push_back("process has " + std::to_string(proc.outcomes.size()) +
                      " outcome stages but T = " + std::to_string(T));
        return report;
    }

    for (int t = 1; t <= T; ++t) {
        const auto& omega = proc.outcomes[static_cast<std::size_t>(t - 1)];
        if (omega.empty()) {
            out.push_back("stage " + std::to_string(t) + " has no outcomes");
            continue;
        }
        const auto& ref = omega.front();
        for (std::size_t j = 0; j < omega.size(); ++j) {
            const auto& w = omega[j];
            const std::string where = "stage " + std::to_string(t) + " outcome " + std::to_string(j);
            check_realization(w, where, out);
            if (w.A.rows() != ref.A.rows() || w.A.cols() != ref.A.cols() ||
                w.B.rows() != ref.B.rows()) {
                out.push_back(where + ": shape differs from outcome 0 of the same stage");
            }
        }
    }

    // Linking chain: R_{t-1}^x must fit into the leading rows of stage t.
    for (int t = 1; t <= T; ++t) {
        const auto& omega = proc.outcomes[static_cast<std::size_t>(t - 1)];
        if (omega.empty()) continue;
        const int rows_t = omega.front().rows();
        const int r_prev = problem.resource_dim(t - 1);
        if (r_prev > rows_t) {
            out.push_back("B_" + std::to_string(t - 1) + " has " + std::to_string(r_prev) +
                          " rows but stage " + std::to_string(t) + " has only " +
                          std::to_string(rows_t) + " equality rows");
        }
        if (t - 1 >= 1) {
            for (const auto& w : proc.outcomes[static_cast<std::size_t>(t - 2)]) {
                if (w.resource_dim() != r_prev) {
                    out.push_back("stage " + std::to_string(t - 1) +
                                  ": resource dimension differs across outcomes");
                    break;
                }
            }
        }
    }

    if (proc.kind == ProcessKind::StagewiseIndependent) {
        if (static_cast<int>(proc.probabilities.size()) != T) {
            out.push_back("expected " + std::to_string(T) + " probability vectors, got " +
                          std::to_string(proc.probabilities.size()));
        } else {
            for (int t = 1; t <= T; ++t) {
                const auto& p = proc.probabilities[static_cast<std::size_t>(t - 1)];
                if (p.size() != problem.outcome_count(t)) {
                    out.push_back("probability vector of stage " + std::to_string(t) +
                                  " has wrong length");
                    continue;
                }
                check_distribution(p, "probabilities of stage " + std::to_string(t), out);
            }
        }
    } else {
        if (proc.initial.size() != problem.outcome_count(1)) {
            out.push_back("initial distribution has wrong length");
        } else {
            check_distribution(proc.initial, "initial distribution", out);
        }
        if (static_cast<int>(proc.transitions.size()) != T - 1) {
            out.push_back("expected " + std::to_string(T - 1) + " transition matrices, got " +
                          std::to_string(proc.transitions.size()));
        } else {
            for (int t = 1; t < T; ++t) {
                const auto& P = proc.transitions[static_cast<std::size_t>(t - 1)];
                const std::string name = "P_" + std::to_string(t);
                if (P.rows() != problem.outcome_count(t) || P.cols() != problem.outcome_count(t + 1)) {
                    out.push_back(name + " has shape " + std::to_string(P.rows()) + "x" +
                                  std::to_string(P.cols()) + ", expected " +
                                  std::to_string(problem.outcome_count(t)) + "x" +
                                  std::to_string(problem.outcome_count(t + 1)));
                    continue;
                }
                for (Eigen::Index i = 0; i < P.rows(); ++i) {
                    const Vector row = P.row(i).transpose();
                    check_distribution(row, "row " + std::to_string(i + 1) + " of " + name, out, true);
                }
            }
        }
    }
    return report;
}

void require_valid(const MultistageProblem& problem) {
    const auto report = validate(problem);
    if (report.ok()) return;
    std::ostringstream os;
    os << "invalid problem:";
    for (const auto& v : report.violations) os << "\n  - " << v;
    throw InvalidArgument(os.str());
}

namespace {

int draw(const Vector& p, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        acc += p[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(p.size() - 1);
}

}  // namespace

ScenarioPath sample_path(const MultistageProblem& problem, Rng& rng) {
    ScenarioPath path;
    path.indices.reserve(static_cast<std::size_t>(problem.T));
    int prev = 0;
    for (int t = 1; t <= problem.T; ++t) {
        int j = 0;
        if (!problem.markov()) {
            j = draw(problem.process.probabilities[static_cast<std::size_t>(t - 1)], rng);
        } else if (t == 1) {
            j = draw(problem.process.initial, rng);
        } else {
            const Vector row =
                problem.process.transitions[static_cast<std::size_t>(t - 2)].row(prev).transpose();
            j = draw(row, rng);
        }
        path.probability *= problem.conditional_probability(t, problem.info_index(t - 1, prev), j);
        path.indices.push_back(j);
        prev = j;
    }
    return path;
}

std::vector<ScenarioPath> enumerate_paths(const MultistageProblem& problem, std::uint64_t max_paths) {
    std::uint64_t count = 1;
    for (int t = 1; t <= problem.T; ++t) {
        const auto n = static_cast<std::uint64_t>(problem.outcome_count(t));
        if (n != 0 && count > max_paths / n) {
            throw TooManyPaths("scenario tree has more than " + std::to_string(max_paths) + " paths");
        }
        count *= n;
    }
    if (count > max_paths) {
        throw TooManyPaths("scenario tree has " + std::to_string(count) + " paths, limit is " +
                           std::to_string(max_paths));
    }

    std::vector<ScenarioPath> paths;
    paths.reserve(count);
    ScenarioPath current;
    current.indices.assign(static_cast<std::size_t>(problem.T), 0);

    auto recurse = [&](auto&& self, int t, int prev, double prob) -> void {
        if (t > problem.T) {
            current.probability = prob;
            paths.push_back(current);
            return;
        }
        for (int j = 0; j < problem.outcome_count(t); ++j) {
            current.indices[static_cast<std::size_t>(t - 1)] = j;
            const double p = problem.conditional_probability(t, problem.info_index(t - 1, prev), j);
            if (p == 0.0) continue;
            self(self, t + 1, j, prob * p);
        }
    };
    recurse(recurse, 1, 0, 1.0);
    return paths;
}

MultistageProblem as_markov(const MultistageProblem& problem) {
    if (problem.markov()) return problem;
    MultistageProblem out = problem;
    auto& proc = out.process;
    proc.kind = ProcessKind::Markov;
    proc.initial = problem.process.probabilities.at(0);
    proc.transitions.clear();
    for (int t = 1; t < problem.T; ++t) {
        const Vector& next = problem.process.probabilities[static_cast<std::size_t>(t)];
        Matrix P(problem.outcome_count(t), next.size());
        for (Eigen::Index i = 0; i < P.rows(); ++i) P.row(i) = next.transpose();
        proc.transitions.push_back(std::move(P));
    }
    proc.probabilities.clear();
    return out;
}

}  // namespace rsddp
