#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include <Eigen/LU>

#include "rsddp/errors.hpp"
#include "simplex_core.hpp"

namespace rsddp {

namespace {

constexpr double kPivotTol = 1e-7;
constexpr int kDegenerateSwitch = 50;
constexpr double kCleanupTol = 1e-13;
constexpr double kRefactorPivot = 1e-5;
// Above this reciprocal condition estimate partial pivoting is trusted.
constexpr double kWellConditioned = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
    }
    return "unknown";
}

void WarmStart::clear() {
    basic_.clear();
    binv_.resize(0, 0);
    rows_ = cols_ = 0;
    fingerprint_ = 0;
    updates_ = 0;
}

namespace {

void hash_mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
}

}  // namespace

std::uint64_t fingerprint(const Matrix& A, int rows, int cols) {
    std::uint64_t h = 1469598103934665603ull;
    hash_mix(h, static_cast<std::uint64_t>(rows));
    hash_mix(h, static_cast<std::uint64_t>(cols));
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) hash_mix(h, std::bit_cast<std::uint64_t>(A(i, j)));
    return h;
}

SimplexCore::SimplexCore(const SubproblemSpec& spec, const SolverOptions& options, const Vector& cost,
                         const Scaling& scaling)
    : A_(spec.A),
      b_(spec.rhs),
      scaling_(scaling),
      options_(options),
      cost_(cost),
      true_cost_(cost),
      m_(spec.rows()),
      n_(spec.cols()) {
    if (b_.size() != m_ || cost.size() != n_) {
        throw DimensionMismatch("subproblem: rhs/cost lengths do not match A");
    }
    sign_.resize(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) sign_[static_cast<std::size_t>(i)] = b_[i] >= 0.0 ? 1.0 : -1.0;
    position_.assign(static_cast<std::size_t>(n_), -1);
    opt_tol_ = 1e-9 * std::max(1.0, inf_norm(cost));
    feas_tol_ = 1e-9 * std::max(1.0, inf_norm(b_));
}

Vector SimplexCore::ftran(int column) const {
    if (column >= 0) return binv_ * A_.col(column);
    const int row = -column - 1;
    return binv_.col(row) * sign_[static_cast<std::size_t>(row)];
}

double SimplexCore::column_dot(int column, const Vector& v) const {
    if (column >= 0) return A_.col(column).dot(v);
    const int row = -column - 1;
    return sign_[static_cast<std::size_t>(row)] * v[row];
}

bool SimplexCore::has_artificial_basic() const {
    return std::any_of(basic_.begin(), basic_.end(), [](int b) { return b < 0; });
}

bool SimplexCore::try_refactor() {
    Matrix B(m_, m_);
    for (int i = 0; i < m_; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        if (col >= 0) {
            B.col(i) = A_.col(col);
        } else {
            B.col(i).setZero();
            B(-col - 1, i) = sign_[static_cast<std::size_t>(-col - 1)];
        }
    }
    Eigen::PartialPivLU<Matrix> plu(B);
    if (plu.rcond() > kWellConditioned) {
        binv_ = plu.inverse();
    } else {
        Eigen::FullPivLU<Matrix> lu(B);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) {
            last_rank_ = static_cast<int>(lu.rank());
            return false;
        }
        binv_ = lu.inverse();
    }
    updates_ = 0;
    recompute_primal();
    return true;
}

void SimplexCore::refactor() {
    if (!try_refactor()) {
        throw NumericalBreakdown("basis matrix is singular (rank " + std::to_string(last_rank_) + " of " +
                                 std::to_string(m_) + ")");
    }
}

void SimplexCore::recompute_primal() {
    xb_ = binv_ * b_;
    // One step of iterative refinement against the true basis columns.
    Vector r = b_;
    for (int i = 0; i < m_; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        if (col >= 0) {
            r.noalias() -= A_.col(col) * xb_[i];
        } else {
            r[-col - 1] -= sign_[static_cast<std::size_t>(-col - 1)] * xb_[i];
        }
    }
    xb_.noalias() += binv_ * r;
}

bool SimplexCore::pivot(int row, int entering, const Vector& dir) {
    const double piv = dir[row];
    // Small relative pivots degrade the updated inverse quickly: refactor
    // at once, and undo the exchange if it made the basis singular.
    const bool fragile = std::abs(piv) < kRefactorPivot * inf_norm(dir);
    Matrix saved;
    if (fragile) saved = binv_;
    const Eigen::RowVectorXd pivot_row = binv_.row(row) / piv;
    binv_.noalias() -= dir * pivot_row;
    binv_.row(row) = pivot_row;

    const int old = basic_[static_cast<std::size_t>(row)];
    if (old >= 0) position_[static_cast<std::size_t>(old)] = -1;
    basic_[static_cast<std::size_t>(row)] = entering;
    if (entering >= 0) position_[static_cast<std::size_t>(entering)] = row;

    ++iterations_;
    if (iterations_ > options_.max_iterations) {
        throw NumericalBreakdown("simplex iteration limit reached");
    }
    ++updates_;
    if (!fragile && updates_ < options_.refactor_interval) return true;
    if (try_refactor()) return true;

    if (entering >= 0) position_[static_cast<std::size_t>(entering)] = -1;
    basic_[static_cast<std::size_t>(row)] = old;
    if (old >= 0) position_[static_cast<std::size_t>(old)] = row;
    if (fragile) {
        binv_ = std::move(saved);
        --updates_;
        recompute_primal();
    } else {
        refactor();
    }
    return false;
}

void SimplexCore::cold_start() {
    basic_.assign(static_cast<std::size_t>(m_), 0);
    position_.assign(static_cast<std::size_t>(n_), -1);
    binv_ = Matrix::Zero(m_, m_);

    // Singleton columns whose sign keeps the basic value non-negative make a
    // cheap crash basis; remaining rows get artificials.
    std::vector<int> singleton_row(static_cast<std::size_t>(n_), -1);
    for (int j = 0; j < n_; ++j) {
        int count = 0;
        int row = -1;
        for (int i = 0; i < m_; ++i) {
            if (A_(i, j) != 0.0) {
                ++count;
                row = i;
            }
        }
        if (count == 1) singleton_row[static_cast<std::size_t>(j)] = row;
    }
    std::vector<int> chosen(static_cast<std::size_t>(m_), -1);
    for (int j = 0; j < n_; ++j) {
        const int i = singleton_row[static_cast<std::size_t>(j)];
        if (i < 0 || chosen[static_cast<std::size_t>(i)] >= 0) continue;
        const double a = A_(i, j);
        if (std::abs(a) < kPivotTol) continue;
        if (b_[i] != 0.0 && (b_[i] > 0.0) != (a > 0.0)) continue;
        chosen[static_cast<std::size_t>(i)] = j;
    }
    for (int i = 0; i < m_; ++i) {
        const int j = chosen[static_cast<std::size_t>(i)];
        if (j >= 0) {
            basic_[static_cast<std::size_t>(i)] = j;
            position_[static_cast<std::size_t>(j)] = i;
            binv_(i, i) = 1.0 / A_(i, j);
        } else {
            basic_[static_cast<std::size_t>(i)] = -(i + 1);
            binv_(i, i) = sign_[static_cast<std::size_t>(i)];
        }
    }
    updates_ = 0;
    recompute_primal();
}

bool SimplexCore::load_warm(const WarmStart& warm) {
    if (warm.empty()) return false;
    const int m0 = warm.rows_;
    const int n0 = warm.cols_;
    if (m_ < m0 || n_ < n0) return false;
    if (std::any_of(warm.basic_.begin(), warm.basic_.end(), [](int b) { return b < 0; })) return false;
    if (original_fingerprint(m0, n0) != warm.fingerprint_) return false;
    if (n_ > n0 && !A_.block(0, n0, m0, n_ - n0).isZero(0.0)) return false;

    // Each appended row needs an appended column that is nonzero only there.
    std::vector<int> extra(static_cast<std::size_t>(m_ - m0), -1);
    std::vector<bool> used(static_cast<std::size_t>(n_ - n0), false);
    for (int i = m0; i < m_; ++i) {
        for (int j = n0; j < n_; ++j) {
            if (used[static_cast<std::size_t>(j - n0)] || A_(i, j) == 0.0) continue;
            bool singleton = true;
            for (int k = m0; k < m_ && singleton; ++k) {
                if (k != i && A_(k, j) != 0.0) singleton = false;
            }
            if (!singleton) continue;
            extra[static_cast<std::size_t>(i - m0)] = j;
            used[static_cast<std::size_t>(j - n0)] = true;
            break;
        }
        if (extra[static_cast<std::size_t>(i - m0)] < 0) return false;
    }

    basic_ = warm.basic_;
    position_.assign(static_cast<std::size_t>(n_), -1);
    for (int i = 0; i < m0; ++i) position_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] = i;
    // The stored inverse belongs to the old scaling; rescaling by powers of
    // two is exact.
    Matrix top = warm.binv_;
    for (int i = 0; i < m0; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        top.row(i) *= warm.col_scale_[col] / scaling_.col[col];
    }
    for (int k = 0; k < m0; ++k) top.col(k) *= warm.row_scale_[k] / scaling_.row[k];
    binv_ = Matrix::Zero(m_, m_);
    binv_.topLeftCorner(m0, m0) = top;
    if (m_ > m0) {
        // [[B, 0], [R, D]]^{-1} = [[B^{-1}, 0], [-D^{-1} R B^{-1}, D^{-1}]]
        const int k = m_ - m0;
        Matrix R(k, m0);
        for (int i = 0; i < m0; ++i) {
            R.col(i) = A_.block(m0, basic_[static_cast<std::size_t>(i)], k, 1);
        }
        Matrix lower = -(R * top);
        for (int r = 0; r < k; ++r) {
            const int j = extra[static_cast<std::size_t>(r)];
            const double d = A_(m0 + r, j);
            lower.row(r) /= d;
            binv_(m0 + r, m0 + r) = 1.0 / d;
            basic_.push_back(j);
            position_[static_cast<std::size_t>(j)] = m0 + r;
        }
        binv_.block(m0, 0, k, m0) = lower;
    }
    updates_ = warm.updates_;
    if (updates_ >= options_.refactor_interval) {
        refactor();
    } else {
        recompute_primal();
    }
    return true;
}

void SimplexCore::store_warm(WarmStart& warm) const {
    if (has_artificial_basic()) {
        warm.clear();
        return;
    }
    warm.basic_ = basic_;
    warm.binv_ = binv_;
    warm.rows_ = m_;
    warm.cols_ = n_;
    warm.row_scale_ = scaling_.row;
    warm.col_scale_ = scaling_.col;
    warm.fingerprint_ = original_fingerprint(m_, n_);
    warm.updates_ = updates_;
}

std::uint64_t SimplexCore::original_fingerprint(int rows, int cols) const {
    // Same hash as fingerprint() of the unscaled block; powers of two divide exactly.
    std::uint64_t h = 1469598103934665603ull;
    hash_mix(h, static_cast<std::uint64_t>(rows));
    hash_mix(h, static_cast<std::uint64_t>(cols));
    for (int j = 0; j < cols; ++j) {
        const double cj = scaling_.col[j];
        for (int i = 0; i < rows; ++i) hash_mix(h, std::bit_cast<std::uint64_t>(A_(i, j) / (scaling_.row[i] * cj)));
    }
    return h;
}

Vector SimplexCore::reduced_costs(const Vector& mu) const {
    Vector d = cost_ - A_.transpose() * mu;
    for (int i = 0; i < m_; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        if (col >= 0) d[col] = 0.0;
    }
    return d;
}

Vector SimplexCore::multipliers(const Vector& cost) const {
    Vector cb(m_);
    for (int i = 0; i < m_; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        cb[i] = col >= 0 ? cost[col] : 0.0;
    }
    Vector mu = binv_.transpose() * cb;
    Vector r = cb;
    for (int i = 0; i < m_; ++i) r[i] -= column_dot(basic_[static_cast<std::size_t>(i)], mu);
    mu.noalias() += binv_.transpose() * r;
    return mu;
}

SimplexCore::Outcome SimplexCore::primal(bool phase1) {
    int degenerate = 0;
    bool bland = false;
    std::vector<int> rejected;
    auto is_rejected = [&](int j) { return std::find(rejected.begin(), rejected.end(), j) != rejected.end(); };
    Vector cb(m_);
    for (;;) {
        for (int i = 0; i < m_; ++i) {
            const int col = basic_[static_cast<std::size_t>(i)];
            cb[i] = phase1 ? (col < 0 ? 1.0 : 0.0) : (col >= 0 ? cost_[col] : 0.0);
        }
        const Vector mu = binv_.transpose() * cb;
        const double tol = phase1 ? 1e-9 : opt_tol_;

        int entering = -1;
        double best = -tol;
        for (int j = 0; j < n_; ++j) {
            if (position_[static_cast<std::size_t>(j)] >= 0 || is_rejected(j)) continue;
            const double cj = phase1 ? 0.0 : cost_[j];
            const double dj = cj - A_.col(j).dot(mu);
            if (bland) {
                if (dj < -tol) {
                    entering = j;
                    break;
                }
            } else if (dj < best) {
                best = dj;
                entering = j;
            }
        }
        if (entering < 0) {
            if (!rejected.empty()) throw NumericalBreakdown("simplex: every improving column gives a singular basis");
            return Outcome::Optimal;
        }

        const Vector dir = ftran(entering);
        const double piv_tol = kPivotTol * std::max(1.0, inf_norm(dir));
        auto key = [this](int row) {
            const int col = basic_[static_cast<std::size_t>(row)];
            return col < 0 ? -1 : col;
        };
        auto eligible = [&](int i) {
            if (!phase1 && basic_[static_cast<std::size_t>(i)] < 0) return std::abs(dir[i]) > piv_tol;
            return dir[i] > piv_tol;
        };
        auto ratio_of = [&](int i) {
            if (!phase1 && basic_[static_cast<std::size_t>(i)] < 0) return 0.0;
            return std::max(xb_[i], 0.0) / dir[i];
        };
        int leave = -1;
        double ratio_best = std::numeric_limits<double>::infinity();
        if (bland) {
            for (int i = 0; i < m_; ++i) {
                if (!eligible(i)) continue;
                const double ratio = ratio_of(i);
                const double tie = 1e-12 * std::max(1.0, leave < 0 ? 1.0 : ratio_best);
                if (leave < 0 || ratio < ratio_best - tie) {
                    leave = i;
                    ratio_best = ratio;
                } else if (std::abs(ratio - ratio_best) <= tie && key(i) < key(leave)) {
                    leave = i;
                    ratio_best = std::min(ratio, ratio_best);
                }
            }
        } else {
            // Harris: relaxed bound first, then the largest pivot within it.
            double relaxed = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                if (!eligible(i)) continue;
                const double bound = (!phase1 && basic_[static_cast<std::size_t>(i)] < 0)
                                         ? 0.0
                                         : (std::max(xb_[i], 0.0) + feas_tol_) / dir[i];
                relaxed = std::min(relaxed, bound);
            }
            double best_pivot = 0.0;
            for (int i = 0; i < m_; ++i) {
                if (!eligible(i)) continue;
                const double ratio = ratio_of(i);
                if (ratio > relaxed) continue;
                const double a = std::abs(dir[i]);
                if (leave < 0 || a > best_pivot * (1.0 + 1e-12) ||
                    (a >= best_pivot * (1.0 - 1e-12) && key(i) < key(leave))) {
                    leave = i;
                    best_pivot = a;
                    ratio_best = ratio;
                }
            }
        }
        if (leave < 0) {
            // Phase 1 is bounded below, so this is a numerically useless column.
            if (!phase1) return Outcome::Unbounded;
            rejected.push_back(entering);
            continue;
        }

        const double theta = ratio_best;
        xb_.noalias() -= theta * dir;
        xb_[leave] = theta;
        for (int i = 0; i < m_; ++i)
            if (xb_[i] < 0.0 && xb_[i] > -feas_tol_) xb_[i] = 0.0;

        if (theta <= 1e-12) {
            if (++degenerate >= kDegenerateSwitch) bland = true;
        } else {
            degenerate = 0;
            bland = false;
        }
        if (pivot(leave, entering, dir)) {
            rejected.clear();
        } else {
            rejected.push_back(entering);
        }
    }
}

SimplexCore::Outcome SimplexCore::dual(double tol) {
    int degenerate = 0;
    bool bland = false;
    std::vector<int> rejected;
    for (;;) {
        int leave = -1;
        double worst = -tol;
        for (int i = 0; i < m_; ++i) {
            if (xb_[i] >= -tol || basic_[static_cast<std::size_t>(i)] < 0) continue;
            if (bland) {
                if (leave < 0 || basic_[static_cast<std::size_t>(i)] < basic_[static_cast<std::size_t>(leave)]) {
                    leave = i;
                }
            } else if (xb_[i] < worst) {
                worst = xb_[i];
                leave = i;
            }
        }
        if (leave < 0) return Outcome::Optimal;

        Vector cb(m_);
        for (int i = 0; i < m_; ++i) {
            const int col = basic_[static_cast<std::size_t>(i)];
            cb[i] = col >= 0 ? cost_[col] : 0.0;
        }
        const Vector mu = binv_.transpose() * cb;
        const Vector rho = binv_.row(leave).transpose();

        Vector alpha = Vector::Zero(n_);
        Vector dj = Vector::Zero(n_);
        double alpha_max = 0.0;
        for (int j = 0; j < n_; ++j) {
            if (position_[static_cast<std::size_t>(j)] >= 0) continue;
            alpha[j] = A_.col(j).dot(rho);
            dj[j] = std::max(cost_[j] - A_.col(j).dot(mu), 0.0);
            alpha_max = std::max(alpha_max, std::abs(alpha[j]));
        }
        const double piv_tol = kPivotTol * std::max(1.0, alpha_max);
        auto candidate = [&](int j) {
            return position_[static_cast<std::size_t>(j)] < 0 && alpha[j] < -piv_tol &&
                   std::find(rejected.begin(), rejected.end(), j) == rejected.end();
        };

        int entering = -1;
        double ratio_best = std::numeric_limits<double>::infinity();
        if (bland) {
            for (int j = 0; j < n_; ++j) {
                if (!candidate(j)) continue;
                const double ratio = dj[j] / -alpha[j];
                if (ratio < ratio_best - 1e-12 * std::max(1.0, ratio)) {
                    ratio_best = ratio;
                    entering = j;
                }
            }
        } else {
            double relaxed = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n_; ++j)
                if (candidate(j)) relaxed = std::min(relaxed, (dj[j] + opt_tol_) / -alpha[j]);
            double best_pivot = 0.0;
            for (int j = 0; j < n_; ++j) {
                if (!candidate(j)) continue;
                const double ratio = dj[j] / -alpha[j];
                if (ratio > relaxed) continue;
                if (-alpha[j] > best_pivot * (1.0 + 1e-12)) {
                    best_pivot = -alpha[j];
                    entering = j;
                    ratio_best = ratio;
                }
            }
        }
        if (entering < 0) {
            if (!rejected.empty()) throw NumericalBreakdown("dual simplex: every candidate gives a singular basis");
            return Outcome::Infeasible;
        }

        const Vector dir = ftran(entering);
        const double theta = xb_[leave] / dir[leave];
        xb_.noalias() -= theta * dir;
        xb_[leave] = theta;

        if (ratio_best <= 1e-12) {
            if (++degenerate >= kDegenerateSwitch) bland = true;
        } else {
            degenerate = 0;
            bland = false;
        }
        if (pivot(leave, entering, dir)) {
            rejected.clear();
        } else {
            rejected.push_back(entering);
        }
    }
}

void SimplexCore::drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
        if (basic_[static_cast<std::size_t>(r)] >= 0) continue;
        const Vector rho = binv_.row(r).transpose();
        int best_j = -1;
        double best = kPivotTol;
        for (int j = 0; j < n_; ++j) {
            if (position_[static_cast<std::size_t>(j)] >= 0) continue;
            const double a = std::abs(A_.col(j).dot(rho));
            if (a > best * (1.0 + 1e-12)) {
                best = a;
                best_j = j;
            }
        }
        if (best_j < 0) continue;  // redundant row; artificial stays at zero
        const Vector dir = ftran(best_j);
        xb_[r] = 0.0;
        if (!pivot(r, best_j, dir)) recompute_primal();
    }
}

bool SimplexCore::make_feasible(bool warm_loaded) {
    if (warm_loaded) {
        if (xb_.size() == 0 || xb_.minCoeff() >= -feas_tol_) {
            for (int i = 0; i < m_; ++i) xb_[i] = std::max(xb_[i], 0.0);
            return true;
        }
        // Shift costs so the loaded basis is dual feasible, restore feasibility
        // with the dual simplex, then hand back the true costs.
        const Vector mu = multipliers(cost_);
        const Vector d = reduced_costs(mu);
        for (int j = 0; j < n_; ++j) {
            if (position_[static_cast<std::size_t>(j)] < 0 && d[j] < 0.0) cost_[j] -= d[j];
        }
        const Outcome out = dual(feas_tol_);
        cost_ = true_cost_;
        if (out == Outcome::Infeasible) return false;
        return true;
    }

    cold_start();
    if (has_artificial_basic()) {
        primal(true);
        // Measured in the caller's row units.
        double infeasibility = 0.0;
        for (int i = 0; i < m_; ++i)
            if (basic_[static_cast<std::size_t>(i)] < 0) infeasibility += std::abs(xb_[i]) / scaling_.row[i];
        const double b1 = b_.size() == 0 ? 0.0 : b_.cwiseQuotient(scaling_.row).lpNorm<1>();
        if (infeasibility > 1e-9 * (1.0 + b1)) return false;
        drive_out_artificials();
    }
    return true;
}

SimplexCore::Outcome SimplexCore::optimize() {
    const Outcome out = primal(false);
    if (out != Outcome::Optimal) return out;
    // The relaxed ratio test can leave small negative basics; the final
    // basis is dual feasible, so a few dual steps clean them up.
    recompute_primal();
    if (xb_.size() > 0 && xb_.minCoeff() < -kCleanupTol * std::max(1.0, inf_norm(b_))) {
        if (dual(kCleanupTol * std::max(1.0, inf_norm(b_))) == Outcome::Optimal) recompute_primal();
        return primal(false);
    }
    return out;
}

Vector SimplexCore::solution() const {
    Vector y = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i) {
        const int col = basic_[static_cast<std::size_t>(i)];
        if (col < 0) continue;
        const double v = xb_[i];
        y[col] = (v < 0.0 && v > -feas_tol_) ? 0.0 : v;
    }
    return y;
}

namespace {

void fill_lp_solution(const SubproblemSpec& spec, SimplexCore& core, SubproblemSolution& sol) {
    core.recompute_primal();
    sol.y = core.solution();
    sol.duals = core.multipliers(spec.c);
    sol.reduced_costs = spec.c - spec.A.transpose() * sol.duals;
    for (int i = 0; i < core.m(); ++i) {
        const int col = core.basic_[static_cast<std::size_t>(i)];
        if (col >= 0) sol.reduced_costs[col] = 0.0;
    }
    sol.objective = spec.c.dot(sol.y) + spec.offset;
    sol.basis = core.basic_;
    sol.is_basic_dual = true;
    sol.iterations = core.iterations_;
}

}  // namespace

namespace {

SubproblemSolution solve_scaled_lp(const SubproblemSpec& spec, const Scaling& sc, const SolverOptions& options,
                                   WarmStart* warm) {
    SubproblemSolution sol;
    SimplexCore core(spec, options, spec.c, sc);

    bool warm_loaded = false;
    if (warm != nullptr) {
        try {
            warm_loaded = core.load_warm(*warm);
        } catch (const NumericalBreakdown&) {
            warm_loaded = false;
        }
    }
    bool feasible = false;
    try {
        feasible = core.make_feasible(warm_loaded);
    } catch (const NumericalBreakdown&) {
        if (!warm_loaded) throw;
        feasible = core.make_feasible(false);
    }
    if (!feasible && warm_loaded) feasible = core.make_feasible(false);
    if (!feasible) {
        sol.status = SolveStatus::Infeasible;
        sol.iterations = core.iterations_;
        if (warm) warm->clear();
        return sol;
    }

    const auto outcome = core.optimize();
    fill_lp_solution(spec, core, sol);
    sol.status = outcome == SimplexCore::Outcome::Unbounded ? SolveStatus::Unbounded : SolveStatus::Optimal;

    if (sol.status == SolveStatus::Optimal && !verify_residuals(sol, spec, options.eps_f)) {
        core.refactor();  // retry once on a fresh factorization
        fill_lp_solution(spec, core, sol);
    }
    if (warm) core.store_warm(*warm);
    return sol;
}

}  // namespace

Scaling compute_scaling(const Matrix& A, bool columns) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    Scaling sc{Vector::Ones(m), Vector::Ones(n)};
    if (m == 0 || n == 0) return sc;
    // Entries this far below the largest one are treated as noise.
    const double floor = 1e-12 * A.cwiseAbs().maxCoeff();
    struct Entry {
        Eigen::Index i;
        Eigen::Index j;
        double a;
    };
    std::vector<Entry> nz;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
            if (std::abs(A(i, j)) > floor) nz.push_back({i, j, std::abs(A(i, j))});

    Vector lo(std::max(m, n)), hi(std::max(m, n));
    for (int pass = 0; pass < (columns ? 4 : 0); ++pass) {
        lo.head(m).setConstant(kInf);
        hi.head(m).setZero();
        for (const Entry& e : nz) {
            const double v = e.a * sc.col[e.j];
            lo[e.i] = std::min(lo[e.i], v);
            hi[e.i] = std::max(hi[e.i], v);
        }
        for (Eigen::Index i = 0; i < m; ++i)
            if (hi[i] > 0.0 && std::isfinite(hi[i])) sc.row[i] = 1.0 / std::sqrt(lo[i] * hi[i]);
        lo.head(n).setConstant(kInf);
        hi.head(n).setZero();
        for (const Entry& e : nz) {
            const double v = e.a * sc.row[e.i];
            lo[e.j] = std::min(lo[e.j], v);
            hi[e.j] = std::max(hi[e.j], v);
        }
        for (Eigen::Index j = 0; j < n; ++j)
            if (hi[j] > 0.0 && std::isfinite(hi[j])) sc.col[j] = 1.0 / std::sqrt(lo[j] * hi[j]);
    }
    auto pow2 = [](double v) {
        int e = 0;
        std::frexp(v, &e);
        return std::ldexp(1.0, e - 1);
    };
    for (Eigen::Index j = 0; j < n; ++j) sc.col[j] = std::clamp(pow2(sc.col[j]), 0x1p-30, 0x1p30);
    // Final row pass so that max_j |a_ij| lies in [0.5, 1).
    Vector rmax = Vector::Zero(m);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < m; ++i) rmax[i] = std::max(rmax[i], std::abs(A(i, j)) * sc.col[j]);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (rmax[i] > 0.0 && std::isfinite(rmax[i])) {
            int e = 0;
            std::frexp(rmax[i], &e);
            sc.row[i] = std::ldexp(1.0, -e);
        } else {
            sc.row[i] = 1.0;
        }
    }
    return sc;
}

SubproblemSpec apply_scaling(const SubproblemSpec& spec, const Scaling& sc) {
    SubproblemSpec out;
    out.c = sc.col.cwiseProduct(spec.c);
    out.A = sc.row.asDiagonal() * spec.A * sc.col.asDiagonal();
    out.rhs = sc.row.cwiseProduct(spec.rhs);
    if (spec.quad) {
        QuadraticTerm quad = *spec.quad;
        const Eigen::Index q = quad.H.rows();
        quad.H = sc.col.head(q).asDiagonal() * spec.quad->H * sc.col.head(q).asDiagonal();
        out.quad = std::move(quad);
    }
    out.offset = spec.offset;
    return out;
}

void unscale_solution(SubproblemSolution& sol, const SubproblemSpec& spec, const Scaling& sc) {
    if (sol.y.size() == sc.col.size()) {
        sol.y = sc.col.cwiseProduct(sol.y);
        sol.objective = evaluate_objective(spec, sol.y);
    }
    if (sol.duals.size() == sc.row.size()) sol.duals = sc.row.cwiseProduct(sol.duals);
    if (sol.reduced_costs.size() == sc.col.size()) sol.reduced_costs = sol.reduced_costs.cwiseQuotient(sc.col);
}

SubproblemSolution solve_with_fallback(const SubproblemSpec& spec, const SolverOptions& options, WarmStart* warm,
                                       ScaledSolve solve) {
    auto attempt = [&](bool columns) {
        const Scaling sc = compute_scaling(spec.A, columns);
        SubproblemSolution sol = solve(apply_scaling(spec, sc), sc, options, warm);
        unscale_solution(sol, spec, sc);
        return sol;
    };
    auto acceptable = [&](const SubproblemSolution& sol) {
        return sol.status == SolveStatus::Unbounded ||
               (sol.status == SolveStatus::Optimal && verify_residuals(sol, spec, options.eps_f));
    };
    std::optional<SubproblemSolution> first;
    try {
        first = attempt(true);
        if (acceptable(*first)) return *first;
    } catch (const NumericalBreakdown&) {
    }
    // Second opinion with row scaling only, from a cold start.
    if (warm) warm->clear();
    try {
        SubproblemSolution second = attempt(false);
        if (acceptable(second) || !first) return second;
    } catch (const NumericalBreakdown&) {
        if (!first) throw;
    }
    return *first;
}

SubproblemSolution solve_lp(const SubproblemSpec& spec, const SolverOptions& options, WarmStart* warm) {
    if (spec.rhs.size() != spec.rows() || spec.c.size() != spec.cols()) {
        throw DimensionMismatch("solve_lp: inconsistent spec dimensions");
    }
    SubproblemSolution sol = solve_with_fallback(spec, options, warm, solve_scaled_lp);
    if (!options.dump_path.empty() &&
        (sol.status == SolveStatus::Infeasible ||
         (sol.status == SolveStatus::Optimal && !verify_residuals(sol, spec, options.eps_f)))) {
        dump_subproblem(spec, &sol, options.dump_path);
    }
    return sol;
}

double relative_residual(const SubproblemSolution& sol, const SubproblemSpec& spec) {
    if (sol.y.size() != spec.cols()) return kInf;
    const Vector r = spec.A * sol.y - spec.rhs;
    return r.norm() / (1.0 + spec.rhs.norm());
}

bool verify_residuals(const SubproblemSolution& sol, const SubproblemSpec& spec, double eps_f) {
    if (sol.y.size() != spec.cols()) return false;
    if (sol.y.size() > 0 && sol.y.minCoeff() < -eps_f * (1.0 + sol.y.lpNorm<Eigen::Infinity>())) return false;
    return relative_residual(sol, spec) <= eps_f;
}

double complementarity(const SubproblemSolution& sol) {
    if (sol.y.size() == 0) return 0.0;
    return sol.y.cwiseProduct(sol.reduced_costs).cwiseAbs().maxCoeff();
}

double evaluate_objective(const SubproblemSpec& spec, const Vector& y) {
    double v = spec.c.dot(y) + spec.offset;
    if (spec.quad && spec.quad->rho != 0.0) {
        const auto q = spec.quad->H.rows();
        const auto yq = y.head(q);
        v += 0.5 * spec.quad->rho * yq.dot(spec.quad->H * yq);
    }
    return v;
}

void dump_subproblem(const SubproblemSpec& spec, const SubproblemSolution* sol, const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) return;
    const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, " ", "\n", "", "", "", "");
    out.precision(17);
    out << "# subproblem " << spec.rows() << " x " << spec.cols() << "\n";
    out << "c:\n" << spec.c.transpose().format(fmt) << "\n";
    out << "A:\n" << spec.A.format(fmt) << "\n";
    out << "rhs:\n" << spec.rhs.transpose().format(fmt) << "\n";
    out << "offset: " << spec.offset << "\n";
    if (spec.quad) {
        out << "rho: " << spec.quad->rho << "\nH:\n" << spec.quad->H.format(fmt) << "\n";
    }
    if (sol != nullptr) {
        out << "status: " << to_string(sol->status) << "\nobjective: " << sol->objective << "\n";
        out << "y:\n" << sol->y.transpose().format(fmt) << "\n";
        out << "duals:\n" << sol->duals.transpose().format(fmt) << "\n";
        if (sol->y.size() == spec.cols()) {
            out << "relative_residual: " << relative_residual(*sol, spec) << "\n";
        }
    }
    out << "\n";
}

}  // namespace rsddp
