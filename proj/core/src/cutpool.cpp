#include "rsddp/cutpool.hpp"

#include <bit>

#include "json_util.hpp"
#include "rsddp/errors.hpp"

namespace rsddp {

namespace {

bool bitwise_equal(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

bool same_hyperplane(const Cut& a, const Cut& b) {
    return std::bit_cast<std::uint64_t>(a.alpha) == std::bit_cast<std::uint64_t>(b.alpha) &&
           bitwise_equal(a.beta, b.beta) && bitwise_equal(a.anchor, b.anchor);
}

}  // namespace

bool Cut::operator==(const Cut& other) const {
    return same_hyperplane(*this, other) && born_iteration == other.born_iteration;
}

CutPool::CutPool(std::vector<int> resource_dims, std::vector<int> info_counts) : dims_(std::move(resource_dims)) {
    if (info_counts.size() != dims_.size()) {
        throw DimensionMismatch("cut pool: resource_dims and info_counts differ in length");
    }
    cuts_.resize(dims_.size());
    for (std::size_t t = 0; t < dims_.size(); ++t) {
        if (info_counts[t] < 1) throw InvalidArgument("cut pool: info count must be positive");
        cuts_[t].resize(static_cast<std::size_t>(info_counts[t]));
    }
}

CutPool CutPool::for_problem(const MultistageProblem& problem) {
    std::vector<int> dims;
    std::vector<int> infos;
    for (int t = 0; t < problem.T; ++t) {
        dims.push_back(problem.resource_dim(t));
        infos.push_back(problem.info_count(t));
    }
    return CutPool(std::move(dims), std::move(infos));
}

void CutPool::check_index(int t, int info) const {
    if (t < 0 || t >= stages()) {
        throw DimensionMismatch("cut pool: stage " + std::to_string(t) + " out of range");
    }
    if (info < 0 || info >= info_count(t)) {
        throw DimensionMismatch("cut pool: information state " + std::to_string(info) +
                                " out of range at stage " + std::to_string(t));
    }
}

const std::vector<Cut>& CutPool::cuts(int t, int info) const {
    check_index(t, info);
    return cuts_[static_cast<std::size_t>(t)][static_cast<std::size_t>(info)];
}

std::size_t CutPool::size() const {
    std::size_t total = 0;
    for (const auto& stage : cuts_)
        for (const auto& list : stage) total += list.size();
    return total;
}

bool CutPool::add_cut(int t, int info, Cut cut) {
    check_index(t, info);
    const int r = resource_dim(t);
    if (cut.beta.size() != r || cut.anchor.size() != r) {
        throw DimensionMismatch("cut pool: cut dimension " + std::to_string(cut.beta.size()) +
                                " does not match stage " + std::to_string(t) + " resource dimension " +
                                std::to_string(r));
    }
    if (!std::isfinite(cut.alpha) || !cut.beta.allFinite() || !cut.anchor.allFinite()) {
        throw InvalidArgument("cut pool: non-finite cut");
    }
    auto& list = cuts_[static_cast<std::size_t>(t)][static_cast<std::size_t>(info)];
    for (const auto& existing : list) {
        if (same_hyperplane(existing, cut)) return false;
    }
    list.push_back(std::move(cut));
    return true;
}

std::optional<double> CutPool::evaluate(int t, int info, const Vector& R) const {
    const auto& list = cuts(t, info);
    if (R.size() != resource_dim(t)) {
        throw DimensionMismatch("cut pool: evaluation point has dimension " + std::to_string(R.size()) +
                                ", stage " + std::to_string(t) + " expects " +
                                std::to_string(resource_dim(t)));
    }
    if (list.empty()) return std::nullopt;
    double best = list.front().value_at(R);
    for (std::size_t j = 1; j < list.size(); ++j) best = std::max(best, list[j].value_at(R));
    return best;
}

void CutPool::check_compatible(const MultistageProblem& problem) const {
    if (stages() != problem.T) {
        throw DimensionMismatch("cut pool has " + std::to_string(stages()) + " stages, problem needs " +
                                std::to_string(problem.T));
    }
    for (int t = 0; t < problem.T; ++t) {
        if (resource_dim(t) != problem.resource_dim(t)) {
            throw DimensionMismatch("cut pool stage " + std::to_string(t) + " has resource dimension " +
                                    std::to_string(resource_dim(t)) + ", problem has " +
                                    std::to_string(problem.resource_dim(t)));
        }
        if (info_count(t) != problem.info_count(t)) {
            throw DimensionMismatch("cut pool stage " + std::to_string(t) + " has " +
                                    std::to_string(info_count(t)) + " information states, problem has " +
                                    std::to_string(problem.info_count(t)));
        }
    }
}

SubproblemSpec embed(const CutPool& pool, int t, int info, const SubproblemSpec& stage_spec, const Matrix& B) {
    const auto& list = pool.cuts(t, info);
    const int n = stage_spec.cols();
    const int m = stage_spec.rows();
    if (B.rows() != pool.resource_dim(t) || B.cols() != n) {
        throw DimensionMismatch("embed: B is " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                                ", expected " + std::to_string(pool.resource_dim(t)) + "x" +
                                std::to_string(n) + " at stage " + std::to_string(t));
    }
    if (list.empty()) return stage_spec;

    const int k = static_cast<int>(list.size());
    SubproblemSpec out;
    out.offset = stage_spec.offset;
    out.quad = stage_spec.quad;
    out.c = Vector::Zero(n + 2 + k);
    out.c.head(n) = stage_spec.c;
    out.c[n] = 1.0;
    out.c[n + 1] = -1.0;

    out.A = Matrix::Zero(m + k, n + 2 + k);
    out.A.topLeftCorner(m, n) = stage_spec.A;
    out.rhs.resize(m + k);
    out.rhs.head(m) = stage_spec.rhs;
    for (int j = 0; j < k; ++j) {
        const Cut& cut = list[static_cast<std::size_t>(j)];
        out.A.block(m + j, 0, 1, n) = -(cut.beta.transpose() * B);
        out.A(m + j, n) = 1.0;
        out.A(m + j, n + 1) = -1.0;
        out.A(m + j, n + 2 + j) = -1.0;
        out.rhs[m + j] = cut.alpha - cut.beta.dot(cut.anchor);
    }
    return out;
}

namespace {

using detail::json;

constexpr const char* kFormat = "rsddp-cuts";
constexpr long long kVersion = 1;

}  // namespace

std::string pool_to_string(const CutPool& pool) {
    json layout = json::array();
    json records = json::array();
    for (int t = 0; t < pool.stages(); ++t) {
        layout.push_back(json{{"resource_dim", pool.resource_dim(t)}, {"info_count", pool.info_count(t)}});
        for (int i = 0; i < pool.info_count(t); ++i) {
            for (const auto& cut : pool.cuts(t, i)) {
                records.push_back(json{{"stage", t},
                                       {"info", i},
                                       {"alpha", cut.alpha},
                                       {"beta", detail::to_json(cut.beta)},
                                       {"anchor", detail::to_json(cut.anchor)},
                                       {"born_iteration", cut.born_iteration}});
            }
        }
    }
    json doc{{"format", kFormat}, {"version", kVersion}, {"stages", std::move(layout)}, {"cuts", std::move(records)}};
    return detail::canonical_dump(doc);
}

CutPool pool_from_string(const std::string& text) {
    const json doc = detail::parse(text);
    detail::check_header(doc, kFormat, kVersion);
    try {
        const auto& layout = detail::field(doc, "stages");
        if (!layout.is_array()) throw MalformedFile("'stages' must be an array");
        std::vector<int> dims;
        std::vector<int> infos;
        for (const auto& s : layout) {
            dims.push_back(static_cast<int>(detail::integer(detail::field(s, "resource_dim"))));
            infos.push_back(static_cast<int>(detail::integer(detail::field(s, "info_count"))));
            if (dims.back() < 0 || infos.back() < 1) throw MalformedFile("invalid stage layout");
        }
        CutPool pool(std::move(dims), std::move(infos));
        const auto& records = detail::field(doc, "cuts");
        if (!records.is_array()) throw MalformedFile("'cuts' must be an array");
        for (const auto& r : records) {
            Cut cut;
            const int t = static_cast<int>(detail::integer(detail::field(r, "stage")));
            const int i = static_cast<int>(detail::integer(detail::field(r, "info")));
            cut.alpha = detail::number(detail::field(r, "alpha"));
            cut.beta = detail::vector_from(detail::field(r, "beta"));
            cut.anchor = detail::vector_from(detail::field(r, "anchor"));
            cut.born_iteration = static_cast<int>(detail::integer(detail::field(r, "born_iteration")));
            try {
                pool.add_cut(t, i, std::move(cut));
            } catch (const Error& e) {
                throw MalformedFile(std::string("invalid cut record: ") + e.what());
            }
        }
        return pool;
    } catch (const detail::json::exception& e) {
        throw MalformedFile(std::string("cut file: ") + e.what());
    }
}

void save_pool(const CutPool& pool, const std::string& path) { detail::write_file(path, pool_to_string(pool)); }

CutPool load_pool(const std::string& path) { return pool_from_string(detail::read_file(path)); }

}  // namespace rsddp
