#include <doctest.h>

#include <cmath>

#include "lp_oracle.hpp"
#include "rsddp/errors.hpp"
#include "rsddp/subproblem.hpp"

using namespace rsddp;

namespace {

SubproblemSpec make_spec(std::initializer_list<double> c, int rows, std::initializer_list<double> a,
                         std::initializer_list<double> rhs) {
    SubproblemSpec s;
    s.c = Eigen::Map<const Vector>(c.begin(), static_cast<Eigen::Index>(c.size()));
    s.A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.begin(), rows, static_cast<Eigen::Index>(c.size()));
    s.rhs = Eigen::Map<const Vector>(rhs.begin(), static_cast<Eigen::Index>(rhs.size()));
    return s;
}

void check_lp_optimality(const SubproblemSpec& s, const SubproblemSolution& sol) {
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(verify_residuals(sol, s, 1e-8));
    CHECK(complementarity(sol) <= 1e-8);
    CHECK(sol.reduced_costs.minCoeff() >= -1e-8);
    const double dual_obj = sol.duals.dot(s.rhs);
    CHECK(std::abs(dual_obj - sol.objective) <= 1e-8 * (1.0 + std::abs(sol.objective)));
}

}  // namespace

TEST_CASE("lp: single simplex vertex") {
    auto s = make_spec({-1, 0}, 1, {1, 1}, {1});
    auto sol = solve_lp(s);
    check_lp_optimality(s, sol);
    CHECK(sol.y[0] == doctest::Approx(1.0));
    CHECK(sol.y[1] == doctest::Approx(0.0));
    CHECK(sol.objective == doctest::Approx(-1.0));
    CHECK(sol.duals[0] == doctest::Approx(-1.0));
    CHECK(sol.is_basic_dual);
}

TEST_CASE("lp: newsvendor recourse") {
    auto s = make_spec({10, 0}, 1, {1, -1}, {1});
    auto sol = solve_lp(s);
    check_lp_optimality(s, sol);
    CHECK(sol.objective == doctest::Approx(10.0));
    CHECK(sol.duals[0] == doctest::Approx(10.0));
}

TEST_CASE("lp: infeasible and unbounded statuses") {
    auto inf = make_spec({1, 1}, 1, {1, 1}, {-1});
    CHECK(solve_lp(inf).status == SolveStatus::Infeasible);
    auto unb = make_spec({-1, 0}, 1, {1, -1}, {1});
    CHECK(solve_lp(unb).status == SolveStatus::Unbounded);
}

TEST_CASE("lp: redundant rows") {
    auto s = make_spec({1, 2, 0}, 2, {1, 1, 1, 2, 2, 2}, {3, 6});
    auto sol = solve_lp(s);
    check_lp_optimality(s, sol);
    CHECK(sol.objective == doctest::Approx(0.0));
}

TEST_CASE("lp: random instances match vertex enumeration") {
    Rng rng(2024);
    int matched = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto lp = testing::random_bounded_lp(rng, 6, 10);
        SubproblemSpec s{lp.c, lp.A, lp.b, std::nullopt, 0.0};
        auto ref = testing::enumerate_vertices(lp.c, lp.A, lp.b);
        auto sol = solve_lp(s);
        REQUIRE(ref.has_value());
        check_lp_optimality(s, sol);
        if (std::abs(sol.objective - ref->objective) <= 1e-8 * (1.0 + std::abs(ref->objective))) ++matched;
    }
    CHECK(matched == 100);
}

TEST_CASE("lp: infeasible random instances") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto lp = testing::random_bounded_lp(rng, 4, 8, false);
        SubproblemSpec s{lp.c, lp.A, lp.b, std::nullopt, 0.0};
        CHECK(solve_lp(s).status == SolveStatus::Infeasible);
    }
}

TEST_CASE("lp: deterministic bases and duals") {
    Rng rng(99);
    auto lp = testing::random_bounded_lp(rng, 6, 12);
    SubproblemSpec s{lp.c, lp.A, lp.b, std::nullopt, 0.0};
    auto a = solve_lp(s);
    auto b = solve_lp(s);
    CHECK(a.basis == b.basis);
    CHECK(a.y == b.y);
    CHECK(a.duals == b.duals);
}

TEST_CASE("lp: rhs sensitivity follows the duals") {
    Rng rng(5);
    int checked = 0;
    for (int trial = 0; trial < 50 && checked < 20; ++trial) {
        auto lp = testing::random_bounded_lp(rng, 5, 10);
        SubproblemSpec s{lp.c, lp.A, lp.b, std::nullopt, 0.0};
        auto sol = solve_lp(s);
        REQUIRE(sol.status == SolveStatus::Optimal);
        // Skip degenerate vertices, where the basis may change.
        bool degenerate = false;
        for (int b : sol.basis)
            if (b < 0 || sol.y[b] < 1e-6) degenerate = true;
        if (degenerate) continue;
        Vector delta = Vector::Zero(s.rows());
        delta[0] = 1e-7;
        SubproblemSpec p = s;
        p.rhs += delta;
        auto sol2 = solve_lp(p);
        REQUIRE(sol2.status == SolveStatus::Optimal);
        CHECK(std::abs((sol2.objective - sol.objective) - sol.duals.dot(delta)) <= 1e-6 * 1e-7 + 1e-12);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("lp: warm start after appending rows and slack columns") {
    Rng rng(11);
    auto lp = testing::random_bounded_lp(rng, 4, 9);
    SubproblemSpec s{lp.c, lp.A, lp.b, std::nullopt, 0.0};
    WarmStart warm;
    auto first = solve_lp(s, {}, &warm);
    REQUIRE(first.status == SolveStatus::Optimal);
    CHECK_FALSE(warm.empty());

    // Cut-like row: sum of the first two variables minus a new surplus >= 0.2
    SubproblemSpec g;
    g.c = Vector::Zero(10);
    g.c.head(9) = s.c;
    g.A = Matrix::Zero(5, 10);
    g.A.topLeftCorner(4, 9) = s.A;
    g.A(4, 0) = 1.0;
    g.A(4, 1) = 1.0;
    g.A(4, 9) = -1.0;
    g.rhs.resize(5);
    g.rhs.head(4) = s.rhs;
    g.rhs[4] = 0.2;
    auto warm_sol = solve_lp(g, {}, &warm);
    auto cold_sol = solve_lp(g);
    REQUIRE(cold_sol.status == SolveStatus::Optimal);
    REQUIRE(warm_sol.status == SolveStatus::Optimal);
    CHECK(warm_sol.objective == doctest::Approx(cold_sol.objective).epsilon(1e-10));
    check_lp_optimality(g, warm_sol);

    // Same structure, different rhs: the stored basis may be infeasible.
    g.rhs[0] += 0.5;
    auto warm2 = solve_lp(g, {}, &warm);
    auto cold2 = solve_lp(g);
    REQUIRE(cold2.status == warm2.status);
    if (cold2.status == SolveStatus::Optimal) {
        CHECK(warm2.objective == doctest::Approx(cold2.objective).epsilon(1e-10));
        check_lp_optimality(g, warm2);
    }
}

TEST_CASE("lp: warm start on unrelated matrix falls back to cold start") {
    Rng rng(12);
    auto lp1 = testing::random_bounded_lp(rng, 4, 8);
    auto lp2 = testing::random_bounded_lp(rng, 4, 8);
    WarmStart warm;
    solve_lp({lp1.c, lp1.A, lp1.b, std::nullopt, 0.0}, {}, &warm);
    SubproblemSpec s2{lp2.c, lp2.A, lp2.b, std::nullopt, 0.0};
    auto a = solve_lp(s2, {}, &warm);
    auto b = solve_lp(s2);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));
}

TEST_CASE("qp: zero rho routes to the simplex") {
    Rng rng(3);
    auto lp = testing::random_bounded_lp(rng, 4, 8);
    SubproblemSpec s{lp.c, lp.A, lp.b, QuadraticTerm{0.0, Matrix::Identity(3, 3)}, 0.0};
    SubproblemSpec plain{lp.c, lp.A, lp.b, std::nullopt, 0.0};
    CHECK(solve_qp(s).objective == solve_lp(plain).objective);
}

TEST_CASE("qp: interior unconstrained minimum") {
    // 1/2 (y - 2)^2 = 1/2 y^2 - 2 y + 2 with slack column s: y + s = 10
    auto s = make_spec({-2, 0}, 1, {1, 1}, {10});
    s.quad = QuadraticTerm{1.0, Matrix::Identity(1, 1)};
    s.offset = 2.0;
    auto sol = solve_qp(s);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.y[0] == doctest::Approx(2.0));
    CHECK(sol.objective == doctest::Approx(0.0));
}

TEST_CASE("qp: regularized newsvendor first stage") {
    // columns x0, s, theta+, theta-, surplus; cut theta >= 15 - 10 x0
    auto s = make_spec({1, 0, 1, -1, 0}, 2, {1, 1, 0, 0, 0, 10, 0, 1, -1, -1}, {3, 15});
    Matrix H = Matrix::Zero(1, 1);
    H(0, 0) = 1.0;
    s.quad = QuadraticTerm{1.0, H};
    auto sol = solve_qp(s);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.y[0] == doctest::Approx(3.0));
    CHECK(sol.objective == doctest::Approx(-7.5));
}

TEST_CASE("qp: KKT conditions and dominance over random feasible points") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        auto lp = testing::random_bounded_lp(rng, 4, 9);
        const int q = 3;
        Matrix G(q, q);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) G(i, j) = u(rng) - 0.5;
        Matrix H = G * G.transpose();
        H = 0.5 * (H + H.transpose()).eval();
        SubproblemSpec s{lp.c, lp.A, lp.b, QuadraticTerm{0.5 + u(rng), H}, 0.0};
        auto sol = solve_qp(s);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(verify_residuals(sol, s, 1e-8));
        const Vector grad = [&] {
            Vector g = s.c;
            g.head(q) += s.quad->rho * (H * sol.y.head(q));
            return g;
        }();
        const Vector lambda = grad - s.A.transpose() * sol.duals;
        CHECK(lambda.minCoeff() >= -1e-8 * (1.0 + grad.lpNorm<Eigen::Infinity>()));
        for (int j = 0; j < s.cols(); ++j)
            CHECK(std::abs(sol.y[j] * lambda[j]) <= 1e-8 * (1.0 + std::abs(sol.objective)));

        // Random feasible points: convex combinations of basic feasible solutions.
        std::vector<Vector> vertices;
        for (int v = 0; v < 6; ++v) {
            Vector c = Vector::Zero(s.cols());
            for (int j = 0; j < s.cols(); ++j) c[j] = u(rng) - 0.5;
            auto vs = solve_lp({c, s.A, s.rhs, std::nullopt, 0.0});
            if (vs.status == SolveStatus::Optimal) vertices.push_back(vs.y);
        }
        REQUIRE_FALSE(vertices.empty());
        for (int p = 0; p < 100; ++p) {
            Vector w(static_cast<Eigen::Index>(vertices.size()));
            for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = u(rng);
            w /= w.sum();
            Vector y = Vector::Zero(s.cols());
            for (std::size_t i = 0; i < vertices.size(); ++i) y += w[static_cast<Eigen::Index>(i)] * vertices[i];
            CHECK(sol.objective <= evaluate_objective(s, y) + 1e-9 * (1.0 + std::abs(sol.objective)));
        }
    }
}

TEST_CASE("qp: warm start reused across incumbents") {
    auto s = make_spec({1, 0, 1, -1, 0}, 2, {1, 1, 0, 0, 0, 10, 0, 1, -1, -1}, {3, 15});
    s.quad = QuadraticTerm{1.0, Matrix::Identity(1, 1)};
    WarmStart warm;
    for (double rbar : {0.0, 1.0, 2.5, 4.0}) {
        SubproblemSpec p = s;
        p.c[0] = 1.0 - rbar;
        p.offset = 0.5 * rbar * rbar;
        auto a = solve_qp(p, {}, &warm);
        auto b = solve_qp(p);
        REQUIRE(a.status == SolveStatus::Optimal);
        CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));
    }
}

TEST_CASE("qp: rejects indefinite H") {
    auto s = make_spec({0, 0}, 1, {1, 1}, {1});
    Matrix H(2, 2);
    H << 1, 0, 0, -1;
    s.quad = QuadraticTerm{1.0, H};
    CHECK_THROWS_AS(solve_qp(s), InvalidArgument);
}

TEST_CASE("residual verification") {
    auto s = make_spec({0, 0}, 1, {1, 1}, {1});
    SubproblemSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.y = Vector(2);
    sol.y << 0.5, 0.5;
    CHECK(verify_residuals(sol, s, 1e-8));
    sol.y[0] += 1e-4;
    CHECK_FALSE(verify_residuals(sol, s, 1e-8));
    s.rhs[0] = 1e6;
    sol.y << 5e5 + 1e-4, 5e5;
    CHECK(verify_residuals(sol, s, 1e-8));
}
