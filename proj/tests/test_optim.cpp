#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdmc/optim/grid.hpp"
#include "sdmc/optim/local.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/optim/psd.hpp"
#include "sdmc/optim/qcqp.hpp"
#include "sdmc/rng.hpp"

using namespace sdmc;
using namespace sdmc::optim;
using Catch::Approx;

TEST_CASE("simplex on a segment") {
    LpProblem p;
    p.c = {1.0, 0.0};
    p.a_eq = Mat{{1.0, 1.0}};
    p.b_eq = {1.0};
    Solution s = solve_lp(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.value == Approx(0.0).margin(1e-10));
    CHECK(s.x[0] == Approx(0.0).margin(1e-10));
    CHECK(s.x[1] == Approx(1.0).margin(1e-10));
    CHECK(s.residuals.max() <= 1e-8);
}

TEST_CASE("simplex detects infeasibility and unboundedness") {
    SECTION("sign contradiction") {
        LpProblem p;
        p.c = {1.0};
        p.a_eq = Mat{{1.0}};
        p.b_eq = {-1.0};
        CHECK(solve_lp(p).status == SolveStatus::Infeasible);
    }
    SECTION("unbounded ray") {
        LpProblem p;
        p.c = {-1.0, 0.0};
        p.a_in = Mat{{-1.0, 1.0}};
        p.b_in = {0.0};
        CHECK(solve_lp(p).status == SolveStatus::Unbounded);
    }
    SECTION("redundant equality rows are tolerated") {
        LpProblem p;
        p.c = {1.0, 2.0};
        p.a_eq = Mat{{1.0, 1.0}, {2.0, 2.0}, {1.0, 1.0}};
        p.b_eq = {1.0, 2.0, 1.0};
        Solution s = solve_lp(p);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(s.value == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("simplex vs grid oracle on random simplex LPs") {
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 4 + (rng.next_u64() % 3);
        LpProblem p;
        p.c.resize(n);
        double cnorm1 = 0.0;
        for (double& c : p.c) {
            c = 2.0 * rng.uniform() - 1.0;
            cnorm1 += std::abs(c);
        }
        p.a_eq = Mat(1, n, 1.0);  // probability simplex
        p.b_eq = {1.0};
        p.a_in = Mat(1, n);
        for (std::size_t j = 0; j < n; ++j) p.a_in(0, j) = rng.uniform();
        p.b_in = {0.6};
        Solution lp = solve_lp(p);
        if (lp.status != SolveStatus::Optimal) continue;  // tiny chance the cap cuts everything
        Solution grid = grid_oracle(to_view(p), 0.05);
        REQUIRE(grid.status == SolveStatus::FeasibleLocal);
        CHECK(lp.value <= grid.value + 1e-10);
        CHECK(grid.value <= lp.value + 0.05 * cnorm1 + 1e-10);
    }
}

TEST_CASE("PSD gate") {
    CHECK(is_psd(Mat::identity(3)));
    CHECK(is_psd(Mat(2, 2, 0.0)));                 // boundary of the cone
    CHECK_FALSE(is_psd(Mat{{1, 2}, {2, 1}}));      // eigenvalues 3 and -1
    SECTION("eigen-decomposition reconstructs the matrix") {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t n = 2 + (rng.next_u64() % 5);
            Mat a(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j)
                    a(i, j) = a(j, i) = 2.0 * rng.uniform() - 1.0;
            EigenDecomposition e = jacobi_eigen(a);
            Mat rebuilt(n, n);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        rebuilt(i, j) += e.values[k] * e.vectors(i, k) * e.vectors(j, k);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    CHECK(rebuilt(i, j) == Approx(a(i, j)).margin(1e-10));
        }
    }
    SECTION("sums of PSD matrices stay PSD") {
        Rng rng(6);
        for (int trial = 0; trial < 10; ++trial) {
            auto random_psd = [&rng]() {
                Mat m(3, 3);
                for (std::size_t i = 0; i < 3; ++i)
                    for (std::size_t j = 0; j < 3; ++j) m(i, j) = 2.0 * rng.uniform() - 1.0;
                return m.transposed() * m;
            };
            Mat a = random_psd(), b = random_psd();
            REQUIRE(is_psd(a));
            REQUIRE(is_psd(b));
            CHECK(is_psd(a + b));
        }
    }
}

TEST_CASE("convex QCQP behind the gate") {
    SECTION("inactive zero quadratic") {
        QcqpProblem p;
        p.c = {1.0, 1.0};
        p.a_eq = Mat{{1.0, 1.0}};
        p.b_eq = {1.0};
        p.add_quadratic(Mat(2, 2, 0.0));
        Solution s = solve_convex_qcqp(p);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(s.value == Approx(1.0).margin(1e-7));
    }
    SECTION("symmetry-forced optimum") {
        // x1^2 + x2^2 - 0.5 (x1 + x2)^2 <= 0 pins x1 = x2
        QcqpProblem p;
        p.c = {1.0, 0.0};
        p.a_eq = Mat{{1.0, 1.0}};
        p.b_eq = {1.0};
        p.add_quadratic(Mat{{0.5, -0.5}, {-0.5, 0.5}});
        Solution s = solve_convex_qcqp(p);
        REQUIRE(s.feasible());
        CHECK(s.x[0] == Approx(0.5).margin(1e-7));
        CHECK(s.x[1] == Approx(0.5).margin(1e-7));
        CHECK(s.residuals.inequality <= 1e-8);
    }
    SECTION("gate refuses indefinite quadratics") {
        QcqpProblem p;
        p.c = {1.0, 0.0};
        p.a_eq = Mat{{1.0, 1.0}};
        p.b_eq = {1.0};
        p.add_quadratic(Mat{{1, 2}, {2, 1}});
        CHECK_THROWS_AS(solve_convex_qcqp(p), std::invalid_argument);
    }
    SECTION("gated solve matches the grid oracle") {
        QcqpProblem p;
        p.c = {1.0, 0.0};
        p.a_eq = Mat{{1.0, 1.0}};
        p.b_eq = {1.0};
        p.add_quadratic(Mat{{0.5, -0.5}, {-0.5, 0.5}});
        Solution gated = solve_convex_qcqp(p);
        Solution grid = grid_oracle(p.view(), 0.05);
        REQUIRE(gated.feasible());
        REQUIRE(grid.status == SolveStatus::FeasibleLocal);
        CHECK(gated.value <= grid.value * 1.02 + 1e-12);
        CHECK(std::abs(gated.value - grid.value) <= 1e-6);  // lattice hits the optimum here
    }
    SECTION("iteration trace is well-formed") {
        QcqpProblem p;
        p.c = {1.0, 1.0};
        p.a_eq = Mat{{1.0, 1.0}};
        p.b_eq = {1.0};
        p.add_quadratic(Mat(2, 2, 0.0));
        std::ostringstream trace;
        Solution s = solve_convex_qcqp(p, 1e-9, &trace);
        REQUIRE(s.feasible());
        const std::string t = trace.str();
        CHECK(t.rfind("iter,objective,max_residual\n", 0) == 0);
        CHECK(std::count(t.begin(), t.end(), '\n') > 2);
    }
    SECTION("cross-solver agreement on a convex instance") {
        QcqpProblem p;
        p.c = {1.0, 0.5, 0.0};
        p.a_eq = Mat{{1.0, 1.0, 1.0}};
        p.b_eq = {1.0};
        Mat q(3, 3);
        q(0, 0) = 1.0;
        q(1, 1) = 1.0;
        q(0, 1) = q(1, 0) = -1.0;  // (x1 - x2)^2 <= 0 pins x1 = x2
        p.add_quadratic(q);
        Solution gated = solve_convex_qcqp(p);
        REQUIRE(gated.feasible());
        Solution local = solve_local(p.view(), {});
        REQUIRE(local.feasible());
        CHECK(std::abs(gated.value - local.value) <= 1e-4);
    }
}

TEST_CASE("local solver") {
    SECTION("optimal feasible start is a fixed point") {
        ProblemView v;
        v.c = {1.0, 2.0, 3.0};
        v.a_eq = Mat(1, 3, 1.0);
        v.b_eq = {1.0};
        Vec start{1.0, 0.0, 0.0};  // the constrained minimizer
        Solution s = solve_local(v, {start});
        REQUIRE(s.feasible());
        CHECK(s.value == Approx(1.0).margin(1e-10));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(s.x[i] - start[i]) <= 1e-10);
    }
    SECTION("reports least-infeasible point when no start reaches feasibility") {
        ProblemView v;
        v.c = {0.0, 0.0};
        v.a_eq = Mat(1, 2, 1.0);
        v.b_eq = {1.0};
        v.ineq.push_back([](const Vec& x) { return x[0] + x[1] - 0.5; });  // contradicts sum = 1
        v.ineq_grad.push_back([](const Vec&) { return Vec{1.0, 1.0}; });
        Solution s = solve_local(v, {});
        CHECK(s.status == SolveStatus::InfeasibleFromStarts);
        CHECK_FALSE(s.x.empty());
    }
}

TEST_CASE("grid oracle") {
    SECTION("point polytope") {
        ProblemView v;
        v.c = {1.0, 1.0};
        v.a_eq = Mat{{1.0, 1.0}, {1.0, -1.0}};
        v.b_eq = {1.0, 0.0};
        Solution s = grid_oracle(v, 0.25);
        REQUIRE(s.status == SolveStatus::FeasibleLocal);
        CHECK(s.x[0] == Approx(0.5).margin(1e-9));
        CHECK(s.x[1] == Approx(0.5).margin(1e-9));
    }
    SECTION("resolution domain") {
        ProblemView v;
        v.c = {1.0};
        CHECK_THROWS_AS(grid_oracle(v, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(grid_oracle(v, 0.7), std::invalid_argument);
    }
    SECTION("infeasible-at-resolution is reported") {
        ProblemView v;
        v.c = {1.0, 1.0};
        v.a_eq = Mat(1, 2, 1.0);
        v.b_eq = {1.0};
        v.ineq.push_back([](const Vec& x) { return 0.25 - x[0] * x[1]; });  // max product is 0.25
        Solution s = grid_oracle(v, 0.3);  // lattice misses the single feasible point
        CHECK(s.status == SolveStatus::InfeasibleAtResolution);
    }
}
