#include "doctest.h"

#include <cmath>

#include "pricing/lp.hpp"
#include "pricing/rng.hpp"
#include "rational_simplex.hpp"

using namespace pricing;

TEST_CASE("trivial box LP") {
  LinearProgram lp;
  lp.num_vars = 1;
  lp.objective = {1.0};
  lp.lower = {0.0};
  lp.upper = {10.0};
  lp.rows.push_back({{{0, 1.0}}, 3.0});
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(3.0));
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.max_row_violation <= 1e-7);
  CHECK(std::abs(sol.duality_gap) <= 1e-6);
}

TEST_CASE("degenerate optimum set") {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.objective = {1.0, 1.0};
  lp.lower = {0.0, 0.0};
  lp.upper = {1.0, 1.0};
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, 1.0});
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.0));
}

TEST_CASE("infeasible and unbounded statuses") {
  LinearProgram lp;
  lp.num_vars = 1;
  lp.objective = {1.0};
  lp.lower = {0.0};
  lp.upper = {5.0};
  lp.rows.push_back({{{0, 1.0}}, -1.0});  // x <= -1 with x >= 0
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);

  LinearProgram lp2;
  lp2.num_vars = 1;
  lp2.objective = {1.0};
  lp2.lower = {0.0};
  lp2.upper = {kLpInf};
  lp2.rows.push_back({{{0, -1.0}}, 0.0});  // -x <= 0, x unbounded above
  CHECK(solve_lp(lp2).status == LpStatus::Unbounded);
}

TEST_CASE("equality via row pair") {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.objective = {2.0, 1.0};
  lp.lower = {0.0, 0.0};
  lp.upper = {1.0, 1.0};
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, 0.7});
  lp.rows.push_back({{{0, -1.0}, {1, -1.0}}, -0.7});
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.4));  // all mass on x0
  CHECK(sol.x[0] == doctest::Approx(0.7));
}

namespace {

struct RandomInstance {
  std::vector<std::vector<long>> A;
  std::vector<long> b, c, u;
};

RandomInstance make_instance(RngStream& rng, int m, int n) {
  RandomInstance ins;
  ins.A.assign(m, std::vector<long>(n, 0));
  ins.b.resize(m);
  ins.c.resize(n);
  ins.u.resize(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j)
      ins.A[i][j] = (long)(rng.next_u64() % 5) - 2;  // -2..2
    ins.b[i] = (long)(rng.next_u64() % 6);           // 0..5
  }
  for (int j = 0; j < n; ++j) {
    ins.c[j] = (long)(rng.next_u64() % 9) - 4;  // -4..4
    ins.u[j] = 1 + (long)(rng.next_u64() % 3);  // 1..3
  }
  return ins;
}

LinearProgram to_lp(const RandomInstance& ins) {
  LinearProgram lp;
  int m = (int)ins.A.size(), n = (int)ins.c.size();
  lp.num_vars = n;
  lp.objective.assign(ins.c.begin(), ins.c.end());
  lp.lower.assign(n, 0.0);
  lp.upper.assign(ins.u.begin(), ins.u.end());
  for (int i = 0; i < m; ++i) {
    SparseRow r;
    for (int j = 0; j < n; ++j)
      if (ins.A[i][j] != 0) r.terms.push_back({j, (double)ins.A[i][j]});
    r.rhs = (double)ins.b[i];
    lp.rows.push_back(std::move(r));
  }
  return lp;
}

}  // namespace

TEST_CASE("random LPs vs exact rational oracle") {
  RngStream rng(20240817, 3);
  int compared = 0;
  for (int t = 0; t < 40 && compared < 25; ++t) {
    auto ins = make_instance(rng, 20, 40);
    double exact;
    try {
      exact = ratlp::solve(ins.A, ins.b, ins.c, ins.u).to_double();
    } catch (const ratlp::Overflow&) {
      continue;  // deterministic skip on int128 overflow
    }
    auto sol = solve_lp(to_lp(ins));
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(exact).epsilon(1e-6).scale(1.0));
    CHECK(sol.max_row_violation <= 1e-7);
    CHECK(sol.max_bound_violation <= 1e-9);
    CHECK(std::abs(sol.duality_gap) <= 1e-6 * (1 + std::abs(sol.objective)));
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("determinism: identical inputs give identical pivots") {
  RngStream rng(99, 1);
  auto ins = make_instance(rng, 15, 25);
  auto s1 = solve_lp(to_lp(ins));
  auto s2 = solve_lp(to_lp(ins));
  REQUIRE(s1.status == LpStatus::Optimal);
  CHECK(s1.iterations == s2.iterations);
  CHECK(s1.objective == s2.objective);  // bitwise
  for (std::size_t j = 0; j < s1.x.size(); ++j) CHECK(s1.x[j] == s2.x[j]);
}

TEST_CASE("warm restart: add_rows + set_rhs matches cold solve") {
  RngStream rng(555, 2);
  for (int t = 0; t < 10; ++t) {
    auto ins = make_instance(rng, 12, 18);
    auto lp = to_lp(ins);
    // cold solve of the full problem
    auto cold = solve_lp(lp);

    // warm: solve with half the rows, then add the rest and reoptimize
    LinearProgram half = lp;
    std::vector<SparseRow> rest(half.rows.begin() + 6, half.rows.end());
    half.rows.resize(6);
    Simplex s(half);
    REQUIRE(s.solve_primal() == LpStatus::Optimal);
    s.add_rows(rest);
    REQUIRE(s.reoptimize() == LpStatus::Optimal);
    auto warm = s.extract();
    REQUIRE(cold.status == LpStatus::Optimal);
    CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-8).scale(1.0));

    // now perturb one rhs both ways and compare against cold re-solve
    int row = (int)(rng.next_u64() % lp.rows.size());
    double delta = (double)(rng.next_u64() % 3);
    s.set_rhs(row, lp.rows[row].rhs + delta);
    REQUIRE(s.reoptimize() == LpStatus::Optimal);
    auto warm2 = s.extract();
    LinearProgram lp2 = lp;
    lp2.rows[row].rhs += delta;
    auto cold2 = solve_lp(lp2);
    REQUIRE(cold2.status == LpStatus::Optimal);
    CHECK(warm2.objective == doctest::Approx(cold2.objective).epsilon(1e-8).scale(1.0));
  }
}
