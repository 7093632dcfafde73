#include "doctest.h"

#include <cmath>
#include <numeric>

#include "pricing/envs.hpp"

using namespace pricing;

namespace {

ConcaveCurve make_hull(std::vector<double> qs, std::vector<double> vals) {
  ConcaveCurve h;
  h.qs = std::move(qs);
  h.vals = std::move(vals);
  return h;
}

// hull of c*q*(1-q) sampled on a fine grid
ConcaveCurve parabola_hull(double c, int m = 400) {
  std::vector<double> qs(m + 1), vals(m + 1);
  for (int j = 0; j <= m; ++j) {
    qs[j] = (double)j / m;
    vals[j] = c * qs[j] * (1 - qs[j]);
  }
  return make_hull(qs, vals);
}

}  // namespace

TEST_CASE("feasibility") {
  auto k2 = Environment::k_unit(2, 5);
  CHECK(k2.is_feasible({1, 2, 3}) == false);
  CHECK(k2.is_feasible({1, 4}) == true);

  auto part = Environment::partition_matroid({{0, 1}, {2}}, {1, 1});
  CHECK(part.is_feasible({0, 2}) == true);
  CHECK(part.is_feasible({0, 1}) == false);
  part.check_matroid_axioms();

  auto tri = Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}});
  CHECK(tri.is_feasible({0, 1}) == true);
  CHECK(tri.is_feasible({0, 1, 2}) == false);  // cycle
  CHECK(tri.rank(0b111) == 2);
  tri.check_matroid_axioms();
}

TEST_CASE("explicit matroid validation") {
  CHECK_THROWS_AS(Environment::explicit_matroid(2, {0b11}), ParameterError);  // not downward closed
  auto ex = Environment::explicit_matroid(2, {0b01, 0b10, 0b11});
  CHECK(ex.rank(0b11) == 2);
  ex.check_matroid_axioms();
}

TEST_CASE("eaf membership") {
  auto k1 = Environment::k_unit(1, 2);
  CHECK(k1.eaf_contains({0.5, 0.5}).ok);
  CHECK_FALSE(k1.eaf_contains({0.7, 0.5}).ok);

  auto tri = Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}});
  auto r = tri.eaf_contains({2.0 / 3, 2.0 / 3, 2.0 / 3});
  CHECK(r.ok);
  CHECK(r.exact);
  CHECK_FALSE(tri.eaf_contains({0.9, 0.9, 0.3}).ok);  // sum 2.1 > rank 2

  auto part = Environment::partition_matroid({{0, 1}, {2}}, {1, 1});
  CHECK(part.eaf_contains({0.5, 0.5, 1.0}).ok);
  CHECK_FALSE(part.eaf_contains({0.6, 0.5, 1.0}).ok);
}

TEST_CASE("ear_optimize k-unit") {
  // n identical concave hulls: symmetric split
  auto h = parabola_hull(1.0);
  auto env = Environment::k_unit(1, 4);
  auto r = ear_optimize({h, h, h, h}, env);
  for (double qi : r.profile) CHECK(qi == doctest::Approx(0.25).epsilon(1e-9));

  // two asymmetric agents, hulls q(1-q) and 2q(1-q), k = 1: the unconstrained
  // peaks (0.5, 0.5) sum to exactly 1, so they are ex ante feasible and optimal
  // (value 0.75); cross-checked by grid search below
  auto r2 = ear_optimize({parabola_hull(1.0), parabola_hull(2.0)}, Environment::k_unit(1, 2));
  double best2 = 0;
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; a + b <= 100; ++b) {
      double qa = a / 100.0, qb = b / 100.0;
      best2 = std::max(best2, qa * (1 - qa) + 2 * qb * (1 - qb));
    }
  CHECK(best2 == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(r2.profile[0] == doctest::Approx(0.5).epsilon(2e-2));
  CHECK(r2.profile[1] == doctest::Approx(0.5).epsilon(2e-2));
  CHECK(r2.value == doctest::Approx(0.75).epsilon(1e-3));

  // single agent: hull argmax
  auto r3 = ear_optimize({parabola_hull(1.0)}, Environment::k_unit(1, 1));
  CHECK(r3.value == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(r3.profile[0] == doctest::Approx(0.5).epsilon(2e-2));

  // monotone in k
  double prev = 0;
  for (int k = 1; k <= 4; ++k) {
    auto rk = ear_optimize({parabola_hull(1), parabola_hull(2), parabola_hull(3)},
                           Environment::k_unit(k, 3));
    CHECK(rk.value >= prev - 1e-12);
    prev = rk.value;
  }
}

TEST_CASE("ear_optimize matroid greedy vs exhaustive grid") {
  auto env = Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}});
  std::vector<ConcaveCurve> hulls{parabola_hull(1.0), parabola_hull(1.5), parabola_hull(2.0)};
  auto r = ear_optimize(hulls, env);
  // exhaustive search over the 1/50 grid
  double best = 0;
  int G = 50;
  for (int a = 0; a <= G; ++a)
    for (int b = 0; b <= G; ++b)
      for (int c = 0; c <= G; ++c) {
        std::vector<double> q{(double)a / G, (double)b / G, (double)c / G};
        if (!env.eaf_contains(q).ok) continue;
        double v = hulls[0].value_at(q[0]) + hulls[1].value_at(q[1]) + hulls[2].value_at(q[2]);
        best = std::max(best, v);
      }
  CHECK(r.value >= best - r.error_bound - 1e-9);
  CHECK(r.value <= best + r.error_bound + 1e-9);
  CHECK(env.eaf_contains(r.profile).ok);
}

TEST_CASE("water-filling KKT") {
  std::vector<ConcaveCurve> hulls{parabola_hull(1.0), parabola_hull(2.0), parabola_hull(0.5)};
  auto env = Environment::k_unit(2, 3);
  auto r = ear_optimize(hulls, env);
  double total = std::accumulate(r.profile.begin(), r.profile.end(), 0.0);
  CHECK(total <= 2 + 1e-9);
  // interior agents share a common marginal slope up to one segment gap
  std::vector<double> lam;
  for (int i = 0; i < 3; ++i)
    if (r.profile[i] > 1e-6 && r.profile[i] < 1 - 1e-6)
      lam.push_back(hulls[i].slope_at(r.profile[i]));
  for (std::size_t a = 1; a < lam.size(); ++a) CHECK(std::abs(lam[a] - lam[0]) <= 0.03);
}

TEST_CASE("ear_decomposition") {
  auto k1 = Environment::k_unit(1, 2);
  auto d = ear_decomposition(k1, {0.5, 0.5});
  double marg0 = 0, marg1 = 0, tot = 0;
  for (const auto& ws : d) {
    tot += ws.prob;
    for (int i : ws.members) (i == 0 ? marg0 : marg1) += ws.prob;
    CHECK(k1.is_feasible(ws.members));
  }
  CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(marg0 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(marg1 == doctest::Approx(0.5).epsilon(1e-9));

  // k = 2, q = (1, .5, .5) -> {1,2} and {1,3} each with half probability
  auto k2 = Environment::k_unit(2, 3);
  auto d2 = ear_decomposition(k2, {1.0, 0.5, 0.5});
  REQUIRE(d2.size() == 2);
  for (const auto& ws : d2) {
    CHECK(ws.prob == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(ws.members.size() == 2);
    CHECK(ws.members[0] == 0);
  }

  // random profiles: marginals reproduce exactly
  RngStream rng(5, 5);
  for (int t = 0; t < 20; ++t) {
    int n = 2 + (int)(rng.next_u64() % 4);
    int k = 1 + (int)(rng.next_u64() % n);
    std::vector<double> q(n);
    double s = 0;
    for (double& qi : q) { qi = rng.next_double(); s += qi; }
    if (s > k)
      for (double& qi : q) qi *= k / s * 0.999;
    auto env = Environment::k_unit(k, n);
    auto dec = ear_decomposition(env, q);
    std::vector<double> marg(n, 0);
    double tp = 0;
    for (const auto& ws : dec) {
      tp += ws.prob;
      CHECK((int)ws.members.size() <= k);
      for (int i : ws.members) marg[i] += ws.prob;
    }
    CHECK(tp == doctest::Approx(1.0).epsilon(1e-9));
    for (int i = 0; i < n; ++i) CHECK(marg[i] == doctest::Approx(q[i]).epsilon(1e-7).scale(1.0));
  }

  // partition matroid decomposition
  auto part = Environment::partition_matroid({{0, 1}, {2}}, {1, 1});
  auto dp = ear_decomposition(part, {0.4, 0.5, 0.7});
  std::vector<double> marg(3, 0);
  double tp = 0;
  for (const auto& ws : dp) {
    tp += ws.prob;
    CHECK(part.is_feasible(ws.members));
    for (int i : ws.members) marg[i] += ws.prob;
  }
  CHECK(tp == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(marg[0] == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(marg[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(marg[2] == doctest::Approx(0.7).epsilon(1e-9));

  CHECK_THROWS_AS(ear_decomposition(k1, {0.9, 0.9}), ParameterError);
  auto tri = Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}});
  CHECK_THROWS_AS(ear_decomposition(tri, {0.3, 0.3, 0.3}), UnsupportedError);
}

TEST_CASE("max weight independent set greedy") {
  auto part = Environment::partition_matroid({{0, 1}, {2}}, {1, 1});
  auto w = std::vector<double>{0.5, 0.9, 0.1};
  auto sel = part.max_weight_independent(w);
  REQUIRE(sel.size() == 2);
  CHECK(sel[0] == 1);
  CHECK(sel[1] == 2);
  // negative weights excluded
  auto sel2 = part.max_weight_independent({-1.0, -0.5, 0.2});
  REQUIRE(sel2.size() == 1);
  CHECK(sel2[0] == 2);
}
