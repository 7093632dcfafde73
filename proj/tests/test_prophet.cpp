#include "doctest.h"

#include <cmath>

#include "pricing/prophet.hpp"

using namespace pricing;

TEST_CASE("k-unit fixed point") {
  // single uniform(0,1) prize: 2b = (1-b)^2 -> b* = 2 - sqrt(3)
  double b = kunit_fixed_point({ParametricDist::uniform(0, 1)}, 1);
  CHECK(b == doctest::Approx(2 - std::sqrt(3.0)).epsilon(1e-9));

  // three unit point masses, k = 1: b = 3(1-b) -> 0.75
  std::vector<ParametricDist> pm(3, ParametricDist::point_mass(1));
  CHECK(kunit_fixed_point(pm, 1) == doctest::Approx(0.75).epsilon(1e-9));

  // threshold monotone decreasing in k
  std::vector<ParametricDist> us(4, ParametricDist::uniform(0, 1));
  double prev = 1e9;
  for (int k = 1; k <= 4; ++k) {
    double th = kunit_threshold(us, k);
    CHECK(th < prev + 1e-12);
    prev = th;
  }

  // all-zero values
  CHECK(kunit_fixed_point({ParametricDist::point_mass(0)}, 1) == 0.0);
}

TEST_CASE("fixed point residual") {
  std::vector<ParametricDist> vs{ParametricDist::uniform(0, 2), ParametricDist::exponential(1.5),
                                 ParametricDist::point_mass(0.7)};
  for (int k : {1, 2, 3}) {
    double b = kunit_fixed_point(vs, k);
    double rhs = 0;
    for (auto& d : vs) rhs += d.tail_expectation(b / k);
    CHECK(std::abs(b - rhs) <= 1e-9);
  }
}

TEST_CASE("gambler with anonymous threshold") {
  auto u = ParametricDist::uniform(0, 1).discretize(2000);
  auto env1 = Environment::k_unit(1, 1);

  // theta below the support: accept always, welfare = E[v]
  auto all = gambler_simulate({u}, env1, ThresholdPolicy::anonymous_threshold(0.0), 50000,
                              RngStream(3, 0));
  CHECK(std::abs(all.mean - 0.5) <= 3 * all.std_error + 1e-3);

  // theta = 2 - sqrt(3): welfare = (1 - theta^2)/2, within 2 x EAR
  double theta = 2 - std::sqrt(3.0);
  auto sim = gambler_simulate({u}, env1, ThresholdPolicy::anonymous_threshold(theta), 200000,
                              RngStream(4, 0));
  CHECK(std::abs(sim.mean - (1 - theta * theta) / 2) <= 3 * sim.std_error + 2e-3);
  CHECK(sim.mean >= 0.5 / 2 - 3 * sim.std_error);

  // iid point masses: welfare = min(n, k) * v
  auto pm = ParametricDist::point_mass(2).discretize(1);
  auto env23 = Environment::k_unit(2, 3);
  auto psim = gambler_simulate({pm, pm, pm}, env23,
                               ThresholdPolicy::anonymous_threshold(0.75), 1000, RngStream(5, 0));
  CHECK(psim.mean == doctest::Approx(4.0));
}

TEST_CASE("k-unit gambler beats half the ex ante relaxation") {
  RngStream meta(99, 0);
  for (int t = 0; t < 6; ++t) {
    int n = 2 + (int)(meta.next_u64() % 4);
    int k = 1 + (int)(meta.next_u64() % 2);
    std::vector<ParametricDist> param;
    std::vector<DiscreteDist> dists;
    std::vector<ConcaveCurve> hulls;
    for (int i = 0; i < n; ++i) {
      double hi = 0.5 + meta.next_double() * 2.0;
      param.push_back(ParametricDist::uniform(0, hi));
      auto d = param.back().discretize(400);
      dists.push_back(d);
      Agent lin(d, DiscreteDist({10 * hi}, {1.0}), Utility::Linear);
      hulls.push_back(concave_hull(price_posting_curve(lin, Objective::Welfare, 400)));
    }
    auto env = Environment::k_unit(k, n);
    double theta = kunit_threshold(param, k);
    auto ear = ear_optimize(hulls, env);
    auto sim = gambler_simulate(dists, env, ThresholdPolicy::anonymous_threshold(theta), 40000,
                                meta.substream(t));
    CHECK(sim.mean >= 0.5 * ear.value - 3 * sim.std_error - 1e-3);
    // the proof's upper-bound identity at theta = b*/k
    double ub = k * theta;
    for (auto& d : param) ub += d.tail_expectation(theta);
    CHECK(ub >= ear.value - 1e-6);
  }
}

TEST_CASE("matroid adaptive thresholds") {
  RngStream rng(17, 0);
  // free matroid (singleton blocks): theta_1 = E[v'_1]/2
  auto u = ParametricDist::uniform(0, 1).discretize(500);
  auto free2 = Environment::partition_matroid({{0}, {1}}, {1, 1});
  MatroidAdaptiveThresholds th({u, u}, free2, 4000, rng);
  CHECK(th.threshold(0, {}) == doctest::Approx(0.25).epsilon(0.05));

  // rank-1 uniform matroid, iid: theta_1 = E[max]/2 = (2/3)/2 for two uniforms
  auto rank1 = Environment::uniform_matroid(1, 2);
  MatroidAdaptiveThresholds th1({u, u}, rank1, 4000, rng.substream(1));
  CHECK(th1.threshold(0, {}) == doctest::Approx(1.0 / 3).epsilon(0.05));

  // telescoping audit: accepted-sum of thresholds equals half the C(A) estimate
  auto tri = Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}});
  MatroidAdaptiveThresholds th2({u, u, u}, tri, 1000, rng.substream(2));
  std::vector<int> accepted;
  double theta_sum = 0;
  for (int i = 0; i < 3; ++i) {
    std::vector<int> trial = accepted;
    trial.push_back(i);
    if (!tri.is_feasible(trial)) continue;
    double theta = th2.threshold(i, accepted);
    theta_sum += theta;
    accepted.push_back(i);
  }
  auto [c_mean, c_se] = th2.mean_c_sum(accepted);
  CHECK(theta_sum == doctest::Approx(0.5 * c_mean).epsilon(1e-9));
  (void)c_se;
}

TEST_CASE("adaptive gambler beats half the ex ante relaxation on matroids") {
  RngStream meta(123, 0);
  auto run = [&](const Environment& env, int tcase) {
    int n = env.n();
    std::vector<DiscreteDist> dists;
    std::vector<ConcaveCurve> hulls;
    for (int i = 0; i < n; ++i) {
      double hi = 0.5 + meta.next_double();
      auto d = ParametricDist::uniform(0, hi).discretize(200);
      dists.push_back(d);
      Agent lin(d, DiscreteDist({10 * hi}, {1.0}), Utility::Linear);
      hulls.push_back(concave_hull(price_posting_curve(lin, Objective::Welfare, 200)));
    }
    auto ear = ear_optimize(hulls, env);
    auto adaptive = std::make_shared<MatroidAdaptiveThresholds>(dists, env, 800, meta.substream(tcase));
    auto sim = gambler_simulate(dists, env, ThresholdPolicy::adaptive_matroid(adaptive), 4000,
                                meta.substream(100 + tcase));
    CHECK(sim.mean >= 0.5 * ear.value - 3 * sim.std_error - 0.02);
  };
  run(Environment::graphic_matroid(3, {{0, 1}, {1, 2}, {2, 0}}), 0);
  run(Environment::partition_matroid({{0, 1}, {2, 3}}, {1, 1}), 1);
}

TEST_CASE("correlated sampler") {
  // two iid uniform(0,1) prizes, k=1: profile (.5,.5), prophet value = EAR = 0.75
  auto u = ParametricDist::uniform(0, 1).discretize(1000);
  auto env = Environment::k_unit(1, 2);
  CorrelatedSampler cs({u, u}, env, 500);
  CHECK(cs.profile()[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(cs.ear() == doctest::Approx(0.75).epsilon(5e-3));

  RngStream rng(9, 9);
  long N = 100000;
  double sum = 0;
  std::vector<double> mean_marg(2, 0);
  for (long t = 0; t < N; ++t) {
    auto v = cs.sample(rng);
    sum += cs.prophet_value(v);
    mean_marg[0] += v[0];
    mean_marg[1] += v[1];
  }
  CHECK(sum / N == doctest::Approx(cs.ear()).epsilon(0.01));
  // marginal means match the distribution mean
  CHECK(mean_marg[0] / N == doctest::Approx(0.5).epsilon(0.01));
  CHECK(mean_marg[1] / N == doctest::Approx(0.5).epsilon(0.01));

  // single agent with q* = 1 draws the original distribution
  auto pm = ParametricDist::point_mass(3).discretize(1);
  CorrelatedSampler single({pm}, Environment::k_unit(1, 1), 100);
  auto v = single.sample(rng);
  CHECK(v[0] == 3.0);

  // feasibility of every decomposition set
  for (const auto& ws : cs.decomposition()) CHECK(env.is_feasible(ws.members));
}

TEST_CASE("correlated sampler marginal distribution (ks test)") {
  DiscreteDist d({0.2, 0.7, 1.5, 2.0}, {0.3, 0.3, 0.2, 0.2});
  auto env = Environment::k_unit(1, 2);
  CorrelatedSampler cs({d, d}, env, 300);
  RngStream rng(31, 1);
  long N = 100000;
  std::vector<long> counts(4, 0);
  for (long t = 0; t < N; ++t) {
    auto v = cs.sample(rng);
    for (std::size_t k = 0; k < 4; ++k)
      if (v[0] == d.support()[k]) ++counts[k];
  }
  // KS distance between empirical and true CDF
  double cdf_true = 0, cdf_emp = 0, ks = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    cdf_true += d.probs()[k];
    cdf_emp += (double)counts[k] / N;
    ks = std::max(ks, std::abs(cdf_true - cdf_emp));
  }
  // p > 0.001 at n = 1e5 corresponds to ks ~ 0.0062
  CHECK(ks < 0.0062);
}
