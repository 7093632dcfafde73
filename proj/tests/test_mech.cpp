#include "doctest.h"

#include <cmath>

#include "pricing/mech.hpp"

using namespace pricing;

namespace {

Agent linear_uniform(int m = 500) {
  return Agent::from_model(AgentModel::linear(ParametricDist::uniform(0, 1)), m);
}

Agent uniform_uniform(int m = 200) {
  return Agent::from_model(
      AgentModel::private_budget(ParametricDist::uniform(0, 1), ParametricDist::uniform(0, 1)), m);
}

}  // namespace

TEST_CASE("single agent spp matches curve value") {
  auto lin = linear_uniform();
  SppPolicy pol;
  pol.order = {0};
  pol.quantiles = {0.5};
  pol.ironed = false;
  auto env = Environment::k_unit(1, 1);
  auto sim = spp_simulate({lin}, env, pol, Objective::Revenue, 200000, RngStream(7, 0));
  CHECK(std::abs(sim.mean - 0.25) <= 3 * sim.std_error + 1e-3);
  CHECK(sim.serve_prob[0] == 1.0);
}

TEST_CASE("two iid agents k=1 hand computation") {
  // second agent served only when the first does not take the unit
  auto lin = linear_uniform();
  SppPolicy pol;
  pol.order = {0, 1};
  pol.quantiles = {0.5, 0.5};
  pol.ironed = false;
  auto env = Environment::k_unit(1, 2);
  auto sim = spp_simulate({lin, lin}, env, pol, Objective::Revenue, 400000, RngStream(11, 0));
  CHECK(std::abs(sim.mean - 0.375) <= 3 * sim.std_error + 2e-3);
  CHECK(sim.serve_prob[0] == 1.0);
  CHECK(std::abs(sim.serve_prob[1] - 0.5) <= 0.01);
}

TEST_CASE("quantile-space consistency on a discrete budgeted agent") {
  DiscreteDist v({0.4, 1.0, 2.2}, {0.3, 0.4, 0.3});
  DiscreteDist b({0.5, 1.8}, {0.5, 0.5});
  Agent agent(v, b, Utility::PrivateBudget);
  auto env = Environment::k_unit(1, 1);
  for (double q : {0.15, 0.4, 0.62, 0.8}) {
    auto off = agent.quantile_offer(q);
    SppPolicy pol;
    pol.order = {0};
    pol.quantiles = {q};
    pol.ironed = false;
    for (Objective obj : {Objective::Revenue, Objective::Welfare}) {
      auto sim = spp_simulate({agent}, env, pol, obj, 100000, RngStream(5, 2));
      CHECK(std::abs(sim.mean - off.payoff(obj)) <= 3 * sim.std_error + 2e-3);
    }
  }
}

TEST_CASE("correlation gap policy") {
  auto lin = linear_uniform(200);
  std::vector<Agent> agents{lin, lin, lin};
  auto env = Environment::k_unit(1, 3);
  auto cg = correlation_gap_policy(agents, env, Objective::Revenue, 100);
  for (double qi : cg.policy.quantiles) CHECK(qi == doctest::Approx(1.0 / 3).epsilon(0.05));
  // single agent: argmax of the hull
  auto cg1 = correlation_gap_policy({lin}, Environment::k_unit(1, 1), Objective::Revenue, 100);
  CHECK(cg1.policy.quantiles[0] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("spp achieves the correlation-gap guarantee on a mixed instance") {
  DiscreteDist v1({0.5, 1.5}, {0.6, 0.4});
  DiscreteDist b1({0.4, 2.0}, {0.5, 0.5});
  Agent a1(v1, b1, Utility::PrivateBudget);
  auto a2 = uniform_uniform(60);
  std::vector<Agent> agents{a1, a2};
  auto env = Environment::k_unit(1, 2);
  auto cg = correlation_gap_policy(agents, env, Objective::Revenue, 100);
  auto sim = spp_simulate(agents, env, cg.policy, Objective::Revenue, 200000, RngStream(3, 1));
  double gamma = 1.0 / (1.0 - 1.0 / std::sqrt(2 * M_PI * 1));
  CHECK(sim.mean >= cg.ear_hulls.value / gamma - 3 * sim.std_error);
}

TEST_CASE("opp evaluate") {
  auto lin = linear_uniform(200);
  // iid agents: every order gives the same payoff
  std::vector<Agent> agents{lin, lin};
  auto env = Environment::k_unit(1, 2);
  auto r = opp_evaluate(agents, env, {0.5, 0.5}, Objective::Revenue, 50000, RngStream(9, 9));
  CHECK(r.orders_evaluated == 2);
  SppPolicy pol;
  pol.order = {0, 1};
  pol.quantiles = {0.5, 0.5};
  auto direct = spp_simulate(agents, env, pol, Objective::Revenue, 50000, RngStream(9, 9).substream(1));
  CHECK(std::abs(r.worst.mean - direct.mean) <= 3 * (r.worst.std_error + direct.std_error) + 2e-3);
}

TEST_CASE("anonymous pricing welfare counterexample") {
  // two point-mass agents: v1=100 b1=1, v2=10 b2=10 (eps = 0.1)
  Agent hi(DiscreteDist({100}, {1}), DiscreteDist({1}, {1}), Utility::PrivateBudget);
  Agent lo(DiscreteDist({10}, {1}), DiscreteDist({10}, {1}), Utility::PrivateBudget);
  std::vector<Agent> agents{hi, lo};
  auto env = Environment::k_unit(1, 2);
  // adversarial order: agent 2 (index 1) first
  std::vector<int> order{1, 0};
  double best = 0;
  for (int g = 1; g <= 300; ++g) {
    double price = g * 0.5;
    auto sim = anonymous_price_simulate(agents, env, price, order, Objective::Welfare, 2000,
                                        RngStream(1, 1));
    best = std::max(best, sim.mean);
  }
  CHECK(best <= 20.0 + 1e-6);  // optimal welfare is 100
}

TEST_CASE("dp for iid oblivious posted pricing") {
  auto lin = linear_uniform(2000);
  auto grid = default_price_grid(lin, 2000);
  // n = 1, k = 1: the monopoly payoff
  auto t1 = opp_iid_dp(lin, 1, 1, Objective::Revenue, grid);
  CHECK(t1.optimal() == doctest::Approx(0.25).epsilon(2e-3));
  // n = 2, k = 1: V(1,1) = 1/4, then max_p p(1-p) + (1-p)/4 at p = 3/8
  // gives 25/64 by hand
  auto t2 = opp_iid_dp(lin, 2, 1, Objective::Revenue, grid);
  CHECK(t2.optimal() == doctest::Approx(25.0 / 64).epsilon(2e-3));
  // monotone in remaining units and agents
  for (int i = 0; i < 2; ++i) CHECK(t2.value[i][1] >= t2.value[i + 1][1] - 1e-12);

  // dominance: dp beats any fixed-quantile spp on the same instance
  std::vector<Agent> agents{lin, lin};
  auto env = Environment::k_unit(1, 2);
  SppPolicy pol;
  pol.order = {0, 1};
  pol.quantiles = {0.5, 0.5};
  pol.ironed = false;
  auto sim = spp_simulate(agents, env, pol, Objective::Revenue, 100000, RngStream(2, 2));
  CHECK(t2.optimal() >= sim.mean - 3 * sim.std_error);
}

TEST_CASE("mpm single agent recovers the monopoly payoff") {
  auto lin = linear_uniform(1000);
  auto env = Environment::k_unit(1, 1);
  auto sim = mpm_run({lin}, env, Objective::Revenue, 100000, RngStream(21, 0), 1000);
  CHECK(std::abs(sim.mean - 0.25) <= 3 * sim.std_error + 3e-3);
}

TEST_CASE("mpm two iid uniform agents equals second price with reserve") {
  auto lin = linear_uniform(1000);
  auto env = Environment::k_unit(1, 2);
  auto sim = mpm_run({lin, lin}, env, Objective::Revenue, 200000, RngStream(22, 0), 1000);
  CHECK(std::abs(sim.mean - 5.0 / 12) <= 3 * sim.std_error + 4e-3);
}

TEST_CASE("mpm scale invariance per seed") {
  DiscreteDist v({0.5, 1.0, 2.0}, {0.4, 0.4, 0.2});
  DiscreteDist b({0.8, 2.5}, {0.5, 0.5});
  Agent a(v, b, Utility::PrivateBudget);
  Agent s = a.scaled(3.0);
  auto env = Environment::k_unit(1, 2);
  auto r1 = mpm_run({a, a}, env, Objective::Revenue, 20000, RngStream(77, 0), 400);
  auto r2 = mpm_run({s, s}, env, Objective::Revenue, 20000, RngStream(77, 0), 400);
  CHECK(r2.mean == doctest::Approx(3.0 * r1.mean).epsilon(1e-9));
  for (int i = 0; i < 2; ++i) CHECK(r1.serve_prob[i] == r2.serve_prob[i]);
}

TEST_CASE("serve probability monotone in the other agent's quantile") {
  auto lin = linear_uniform(200);
  auto env = Environment::k_unit(1, 2);
  double prev = 1.0;
  for (double q0 : {0.2, 0.5, 0.8}) {
    SppPolicy pol;
    pol.order = {0, 1};
    pol.quantiles = {q0, 0.5};
    pol.ironed = false;
    auto sim = spp_simulate({lin, lin}, env, pol, Objective::Revenue, 100000, RngStream(4, 4));
    CHECK(sim.serve_prob[1] <= prev + 0.01);
    prev = sim.serve_prob[1];
  }
}

TEST_CASE("welfare decomposition on an lp tau family") {
  auto agent = uniform_uniform(30);
  ExAnteLpSolver lp(agent, Objective::Welfare);
  for (double q : {0.3, 0.6}) {
    auto sol = lp.solve(q);
    REQUIRE(sol.status == LpStatus::Optimal);
    auto taus = extract_tau_family(agent, sol);
    auto d = decompose_welfare(agent, q, taus);
    CHECK(d.wel_ex <= d.wel_ex1 + d.wel_ex2 + 1e-6);
    CHECK(d.lemma_ex1);
    CHECK(d.lemma_ex2);
  }
}

TEST_CASE("revenue decomposition on an lp tau family") {
  auto agent = uniform_uniform(30);
  double kappa = kappa_of(agent.budget());
  ExAnteLpSolver lp(agent, Objective::Revenue);
  for (double q : {0.3, 0.6, 0.9}) {
    auto sol = lp.solve(q);
    REQUIRE(sol.status == LpStatus::Optimal);
    auto taus = extract_tau_family(agent, sol);
    auto d = decompose_revenue(agent, q, taus, kappa);
    if (!d.high_price_branch) {
      CHECK(d.rev_ex <= d.rev_ex1 + d.rev_ex3 + d.rev_ex2 + 1e-6);
      CHECK(d.lemma_ex1);
      CHECK(d.lemma_ex3);
      CHECK(d.lemma_ex2);
    } else {
      CHECK(d.lemma_high);
    }
  }
}

TEST_CASE("linear agent decomposition: single price below clearing leaves no tail") {
  auto lin = linear_uniform(50);
  // tau = single price 0.3 per unit: vertices (0,0) -> (1, 0.3)
  AllocationPaymentFunction tau;
  tau.budget = lin.budget().support()[0];
  tau.xs = {0, 1};
  tau.ps = {0, 0.3};
  auto d = decompose_welfare(lin, 0.5, {tau});
  // clearing price 0.5 > marginal price 0.3: EX'' gets nothing
  CHECK(d.wel_ex2 == doctest::Approx(0.0));
  CHECK(d.wel_ex == doctest::Approx(d.wel_ex1));
}
