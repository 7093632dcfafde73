#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pricing/curves.hpp"
#include "pricing/envs.hpp"
#include "pricing/exante.hpp"
#include "pricing/parallel.hpp"
#include "pricing/rng.hpp"

namespace pricing {

struct SppPolicy {
  std::vector<int> order;        // permutation of agents
  std::vector<double> quantiles;  // per agent
  bool ironed = true;  // offer the hull-level lottery rather than the raw one
};

struct SimResult {
  Objective objective = Objective::Revenue;
  double mean = 0;
  double std_error = 0;
  long samples = 0;
  std::vector<double> serve_prob;  // probability serving agent i was feasible
  std::uint64_t seed = 0;
};

namespace detail {

// price lottery with normalized probabilities; price = +inf encodes "no sale"
using Offers = std::vector<OfferArm>;

inline Offers raw_offers(const Agent& agent, double q) {
  auto off = agent.quantile_offer(q);
  if (off.arms.empty()) return {{1.0, kLpInf, false}};
  return off.arms;
}

inline Offers ironed_offers(const Agent& agent, const ConcaveCurve& hull, double q) {
  if (q <= hull.qs.front() + 1e-15) return raw_offers(agent, q);
  std::size_t seg = hull.segment_of(q);
  double qa = hull.qs[seg], qb = hull.qs[seg + 1];
  if (q >= qb - 1e-12) return raw_offers(agent, qb);
  if (q <= qa + 1e-12) return raw_offers(agent, qa);
  double beta = (qb - q) / (qb - qa);  // weight on the left endpoint
  Offers out;
  for (const auto& arm : raw_offers(agent, qa)) out.push_back({beta * arm.prob, arm.price, arm.include_atom});
  for (const auto& arm : raw_offers(agent, qb)) out.push_back({(1 - beta) * arm.prob, arm.price, arm.include_atom});
  return out;
}

struct Draw {
  double v, b, price;
  bool bought;
  double x;  // lottery probability purchased
};

inline Draw play_offer(const Agent& agent, const Offers& offers, RngStream& rng) {
  Draw d;
  d.v = agent.value().sample(rng);
  d.b = agent.budget().sample(rng);
  double u = rng.next_double();
  double acc = 0;
  d.price = kLpInf;
  bool incl = false;
  for (const auto& arm : offers) {
    acc += arm.prob;
    if (u < acc || &arm == &offers.back()) {
      d.price = arm.price;
      incl = arm.include_atom;
      break;
    }
  }
  d.bought = std::isfinite(d.price) && (incl ? d.v >= d.price : d.v > d.price);
  d.x = d.bought ? std::min(1.0, d.b / d.price) : 0.0;
  return d;
}

}  // namespace detail

// Sequential posted pricing in quantile space. Per sample, agents are walked
// in order; an agent is offered her lottery price iff serving her keeps the
// served set feasible. She buys lottery x = min(1, b/p) when her value clears
// the price, pays p*x, and occupies a unit with probability x.
inline SimResult spp_simulate(const std::vector<Agent>& agents, const Environment& env,
                              const SppPolicy& policy, Objective obj, long samples,
                              const RngStream& rng, int curve_grid = 200) {
  int n = (int)agents.size();
  if ((int)policy.order.size() != n || (int)policy.quantiles.size() != n)
    throw ParameterError("spp_simulate: policy size mismatch");
  if (samples < 1) throw ParameterError("spp_simulate: need samples >= 1");
  std::vector<detail::Offers> offers(n);
  for (int i = 0; i < n; ++i) {
    if (policy.ironed) {
      auto hull = concave_hull(price_posting_curve(agents[i], obj, curve_grid));
      offers[i] = detail::ironed_offers(agents[i], hull, policy.quantiles[i]);
    } else {
      offers[i] = detail::raw_offers(agents[i], policy.quantiles[i]);
    }
  }

  const std::size_t chunk = 4096;
  std::size_t n_chunks = ((std::size_t)samples + chunk - 1) / chunk;
  std::vector<double> sum(n_chunks, 0), sumsq(n_chunks, 0);
  std::vector<std::vector<long>> serves(n_chunks, std::vector<long>(n, 0));

  parallel_chunks((std::size_t)samples, chunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    double s = 0, ss = 0;
    auto& srv = serves[c];
    for (std::size_t it = lo; it < hi; ++it) {
      RngStream sub = rng.substream(it);
      double payoff = 0;
      std::vector<int> served;
      for (int idx : policy.order) {
        std::vector<int> trial = served;
        trial.push_back(idx);
        std::sort(trial.begin(), trial.end());
        if (!env.is_feasible(trial)) continue;
        ++srv[idx];
        auto d = detail::play_offer(agents[idx], offers[idx], sub);
        if (!d.bought) continue;
        payoff += obj == Objective::Revenue ? d.price * d.x : d.v * d.x;
        if (sub.next_double() < d.x) served.push_back(idx);
      }
      s += payoff;
      ss += payoff * payoff;
    }
    sum[c] = s;
    sumsq[c] = ss;
  });

  SimResult r;
  r.objective = obj;
  r.samples = samples;
  r.seed = rng.seed();
  r.serve_prob.assign(n, 0);
  double S = 0, SS = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    S += sum[c];
    SS += sumsq[c];
    for (int i = 0; i < n; ++i) r.serve_prob[i] += serves[c][i];
  }
  r.mean = S / samples;
  double var = std::max(0.0, SS / samples - r.mean * r.mean);
  r.std_error = std::sqrt(var / samples);
  for (int i = 0; i < n; ++i) r.serve_prob[i] /= samples;
  return r;
}

struct CorrelationGapPolicy {
  SppPolicy policy;
  EarResult ear_hulls;               // EAR over the ironed price-posting curves
  std::vector<ConcaveCurve> hulls;
};

// Quantiles from the ex ante optimum over the hulls; agents ordered by
// nonincreasing hull value at their quantile.
inline CorrelationGapPolicy correlation_gap_policy(const std::vector<Agent>& agents,
                                                   const Environment& env, Objective obj,
                                                   int curve_grid = 200) {
  CorrelationGapPolicy out;
  for (const auto& a : agents) out.hulls.push_back(concave_hull(price_posting_curve(a, obj, curve_grid)));
  out.ear_hulls = ear_optimize(out.hulls, env);
  int n = (int)agents.size();
  out.policy.quantiles = out.ear_hulls.profile;
  out.policy.order.resize(n);
  std::iota(out.policy.order.begin(), out.policy.order.end(), 0);
  std::vector<double> val(n);
  for (int i = 0; i < n; ++i) val[i] = out.hulls[i].value_at(out.policy.quantiles[i]);
  std::sort(out.policy.order.begin(), out.policy.order.end(), [&](int a, int b) {
    if (val[a] != val[b]) return val[a] > val[b];
    return a < b;
  });
  out.policy.ironed = true;
  return out;
}

struct OppResult {
  SimResult worst;
  std::vector<int> worst_order;
  int orders_evaluated = 0;
};

// Worst-case order for fixed quantiles: exhaustive for n <= 7, otherwise a
// batch of random orders plus the two value-sorted ones (a lower bound on
// adversarial damage).
inline OppResult opp_evaluate(const std::vector<Agent>& agents, const Environment& env,
                              const std::vector<double>& quantiles, Objective obj,
                              long samples, const RngStream& rng, int random_orders = 200,
                              int curve_grid = 200) {
  int n = (int)agents.size();
  std::vector<std::vector<int>> orders;
  std::vector<int> base(n);
  std::iota(base.begin(), base.end(), 0);
  if (n <= 7) {
    std::vector<int> perm = base;
    do
      orders.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    RngStream order_rng = rng.substream(0xabcdef);
    for (int t = 0; t < random_orders; ++t) {
      std::vector<int> perm = base;
      for (int i = n - 1; i > 0; --i) {
        int j = (int)(order_rng.next_u64() % (i + 1));
        std::swap(perm[i], perm[j]);
      }
      orders.push_back(perm);
    }
    std::vector<ConcaveCurve> hulls;
    for (const auto& a : agents) hulls.push_back(concave_hull(price_posting_curve(a, obj, curve_grid)));
    std::vector<int> by_value = base;
    std::sort(by_value.begin(), by_value.end(), [&](int a, int b) {
      return hulls[a].value_at(quantiles[a]) > hulls[b].value_at(quantiles[b]);
    });
    orders.push_back(by_value);
    std::reverse(by_value.begin(), by_value.end());
    orders.push_back(by_value);
  }
  OppResult res;
  res.orders_evaluated = (int)orders.size();
  bool first = true;
  for (std::size_t t = 0; t < orders.size(); ++t) {
    SppPolicy pol;
    pol.order = orders[t];
    pol.quantiles = quantiles;
    pol.ironed = true;
    auto sim = spp_simulate(agents, env, pol, obj, samples, rng.substream(t + 1), curve_grid);
    if (first || sim.mean < res.worst.mean) {
      res.worst = sim;
      res.worst_order = orders[t];
      first = false;
    }
  }
  return res;
}

// single anonymous per-unit price offered in a fixed arrival order
inline SimResult anonymous_price_simulate(const std::vector<Agent>& agents, const Environment& env,
                                          double price, const std::vector<int>& order, Objective obj,
                                          long samples, const RngStream& rng) {
  int n = (int)agents.size();
  std::vector<detail::Offers> offers(n, detail::Offers{{1.0, price, true}});
  const std::size_t chunk = 4096;
  std::size_t n_chunks = ((std::size_t)samples + chunk - 1) / chunk;
  std::vector<double> sum(n_chunks, 0), sumsq(n_chunks, 0);
  parallel_chunks((std::size_t)samples, chunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    double s = 0, ss = 0;
    for (std::size_t it = lo; it < hi; ++it) {
      RngStream sub = rng.substream(it);
      double payoff = 0;
      std::vector<int> served;
      for (int idx : order) {
        std::vector<int> trial = served;
        trial.push_back(idx);
        std::sort(trial.begin(), trial.end());
        if (!env.is_feasible(trial)) continue;
        auto d = detail::play_offer(agents[idx], offers[idx], sub);
        if (!d.bought) continue;
        payoff += obj == Objective::Revenue ? d.price * d.x : d.v * d.x;
        if (sub.next_double() < d.x) served.push_back(idx);
      }
      s += payoff;
      ss += payoff * payoff;
    }
    sum[c] = s;
    sumsq[c] = ss;
  });
  SimResult r;
  r.objective = obj;
  r.samples = samples;
  r.seed = rng.seed();
  double S = 0, SS = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    S += sum[c];
    SS += sumsq[c];
  }
  r.mean = S / samples;
  r.std_error = std::sqrt(std::max(0.0, SS / samples - r.mean * r.mean) / samples);
  return r;
}

// ---- backward-induction DP for i.i.d. oblivious posted pricing ----

struct DpTable {
  int n = 0, k = 0;
  std::vector<double> prices;                  // candidate price grid
  std::vector<std::vector<double>> value;      // value[i][u], i in 0..n, u in 0..k
  std::vector<std::vector<int>> best_price;    // argmax index per state
  double optimal() const { return value[0][k]; }
};

inline std::vector<double> default_price_grid(const Agent& agent, int count) {
  std::vector<double> g;
  double vmax = agent.value().max();
  for (int i = 1; i <= count; ++i) g.push_back(vmax * i / count);
  for (double v : agent.value().support()) g.push_back(v);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline DpTable opp_iid_dp(const Agent& agent, int n, int k, Objective obj,
                          const std::vector<double>& price_grid) {
  if (price_grid.empty()) throw ParameterError("opp_iid_dp: empty price grid");
  DpTable t;
  t.n = n;
  t.k = k;
  t.prices = price_grid;
  std::vector<double> alloc(price_grid.size()), pay(price_grid.size());
  for (std::size_t p = 0; p < price_grid.size(); ++p) {
    alloc[p] = agent.expected_allocation(price_grid[p]);
    pay[p] = agent.price_posting_payoff(price_grid[p], obj);
  }
  t.value.assign(n + 1, std::vector<double>(k + 1, 0.0));
  t.best_price.assign(n + 1, std::vector<int>(k + 1, -1));
  for (int i = n - 1; i >= 0; --i)
    for (int u = 1; u <= k; ++u) {
      double best = -1;
      int bp = -1;
      for (std::size_t p = 0; p < price_grid.size(); ++p) {
        double val = pay[p] + alloc[p] * t.value[i + 1][u - 1] + (1 - alloc[p]) * t.value[i + 1][u];
        if (val > best + 1e-15) {
          best = val;
          bp = (int)p;
        }
      }
      t.value[i][u] = best;
      t.best_price[i][u] = bp;
    }
  return t;
}

// ---- marginal payoff mechanism ----

struct MpmResult {
  SimResult sim;
  double ear = 0;  // EAR over the ex ante curves when supplied by the caller
};

// Model-free marginal payoff mechanism. Types map to random quantiles via
// H_i(q) = x_i^q(t_i); in closed form the sampled quantile is
// a_i(min(v, b/u)) for u uniform. Winners maximize ironed virtual value
// subject to feasibility; each pays the clearing price of her threshold
// quantile times the allocation she would pick there.
inline SimResult mpm_run(const std::vector<Agent>& agents, const Environment& env, Objective obj,
                         long samples, const RngStream& rng, int curve_grid = 2000) {
  int n = (int)agents.size();
  std::vector<ConcaveCurve> hulls;
  hulls.reserve(n);
  for (const auto& a : agents) hulls.push_back(concave_hull(price_posting_curve(a, obj, curve_grid)));

  auto phi = [&](int i, double q) { return virtual_value(hulls[i], q); };

  auto winners_of = [&](const std::vector<double>& w) { return env.max_weight_independent(w); };

  const std::size_t chunk = 4096;
  std::size_t n_chunks = ((std::size_t)samples + chunk - 1) / chunk;
  std::vector<double> sum(n_chunks, 0), sumsq(n_chunks, 0);
  std::vector<std::vector<long>> wins(n_chunks, std::vector<long>(n, 0));

  parallel_chunks((std::size_t)samples, chunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    double s = 0, ss = 0;
    auto& wn = wins[c];
    std::vector<double> v(n), b(n), q(n), w(n);
    for (std::size_t it = lo; it < hi; ++it) {
      RngStream sub = rng.substream(it);
      for (int i = 0; i < n; ++i) {
        v[i] = agents[i].value().sample(sub);
        b[i] = agents[i].budget().sample(sub);
        double u = sub.next_double();
        // inverse of H(q) = x^q(t): H rises linearly across the value atom's
        // jump interval (the exact-q mechanism mixes the atom in), and
        // follows the budget cap b/u elsewhere
        if (v[i] <= 0) {
          q[i] = 1.0;
        } else {
          double cap = u > 1e-300 ? b[i] / u : kLpInf;
          if (cap < v[i]) {
            q[i] = agents[i].expected_allocation(cap);
          } else {
            double qi_in = agents[i].expected_allocation(v[i]);
            double qi_ex = agents[i].expected_allocation_excl(v[i]);
            double h_atom = std::min(1.0, b[i] / v[i]);
            q[i] = qi_ex + (h_atom > 0 ? u / h_atom : 1.0) * (qi_in - qi_ex);
          }
        }
        q[i] = std::clamp(q[i], 0.0, 1.0);
        w[i] = phi(i, q[i]);
      }
      auto win = winners_of(w);
      double payoff = 0;
      for (int i = 0; i < n; ++i) {
        bool is_winner = std::find(win.begin(), win.end(), i) != win.end();
        if (is_winner) ++wn[i];
        // threshold: largest q at which i would still win against the others
        auto wins_at = [&](double qq) {
          double old = w[i];
          w[i] = phi(i, qq);
          auto trial = winners_of(w);
          w[i] = old;
          return std::find(trial.begin(), trial.end(), i) != trial.end();
        };
        double lo_q, hi_q;
        if (is_winner) {
          lo_q = q[i];
          hi_q = 1.0;
        } else {
          if (!wins_at(0.0)) {
            // never a winner: null threshold, no lottery, no payment
            continue;
          }
          lo_q = 0.0;
          hi_q = q[i];
        }
        while (hi_q - lo_q > 1e-4) {
          double mid = 0.5 * (lo_q + hi_q);
          if (wins_at(mid))
            lo_q = mid;
          else
            hi_q = mid;
        }
        double qhat = lo_q;
        // every agent pays for her lottery at the threshold quantile; the
        // exact-q offer mixes the price atom in, so a type sitting exactly on
        // the price participates with the mixing weight
        auto off = agents[i].quantile_offer(std::min(qhat, agents[i].q_cap()));
        double expected_pay = 0;
        for (const auto& arm : off.arms) {
          if (!std::isfinite(arm.price)) continue;
          bool buys = arm.include_atom ? v[i] >= arm.price : v[i] > arm.price;
          if (buys) expected_pay += arm.prob * arm.price * std::min(1.0, b[i] / arm.price);
        }
        if (obj == Objective::Revenue)
          payoff += expected_pay;
        else if (is_winner)
          payoff += v[i];
      }
      s += payoff;
      ss += payoff * payoff;
    }
    sum[c] = s;
    sumsq[c] = ss;
  });

  SimResult r;
  r.objective = obj;
  r.samples = samples;
  r.seed = rng.seed();
  r.serve_prob.assign(n, 0);
  double S = 0, SS = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    S += sum[c];
    SS += sumsq[c];
    for (int i = 0; i < n; ++i) r.serve_prob[i] += wins[c][i];
  }
  r.mean = S / samples;
  r.std_error = std::sqrt(std::max(0.0, SS / samples - r.mean * r.mean) / samples);
  for (int i = 0; i < n; ++i) r.serve_prob[i] /= samples;
  return r;
}

// ---- decomposition verifiers ----

struct WelfareDecomposition {
  double wel_ex = 0;   // welfare of the tau-defined mechanism
  double wel_ex1 = 0;  // capped at the clearing price
  double wel_ex2 = 0;  // shifted tail
  double price_posting = 0;  // W(q)
  bool lemma_ex1 = false, lemma_ex2 = false;
};

namespace detail {

// Split a type's chosen point on tau at the marginal-price cutoffs; the
// pieces are the allocations the type would pick under the capped and the
// shifted schedules, and their payments telescope to tau(x).
struct SplitPoint {
  double x, pay;
};

inline SplitPoint split_piece(const AllocationPaymentFunction& tau, double x, double lo_alloc,
                              double hi_alloc) {
  double a = std::clamp(x, lo_alloc, hi_alloc);
  SplitPoint s;
  s.x = a - lo_alloc;
  s.pay = tau.payment_at(a) - tau.payment_at(lo_alloc);
  return s;
}

}  // namespace detail

inline WelfareDecomposition decompose_welfare(const Agent& agent, double q,
                                              const std::vector<AllocationPaymentFunction>& taus,
                                              double grid_slack = 0.05) {
  for (const auto& t : taus) t.check();
  WelfareDecomposition d;
  double phat = agent.market_clearing(q).price;
  d.price_posting = agent.quantile_offer(q).payoff_welfare;
  const auto& v = agent.value().support();
  const auto& f = agent.value().probs();
  const auto& g = agent.budget().probs();
  for (std::size_t j = 0; j < taus.size(); ++j) {
    double xstar = taus[j].alloc_at_marginal(phat);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t k = taus[j].best_vertex(v[i]);
      double x = taus[j].xs[k];
      double w = f[i] * g[j];
      d.wel_ex += w * v[i] * x;
      d.wel_ex1 += w * v[i] * detail::split_piece(taus[j], x, 0, xstar).x;
      d.wel_ex2 += w * v[i] * detail::split_piece(taus[j], x, xstar, 1.0).x;
    }
  }
  if (d.wel_ex > d.wel_ex1 + d.wel_ex2 + 1e-6)
    throw InvariantError("decompose_welfare: split undercounts the original mechanism");
  d.lemma_ex1 = d.wel_ex1 <= d.price_posting * (1 + grid_slack) + grid_slack;
  d.lemma_ex2 = d.wel_ex2 <= d.price_posting * (1 + grid_slack) + grid_slack;
  return d;
}

struct RevenueDecomposition {
  bool high_price_branch = false;  // clearing price >= expected budget
  double rev_ex = 0;
  double rev_ex1 = 0, rev_ex3 = 0, rev_ex2 = 0;  // EX', EX''', EX''
  double price_posting = 0;                      // P(q)
  double runmax_price_posting = 0;               // max_{q' <= q} P(q')
  double kappa = 1;
  bool lemma_ex1 = false, lemma_ex2 = false, lemma_ex3 = false, lemma_high = false;
};

inline RevenueDecomposition decompose_revenue(const Agent& agent, double q,
                                              const std::vector<AllocationPaymentFunction>& taus,
                                              double kappa, double grid_slack = 0.05) {
  for (const auto& t : taus) t.check();
  RevenueDecomposition d;
  d.kappa = kappa;
  double phat = agent.market_clearing(q).price;
  double bstar = agent.budget().mean();
  d.price_posting = agent.quantile_offer(q).payoff_revenue;
  double runmax = 0;
  int steps = 64;
  for (int s = 1; s <= steps; ++s)
    runmax = std::max(runmax, agent.quantile_offer(q * s / steps).payoff_revenue);
  d.runmax_price_posting = runmax;
  const auto& v = agent.value().support();
  const auto& f = agent.value().probs();
  const auto& g = agent.budget().probs();
  for (std::size_t j = 0; j < taus.size(); ++j) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t k = taus[j].best_vertex(v[i]);
      d.rev_ex += f[i] * g[j] * taus[j].ps[k];
    }
  }
  if (phat >= bstar) {
    d.high_price_branch = true;
    d.lemma_high = d.rev_ex <= (2 + kappa - 1 / kappa) * d.price_posting * (1 + grid_slack) + grid_slack;
    return d;
  }
  for (std::size_t j = 0; j < taus.size(); ++j) {
    double xstar = taus[j].alloc_at_marginal(phat);
    double xsharp = std::max(xstar, taus[j].alloc_at_marginal(bstar));
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t k = taus[j].best_vertex(v[i]);
      double x = taus[j].xs[k];
      double w = f[i] * g[j];
      d.rev_ex1 += w * detail::split_piece(taus[j], x, 0, xstar).pay;
      d.rev_ex3 += w * detail::split_piece(taus[j], x, xstar, xsharp).pay;
      d.rev_ex2 += w * detail::split_piece(taus[j], x, xsharp, 1.0).pay;
    }
  }
  if (d.rev_ex > d.rev_ex1 + d.rev_ex3 + d.rev_ex2 + 1e-6)
    throw InvariantError("decompose_revenue: split undercounts the original mechanism");
  d.lemma_ex1 = d.rev_ex1 <= d.price_posting * (1 + grid_slack) + grid_slack;
  d.lemma_ex3 = d.rev_ex3 <= (2 * kappa - 1) * d.runmax_price_posting * (1 + grid_slack) + grid_slack;
  d.lemma_ex2 = d.rev_ex2 <= (1 + kappa - 1 / kappa) * d.runmax_price_posting * (1 + grid_slack) + grid_slack;
  return d;
}

}  // namespace pricing
