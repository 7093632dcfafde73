#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pricing/dist.hpp"
#include "pricing/errors.hpp"

namespace pricing {

enum class Objective { Revenue, Welfare };

inline const char* to_string(Objective o) { return o == Objective::Revenue ? "revenue" : "welfare"; }

// One arm of a price lottery. include_atom distinguishes "buy at v >= p" from
// "buy at v > p"; mixing the two arms sells with an exact target probability
// even when p sits on a value atom.
struct OfferArm {
  double prob;
  double price;
  bool include_atom;
};

struct QuantileOffer {
  std::vector<OfferArm> arms;  // empty means no sale
  double payoff_revenue = 0;
  double payoff_welfare = 0;
  double payoff(Objective o) const { return o == Objective::Revenue ? payoff_revenue : payoff_welfare; }
};

struct MarketClearing {
  double price;
  double achieved;  // sale probability at `price` (>= requested q)
  double gap;       // achieved - q, nonzero when q falls inside an atom jump
};

// Discretized agent: independent value and budget distributions plus the
// utility tag. All curve operations run off this representation.
class Agent {
 public:
  Agent(DiscreteDist value, DiscreteDist budget, Utility util)
      : value_(std::move(value)), budget_(std::move(budget)), util_(util) {
    check_ordinary_good();
  }

  static Agent from_model(const AgentModel& m, int grid) {
    m.check();
    return Agent(m.value.discretize(grid), m.budget.discretize(grid), m.utility);
  }

  const DiscreteDist& value() const { return value_; }
  const DiscreteDist& budget() const { return budget_; }
  Utility utility() const { return util_; }
  bool is_linear() const { return util_ == Utility::Linear; }

  Agent scaled(double c) const { return Agent(value_.scaled(c), budget_.scaled(c), util_); }

  // Pr[v >= p] * E[min(1, b/p)]
  double expected_allocation(double p) const {
    if (!(p > 0)) throw ParameterError("expected_allocation: p must be > 0");
    return value_.tail_prob_geq(p) * budget_.expected_min_ratio(p);
  }

  // same with the value atom at p excluded (right limit of the allocation fn)
  double expected_allocation_excl(double p) const {
    if (!(p > 0)) throw ParameterError("expected_allocation_excl: p must be > 0");
    return value_.tail_prob_gt(p) * budget_.expected_min_ratio(p);
  }

  double price_posting_payoff(double p, Objective obj, bool include_atom = true) const {
    if (!(p > 0)) throw ParameterError("price_posting_payoff: p must be > 0");
    if (obj == Objective::Revenue) {
      double tail = include_atom ? value_.tail_prob_geq(p) : value_.tail_prob_gt(p);
      return tail * budget_.expected_min(p);
    }
    double ev = include_atom ? value_.partial_expectation_geq(p)
                             : value_.partial_expectation_geq(std::nextafter(p, 1e308));
    return ev * budget_.expected_min_ratio(p);
  }

  // sup over p of expected_allocation = Pr[v > 0] * Pr[b > 0]
  double q_cap() const {
    return value_.tail_prob_gt(0.0) * budget_.tail_prob_gt(0.0);
  }

  // Largest price selling with probability >= q; bisection over the monotone
  // allocation function, snapped onto a value atom when the target quantile
  // falls inside that atom's jump. q inside a jump leaves a positive gap.
  MarketClearing market_clearing(double q) const {
    double cap = q_cap();
    if (!(q > 0)) throw ParameterError("market_clearing: q must be > 0");
    if (q > cap + 1e-9) throw InfeasibleQuantileError("market_clearing: q above attainable ceiling");
    q = std::min(q, cap);
    double hi = value_.max() * (1 + 1e-12) + 1e-12;  // sells < q
    double lo = 0.0;                                 // conceptual: a(0+) = cap >= q
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid <= 0) break;
      if (expected_allocation(mid) >= q)
        lo = mid;
      else
        hi = mid;
    }
    // bisection converges onto a jump point when q is inside an atom; identify
    // the support value and use it exactly
    double price = lo > 0 ? lo : hi;
    double tol = 1e-7 * std::max(1.0, price) + 1e-12;
    const auto& sup = value_.support();
    auto it = std::lower_bound(sup.begin(), sup.end(), lo - tol);
    for (; it != sup.end() && *it <= hi + tol; ++it) {
      if (*it > 0 && expected_allocation(*it) >= q) price = *it;
    }
    double achieved = expected_allocation(price);
    return {price, achieved, achieved - q};
  }

  // Price lottery selling with probability exactly q in expectation.
  QuantileOffer quantile_offer(double q) const {
    QuantileOffer off;
    if (q <= 1e-15) return off;
    MarketClearing mc = market_clearing(q);
    double p = mc.price;
    double q_incl = expected_allocation(p);
    double q_excl = expected_allocation_excl(p);
    if (q_incl <= q + 1e-12 || q_incl - q_excl <= 1e-15) {
      off.arms.push_back({1.0, p, true});
      off.payoff_revenue = price_posting_payoff(p, Objective::Revenue, true);
      off.payoff_welfare = price_posting_payoff(p, Objective::Welfare, true);
      return off;
    }
    double w = (q - q_excl) / (q_incl - q_excl);
    w = std::clamp(w, 0.0, 1.0);
    off.arms.push_back({w, p, true});
    off.arms.push_back({1.0 - w, p, false});
    off.payoff_revenue = w * price_posting_payoff(p, Objective::Revenue, true) +
                         (1 - w) * price_posting_payoff(p, Objective::Revenue, false);
    off.payoff_welfare = w * price_posting_payoff(p, Objective::Welfare, true) +
                         (1 - w) * price_posting_payoff(p, Objective::Welfare, false);
    return off;
  }

 private:
  void check_ordinary_good() const {
    // demand must be weakly decreasing in price; probe around every value atom
    double prev = 1.0;
    double prev_p = 0.0;
    for (double v : value_.support()) {
      for (double p : {v * (1 - 1e-9), v, v * (1 + 1e-9)}) {
        if (p <= prev_p || p <= 0) continue;
        double a = expected_allocation(p);
        if (a > prev + 1e-9) throw InvariantError("allocation not monotone in price");
        prev = a;
        prev_p = p;
      }
    }
  }

  DiscreteDist value_;
  DiscreteDist budget_;
  Utility util_;
};

struct PayoffCurve {
  Objective objective = Objective::Revenue;
  std::vector<double> grid;    // ascending quantiles, grid.front() == 0
  std::vector<double> values;  // payoff per grid point
  double q_cap = 1.0;          // attainable ceiling; curve is flat beyond it

  double value_at(double q) const {
    if (grid.empty()) return 0.0;
    if (q <= grid.front()) return values.front();
    if (q >= grid.back()) return values.back();
    auto it = std::upper_bound(grid.begin(), grid.end(), q);
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    double t = (q - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return values[k - 1] + t * (values[k] - values[k - 1]);
  }
};

// Sampled on the uniform j/m grid plus the attainable corner quantiles of
// every support atom (both jump boundaries), so the concave hull built from
// the samples carries the exact breakpoints even off the uniform grid.
inline PayoffCurve price_posting_curve(const Agent& agent, Objective obj, int m) {
  if (m < 2) throw ParameterError("price_posting_curve: grid size must be >= 2");
  PayoffCurve c;
  c.objective = obj;
  c.q_cap = agent.q_cap();
  std::vector<double> grid;
  grid.reserve(m + 1 + 2 * agent.value().size());
  for (int j = 0; j <= m; ++j) grid.push_back(static_cast<double>(j) / m);
  for (double v : agent.value().support()) {
    if (v <= 0) continue;
    for (double q : {agent.expected_allocation(v), agent.expected_allocation_excl(v)})
      if (q > 1e-12 && q < 1 - 1e-12) grid.push_back(q);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             grid.end());
  double cap_payoff = agent.quantile_offer(std::min(1.0, c.q_cap)).payoff(obj);
  c.grid = grid;
  c.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid[j] > c.q_cap + 1e-12)
      c.values[j] = cap_payoff;
    else
      c.values[j] = agent.quantile_offer(grid[j]).payoff(obj);
  }
  c.values[0] = 0.0;
  return c;
}

// Piecewise-linear concave function given by its breakpoints; carries the
// left-derivative view used as the virtual value.
struct ConcaveCurve {
  std::vector<double> qs;
  std::vector<double> vals;

  double value_at(double q) const {
    if (q <= qs.front()) return vals.front();
    if (q >= qs.back()) return vals.back();
    auto it = std::upper_bound(qs.begin(), qs.end(), q);
    std::size_t k = static_cast<std::size_t>(it - qs.begin());
    double t = (q - qs[k - 1]) / (qs[k] - qs[k - 1]);
    return vals[k - 1] + t * (vals[k] - vals[k - 1]);
  }

  // left-derivative; at q = 0 the slope of the first segment
  double slope_at(double q) const {
    if (qs.size() < 2) return 0.0;
    auto it = std::lower_bound(qs.begin(), qs.end(), q);
    std::size_t k = static_cast<std::size_t>(it - qs.begin());
    if (k == 0) k = 1;
    if (k >= qs.size()) k = qs.size() - 1;
    return (vals[k] - vals[k - 1]) / (qs[k] - qs[k - 1]);
  }

  double max_value() const { return *std::max_element(vals.begin(), vals.end()); }

  double argmax() const {
    std::size_t k = static_cast<std::size_t>(
        std::max_element(vals.begin(), vals.end()) - vals.begin());
    return qs[k];
  }

  // segment index whose interval [qs[i], qs[i+1]] contains q
  std::size_t segment_of(double q) const {
    auto it = std::upper_bound(qs.begin(), qs.end(), q);
    std::size_t k = static_cast<std::size_t>(it - qs.begin());
    if (k == 0) return 0;
    if (k >= qs.size()) return qs.size() - 2;
    return k - 1;
  }
};

inline ConcaveCurve concave_hull(const PayoffCurve& curve) {
  ConcaveCurve h;
  std::size_t n = curve.grid.size();
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    double x = curve.grid[i], y = curve.values[i];
    while (stack.size() >= 2) {
      std::size_t a = stack[stack.size() - 2], b = stack[stack.size() - 1];
      double cross = (curve.values[b] - curve.values[a]) * (x - curve.grid[a]) -
                     (y - curve.values[a]) * (curve.grid[b] - curve.grid[a]);
      if (cross >= -1e-15) break;  // b below chord a->i: drop it
      stack.pop_back();
    }
    stack.push_back(i);
  }
  for (std::size_t i : stack) {
    h.qs.push_back(curve.grid[i]);
    h.vals.push_back(curve.values[i]);
  }
  // merge collinear segments (relative slope tolerance, so the result is
  // invariant under scaling the payoff axis)
  if (h.qs.size() > 2) {
    std::vector<double> qs{h.qs[0]}, vals{h.vals[0]};
    for (std::size_t k = 1; k + 1 < h.qs.size(); ++k) {
      double s0 = (h.vals[k] - vals.back()) / (h.qs[k] - qs.back());
      double s1 = (h.vals[k + 1] - h.vals[k]) / (h.qs[k + 1] - h.qs[k]);
      if (std::abs(s1 - s0) > 1e-9 * (std::abs(s0) + std::abs(s1) + 1e-30)) {
        qs.push_back(h.qs[k]);
        vals.push_back(h.vals[k]);
      }
    }
    qs.push_back(h.qs.back());
    vals.push_back(h.vals.back());
    h.qs.swap(qs);
    h.vals.swap(vals);
  }
  return h;
}

inline double virtual_value(const ConcaveCurve& hull, double q) {
  if (q < -1e-12 || q > 1 + 1e-12) throw ParameterError("virtual_value: q outside [0,1]");
  return hull.slope_at(std::clamp(q, 0.0, 1.0));
}

}  // namespace pricing
