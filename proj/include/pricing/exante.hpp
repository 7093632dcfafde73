#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pricing/curves.hpp"
#include "pricing/lp.hpp"

namespace pricing {

struct ExAnteCurve {
  Objective objective = Objective::Revenue;
  std::vector<double> grid;
  std::vector<double> values;
  std::string solver;  // "two-menu" | "lp-relaxed" | "brute-force"

  double value_at(double q) const {
    if (q <= grid.front()) return values.front();
    if (q >= grid.back()) return values.back();
    auto it = std::upper_bound(grid.begin(), grid.end(), q);
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    double t = (q - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return values[k - 1] + t * (values[k] - values[k - 1]);
  }
};

struct MenuOption {
  double alloc;
  double payment;
};

struct MenuMechanism {
  std::vector<MenuOption> options;  // ascending alloc; null option implicit
};

// Relaxed single-agent ex ante LP over a discrete type grid. Variables are
// per-type allocation and payment. Constraints: adjacent value IC within each
// budget level (both directions), budget IC toward the adjacent lower budget
// level (misreports to lower budgets are always affordable; with value IC in
// place the chain covers every weakly lower level), IR at the bottom value,
// and the exact ex ante sale probability. Upward budget misreports are
// omitted, so the optimum is an upper bound on the true ex ante payoff.
//
// Rows are generated lazily: solve a small master, scan for violated
// candidates, add them, reoptimize dual-simplex-warm. Consecutive q values on
// a curve reuse the same master.
class ExAnteLpSolver {
 public:
  ExAnteLpSolver(const Agent& agent, Objective obj) : obj_(obj) {
    v_ = agent.value().support();
    f_ = agent.value().probs();
    b_ = agent.budget().support();
    g_ = agent.budget().probs();
    nv_ = (int)v_.size();
    nb_ = (int)b_.size();
    build_candidates();
  }

  struct Result {
    LpStatus status = LpStatus::Infeasible;
    double value = 0;
    std::vector<double> x, p;  // row-major [value][budget]
    long iterations = 0;
  };

  Result solve(double q) {
    if (q < -1e-12 || q > 1 + 1e-12) throw ParameterError("exante LP: q outside [0,1]");
    q = std::clamp(q, 0.0, 1.0);
    if (!simplex_) {
      LinearProgram lp;
      lp.num_vars = 2 * nv_ * nb_;
      lp.objective.assign(lp.num_vars, 0.0);
      lp.lower.assign(lp.num_vars, 0.0);
      lp.upper.assign(lp.num_vars, 0.0);
      for (int i = 0; i < nv_; ++i)
        for (int j = 0; j < nb_; ++j) {
          lp.upper[xv(i, j)] = 1.0;
          lp.upper[pv(i, j)] = std::min(b_[j], v_[i]);  // p <= v is implied by IR+IC
          if (obj_ == Objective::Revenue)
            lp.objective[pv(i, j)] = f_[i] * g_[j];
          else
            lp.objective[xv(i, j)] = f_[i] * g_[j] * v_[i];
        }
      SparseRow le, ge;
      for (int i = 0; i < nv_; ++i)
        for (int j = 0; j < nb_; ++j) {
          le.terms.push_back({xv(i, j), f_[i] * g_[j]});
          ge.terms.push_back({xv(i, j), -f_[i] * g_[j]});
        }
      le.rhs = q;
      ge.rhs = -q;
      lp.rows.push_back(le);
      lp.rows.push_back(ge);
      row_candidate_ = {-1, -1};
      // IR rows are few; keep them in the master from the start
      for (int j = 0; j < nb_; ++j) {
        lp.rows.push_back(candidates_[ir_row_base_ + j]);
        row_candidate_.push_back(ir_row_base_ + j);
        added_[ir_row_base_ + j] = 1;
      }
      simplex_ = std::make_unique<Simplex>(lp);
      if (simplex_->solve_primal() != LpStatus::Optimal) return fail();
    } else {
      simplex_->set_rhs(0, q);
      simplex_->set_rhs(1, -q);
      if (simplex_->reoptimize() != LpStatus::Optimal) return fail();
    }
    for (int round = 0; round < 200; ++round) {
      std::vector<SparseRow> viol;
      for (std::size_t k = 0; k < candidates_.size(); ++k) {
        if (added_[k]) continue;
        double act = 0;
        for (auto [var, c] : candidates_[k].terms) act += c * simplex_->var_value(var);
        if (act > candidates_[k].rhs + 1e-9) {
          viol.push_back(candidates_[k]);
          row_candidate_.push_back((int)k);
          added_[k] = 1;
        }
      }
      if (viol.empty()) break;
      simplex_->add_rows(viol);
      if (simplex_->reoptimize() != LpStatus::Optimal) return fail();
    }
    // drop stale nonbinding rows so the master does not accumulate across calls
    {
      std::vector<char> protect(simplex_->num_rows(), 0);
      protect[0] = protect[1] = 1;
      auto keep = simplex_->drop_nonbinding_rows(protect);
      std::vector<int> rc;
      rc.reserve(row_candidate_.size());
      for (std::size_t r = 0; r < keep.size(); ++r) {
        if (keep[r])
          rc.push_back(row_candidate_[r]);
        else if (row_candidate_[r] >= 0)
          added_[row_candidate_[r]] = 0;
      }
      row_candidate_.swap(rc);
    }
    Result r;
    r.status = LpStatus::Optimal;
    r.iterations = simplex_->iterations();
    LpSolution sol = simplex_->extract();
    if (sol.max_row_violation > 1e-7 || std::abs(sol.duality_gap) > 1e-6 * (1 + std::abs(sol.objective)))
      throw NumericalError("exante LP: residual certification failed");
    r.value = sol.objective;
    r.x.resize(nv_ * nb_);
    r.p.resize(nv_ * nb_);
    for (int i = 0; i < nv_; ++i)
      for (int j = 0; j < nb_; ++j) {
        r.x[i * nb_ + j] = sol.x[xv(i, j)];
        r.p[i * nb_ + j] = sol.x[pv(i, j)];
      }
    return r;
  }

  int num_values() const { return nv_; }
  int num_budgets() const { return nb_; }
  int master_rows() const { return simplex_ ? simplex_->num_rows() : 0; }

 private:
  Result fail() const {
    Result r;
    r.status = LpStatus::Infeasible;
    return r;
  }

  int xv(int i, int j) const { return i * nb_ + j; }
  int pv(int i, int j) const { return nv_ * nb_ + i * nb_ + j; }

  void build_candidates() {
    // adjacent value IC, both directions, per budget level
    for (int j = 0; j < nb_; ++j)
      for (int i = 0; i + 1 < nv_; ++i) {
        SparseRow up;  // v_i x_i - p_i >= v_i x_{i+1} - p_{i+1}
        up.terms = {{xv(i, j), -v_[i]}, {pv(i, j), 1.0}, {xv(i + 1, j), v_[i]}, {pv(i + 1, j), -1.0}};
        up.rhs = 0;
        candidates_.push_back(up);
        SparseRow dn;  // v_{i+1} x_{i+1} - p_{i+1} >= v_{i+1} x_i - p_i
        dn.terms = {{xv(i + 1, j), -v_[i + 1]}, {pv(i + 1, j), 1.0}, {xv(i, j), v_[i + 1]}, {pv(i, j), -1.0}};
        dn.rhs = 0;
        candidates_.push_back(dn);
      }
    // budget IC toward the adjacent lower level
    for (int j = 1; j < nb_; ++j)
      for (int i = 0; i < nv_; ++i) {
        SparseRow r;  // v_i x[i][j] - p[i][j] >= v_i x[i][j-1] - p[i][j-1]
        r.terms = {{xv(i, j), -v_[i]}, {pv(i, j), 1.0}, {xv(i, j - 1), v_[i]}, {pv(i, j - 1), -1.0}};
        r.rhs = 0;
        candidates_.push_back(r);
      }
    // IR at the bottom value (value IC chains it upward)
    ir_row_base_ = (int)candidates_.size();
    for (int j = 0; j < nb_; ++j) {
      SparseRow r;  // p[0][j] - v_0 x[0][j] <= 0
      r.terms = {{pv(0, j), 1.0}, {xv(0, j), -v_[0]}};
      r.rhs = 0;
      candidates_.push_back(r);
    }
    added_.assign(candidates_.size(), 0);
  }

  Objective obj_;
  int nv_ = 0, nb_ = 0;
  std::vector<double> v_, f_, b_, g_;
  std::vector<SparseRow> candidates_;
  std::vector<char> added_;
  std::vector<int> row_candidate_;  // master row id -> candidate index (-1: permanent)
  int ir_row_base_ = 0;
  std::unique_ptr<Simplex> simplex_;
};

inline ExAnteCurve exante_curve_lp(const Agent& agent, Objective obj, int m) {
  if (m < 2) throw ParameterError("exante_curve_lp: grid size must be >= 2");
  ExAnteCurve c;
  c.objective = obj;
  c.solver = "lp-relaxed";
  ExAnteLpSolver solver(agent, obj);
  c.grid.resize(m + 1);
  c.values.resize(m + 1);
  c.grid[0] = 0.0;
  c.values[0] = 0.0;  // selling with probability zero pays zero
  for (int j = 1; j <= m; ++j) {
    double q = (double)j / m;
    c.grid[j] = q;
    auto r = solver.solve(q);
    if (r.status != LpStatus::Optimal)
      throw NumericalError("exante_curve_lp: solver failed at q=" + std::to_string(q));
    c.values[j] = r.value;
  }
  return c;
}

// ---- public budget: exact two-option menu search ----

struct TwoMenuResult {
  double payoff = 0;
  MenuMechanism menu;
  bool feasible = false;
};

// Exact optimum over two-option menus {(x1, x1 v1), (x2, x1 v1 + (x2-x1) v2)}
// with thresholds on the value support (plus zero), each in an inclusive and
// an exclusive variant (the one-sided limit where the atom takes the cheaper
// option), payments capped by the public budget and the sale probability
// pinned to q. For fixed thresholds the payoff is linear along the feasible
// (x1, x2) segment, so its endpoints realize the optimum.
inline TwoMenuResult exante_public_budget(const Agent& agent, double q, Objective obj) {
  if (agent.utility() == Utility::PrivateBudget)
    throw ParameterError("exante_public_budget: agent must have a public (or infinite) budget");
  double budget = agent.budget().support().front();
  const auto& dist = agent.value();
  if (q < -1e-12 || q > 1 + 1e-12) throw InfeasibleQuantileError("two-menu: q outside [0,1]");
  q = std::clamp(q, 0.0, 1.0);

  TwoMenuResult best;
  best.feasible = q <= 1e-15;  // q = 0: empty menu, payoff 0
  if (q <= 1e-15) return best;

  struct Th {
    double v;
    bool incl;   // atom at v buys at this threshold
    double tail; // induced buying mass
    double ev;   // E[v * 1{buys}]
  };
  std::vector<Th> ths;
  ths.push_back({0.0, true, 1.0, dist.mean()});
  for (double v : dist.support()) {
    if (v <= 0) continue;
    ths.push_back({v, true, dist.tail_prob_geq(v), dist.partial_expectation_geq(v)});
    double atom_mass = dist.tail_prob_geq(v) - dist.tail_prob_gt(v);
    ths.push_back({v, false, dist.tail_prob_gt(v), dist.partial_expectation_geq(v) - v * atom_mass});
  }
  // the budget itself is a candidate marginal price when it binds
  if (budget < dist.max())
    ths.push_back({budget, true, dist.tail_prob_geq(budget), dist.partial_expectation_geq(budget)});
  std::sort(ths.begin(), ths.end(), [](const Th& a, const Th& b) {
    if (a.tail != b.tail) return a.tail > b.tail;
    return a.v < b.v;
  });

  auto consider = [&](const Th& t1, const Th& t2, double x1, double x2) {
    if (x1 < -1e-12 || x2 < x1 - 1e-12 || x2 > 1 + 1e-12) return;
    x1 = std::clamp(x1, 0.0, 1.0);
    x2 = std::clamp(x2, x1, 1.0);
    double p1 = x1 * t1.v;
    double p2 = p1 + (x2 - x1) * t2.v;
    if (p2 > budget + 1e-9) return;
    double P1 = t1.tail - t2.tail;
    double P2 = t2.tail;
    if (P1 < -1e-12) return;
    double sale = x1 * P1 + x2 * P2;
    if (std::abs(sale - q) > 1e-7) return;
    double payoff;
    if (obj == Objective::Revenue)
      payoff = P1 * p1 + P2 * p2;
    else
      payoff = x1 * (t1.ev - t2.ev) + x2 * t2.ev;
    if (payoff > best.payoff + 1e-15 || !best.feasible) {
      best.feasible = true;
      best.payoff = payoff;
      best.menu.options.clear();
      if (x1 > 1e-12 && x2 - x1 > 1e-12) {
        best.menu.options.push_back({x1, p1});
        best.menu.options.push_back({x2, p2});
      } else if (x2 > 1e-12) {
        best.menu.options.push_back({x2, p2});
      } else if (x1 > 1e-12) {
        best.menu.options.push_back({x1, p1});
      }
    }
  };

  int K = (int)ths.size();
  for (int a = 0; a < K; ++a) {
    const Th& t1 = ths[a];
    // single-price menu at t1
    if (t1.tail > 1e-15 && q <= t1.tail + 1e-12) {
      double x = std::min(1.0, q / t1.tail);
      consider(t1, t1, x, x);
    }
    for (int bidx = a + 1; bidx < K; ++bidx) {
      const Th& t2 = ths[bidx];
      if (t2.v < t1.v || (t2.v == t1.v && t1.incl == t2.incl)) continue;
      double P2 = t2.tail;
      double P1 = t1.tail - P2;
      if (P1 <= 1e-15) continue;
      double lo = 0.0, hi = 1.0;  // x2 range on the exact-sale line
      if (P2 > 1e-15) lo = std::max(lo, (q - P1) / P2);
      lo = std::max(lo, q / (P1 + P2));           // x1 <= x2
      if (P2 > 1e-15) hi = std::min(hi, q / P2);  // x1 >= 0
      // budget: x1 (v1 - v2) + x2 v2 <= b with x1 = (q - x2 P2)/P1
      double coef = t2.v + P2 * (t2.v - t1.v) / P1;
      double cons = (t1.v - t2.v) * q / P1;
      if (coef > 1e-15) hi = std::min(hi, (budget - cons) / coef);
      if (lo > hi + 1e-12) continue;
      for (double x2 : {lo, hi}) {
        double x1 = P2 > 1e-15 ? (q - x2 * P2) / P1 : q / P1;
        consider(t1, t2, x1, x2);
      }
      // interior second threshold with x2 = 1 and the budget binding:
      // x1 pinned by the sale constraint, v2 by tau(1) = b, valid when it
      // lands strictly inside the constant-tail interval above this threshold
      if (P2 > 1e-15) {
        double x1 = (q - P2) / P1;
        if (x1 > -1e-12 && x1 < 1 - 1e-9) {
          x1 = std::clamp(x1, 0.0, 1.0);
          double v2 = (budget - x1 * t1.v) / (1 - x1);
          double hi_v = bidx + 1 < K ? ths[bidx + 1].v : kLpInf;
          if (v2 > t2.v + 1e-12 && v2 < hi_v - 1e-12) {
            Th art = t2;
            art.v = v2;
            consider(t1, art, x1, 1.0);
          }
        }
      }
    }
  }
  if (!best.feasible) throw InfeasibleQuantileError("two-menu: q not attainable");
  return best;
}

inline ExAnteCurve exante_curve_two_menu(const Agent& agent, Objective obj, int m) {
  ExAnteCurve c;
  c.objective = obj;
  c.solver = "two-menu";
  c.grid.resize(m + 1);
  c.values.resize(m + 1);
  for (int j = 0; j <= m; ++j) {
    double q = (double)j / m;
    c.grid[j] = q;
    c.values[j] = exante_public_budget(agent, q, obj).payoff;
  }
  return c;
}

// ---- brute force oracle ----

struct BruteForceGrids {
  std::vector<double> allocs;    // ascending, starts at 0
  std::vector<double> payments;  // ascending, starts at 0, <= 30 levels
  double exante_tol = 1e-9;
};

// Exhaustive search over deterministic direct mechanisms on the declared
// grids, full conditional IC (misreports allowed whenever the target payment
// is affordable), IR, budget caps and the exact ex ante constraint. Exact on
// the restricted class; used as the oracle for the relaxed LP.
inline double brute_force_exante(const Agent& agent, double q, Objective obj,
                                 const BruteForceGrids& grids) {
  const auto& v = agent.value().support();
  const auto& f = agent.value().probs();
  const auto& b = agent.budget().support();
  const auto& g = agent.budget().probs();
  int nv = (int)v.size(), nb = (int)b.size();
  if (nv > 4 || nb > 3) throw SizeError("brute_force_exante: instance too large");
  if (grids.payments.size() > 30) throw SizeError("brute_force_exante: payment grid too large");

  struct Option {
    double x, p, util_coeff;  // util for type value v: v*x - p
  };
  int nt = nv * nb;
  std::vector<std::vector<Option>> opts(nt);
  std::vector<double> mass(nt), maxgain(nt);
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < nb; ++j) {
      int t = i * nb + j;
      mass[t] = f[i] * g[j];
      for (double x : grids.allocs)
        for (double p : grids.payments) {
          if (p > b[j] + 1e-12) continue;
          if (v[i] * x - p < -1e-12) continue;  // IR
          opts[t].push_back({x, p, 0.0});
        }
      if (opts[t].empty()) opts[t].push_back({0.0, 0.0, 0.0});
    }

  std::vector<int> choice(nt, -1);
  double best = -1.0;
  std::vector<double> contrib(nt);
  for (int t = 0; t < nt; ++t) {
    double mx = 0;
    for (const auto& o : opts[t]) {
      double c = obj == Objective::Revenue ? mass[t] * o.p : mass[t] * o.x * v[t / nb];
      mx = std::max(mx, c);
    }
    maxgain[t] = mx;
  }
  // suffix sums for pruning
  std::vector<double> suffix_gain(nt + 1, 0), suffix_maxmass(nt + 1, 0);
  for (int t = nt; t-- > 0;) {
    suffix_gain[t] = suffix_gain[t + 1] + maxgain[t];
    suffix_maxmass[t] = suffix_maxmass[t + 1] + mass[t];
  }

  // IC between assigned pair (t chooses ot, s chooses os):
  auto ic_ok = [&](int t, const Option& ot, int s, const Option& os) {
    double vt = v[t / nb], bt = b[t % nb];
    double vs = v[s / nb], bs = b[s % nb];
    if (os.p <= bt + 1e-12 && vt * ot.x - ot.p < vt * os.x - os.p - 1e-9) return false;
    if (ot.p <= bs + 1e-12 && vs * os.x - os.p < vs * ot.x - ot.p - 1e-9) return false;
    return true;
  };

  double running_sale = 0, running_obj = 0;
  std::function<void(int)> rec = [&](int t) {
    if (t == nt) {
      if (std::abs(running_sale - q) <= grids.exante_tol) best = std::max(best, running_obj);
      return;
    }
    if (running_obj + suffix_gain[t] <= best) return;
    if (running_sale - grids.exante_tol > q) return;
    if (running_sale + suffix_maxmass[t] + grids.exante_tol < q) return;
    for (int k = 0; k < (int)opts[t].size(); ++k) {
      const Option& o = opts[t][k];
      bool ok = true;
      for (int s = 0; s < t && ok; ++s) ok = ic_ok(t, o, s, opts[s][choice[s]]);
      if (!ok) continue;
      choice[t] = k;
      double dS = mass[t] * o.x;
      double dO = obj == Objective::Revenue ? mass[t] * o.p : mass[t] * o.x * v[t / nb];
      running_sale += dS;
      running_obj += dO;
      rec(t + 1);
      running_sale -= dS;
      running_obj -= dO;
      choice[t] = -1;
    }
  };
  rec(0);
  if (best < 0) throw InfeasibleQuantileError("brute_force_exante: q not attainable on the grids");
  return best;
}

// ---- closeness ----

inline double kappa_of(const DiscreteDist& budget) {
  double pr = budget.tail_prob_geq(budget.mean());
  if (pr <= 0) throw DegenerateDistributionError("kappa_of: Pr[b >= E[b]] is zero");
  return 1.0 / pr;
}

// discrete Myerson regularity: revenue curve over the support quantiles is concave
inline bool is_regular(const DiscreteDist& value) {
  const auto& vs = value.support();
  std::vector<std::pair<double, double>> pts;  // (q, q*v)
  pts.push_back({0.0, 0.0});
  for (int k = (int)vs.size(); k-- > 0;) {
    double qk = value.tail_prob_geq(vs[k]);
    pts.push_back({qk, qk * vs[k]});
  }
  for (std::size_t i = 2; i < pts.size(); ++i) {
    auto [q0, r0] = pts[i - 2];
    auto [q1, r1] = pts[i - 1];
    auto [q2, r2] = pts[i];
    if ((r1 - r0) * (q2 - q1) < (r2 - r1) * (q1 - q0) - 1e-9) return false;
  }
  return true;
}

struct ClosenessRow {
  double q, A, Pbar_runmax, ratio;
};

struct ClosenessReport {
  Objective objective = Objective::Revenue;
  double zeta = 1.0;
  double bound = 1.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  std::string solver;
  std::vector<ClosenessRow> per_q;
};

inline double closeness_bound(const Agent& agent, Objective obj, double kappa) {
  if (obj == Objective::Welfare) return 2.0;
  switch (agent.utility()) {
    case Utility::Linear:
      return 1.0;
    case Utility::PublicBudget:
      return is_regular(agent.value()) ? 1.0 : 2.0;
    case Utility::PrivateBudget: {
      double bound = 1.0 + 3.0 * kappa - 1.0 / kappa;
      if (is_regular(agent.value())) bound = std::min(bound, 3.0);
      return bound;
    }
  }
  return 2.0;
}

// zeta = max_q A(q) / max_{q' <= q} Pbar(q'), running-max denominator
inline ClosenessReport closeness(const Agent& agent, Objective obj, int m = 50) {
  ClosenessReport rep;
  rep.objective = obj;
  auto curve = price_posting_curve(agent, obj, m);
  auto hull = concave_hull(curve);
  ExAnteCurve A;
  if (agent.utility() == Utility::PublicBudget) {
    A = exante_curve_two_menu(agent, obj, m);
  } else {
    A = exante_curve_lp(agent, obj, m);
  }
  rep.solver = A.solver;
  rep.kappa = kappa_of(agent.budget());
  rep.bound = closeness_bound(agent, obj, rep.kappa);
  double runmax = 0;
  rep.zeta = 1.0;
  for (std::size_t k = 0; k < A.grid.size(); ++k) {
    runmax = std::max(runmax, hull.value_at(A.grid[k]));
    double ratio = 1.0;
    if (A.values[k] > 1e-12 && runmax > 1e-12) ratio = A.values[k] / runmax;
    else if (A.values[k] > 1e-9 && runmax <= 1e-12) ratio = kLpInf;
    rep.per_q.push_back({A.grid[k], A.values[k], runmax, ratio});
    rep.zeta = std::max(rep.zeta, ratio);
  }
  return rep;
}

// ---- allocation-payment functions (tau) ----

// Convex nondecreasing piecewise-linear payment schedule for one budget
// level: the FHL-style IC characterization. Extracted from LP solutions as
// the lower convex envelope of that budget level's (x, p) points.
struct AllocationPaymentFunction {
  double budget = 0;
  std::vector<double> xs, ps;  // vertices, xs ascending, xs[0] = 0, ps[0] = 0

  void check() const {
    if (xs.empty() || xs.size() != ps.size()) throw InvariantError("tau: empty");
    if (std::abs(xs[0]) > 1e-12 || std::abs(ps[0]) > 1e-12) throw InvariantError("tau: must start at (0,0)");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] <= xs[i - 1] - 1e-12) throw InvariantError("tau: x not ascending");
      if (ps[i] < ps[i - 1] - 1e-9) throw InvariantError("tau: not nondecreasing");
      if (ps[i] > budget + 1e-9) throw InvariantError("tau: payment above budget");
    }
    for (std::size_t i = 2; i < xs.size(); ++i) {
      double s0 = (ps[i - 1] - ps[i - 2]) / std::max(1e-15, xs[i - 1] - xs[i - 2]);
      double s1 = (ps[i] - ps[i - 1]) / std::max(1e-15, xs[i] - xs[i - 1]);
      if (s1 < s0 - 1e-9) throw InvariantError("tau: not convex");
    }
  }

  // smallest utility-maximizing vertex for value v; the null option (0,0) is
  // vertex 0. Ties resolve to the smaller allocation, which keeps the induced
  // sale probability at or below the one the points were extracted from.
  std::size_t best_vertex(double v) const {
    std::size_t bestk = 0;
    double bestu = 0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
      double u = v * xs[k] - ps[k];
      if (u > bestu + 1e-12) {
        bestk = k;
        bestu = u;
      }
    }
    return bestk;
  }

  double payment_at(double x) const {
    if (x <= xs.front()) return ps.front();
    if (x >= xs.back()) return ps.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t k = (std::size_t)(it - xs.begin());
    double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ps[k - 1] + t * (ps[k] - ps[k - 1]);
  }

  // largest vertex allocation whose left marginal price stays at or below m
  double alloc_at_marginal(double m) const {
    double x = 0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
      double slope = (ps[k] - ps[k - 1]) / std::max(1e-15, xs[k] - xs[k - 1]);
      if (slope <= m + 1e-9) x = xs[k];
      else break;
    }
    return x;
  }
};

inline AllocationPaymentFunction extract_tau(std::vector<std::pair<double, double>> points,
                                             double budget) {
  AllocationPaymentFunction tau;
  tau.budget = budget;
  points.push_back({0.0, 0.0});
  std::sort(points.begin(), points.end());
  // collapse near-duplicate allocations to their cheapest payment first
  std::vector<std::pair<double, double>> dedup;
  for (const auto& pt : points) {
    if (!dedup.empty() && pt.first <= dedup.back().first + 1e-9) {
      dedup.back().second = std::min(dedup.back().second, pt.second);
    } else {
      dedup.push_back(pt);
    }
  }
  // lower convex hull in (x, p)
  std::vector<std::pair<double, double>> hull;
  for (const auto& pt : dedup) {
    while (hull.size() >= 2) {
      auto [x1, p1] = hull[hull.size() - 2];
      auto [x2, p2] = hull[hull.size() - 1];
      if ((p2 - p1) * (pt.first - x1) <= (pt.second - p1) * (x2 - x1) + 1e-15) break;
      hull.pop_back();
    }
    hull.push_back(pt);
  }
  for (auto& [x, p] : hull) {
    tau.xs.push_back(x);
    tau.ps.push_back(std::clamp(p, 0.0, budget));
  }
  tau.check();
  return tau;
}

// per-budget-level tau family from an LP solution
inline std::vector<AllocationPaymentFunction> extract_tau_family(
    const Agent& agent, const ExAnteLpSolver::Result& sol) {
  const auto& b = agent.budget().support();
  int nv = (int)agent.value().support().size();
  int nb = (int)b.size();
  std::vector<AllocationPaymentFunction> taus;
  for (int j = 0; j < nb; ++j) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < nv; ++i) pts.push_back({sol.x[i * nb + j], sol.p[i * nb + j]});
    taus.push_back(extract_tau(std::move(pts), b[j]));
  }
  return taus;
}

}  // namespace pricing
