#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pricing/errors.hpp"

namespace pricing {

constexpr double kLpInf = std::numeric_limits<double>::infinity();

struct SparseRow {
  std::vector<std::pair<int, double>> terms;  // (var, coef)
  double rhs = 0;                             // terms . x <= rhs
};

// max c^T x  s.t.  A x <= b,  lower <= x <= upper
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<double> lower, upper;
  std::vector<SparseRow> rows;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    default: return "iteration-limit";
  }
}

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  std::vector<double> row_duals;
  double objective = 0;
  double max_row_violation = 0;
  double max_bound_violation = 0;
  double duality_gap = 0;
  long iterations = 0;
};

// Bounded-variable revised simplex. Dense explicit basis inverse, sparse
// constraint columns, dual prices maintained incrementally. Primal phase 1/2
// for cold starts, dual simplex for re-solves after add_rows / set_rhs (the
// previous basis stays dual feasible). Two-pass ratio tests prefer large
// pivots among near-ties; Bland's rule kicks in after 10*(rows+cols)
// degenerate pivots. Deterministic: remaining ties break to smallest index.
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp)
      : n_(lp.num_vars), cost_(lp.objective), lb_(lp.lower), ub_(lp.upper) {
    if ((int)cost_.size() != n_ || (int)lb_.size() != n_ || (int)ub_.size() != n_)
      throw ParameterError("Simplex: inconsistent dimensions");
    for (int j = 0; j < n_; ++j) {
      if (!(lb_[j] <= ub_[j])) throw ParameterError("Simplex: lower > upper");
      if (!std::isfinite(lb_[j])) throw ParameterError("Simplex: lower bounds must be finite");
    }
    cols_.resize(n_);
    state_.assign(n_, AtLower);
    pos_of_.assign(n_, -1);
    xval_ = lb_;
    add_rows(lp.rows);
  }

  int num_rows() const { return m_; }
  int num_vars() const { return n_; }
  long iterations() const { return iter_; }

  // Appends rows; each new slack enters the basis (possibly out of bounds,
  // repaired by the next solve call). Dual prices of new rows start at zero,
  // so a dual-feasible basis stays dual feasible.
  void add_rows(const std::vector<SparseRow>& rows) {
    if (rows.empty()) return;
    int m_old = m_;
    ensure_capacity(m_ + (int)rows.size());
    for (const auto& r : rows) {
      int row_id = m_;
      for (auto [v, c] : r.terms) {
        if (v < 0 || v >= n_) throw ParameterError("Simplex: bad var index in row");
        cols_[v].push_back({row_id, c});
      }
      rowdata_.push_back(r.terms);
      rhs_.push_back(r.rhs);
      state_.push_back(Basic);
      xval_.push_back(0.0);
      lb_.push_back(0.0);
      ub_.push_back(kLpInf);
      cost_.push_back(0.0);
      basis_.push_back(n_ + row_id);
      pos_of_.push_back(row_id);
      y_.push_back(0.0);
      ++m_;
    }
    for (int r = m_old; r < m_; ++r) {
      double* row = binv(r);
      std::fill(row, row + m_, 0.0);
      row[r] = 1.0;
      for (auto [v, c] : rowdata_[r]) {
        if (state_[v] == Basic) {
          int pos = pos_of_[v];
          if (pos < m_old) {
            const double* src = binv(pos);
            for (int k = 0; k < m_old; ++k) row[k] -= c * src[k];
          }
        }
      }
      // new slack value = rhs - activity
      xval_[n_ + r] = rhs_[r] - row_activity(r);
    }
  }

  // Removes rows whose slack is basic and strictly positive (nonbinding).
  // Deleting such a row drops one basis position and one B^{-1} column
  // exactly. Returns the keep-mask over the old row indices.
  std::vector<char> drop_nonbinding_rows(const std::vector<char>& protect, double min_slack = 1e-7) {
    std::vector<char> keep(m_, 1);
    for (int r = 0; r < m_; ++r) {
      if (r < (int)protect.size() && protect[r]) continue;
      int sv = n_ + r;
      if (state_[sv] == Basic && xval_[sv] > min_slack) keep[r] = 0;
    }
    int m_new = 0;
    for (int r = 0; r < m_; ++r) m_new += keep[r];
    if (m_new == m_) return keep;
    std::vector<int> new_id(m_, -1);
    int next = 0;
    for (int r = 0; r < m_; ++r)
      if (keep[r]) new_id[r] = next++;
    // positions to keep: every basis position except those holding a dropped slack
    std::vector<int> keep_pos;
    keep_pos.reserve(m_new);
    for (int i = 0; i < m_; ++i) {
      int v = basis_[i];
      if (v >= n_ && !keep[v - n_]) continue;
      keep_pos.push_back(i);
    }
    if ((int)keep_pos.size() != m_new) throw InvariantError("drop rows: basis bookkeeping");
    // compact B^{-1}: submatrix of kept positions x kept row-columns
    std::vector<double> nb((std::size_t)cap_ * cap_, 0.0);
    for (int a = 0; a < m_new; ++a) {
      const double* src = binv(keep_pos[a]);
      double* dst = nb.data() + (std::size_t)a * cap_;
      for (int r = 0; r < m_; ++r)
        if (keep[r]) dst[new_id[r]] = src[r];
    }
    binv_.swap(nb);
    // rebuild row-side arrays
    std::vector<std::vector<std::pair<int, double>>> rowdata;
    std::vector<double> rhs, y;
    rowdata.reserve(m_new);
    for (int r = 0; r < m_; ++r) {
      if (!keep[r]) continue;
      rowdata.push_back(std::move(rowdata_[r]));
      rhs.push_back(rhs_[r]);
      y.push_back(y_[r]);
    }
    rowdata_.swap(rowdata);
    rhs_.swap(rhs);
    y_.swap(y);
    // rebuild slack variable arrays and the basis list
    std::vector<VarState> state(state_.begin(), state_.begin() + n_);
    std::vector<double> xval(xval_.begin(), xval_.begin() + n_);
    std::vector<double> lb(lb_.begin(), lb_.begin() + n_);
    std::vector<double> ub(ub_.begin(), ub_.begin() + n_);
    std::vector<double> cost(cost_.begin(), cost_.begin() + n_);
    for (int r = 0; r < m_; ++r) {
      if (!keep[r]) continue;
      int sv = n_ + r;
      state.push_back(state_[sv]);
      xval.push_back(xval_[sv]);
      lb.push_back(0.0);
      ub.push_back(kLpInf);
      cost.push_back(0.0);
    }
    std::vector<int> basis;
    basis.reserve(m_new);
    for (int i : keep_pos) {
      int v = basis_[i];
      basis.push_back(v >= n_ ? n_ + new_id[v - n_] : v);
    }
    state_.swap(state);
    xval_.swap(xval);
    lb_.swap(lb);
    ub_.swap(ub);
    cost_.swap(cost);
    basis_.swap(basis);
    m_ = m_new;
    pos_of_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) pos_of_[basis_[i]] = i;
    // structural columns referenced dropped row ids; rebuild them
    for (auto& col : cols_) col.clear();
    for (int r = 0; r < m_; ++r)
      for (auto [v, c] : rowdata_[r]) cols_[v].push_back({r, c});
    return keep;
  }

  void set_rhs(int row, double value) {
    if (row < 0 || row >= m_) throw ParameterError("Simplex: bad row");
    double delta = value - rhs_[row];
    if (delta == 0.0) return;
    rhs_[row] = value;
    // x_B shifts by delta * (column `row` of B^{-1})
    for (int i = 0; i < m_; ++i) xval_[basis_[i]] += delta * binv(i)[row];
  }

  double rhs(int row) const { return rhs_[row]; }

  LpStatus solve_primal(long max_iter = -1) {
    if (max_iter < 0) max_iter = default_iter_limit();
    if (!phase1(max_iter)) return LpStatus::Infeasible;
    refresh_duals();
    return phase2(max_iter);
  }

  // Dual simplex from a dual-feasible basis, then a primal polish. Falls back
  // to the primal method when dual feasibility does not hold.
  LpStatus reoptimize(long max_iter = -1) {
    if (max_iter < 0) max_iter = default_iter_limit();
    refresh_duals();
    if (dual_feasible()) {
      LpStatus st = dual_loop(max_iter);
      if (st == LpStatus::Optimal) return phase2(max_iter);
      // dual ray or stall: let the primal method decide feasibility
    }
    return solve_primal(max_iter);
  }

  // Rebuilds B^{-1} from the basis columns. Expensive; used as a fallback
  // when accumulated update error shows up in the certificates.
  void reinvert() {
    std::vector<double> mat((std::size_t)m_ * m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      int v = basis_[i];
      if (v >= n_)
        mat[(std::size_t)(v - n_) * m_ + i] = 1.0;
      else
        for (auto [r, c] : cols_[v]) mat[(std::size_t)r * m_ + i] = c;
    }
    // Gauss-Jordan with partial pivoting, inverse accumulated in binv
    for (int r = 0; r < m_; ++r) {
      double* row = binv(r);
      std::fill(row, row + m_, 0.0);
      row[r] = 1.0;
    }
    for (int col = 0; col < m_; ++col) {
      int piv = -1;
      double best = 1e-12;
      for (int r = col; r < m_; ++r)
        if (std::abs(mat[(std::size_t)r * m_ + col]) > best) {
          best = std::abs(mat[(std::size_t)r * m_ + col]);
          piv = r;
        }
      if (piv < 0) throw NumericalError("reinvert: singular basis");
      if (piv != col) {
        for (int k = 0; k < m_; ++k) std::swap(mat[(std::size_t)piv * m_ + k], mat[(std::size_t)col * m_ + k]);
        double* a = binv(piv);
        double* b = binv(col);
        for (int k = 0; k < m_; ++k) std::swap(a[k], b[k]);
      }
      double inv = 1.0 / mat[(std::size_t)col * m_ + col];
      double* prow = binv(col);
      double* mrow = &mat[(std::size_t)col * m_];
      for (int k = 0; k < m_; ++k) {
        mrow[k] *= inv;
        prow[k] *= inv;
      }
      for (int r = 0; r < m_; ++r) {
        if (r == col) continue;
        double f = mat[(std::size_t)r * m_ + col];
        if (f == 0.0) continue;
        double* mr = &mat[(std::size_t)r * m_];
        double* br = binv(r);
        for (int k = 0; k < m_; ++k) {
          mr[k] -= f * mrow[k];
          br[k] -= f * prow[k];
        }
      }
    }
    recompute_basics();
    refresh_duals();
    pivots_since_reinvert_ = 0;
  }

  LpSolution extract() {
    LpSolution s = build_solution();
    double scale = 1 + std::abs(s.objective);
    if (s.max_row_violation > 1e-7 || std::abs(s.duality_gap) > 1e-6 * scale) {
      reinvert();
      phase2(default_iter_limit());
      s = build_solution();
    }
    return s;
  }

  std::vector<double> duals() const {
    std::vector<double> y(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = binv(i);
      for (int k = 0; k < m_; ++k) y[k] += cb * row[k];
    }
    return y;
  }

  double row_activity(int r) const {
    double ax = 0;
    for (auto [v, c] : rowdata_[r]) ax += c * xval_[v];
    return ax;
  }

  double var_value(int j) const { return xval_[j]; }

 private:
  enum VarState : std::uint8_t { AtLower, AtUpper, Basic };

  static constexpr double kPivotTol = 1e-10;
  static constexpr double kFeasTol = 1e-9;
  static constexpr double kOptTol = 1e-9;
  static constexpr double kRatioTol = 1e-9;

  long default_iter_limit() const { return 50000 + 40L * (m_ + n_); }
  int total_vars() const { return n_ + m_; }

  double* binv(int r) { return binv_.data() + (std::size_t)r * cap_; }
  const double* binv(int r) const { return binv_.data() + (std::size_t)r * cap_; }

  void ensure_capacity(int m_new) {
    if (m_new <= cap_) return;
    int cap2 = std::max(m_new, cap_ == 0 ? 64 : 2 * cap_);
    std::vector<double> nb((std::size_t)cap2 * cap2, 0.0);
    for (int r = 0; r < m_; ++r)
      std::copy(binv(r), binv(r) + m_, nb.data() + (std::size_t)r * cap2);
    binv_.swap(nb);
    cap_ = cap2;
  }

  double dot_col(const std::vector<double>& y, int var) const {
    if (var >= n_) return y[var - n_];
    double s = 0;
    for (auto [r, c] : cols_[var]) s += c * y[r];
    return s;
  }

  double reduced_cost(int var) const { return cost_[var] - dot_col(y_, var); }

  // w = B^{-1} A_var
  void ftran(int var, std::vector<double>& w) const {
    w.assign(m_, 0.0);
    if (var >= n_) {
      int r = var - n_;
      for (int i = 0; i < m_; ++i) w[i] = binv(i)[r];
      return;
    }
    for (auto [r, c] : cols_[var])
      for (int i = 0; i < m_; ++i) w[i] += c * binv(i)[r];
  }

  void recompute_basics() {
    std::vector<double> resid(rhs_);
    for (int j = 0; j < n_; ++j) {
      if (state_[j] == Basic || xval_[j] == 0.0) continue;
      for (auto [r, c] : cols_[j]) resid[r] -= c * xval_[j];
    }
    for (int i = 0; i < m_; ++i) {
      const double* row = binv(i);
      double s = 0;
      for (int k = 0; k < m_; ++k) s += row[k] * resid[k];
      xval_[basis_[i]] = s;
    }
  }

  void refresh_duals() { y_ = duals(); }

  // drift control: refactorize periodically so update error cannot pile up
  bool maybe_reinvert() {
    if (pivots_since_reinvert_ < kReinvertPeriod || m_ < 64) return false;
    reinvert();
    return true;
  }

  bool dual_feasible() const {
    for (int j = 0; j < total_vars(); ++j) {
      if (state_[j] == Basic) continue;
      double d = reduced_cost(j);
      if (state_[j] == AtLower && d > 1e-7) return false;
      if (state_[j] == AtUpper && d < -1e-7) return false;
    }
    return true;
  }

  bool basic_below(int v) const { return xval_[v] < lb_[v] - kFeasTol; }
  bool basic_above(int v) const {
    return std::isfinite(ub_[v]) && xval_[v] > ub_[v] + kFeasTol;
  }

  LpSolution build_solution() {
    refresh_duals();
    LpSolution s;
    s.status = LpStatus::Optimal;
    s.iterations = iter_;
    s.x.assign(xval_.begin(), xval_.begin() + n_);
    for (int j = 0; j < n_; ++j) s.objective += cost_[j] * xval_[j];
    s.row_duals = y_;
    for (int r = 0; r < m_; ++r)
      s.max_row_violation = std::max(s.max_row_violation, row_activity(r) - rhs_[r]);
    for (int j = 0; j < n_; ++j) {
      s.max_bound_violation = std::max(s.max_bound_violation, lb_[j] - xval_[j]);
      if (std::isfinite(ub_[j]))
        s.max_bound_violation = std::max(s.max_bound_violation, xval_[j] - ub_[j]);
    }
    double dual_obj = 0;
    for (int r = 0; r < m_; ++r) dual_obj += y_[r] * rhs_[r];
    for (int j = 0; j < n_; ++j) {
      double d = reduced_cost(j);
      if (d > 0 && std::isfinite(ub_[j])) dual_obj += d * ub_[j];
      else if (d < 0) dual_obj += d * lb_[j];
    }
    s.duality_gap = dual_obj - s.objective;
    return s;
  }

  // ---- primal phase 1: drive basic bound violations to zero ----

  bool phase1(long max_iter) {
    long degenerate = 0;
    bool bland = false;
    bool retried = false;
    std::vector<double> y1(m_), w;
    while (iter_ < max_iter) {
      maybe_reinvert();
      double infeas = 0;
      for (int i = 0; i < m_; ++i) {
        int v = basis_[i];
        if (basic_below(v)) infeas += lb_[v] - xval_[v];
        else if (basic_above(v)) infeas += xval_[v] - ub_[v];
      }
      if (infeas <= kFeasTol) return true;
      y1.assign(m_, 0.0);
      for (int i = 0; i < m_; ++i) {
        int v = basis_[i];
        double g = basic_below(v) ? 1.0 : (basic_above(v) ? -1.0 : 0.0);
        if (g == 0.0) continue;
        const double* row = binv(i);
        for (int k = 0; k < m_; ++k) y1[k] += g * row[k];
      }
      int enter = -1, dir = 0;
      double best = 1e-12;
      for (int j = 0; j < total_vars(); ++j) {
        if (state_[j] == Basic) continue;
        double d = -dot_col(y1, j);
        if (state_[j] == AtLower && d > kOptTol) {
          if (bland) { enter = j; dir = +1; break; }
          if (d > best) { best = d; enter = j; dir = +1; }
        } else if (state_[j] == AtUpper && d < -kOptTol) {
          if (bland) { enter = j; dir = -1; break; }
          if (-d > best) { best = -d; enter = j; dir = -1; }
        }
      }
      if (enter < 0) {
        if (!retried) {
          // numerical drift can hide improving directions; refactorize once
          retried = true;
          reinvert();
          continue;
        }
        return false;  // stuck infeasible
      }
      ftran(enter, w);
      // ratio test with kinks at the violated bounds
      double limit = std::isfinite(ub_[enter]) ? ub_[enter] - lb_[enter] : kLpInf;
      int leave_pos = -1;
      double leave_to = 0;
      for (int i = 0; i < m_; ++i) {
        int v = basis_[i];
        double rate = -dir * w[i];
        if (std::abs(rate) < kPivotTol) continue;
        double cap = kLpInf, dest = 0;
        if (basic_below(v)) {
          if (rate > 0) { cap = (lb_[v] - xval_[v]) / rate; dest = lb_[v]; }
        } else if (basic_above(v)) {
          if (rate < 0) { cap = (ub_[v] - xval_[v]) / rate; dest = ub_[v]; }
        } else if (rate > 0 && std::isfinite(ub_[v])) {
          cap = (ub_[v] - xval_[v]) / rate;
          dest = ub_[v];
        } else if (rate < 0) {
          cap = (lb_[v] - xval_[v]) / rate;
          dest = lb_[v];
        }
        if (cap < 0) cap = 0;
        if (cap < limit - 1e-12 ||
            (cap < limit + 1e-12 && leave_pos >= 0 &&
             std::abs(w[i]) > std::abs(w[leave_pos]) + 1e-12)) {
          limit = cap;
          leave_pos = i;
          leave_to = dest;
        }
      }
      if (!bland && leave_pos >= 0) {
        // second pass: among blockers within tolerance pick the largest pivot
        double lim0 = limit;
        double best_piv = std::abs(w[leave_pos]);
        for (int i = 0; i < m_; ++i) {
          if (i == leave_pos) continue;
          int v = basis_[i];
          double rate = -dir * w[i];
          if (std::abs(rate) < kPivotTol || std::abs(w[i]) <= best_piv) continue;
          double cap = kLpInf, dest = 0;
          if (basic_below(v)) { if (rate > 0) { cap = (lb_[v] - xval_[v]) / rate; dest = lb_[v]; } }
          else if (basic_above(v)) { if (rate < 0) { cap = (ub_[v] - xval_[v]) / rate; dest = ub_[v]; } }
          else if (rate > 0 && std::isfinite(ub_[v])) { cap = (ub_[v] - xval_[v]) / rate; dest = ub_[v]; }
          else if (rate < 0) { cap = (lb_[v] - xval_[v]) / rate; dest = lb_[v]; }
          if (cap <= lim0 + kRatioTol) {
            best_piv = std::abs(w[i]);
            leave_pos = i;
            leave_to = dest;
            limit = std::max(0.0, std::min(limit, cap));
          }
        }
      }
      if (!std::isfinite(limit)) throw NumericalError("simplex: unbounded phase-1 ray");
      if (leave_pos >= 0 && std::abs(w[leave_pos]) < 1e-9) {
        if (reinverts_ < kMaxReinverts) {
          ++reinverts_;
          reinvert();
          continue;
        }
      }
      if (limit <= 1e-12) ++degenerate;
      apply_step(enter, dir, limit, w, leave_pos, leave_to, 0.0);
      if (!bland && degenerate > 10L * (m_ + n_)) bland = true;
      ++iter_;
      (void)n_bad;
    }
    throw NumericalError("simplex: phase-1 iteration limit");
  }

  // ---- primal phase 2 (expects y_ fresh) ----

  LpStatus phase2(long max_iter) {
    long degenerate = 0;
    long since_refresh = 0;
    bool bland = false;
    std::vector<double> w;
    while (iter_ < max_iter) {
      if (maybe_reinvert()) since_refresh = 0;
      if (++since_refresh > 512) {
        refresh_duals();
        since_refresh = 0;
      }
      int enter = -1, dir = 0;
      double best = 1e-12;
      for (int j = 0; j < total_vars(); ++j) {
        if (state_[j] == Basic) continue;
        double d = reduced_cost(j);
        if (state_[j] == AtLower && d > kOptTol) {
          if (bland) { enter = j; dir = +1; break; }
          if (d > best) { best = d; enter = j; dir = +1; }
        } else if (state_[j] == AtUpper && d < -kOptTol) {
          if (bland) { enter = j; dir = -1; break; }
          if (-d > best) { best = -d; enter = j; dir = -1; }
        }
      }
      if (enter < 0) {
        // confirm with fresh duals before declaring optimality
        refresh_duals();
        bool clean = true;
        for (int j = 0; j < total_vars() && clean; ++j) {
          if (state_[j] == Basic) continue;
          double d = reduced_cost(j);
          if ((state_[j] == AtLower && d > 10 * kOptTol) ||
              (state_[j] == AtUpper && d < -10 * kOptTol))
            clean = false;
        }
        if (clean) return LpStatus::Optimal;
        since_refresh = 0;
        continue;
      }
      double d_enter = reduced_cost(enter);
      ftran(enter, w);
      double limit = std::isfinite(ub_[enter]) ? ub_[enter] - lb_[enter] : kLpInf;
      int leave_pos = -1;
      double leave_to = 0;
      for (int i = 0; i < m_; ++i) {
        int v = basis_[i];
        double rate = -dir * w[i];
        if (std::abs(rate) < kPivotTol) continue;
        double cap = kLpInf, dest = 0;
        if (rate > 0 && std::isfinite(ub_[v])) {
          cap = (ub_[v] - xval_[v]) / rate;
          dest = ub_[v];
        } else if (rate < 0) {
          cap = (lb_[v] - xval_[v]) / rate;
          dest = lb_[v];
        } else {
          continue;
        }
        if (cap < 0) cap = 0;
        if (cap < limit - kRatioTol ||
            (cap < limit + kRatioTol && leave_pos >= 0 &&
             std::abs(w[i]) > std::abs(w[leave_pos]) + 1e-12) ||
            (cap < limit + kRatioTol && leave_pos >= 0 &&
             std::abs(std::abs(w[i]) - std::abs(w[leave_pos])) <= 1e-12 && v < basis_[leave_pos])) {
          limit = std::min(limit, std::max(0.0, cap));
          leave_pos = i;
          leave_to = dest;
        }
      }
      if (!std::isfinite(limit)) return LpStatus::Unbounded;
      if (leave_pos >= 0 && std::abs(w[leave_pos]) < 1e-9) {
        if (reinverts_ < kMaxReinverts) {
          ++reinverts_;
          reinvert();
          since_refresh = 0;
          continue;
        }
      }
      if (limit <= 1e-12) ++degenerate;
      apply_step(enter, dir, limit, w, leave_pos, leave_to, d_enter);
      if (!bland && degenerate > 10L * (m_ + n_)) bland = true;
      ++iter_;
    }
    return LpStatus::IterationLimit;
  }

  // ---- dual simplex (expects y_ fresh) ----

  LpStatus dual_loop(long max_iter) {
    std::vector<double> w;
    long since_refresh = 0;
    while (iter_ < max_iter) {
      if (maybe_reinvert()) since_refresh = 0;
      if (++since_refresh > 512) {
        refresh_duals();
        since_refresh = 0;
      }
      int leave_pos = -1;
      bool below = false;
      double worst = kFeasTol;
      for (int i = 0; i < m_; ++i) {
        int v = basis_[i];
        double viol_lo = lb_[v] - xval_[v];
        double viol_hi = std::isfinite(ub_[v]) ? xval_[v] - ub_[v] : -kLpInf;
        if (viol_lo > worst) { worst = viol_lo; leave_pos = i; below = true; }
        if (viol_hi > worst) { worst = viol_hi; leave_pos = i; below = false; }
      }
      if (leave_pos < 0) return LpStatus::Optimal;  // primal feasible
      const double* rho = binv(leave_pos);
      int enter = -1, dir = 0;
      double best_ratio = kLpInf, best_alpha = 0;
      for (int j = 0; j < total_vars(); ++j) {
        if (state_[j] == Basic) continue;
        double alpha;
        if (j >= n_) alpha = rho[j - n_];
        else {
          alpha = 0;
          for (auto [r, c] : cols_[j]) alpha += c * rho[r];
        }
        if (std::abs(alpha) < kPivotTol) continue;
        double eff = below ? alpha : -alpha;
        bool ok = (state_[j] == AtLower && eff < 0) || (state_[j] == AtUpper && eff > 0);
        if (!ok) continue;
        double d = reduced_cost(j);
        double ratio = std::abs(d) / std::abs(alpha);
        if (ratio < best_ratio - kRatioTol ||
            (ratio < best_ratio + kRatioTol && std::abs(alpha) > std::abs(best_alpha) + 1e-12) ||
            (ratio < best_ratio + kRatioTol &&
             std::abs(std::abs(alpha) - std::abs(best_alpha)) <= 1e-12 && (enter < 0 || j < enter))) {
          best_ratio = std::min(best_ratio, ratio);
          best_alpha = alpha;
          enter = j;
          dir = state_[j] == AtLower ? +1 : -1;
        }
      }
      if (enter < 0) return LpStatus::IterationLimit;  // let the primal decide
      double d_enter = reduced_cost(enter);
      ftran(enter, w);
      int v = basis_[leave_pos];
      double target = below ? lb_[v] : ub_[v];
      double rate = -dir * w[leave_pos];
      // the column FTRAN and the row BTRAN must agree on the pivot element
      if (std::abs(rate) < 1e-9 || std::abs(w[leave_pos] - best_alpha) > 1e-6 * (1 + std::abs(best_alpha))) {
        if (reinverts_ >= kMaxReinverts) return LpStatus::IterationLimit;
        ++reinverts_;
        reinvert();
        since_refresh = 0;
        continue;
      }
      double limit = std::max(0.0, (target - xval_[v]) / rate);
      apply_step(enter, dir, limit, w, leave_pos, target, d_enter);
      ++iter_;
    }
    return LpStatus::IterationLimit;
  }

  // Move entering var by dir*limit from its resident bound; the basic at
  // leave_pos exits to leave_to. leave_pos == -1 means a bound flip.
  // d_enter = reduced cost of the entering variable, for the dual update.
  void apply_step(int enter, int dir, double limit, const std::vector<double>& w,
                  int leave_pos, double leave_to, double d_enter) {
    double step = dir * limit;
    for (int i = 0; i < m_; ++i) xval_[basis_[i]] -= step * w[i];
    double origin = state_[enter] == AtLower ? lb_[enter] : ub_[enter];
    if (leave_pos < 0) {
      state_[enter] = dir > 0 ? AtUpper : AtLower;
      xval_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
      return;  // duals unchanged on a bound flip
    }
    int leave_var = basis_[leave_pos];
    double piv = w[leave_pos];
    if (std::abs(piv) < kPivotTol) throw NumericalError("simplex: zero pivot");
    double* prow = binv(leave_pos);
    double inv = 1.0 / piv;
    for (int k = 0; k < m_; ++k) prow[k] *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == leave_pos) continue;
      double f = w[i];
      if (f == 0.0) continue;
      double* row = binv(i);
      for (int k = 0; k < m_; ++k) row[k] -= f * prow[k];
    }
    // y' = y + d_enter * (new pivot row); keeps reduced costs consistent
    if (d_enter != 0.0)
      for (int k = 0; k < m_; ++k) y_[k] += d_enter * prow[k];
    bool to_upper = std::isfinite(ub_[leave_var]) && leave_to == ub_[leave_var] &&
                    ub_[leave_var] != lb_[leave_var];
    state_[leave_var] = to_upper ? AtUpper : AtLower;
    xval_[leave_var] = leave_to;
    pos_of_[leave_var] = -1;
    state_[enter] = Basic;
    basis_[leave_pos] = enter;
    pos_of_[enter] = leave_pos;
    xval_[enter] = origin + step;
    ++pivots_since_reinvert_;
  }

  static constexpr int kMaxReinverts = 6;
  static constexpr long kReinvertPeriod = 700;
  int n_ = 0;
  int m_ = 0;
  int cap_ = 0;
  int reinverts_ = 0;
  long pivots_since_reinvert_ = 0;
  long iter_ = 0;
  std::vector<double> cost_, lb_, ub_, xval_, rhs_;
  std::vector<std::vector<std::pair<int, double>>> cols_;
  std::vector<std::vector<std::pair<int, double>>> rowdata_;
  std::vector<VarState> state_;
  std::vector<int> basis_;
  std::vector<int> pos_of_;
  std::vector<double> binv_;
  std::vector<double> y_;  // maintained dual prices
};

inline LpSolution solve_lp(const LinearProgram& lp) {
  Simplex s(lp);
  LpStatus st = s.solve_primal();
  if (st != LpStatus::Optimal) {
    LpSolution sol;
    sol.status = st;
    sol.iterations = s.iterations();
    return sol;
  }
  return s.extract();
}

}  // namespace pricing
