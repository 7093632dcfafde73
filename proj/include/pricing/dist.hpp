#pragma once

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "pricing/errors.hpp"
#include "pricing/rng.hpp"

namespace pricing {

// Finite distribution on nonnegative reals. Support strictly ascending,
// probabilities sum to 1 within 1e-12. CDF is right-continuous.
class DiscreteDist {
 public:
  DiscreteDist() = default;
  DiscreteDist(std::vector<double> support, std::vector<double> probs)
      : support_(std::move(support)), probs_(std::move(probs)) {
    validate();
    build_caches();
  }

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }
  double min() const { return support_.front(); }
  double max() const { return support_.back(); }

  // F(v) = Pr[X <= v], right-continuous
  double cdf(double v) const {
    auto it = std::upper_bound(support_.begin(), support_.end(), v);
    std::size_t k = static_cast<std::size_t>(it - support_.begin());
    return k == 0 ? 0.0 : cum_[k - 1];
  }

  // q(v) = 1 - F(v) = Pr[X > v]; with the convention used throughout that
  // quantile mass counts types with value >= v as buying at price v, the
  // relevant tail is Pr[X >= v].
  double quantile_of_value(double v) const {
    if (v < 0) throw ParameterError("quantile_of_value: v must be >= 0");
    return 1.0 - cdf(v);
  }

  double tail_prob_geq(double t) const {  // Pr[X >= t]
    auto it = std::lower_bound(support_.begin(), support_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - support_.begin());
    return k == 0 ? 1.0 : 1.0 - cum_[k - 1];
  }

  double tail_prob_gt(double t) const { return 1.0 - cdf(t); }  // Pr[X > t]

  // V(q) = F^{-1}(1-q); inside an atom returns the atom's value.
  double demand(double q) const {
    if (q < -1e-12 || q > 1 + 1e-12) throw ParameterError("demand: q outside [0,1]");
    q = std::clamp(q, 0.0, 1.0);
    if (q == 0.0) return support_.back();
    double target = 1.0 - q;
    // smallest v with F(v) >= target
    auto it = std::lower_bound(cum_.begin(), cum_.end(), target - 1e-15);
    std::size_t k = static_cast<std::size_t>(it - cum_.begin());
    if (k >= support_.size()) k = support_.size() - 1;
    return support_[k];
  }

  double mean() const { return mean_; }

  // E[(X - t)^+]
  double tail_expectation(double t) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - support_.begin());
    double mass = k == 0 ? 1.0 : 1.0 - cum_[k - 1];
    double pe = k == 0 ? mean_ : suffix_ev_[k];
    return pe - t * mass;
  }

  // E[X * 1{X >= t}]
  double partial_expectation_geq(double t) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - support_.begin());
    return k == 0 ? mean_ : suffix_ev_[k];
  }

  // E[min(t, X)]
  double expected_min(double t) const {
    if (t <= 0) return 0.0;
    auto it = std::lower_bound(support_.begin(), support_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - support_.begin());
    double below_ev = mean_ - (k == 0 ? mean_ : suffix_ev_[k]);
    double mass_geq = k == 0 ? 1.0 : 1.0 - cum_[k - 1];
    return below_ev + t * mass_geq;
  }

  // E[min(1, X/t)]
  double expected_min_ratio(double t) const {
    if (t <= 0) return 1.0;
    return expected_min(t) / t;
  }

  double sample(RngStream& rng) const {
    double u = rng.next_double();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cum_.begin());
    if (k >= support_.size()) k = support_.size() - 1;
    return support_[k];
  }

  // inverse-CDF value at uniform rank u in [0,1)
  double value_at_rank(double u) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cum_.begin());
    if (k >= support_.size()) k = support_.size() - 1;
    return support_[k];
  }

  DiscreteDist scaled(double c) const {
    if (c <= 0) throw ParameterError("scaled: c must be > 0");
    std::vector<double> s = support_;
    for (double& v : s) v *= c;
    return DiscreteDist(std::move(s), probs_);
  }

 private:
  void validate() const {
    if (support_.empty() || support_.size() != probs_.size())
      throw ParameterError("DiscreteDist: support/probs size mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (support_[i] < 0) throw ParameterError("DiscreteDist: negative support");
      if (probs_[i] < 0) throw ParameterError("DiscreteDist: negative probability");
      if (i > 0 && support_[i] <= support_[i - 1])
        throw ParameterError("DiscreteDist: support must be strictly ascending");
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ParameterError("DiscreteDist: probabilities must sum to 1");
  }

  void build_caches() {
    cum_.resize(probs_.size());
    double c = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      c += probs_[i];
      cum_[i] = c;
    }
    cum_.back() = 1.0;
    suffix_ev_.assign(probs_.size() + 1, 0.0);
    for (std::size_t i = probs_.size(); i-- > 0;)
      suffix_ev_[i] = suffix_ev_[i + 1] + support_[i] * probs_[i];
    mean_ = suffix_ev_[0];
  }

  std::vector<double> support_;
  std::vector<double> probs_;
  std::vector<double> cum_;        // cum_[i] = Pr[X <= support_[i]]
  std::vector<double> suffix_ev_;  // suffix_ev_[i] = sum_{j>=i} v_j p_j
  double mean_ = 0;
};

// Parametric families used in configs and experiments.
struct UniformDist {
  double lo, hi;
};
struct PointMassDist {
  double v;
};
struct ExponentialDist {
  double lambda;
};
struct EqualRevenueTruncatedDist {
  double v_min, v_max;
};

class ParametricDist {
 public:
  using Family =
      std::variant<UniformDist, PointMassDist, ExponentialDist, EqualRevenueTruncatedDist, DiscreteDist>;

  ParametricDist(Family f) : family_(std::move(f)) { validate(); }

  static ParametricDist uniform(double lo, double hi) { return ParametricDist(UniformDist{lo, hi}); }
  static ParametricDist point_mass(double v) { return ParametricDist(PointMassDist{v}); }
  static ParametricDist exponential(double lambda) { return ParametricDist(ExponentialDist{lambda}); }
  static ParametricDist equal_revenue(double v_min, double v_max) {
    return ParametricDist(EqualRevenueTruncatedDist{v_min, v_max});
  }
  static ParametricDist explicit_dist(DiscreteDist d) { return ParametricDist(Family{std::move(d)}); }

  const Family& family() const { return family_; }

  bool is_point_mass() const { return std::holds_alternative<PointMassDist>(family_); }

  double max_value() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, UniformDist>) return f.hi;
          if constexpr (std::is_same_v<T, PointMassDist>) return f.v;
          if constexpr (std::is_same_v<T, ExponentialDist>) return 20.0 / f.lambda;  // soft cap
          if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>) return f.v_max;
          if constexpr (std::is_same_v<T, DiscreteDist>) return f.max();
          return 0.0;
        },
        family_);
  }

  double mean() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, UniformDist>) return 0.5 * (f.lo + f.hi);
          if constexpr (std::is_same_v<T, PointMassDist>) return f.v;
          if constexpr (std::is_same_v<T, ExponentialDist>) return 1.0 / f.lambda;
          if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>)
            return f.v_min * (1.0 + std::log(f.v_max / f.v_min));
          if constexpr (std::is_same_v<T, DiscreteDist>) return f.mean();
          return 0.0;
        },
        family_);
  }

  // E[(X - t)^+], exact per family (no discretization)
  double tail_expectation(double t) const {
    return std::visit(
        [t](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, UniformDist>) {
            if (t <= f.lo) return 0.5 * (f.lo + f.hi) - t;
            if (t >= f.hi) return 0.0;
            double w = f.hi - t;
            return 0.5 * w * w / (f.hi - f.lo);
          }
          if constexpr (std::is_same_v<T, PointMassDist>) return std::max(0.0, f.v - t);
          if constexpr (std::is_same_v<T, ExponentialDist>) {
            if (t <= 0) return 1.0 / f.lambda - t;
            return std::exp(-f.lambda * t) / f.lambda;
          }
          if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>) {
            if (t >= f.v_max) return 0.0;
            // density v_min/v^2 on [v_min, v_max), atom of mass v_min/v_max at v_max
            double tl = std::max(t, f.v_min);
            double cont = f.v_min * std::log(f.v_max / tl) -
                          t * f.v_min * (1.0 / tl - 1.0 / f.v_max);
            double atom = (f.v_min / f.v_max) * (f.v_max - t);
            return cont + atom;
          }
          if constexpr (std::is_same_v<T, DiscreteDist>) return f.tail_expectation(t);
          return 0.0;
        },
        family_);
  }

  // m equiprobable atoms at quantile midpoints of the inverse CDF
  DiscreteDist discretize(int m) const {
    if (m < 1) throw ParameterError("discretize: m must be >= 1");
    if (is_point_mass())
      return DiscreteDist({std::get<PointMassDist>(family_).v}, {1.0});
    if (std::holds_alternative<DiscreteDist>(family_)) return std::get<DiscreteDist>(family_);
    if (m < 2) throw ParameterError("discretize: m must be >= 2 for continuous families");
    std::vector<double> pts(m);
    for (int i = 0; i < m; ++i) {
      double u = (2.0 * i + 1.0) / (2.0 * m);
      pts[i] = inverse_cdf(u);
    }
    // merge duplicates (can happen for truncated families)
    std::vector<double> s;
    std::vector<double> p;
    for (int i = 0; i < m; ++i) {
      if (!s.empty() && pts[i] <= s.back() + 1e-15)
        p.back() += 1.0 / m;
      else {
        s.push_back(pts[i]);
        p.push_back(1.0 / m);
      }
    }
    double sum = 0;
    for (double x : p) sum += x;
    for (double& x : p) x /= sum;
    return DiscreteDist(std::move(s), std::move(p));
  }

 private:
  double inverse_cdf(double u) const {
    return std::visit(
        [u](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, UniformDist>) return f.lo + u * (f.hi - f.lo);
          if constexpr (std::is_same_v<T, PointMassDist>) return f.v;
          if constexpr (std::is_same_v<T, ExponentialDist>) return -std::log(1.0 - u) / f.lambda;
          if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>) {
            double u_cap = 1.0 - f.v_min / f.v_max;
            if (u >= u_cap) return f.v_max;
            return f.v_min / (1.0 - u);
          }
          return 0.0;
        },
        family_);
  }

  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, UniformDist>) {
            if (!(f.lo < f.hi) || f.lo < 0) throw ParameterError("uniform: need 0 <= lo < hi");
          }
          if constexpr (std::is_same_v<T, PointMassDist>) {
            if (f.v < 0) throw ParameterError("point-mass: v must be >= 0");
          }
          if constexpr (std::is_same_v<T, ExponentialDist>) {
            if (!(f.lambda > 0)) throw ParameterError("exponential: lambda must be > 0");
          }
          if constexpr (std::is_same_v<T, EqualRevenueTruncatedDist>) {
            if (!(0 < f.v_min && f.v_min < f.v_max))
              throw ParameterError("equal-revenue: need 0 < v_min < v_max");
          }
        },
        family_);
  }

  Family family_;
};

enum class Utility { Linear, PublicBudget, PrivateBudget };

// Value and budget are independent (product model). A linear agent is stored
// as a budget point mass at 10x the top value so min(1, b/p) = 1 at any
// relevant price and no infinity arithmetic is needed.
struct AgentModel {
  ParametricDist value;
  ParametricDist budget;
  Utility utility = Utility::PrivateBudget;

  static AgentModel linear(ParametricDist value_dist) {
    double cap = 10.0 * std::max(1e-9, value_dist.max_value());
    return AgentModel{std::move(value_dist), ParametricDist::point_mass(cap), Utility::Linear};
  }

  static AgentModel public_budget(ParametricDist value_dist, double b) {
    return AgentModel{std::move(value_dist), ParametricDist::point_mass(b), Utility::PublicBudget};
  }

  static AgentModel private_budget(ParametricDist value_dist, ParametricDist budget_dist) {
    return AgentModel{std::move(value_dist), std::move(budget_dist), Utility::PrivateBudget};
  }

  void check() const {
    if (utility == Utility::Linear) {
      if (!budget.is_point_mass() || budget.mean() < value.max_value())
        throw InvariantError("linear agent requires budget point mass above the value support");
    }
    if (utility == Utility::PublicBudget && !budget.is_point_mass())
      throw InvariantError("public-budget agent requires a point-mass budget");
  }
};

}  // namespace pricing
