#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <vector>

#include "pricing/curves.hpp"
#include "pricing/envs.hpp"
#include "pricing/mech.hpp"
#include "pricing/rng.hpp"

namespace pricing {

// b* solving b = sum_i E[(v_i - b/k)^+]; the anonymous threshold is b*/k.
// The left side increases and the right side decreases in b, so bisection
// brings the residual below 1e-9.
inline double kunit_fixed_point(const std::vector<ParametricDist>& values, int k) {
  if (k < 1) throw ParameterError("kunit_fixed_point: k >= 1");
  double total = 0;
  for (const auto& d : values) total += d.mean();
  if (total <= 0) return 0.0;
  auto rhs = [&](double b) {
    double s = 0;
    for (const auto& d : values) s += d.tail_expectation(b / k);
    return s;
  };
  double lo = 0, hi = total;
  while (rhs(hi) > hi) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    double mid = 0.5 * (lo + hi);
    if (rhs(mid) > mid)
      lo = mid;
    else
      hi = mid;
  }
  double b = 0.5 * (lo + hi);
  if (std::abs(rhs(b) - b) > 1e-9)
    throw NumericalError("kunit_fixed_point: residual above tolerance");
  return b;
}

inline double kunit_threshold(const std::vector<ParametricDist>& values, int k) {
  return kunit_fixed_point(values, k) / k;
}

// Adaptive thresholds for the matroid gambler. A fixed batch of valuation
// profiles v' (common random numbers) estimates the C(.) sums behind
//   theta_i = 1/2 ( E[sum_{C(A u {i})} v'] - E[sum_{C(A)} v'] ).
// B is the max-weight basis for v'; R(A) greedily completes A to a basis
// from B \ A in decreasing value; C(A) = B \ R(A).
class MatroidAdaptiveThresholds {
 public:
  MatroidAdaptiveThresholds(std::vector<DiscreteDist> dists, Environment env, int batch,
                            const RngStream& rng)
      : dists_(std::move(dists)), env_(std::move(env)) {
    if (batch < 100) throw ParameterError("adaptive thresholds: batch must be >= 100");
    int n = (int)dists_.size();
    if (n != env_.n()) throw ParameterError("adaptive thresholds: dists/env size mismatch");
    vbatch_.assign(batch, std::vector<double>(n));
    for (int s = 0; s < batch; ++s) {
      RngStream sub = rng.substream(0x7071 + s);
      for (int i = 0; i < n; ++i) vbatch_[s][i] = dists_[i].sample(sub);
    }
  }

  // E-hat[sum_{C(A)} v'] over the batch, plus standard error
  std::pair<double, double> mean_c_sum(const std::vector<int>& accepted) const {
    double s = 0, ss = 0;
    for (const auto& v : vbatch_) {
      double c = c_sum(accepted, v);
      s += c;
      ss += c * c;
    }
    double m = s / vbatch_.size();
    double var = std::max(0.0, ss / vbatch_.size() - m * m);
    return {m, std::sqrt(var / vbatch_.size())};
  }

  std::pair<double, double> mean_r_sum(const std::vector<int>& accepted) const {
    double s = 0, ss = 0;
    for (const auto& v : vbatch_) {
      double basis_sum = 0;
      for (int i : env_.max_weight_independent(v)) basis_sum += v[i];
      double r = basis_sum - c_sum(accepted, v);
      s += r;
      ss += r * r;
    }
    double m = s / vbatch_.size();
    double var = std::max(0.0, ss / vbatch_.size() - m * m);
    return {m, std::sqrt(var / vbatch_.size())};
  }

  double threshold(int arrival, const std::vector<int>& accepted) const {
    std::uint32_t mask = 0;
    for (int i : accepted) mask |= 1u << i;
    std::uint64_t key = ((std::uint64_t)arrival << 32) | mask;
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::vector<int> with = accepted;
    with.push_back(arrival);
    std::sort(with.begin(), with.end());
    double s = 0;
    for (const auto& v : vbatch_) s += c_sum(with, v) - c_sum(accepted, v);
    double theta = 0.5 * s / vbatch_.size();
    memo_[key] = theta;
    return theta;
  }

  const Environment& env() const { return env_; }

 private:
  double c_sum(const std::vector<int>& accepted, const std::vector<double>& v) const {
    auto basis = env_.max_weight_independent(v);  // B
    // R(A): scan B \ A in decreasing value, keep what stays independent with A
    std::vector<int> order = basis;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (v[a] != v[b]) return v[a] > v[b];
      return a < b;
    });
    std::vector<int> current = accepted;
    double b_sum = 0, r_sum = 0;
    for (int i : basis) b_sum += v[i];
    for (int j : order) {
      if (std::find(accepted.begin(), accepted.end(), j) != accepted.end()) continue;
      std::vector<int> trial = current;
      trial.push_back(j);
      std::sort(trial.begin(), trial.end());
      if (env_.is_feasible(trial)) {
        current = trial;
        r_sum += v[j];
      }
    }
    return b_sum - r_sum;  // C(A) = B \ R(A)
  }

  std::vector<DiscreteDist> dists_;
  Environment env_;
  std::vector<std::vector<double>> vbatch_;
  mutable std::map<std::uint64_t, double> memo_;
};

struct ThresholdPolicy {
  bool anonymous = true;
  double theta = 0;
  std::shared_ptr<MatroidAdaptiveThresholds> adaptive;

  static ThresholdPolicy anonymous_threshold(double t) {
    ThresholdPolicy p;
    p.anonymous = true;
    p.theta = t;
    return p;
  }
  static ThresholdPolicy adaptive_matroid(std::shared_ptr<MatroidAdaptiveThresholds> a) {
    ThresholdPolicy p;
    p.anonymous = false;
    p.adaptive = std::move(a);
    return p;
  }
};

// Bayesian online selection: prize i is accepted iff its value clears the
// policy threshold and acceptance keeps the set feasible. Returns realized
// welfare (mean total accepted value).
inline SimResult gambler_simulate(const std::vector<DiscreteDist>& dists, const Environment& env,
                                  const ThresholdPolicy& policy, long samples,
                                  const RngStream& rng) {
  int n = (int)dists.size();
  if (!policy.anonymous && !policy.adaptive)
    throw ParameterError("gambler_simulate: adaptive policy missing");
  SimResult r;
  r.objective = Objective::Welfare;
  r.samples = samples;
  r.seed = rng.seed();
  r.serve_prob.assign(n, 0);
  double S = 0, SS = 0;
  std::vector<long> acc_count(n, 0);
  for (long it = 0; it < samples; ++it) {
    RngStream sub = rng.substream(it);
    double total = 0;
    std::vector<int> accepted;
    for (int i = 0; i < n; ++i) {
      double v = dists[i].sample(sub);
      std::vector<int> trial = accepted;
      trial.push_back(i);
      if (!env.is_feasible(trial)) continue;
      double theta = policy.anonymous ? policy.theta : policy.adaptive->threshold(i, accepted);
      if (v >= theta) {
        accepted.push_back(i);
        total += v;
        ++acc_count[i];
      }
    }
    S += total;
    SS += total * total;
  }
  r.mean = S / samples;
  r.std_error = std::sqrt(std::max(0.0, SS / samples - r.mean * r.mean) / samples);
  for (int i = 0; i < n; ++i) r.serve_prob[i] = (double)acc_count[i] / samples;
  return r;
}

// Correlated-prize construction: S ~ D (the decomposition of the optimal ex
// ante profile), then v_i conditioned on the top q_i quantile slab when
// i is in S and on the complement otherwise. Marginals stay exactly F_i and
// the ex post prophet on these prizes equals the ex ante relaxation.
class CorrelatedSampler {
 public:
  CorrelatedSampler(std::vector<DiscreteDist> dists, Environment env, int curve_grid = 400)
      : dists_(std::move(dists)), env_(std::move(env)) {
    int n = (int)dists_.size();
    if (n != env_.n()) throw ParameterError("CorrelatedSampler: size mismatch");
    std::vector<ConcaveCurve> hulls;
    for (const auto& d : dists_) {
      Agent lin(d, DiscreteDist({10 * std::max(1e-9, d.max())}, {1.0}), Utility::Linear);
      hulls.push_back(concave_hull(price_posting_curve(lin, Objective::Welfare, curve_grid)));
    }
    auto ear = ear_optimize(hulls, env_);
    profile_ = ear.profile;
    ear_value_ = ear.value;
    decomposition_ = ear_decomposition(env_, profile_);
    cum_.resize(decomposition_.size());
    double c = 0;
    for (std::size_t i = 0; i < decomposition_.size(); ++i) {
      c += decomposition_[i].prob;
      cum_[i] = c;
    }
  }

  double ear() const { return ear_value_; }
  const std::vector<double>& profile() const { return profile_; }
  const std::vector<WeightedSet>& decomposition() const { return decomposition_; }

  std::vector<double> sample(RngStream& rng) const {
    double u = rng.next_double();
    std::size_t k = std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    if (k >= decomposition_.size()) k = decomposition_.size() - 1;
    const auto& members = decomposition_[k].members;
    int n = (int)dists_.size();
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
      bool in = std::find(members.begin(), members.end(), i) != members.end();
      double qi = profile_[i];
      double rank = in ? (1 - qi) + qi * rng.next_double() : (1 - qi) * rng.next_double();
      v[i] = dists_[i].value_at_rank(std::min(rank, 1.0 - 1e-15));
    }
    return v;
  }

  // offline optimum for a realized prize vector
  double prophet_value(const std::vector<double>& v) const {
    double s = 0;
    for (int i : env_.max_weight_independent(v)) s += v[i];
    return s;
  }

 private:
  std::vector<DiscreteDist> dists_;
  Environment env_;
  std::vector<double> profile_;
  std::vector<WeightedSet> decomposition_;
  std::vector<double> cum_;
  double ear_value_ = 0;
};

}  // namespace pricing
