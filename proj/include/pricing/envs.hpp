#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "pricing/curves.hpp"
#include "pricing/errors.hpp"
#include "pricing/rng.hpp"

namespace pricing {

// Feasibility environment: k-unit or a matroid given by its rank function.
// Matroids with n <= 16 elements carry a precomputed rank table; k-unit and
// partition environments also have closed-form ex ante feasibility.
class Environment {
 public:
  enum class Kind { KUnit, Uniform, Partition, Graphic, Explicit };

  static Environment k_unit(int k, int n) {
    Environment e;
    e.kind_ = Kind::KUnit;
    e.n_ = n;
    e.k_ = k;
    if (k < 1 || n < 1) throw ParameterError("k_unit: need k >= 1, n >= 1");
    return e;
  }

  static Environment uniform_matroid(int k, int n) {
    Environment e = k_unit(k, n);
    e.kind_ = Kind::Uniform;
    return e;
  }

  static Environment partition_matroid(std::vector<std::vector<int>> blocks, std::vector<int> caps) {
    Environment e;
    e.kind_ = Kind::Partition;
    if (blocks.size() != caps.size()) throw ParameterError("partition: blocks/caps mismatch");
    int n = 0;
    for (const auto& blk : blocks) n += (int)blk.size();
    e.n_ = n;
    e.block_of_.assign(n, -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (caps[b] < 0) throw ParameterError("partition: negative capacity");
      for (int i : blocks[b]) {
        if (i < 0 || i >= n || e.block_of_[i] != -1)
          throw ParameterError("partition: blocks must partition 0..n-1");
        e.block_of_[i] = (int)b;
      }
    }
    e.blocks_ = std::move(blocks);
    e.caps_ = std::move(caps);
    e.build_rank_table();
    return e;
  }

  static Environment graphic_matroid(int n_vertices, std::vector<std::pair<int, int>> edges) {
    Environment e;
    e.kind_ = Kind::Graphic;
    e.n_ = (int)edges.size();
    e.n_vertices_ = n_vertices;
    for (auto [a, b] : edges)
      if (a < 0 || b < 0 || a >= n_vertices || b >= n_vertices)
        throw ParameterError("graphic: bad edge endpoint");
    e.edges_ = std::move(edges);
    e.build_rank_table();
    return e;
  }

  // downward-closed independence family over n <= 16 elements, as bitmasks
  static Environment explicit_matroid(int n, std::vector<std::uint32_t> independent) {
    Environment e;
    e.kind_ = Kind::Explicit;
    e.n_ = n;
    if (n > 16) throw SizeError("explicit matroid limited to n <= 16");
    std::vector<char> ind(1u << n, 0);
    ind[0] = 1;
    for (auto m : independent) ind[m] = 1;
    // downward closure check
    for (std::uint32_t m = 1; m < (1u << n); ++m)
      if (ind[m])
        for (int i = 0; i < n; ++i)
          if ((m >> i) & 1u)
            if (!ind[m & ~(1u << i)]) throw ParameterError("explicit matroid: family not downward closed");
    e.independent_ = std::move(ind);
    e.build_rank_table();
    return e;
  }

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  int units() const { return k_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  const std::vector<int>& caps() const { return caps_; }
  bool is_kunit_like() const { return kind_ == Kind::KUnit || kind_ == Kind::Uniform; }

  int rank(std::uint32_t mask) const {
    if (is_kunit_like()) return std::min(k_, popcount(mask));
    if (kind_ == Kind::Partition && rank_table_.empty()) {
      std::vector<int> cnt(blocks_.size(), 0);
      int r = 0;
      for (int i = 0; i < n_; ++i)
        if ((mask >> i) & 1u) {
          int b = block_of_[i];
          if (cnt[b] < caps_[b]) { ++cnt[b]; ++r; }
        }
      return r;
    }
    return rank_table_[mask];
  }

  bool is_feasible(const std::vector<int>& agents) const {
    if (is_kunit_like()) return (int)agents.size() <= k_;
    std::uint32_t mask = 0;
    for (int i : agents) mask |= 1u << i;
    return rank(mask) == popcount(mask);
  }

  bool is_feasible_mask(std::uint32_t mask) const {
    if (is_kunit_like()) return popcount(mask) <= k_;
    return rank(mask) == popcount(mask);
  }

  struct EafResult {
    bool ok;
    bool exact;  // false when decided by the heuristic violation search
  };

  // membership of a quantile profile in the ex ante feasible polytope
  EafResult eaf_contains(const std::vector<double>& q, double tol = 1e-9) const {
    if ((int)q.size() != n_) throw ParameterError("eaf_contains: profile size mismatch");
    for (double qi : q)
      if (qi < -tol || qi > 1 + tol) return {false, true};
    if (is_kunit_like())
      return {std::accumulate(q.begin(), q.end(), 0.0) <= k_ + tol, true};
    if (kind_ == Kind::Partition) {
      for (std::size_t b = 0; b < blocks_.size(); ++b) {
        double s = 0;
        for (int i : blocks_[b]) s += q[i];
        if (s > caps_[b] + tol) return {false, true};
      }
      return {true, true};
    }
    if (n_ <= 16) {
      for (std::uint32_t mask = 1; mask < (1u << n_); ++mask) {
        double s = 0;
        for (int i = 0; i < n_; ++i)
          if ((mask >> i) & 1u) s += q[i];
        if (s > rank(mask) + tol) return {false, true};
      }
      return {true, true};
    }
    // heuristic: prefixes of the profile sorted by decreasing quantile
    std::vector<int> idx(n_);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return q[a] > q[b]; });
    std::uint32_t mask = 0;
    double s = 0;
    for (int i : idx) {
      mask |= 1u << i;
      s += q[i];
      if (s > rank(mask) + tol) return {false, false};
    }
    return {true, false};
  }

  // exhaustive for n <= 12, sampled otherwise
  void check_matroid_axioms(int samples = 2000, std::uint64_t seed = 1) const {
    if (is_kunit_like() || kind_ == Kind::Partition || n_ <= 12) {
      auto verify = [&](std::uint32_t s, int i, int j) {
        std::uint32_t si = s | (1u << i), sj = s | (1u << j), sij = si | sj;
        if (rank(si) < rank(s) || rank(si) > rank(s) + 1)
          throw InvariantError("matroid: unit-increase violated");
        if (rank(sij) + rank(s) > rank(si) + rank(sj))
          throw InvariantError("matroid: submodularity violated");
      };
      if (rank(0) != 0) throw InvariantError("matroid: rank(empty) != 0");
      if (n_ <= 12) {
        for (std::uint32_t s = 0; s < (1u << n_); ++s)
          for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
              if (!((s >> i) & 1u) && !((s >> j) & 1u) && i != j) verify(s, i, j);
      }
      return;
    }
    RngStream rng(seed, 0);
    for (int t = 0; t < samples; ++t) {
      std::uint32_t s = (std::uint32_t)(rng.next_u64() & ((1u << n_) - 1));
      int i = (int)(rng.next_u64() % n_), j = (int)(rng.next_u64() % n_);
      if (i == j || ((s >> i) & 1u) || ((s >> j) & 1u)) continue;
      std::uint32_t si = s | (1u << i), sj = s | (1u << j);
      if (rank(si) < rank(s) || rank(si) > rank(s) + 1)
        throw InvariantError("matroid: unit-increase violated");
      if (rank((si | sj)) + rank(s) > rank(si) + rank(sj))
        throw InvariantError("matroid: submodularity violated");
    }
  }

  // max-weight independent set by the matroid greedy (negative weights skipped)
  std::vector<int> max_weight_independent(const std::vector<double>& w) const {
    std::vector<int> idx((std::size_t)n_);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (w[a] != w[b]) return w[a] > w[b];
      return a < b;
    });
    std::vector<int> chosen;
    std::uint32_t mask = 0;
    for (int i : idx) {
      if (w[i] <= 0) break;
      std::uint32_t cand = mask | (1u << i);
      if (is_feasible_mask(cand)) {
        mask = cand;
        chosen.push_back(i);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

 private:
  static int popcount(std::uint32_t m) { return __builtin_popcount(m); }

  void build_rank_table() {
    if (n_ > 16) return;
    rank_table_.assign(1u << n_, 0);
    for (std::uint32_t mask = 1; mask < (1u << n_); ++mask) {
      int r = 0;
      switch (kind_) {
        case Kind::Partition: {
          std::vector<int> cnt(blocks_.size(), 0);
          for (int i = 0; i < n_; ++i)
            if ((mask >> i) & 1u) {
              int b = block_of_[i];
              if (cnt[b] < caps_[b]) { ++cnt[b]; ++r; }
            }
          break;
        }
        case Kind::Graphic: {
          std::vector<int> parent(n_vertices_);
          std::iota(parent.begin(), parent.end(), 0);
          std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
          };
          for (int i = 0; i < n_; ++i)
            if ((mask >> i) & 1u) {
              int a = find(edges_[i].first), b = find(edges_[i].second);
              if (a != b) { parent[a] = b; ++r; }
            }
          break;
        }
        case Kind::Explicit: {
          if (independent_[mask]) r = popcount(mask);
          else {
            for (int i = 0; i < n_; ++i)
              if ((mask >> i) & 1u) r = std::max(r, rank_table_[mask & ~(1u << i)]);
          }
          break;
        }
        default:
          r = std::min(k_, popcount(mask));
      }
      rank_table_[mask] = r;
    }
  }

  Kind kind_ = Kind::KUnit;
  int n_ = 0;
  int k_ = 1;
  int n_vertices_ = 0;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> caps_;
  std::vector<int> block_of_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<char> independent_;
  std::vector<int> rank_table_;
};

struct EarResult {
  double value = 0;
  std::vector<double> profile;
  double error_bound = 0;  // additive, from the greedy increment
};

// Maximize sum_i hull_i(q_i) over the ex ante feasible polytope.
// k-unit: exact fractional greedy over hull segments sorted by slope
// (water-filling). Matroid: delta-increment greedy on the polymatroid;
// optimal up to n*delta*L additively.
inline EarResult ear_optimize(const std::vector<ConcaveCurve>& hulls, const Environment& env,
                              double delta = 1.0 / 200) {
  int n = env.n();
  if ((int)hulls.size() != n) throw ParameterError("ear_optimize: hull count mismatch");
  EarResult res;
  res.profile.assign(n, 0.0);

  if (env.is_kunit_like()) {
    struct Seg {
      double slope, width;
      int agent;
      int order;
    };
    std::vector<Seg> segs;
    for (int i = 0; i < n; ++i) {
      const auto& h = hulls[i];
      for (std::size_t s = 1; s < h.qs.size(); ++s) {
        double sl = (h.vals[s] - h.vals[s - 1]) / (h.qs[s] - h.qs[s - 1]);
        if (sl <= 0) break;  // concave: slopes only decrease
        segs.push_back({sl, h.qs[s] - h.qs[s - 1], i, (int)s});
      }
    }
    std::sort(segs.begin(), segs.end(), [](const Seg& a, const Seg& b) {
      if (a.slope != b.slope) return a.slope > b.slope;
      if (a.agent != b.agent) return a.agent < b.agent;
      return a.order < b.order;
    });
    double capacity = env.units();
    for (const auto& s : segs) {
      if (capacity <= 1e-15) break;
      double take = std::min(s.width, capacity);
      res.profile[s.agent] += take;
      res.value += take * s.slope;
      capacity -= take;
    }
    for (int i = 0; i < n; ++i) res.profile[i] = std::min(1.0, res.profile[i]);
    res.error_bound = 0;
    return res;
  }

  // matroid: delta-greedy
  int steps = (int)std::llround(1.0 / delta);
  double maxslope = 0;
  for (const auto& h : hulls) maxslope = std::max(maxslope, h.slope_at(0.0));
  for (int it = 0; it < n * steps; ++it) {
    int best = -1;
    double best_gain = 1e-12;
    for (int i = 0; i < n; ++i) {
      if (res.profile[i] + delta > 1 + 1e-12) continue;
      double gain = hulls[i].value_at(res.profile[i] + delta) - hulls[i].value_at(res.profile[i]);
      if (gain <= best_gain) continue;
      auto trial = res.profile;
      trial[i] += delta;
      if (!env.eaf_contains(trial).ok) continue;
      best = i;
      best_gain = gain;
    }
    if (best < 0) break;
    res.profile[best] += delta;
    res.value += best_gain;
  }
  res.error_bound = n * delta * maxslope;
  return res;
}

struct WeightedSet {
  std::vector<int> members;
  double prob;
};

// Explicit distribution over feasible sets with the given marginals.
// k-unit: systematic sampling on a circle; partition matroid: per-block
// systematic sampling crossed across blocks.
inline std::vector<WeightedSet> ear_decomposition(const Environment& env,
                                                  const std::vector<double>& profile) {
  auto feas = env.eaf_contains(profile);
  if (!feas.ok) throw ParameterError("ear_decomposition: profile not ex ante feasible");

  auto systematic = [](const std::vector<int>& agents, const std::vector<double>& q)
      -> std::vector<WeightedSet> {
    // place intervals [s_i, s_i + q_i) consecutively; t ~ U[0,1); member i is
    // hit when (t - s_i) mod 1 < q_i
    int m = (int)agents.size();
    std::vector<double> start(m);
    double s = 0;
    for (int i = 0; i < m; ++i) {
      start[i] = s;
      s += q[i];
    }
    std::vector<double> cuts{0.0, 1.0};
    for (int i = 0; i < m; ++i) {
      double a = start[i] - std::floor(start[i]);
      double b = start[i] + q[i];
      b -= std::floor(b);
      cuts.push_back(a);
      cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());
    std::vector<WeightedSet> out;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      double t = 0.5 * (cuts[c] + cuts[c + 1]);
      double len = cuts[c + 1] - cuts[c];
      if (len < 1e-12) continue;
      WeightedSet ws;
      ws.prob = len;
      for (int i = 0; i < m; ++i) {
        double rel = t - start[i];
        rel -= std::floor(rel);
        if (rel < q[i] - 1e-12 || q[i] >= 1 - 1e-12) ws.members.push_back(agents[i]);
      }
      out.push_back(std::move(ws));
    }
    return out;
  };

  if (env.is_kunit_like()) {
    std::vector<int> agents(env.n());
    std::iota(agents.begin(), agents.end(), 0);
    return systematic(agents, profile);
  }
  if (env.kind() == Environment::Kind::Partition) {
    // cross product of independent per-block decompositions
    std::vector<WeightedSet> acc{{{}, 1.0}};
    for (const auto& blk : env.blocks()) {
      std::vector<double> qb;
      for (int i : blk) qb.push_back(profile[i]);
      auto part = systematic(blk, qb);
      std::vector<WeightedSet> next;
      for (const auto& a : acc)
        for (const auto& p : part) {
          WeightedSet ws;
          ws.members = a.members;
          ws.members.insert(ws.members.end(), p.members.begin(), p.members.end());
          ws.prob = a.prob * p.prob;
          if (ws.prob > 1e-15) next.push_back(std::move(ws));
        }
      acc = std::move(next);
    }
    for (auto& ws : acc) std::sort(ws.members.begin(), ws.members.end());
    return acc;
  }
  throw UnsupportedError("ear_decomposition: only k-unit and partition matroids");
}

}  // namespace pricing
