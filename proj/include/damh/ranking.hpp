#pragma once

// Adaptation-phase statistics, factor ordering, and forward selection of a
// surrogate block, followed by a hard freeze (finite adaptation).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "damh/core.hpp"

namespace damh {

enum class RankCriterion { SuccessRateAsc, VarianceDesc, CorrelationDesc };

struct FactorStats {
  struct PerFactor {
    long tests = 0;
    long passes = 0;
    long excluded = 0;
    long n = 0;           // jointly finite (log rho, log r) observations
    double mean = 0.0;    // streaming mean of log rho
    double m2 = 0.0;      // sum of squared deviations of log rho
    double r_mean = 0.0;  // streaming mean of log r over this factor's obs
    double r_m2 = 0.0;
    double cmom = 0.0;    // co-moment of log rho with log r
    double cost_weight = 1.0;

    double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
    double success_rate() const {
      return tests > 0 ? static_cast<double>(passes) / tests : 0.0;
    }
  };

  std::vector<PerFactor> per;
  long n_obs = 0;
  long r_n = 0;  // finite log r observations
  double r_mean = 0.0;
  double r_m2 = 0.0;

  // Stored adaptation window (memory O(adapt_iters * d)); NaN marks an
  // excluded observation.
  bool store_window = true;
  std::vector<std::vector<double>> window;  // one row of factor logs per obs
  std::vector<double> window_r;

  explicit FactorStats(const std::vector<Factor>& factors) {
    per.resize(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k)
      per[k].cost_weight = factors[k].cost_weight;
  }

  double correlation(std::size_t k) const {
    const auto& f = per[k];
    double denom = std::sqrt(f.m2 * f.r_m2);
    if (denom <= 0.0) return 0.0;
    return std::clamp(f.cmom / denom, -1.0, 1.0);
  }
};

struct AdaptationSchedule {
  long adapt_iters = 0;
  bool frozen = false;
};

/// Streaming update from one adaptation-phase proposal where every factor
/// was evaluated. `stage_passed` (optional, may be empty) carries the
/// per-stage uniform-test outcomes for the success-rate criterion.
inline void record_iteration(FactorStats& stats,
                             const std::vector<double>& factor_logs,
                             double total_log_r,
                             const std::vector<bool>& stage_passed = {}) {
  if (factor_logs.size() != stats.per.size())
    throw std::invalid_argument("record_iteration: size mismatch");
  stats.n_obs++;
  const bool r_ok = std::isfinite(total_log_r);

  for (std::size_t k = 0; k < stats.per.size(); ++k) {
    auto& f = stats.per[k];
    f.tests++;
    if (k < stage_passed.size() && stage_passed[k]) f.passes++;
    double v = factor_logs[k];
    if (!std::isfinite(v) || !r_ok) {
      f.excluded++;
      continue;
    }
    f.n++;
    double d1 = v - f.mean;
    f.mean += d1 / f.n;
    f.m2 += d1 * (v - f.mean);
    double dr = total_log_r - f.r_mean;
    f.r_mean += dr / f.n;
    f.r_m2 += dr * (total_log_r - f.r_mean);
    f.cmom += d1 * (total_log_r - f.r_mean);
  }

  if (r_ok) {
    stats.r_n++;
    double dr = total_log_r - stats.r_mean;
    stats.r_mean += dr / stats.r_n;
    stats.r_m2 += dr * (total_log_r - stats.r_mean);
  }

  if (stats.store_window) {
    stats.window.push_back(factor_logs);
    stats.window_r.push_back(total_log_r);
  }
}

inline std::vector<int> rank_factors(const FactorStats& stats,
                                     RankCriterion criterion) {
  const std::size_t d = stats.per.size();
  for (const auto& f : stats.per)
    if (f.tests < 2)
      throw std::invalid_argument(
          "rank_factors: every factor needs >= 2 observations");

  std::vector<double> key(d);
  for (std::size_t k = 0; k < d; ++k) {
    switch (criterion) {
      case RankCriterion::SuccessRateAsc:
        key[k] = stats.per[k].success_rate();
        break;
      case RankCriterion::VarianceDesc:
        key[k] = -stats.per[k].variance();
        break;
      case RankCriterion::CorrelationDesc:
        key[k] = -stats.correlation(k);
        break;
    }
  }
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (key[a] != key[b]) return key[a] < key[b];
    if (stats.per[a].cost_weight != stats.per[b].cost_weight)
      return stats.per[a].cost_weight < stats.per[b].cost_weight;
    return a < b;
  });
  return order;
}

struct SelectionResult {
  std::vector<int> ids;
  double achieved_corr = 0.0;
};

namespace detail {

// Pearson correlation of (block log-sum) with log r over the stored window,
// skipping rows where any involved value is non-finite.
inline double pooled_corr(const FactorStats& stats,
                          const std::vector<double>& block_sum) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  long n = 0;
  for (std::size_t t = 0; t < stats.window_r.size(); ++t) {
    double x = block_sum[t], y = stats.window_r[t];
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    ++n;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  if (n < 2) return 0.0;
  double vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  double c = sxy - sx * sy / n;
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return std::clamp(c / std::sqrt(vx * vy), -1.0, 1.0);
}

}  // namespace detail

/// Greedy forward selection of the surrogate block maximizing the pooled
/// log-sum's correlation with log r over the adaptation window.
inline SelectionResult forward_select_surrogate(const FactorStats& stats,
                                                double target_corr,
                                                double max_fraction,
                                                double eps = 0.01) {
  if (stats.window_r.empty())
    throw std::invalid_argument("forward_select_surrogate: empty window");
  if (!(target_corr > 0.0 && target_corr <= 1.0) ||
      !(max_fraction > 0.0 && max_fraction <= 1.0))
    throw std::invalid_argument("forward_select_surrogate: bad bounds");

  const std::size_t d = stats.per.size();
  const std::size_t n = stats.window_r.size();
  const std::size_t max_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(max_fraction * static_cast<double>(d)));

  std::vector<double> block(n, 0.0);
  std::vector<char> in_block(d, 0);
  SelectionResult res;
  res.achieved_corr = -2.0;

  std::vector<double> cand(n);
  while (res.ids.size() < max_size) {
    int best = -1;
    double best_corr = -2.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (in_block[j]) continue;
      for (std::size_t t = 0; t < n; ++t)
        cand[t] = block[t] + stats.window[t][j];
      double c = detail::pooled_corr(stats, cand);
      if (c > best_corr) {
        best_corr = c;
        best = static_cast<int>(j);
      }
    }
    if (best < 0) break;
    if (!res.ids.empty() && best_corr - res.achieved_corr < eps) break;
    res.ids.push_back(best);
    in_block[best] = 1;
    for (std::size_t t = 0; t < n; ++t) block[t] += stats.window[t][best];
    res.achieved_corr = best_corr;
    if (res.achieved_corr >= target_corr) break;
  }
  return res;
}

struct RankingOptions {
  RankCriterion criterion = RankCriterion::CorrelationDesc;
  bool select_surrogate = true;
  bool merge_stages = true;
  double target_corr = 0.85;
  double max_fraction = 0.10;
  double eps = 0.01;
};

/// Result of freezing the adaptation phase: a fixed factor sequence (two
/// merged stages when a surrogate was selected) plus bookkeeping.
struct FrozenKernel {
  std::vector<Factor> factors;
  std::vector<int> ordering;  // identity when factors were merged
  std::vector<int> surrogate_ids;
  double achieved_corr = 0.0;
  double delta_hat = 1.0;
};

namespace detail {

inline Factor merge_factors(const std::vector<Factor>& factors,
                            const std::vector<int>& ids, int new_id,
                            FactorKind kind) {
  Factor m;
  m.id = new_id;
  m.kind = kind;
  m.cost_weight = 0.0;
  m.n_subfactors = 0;
  bool all_terms = true;
  for (int k : ids) {
    m.cost_weight += factors[k].cost_weight;
    m.n_subfactors += factors[k].n_subfactors;
    all_terms = all_terms && factors[k].has_term();
  }
  auto members = std::make_shared<std::vector<Factor>>();
  for (int k : ids) members->push_back(factors[k]);
  if (all_terms) {
    m.log_term = [members](const StateVector& x) {
      double s = 0.0;
      for (const auto& f : *members) s += f.term(x);
      return s;
    };
  } else {
    m.log_ratio = [members](const StateVector& x, const StateVector& y) {
      double s = 0.0;
      for (const auto& f : *members) s += f.eval(x, y);
      return s;
    };
  }
  return m;
}

}  // namespace detail

/// Freeze the kernel: rank factors, optionally forward-select a surrogate
/// block and pool it into stage 1 (the rest into stage 2). With
/// adapt_iters = 0 the configured factorisation passes through untouched.
inline FrozenKernel freeze(const AdaptationSchedule& schedule,
                           const FactorStats& stats,
                           const std::vector<Factor>& factors,
                           const RankingOptions& opts) {
  FrozenKernel out;
  out.factors = factors;
  const int d = static_cast<int>(factors.size());
  out.ordering.resize(d);
  std::iota(out.ordering.begin(), out.ordering.end(), 0);

  double total_cost = 0.0;
  for (const auto& f : factors) total_cost += f.cost_weight;

  if (schedule.adapt_iters == 0 || stats.n_obs == 0) {
    out.delta_hat = 1.0;
    return out;
  }

  std::vector<int> ranked = rank_factors(stats, opts.criterion);
  if (!opts.select_surrogate || d < 2) {
    out.ordering = ranked;
    out.delta_hat =
        total_cost > 0.0 ? factors[ranked[0]].cost_weight / total_cost : 1.0;
    return out;
  }

  SelectionResult sel =
      forward_select_surrogate(stats, opts.target_corr, opts.max_fraction,
                               opts.eps);
  // Keep the surrogate members in configured ranking order.
  std::vector<char> in_sur(d, 0);
  for (int k : sel.ids) in_sur[k] = 1;
  std::vector<int> sur, rest;
  for (int k : ranked)
    (in_sur[k] ? sur : rest).push_back(k);

  out.surrogate_ids = sur;
  out.achieved_corr = sel.achieved_corr;
  double sur_cost = 0.0;
  for (int k : sur) sur_cost += factors[k].cost_weight;
  out.delta_hat = total_cost > 0.0 ? sur_cost / total_cost : 1.0;

  if (opts.merge_stages && !rest.empty() && !sur.empty()) {
    out.factors.clear();
    out.factors.push_back(
        detail::merge_factors(factors, sur, 0, FactorKind::Surrogate));
    out.factors.push_back(
        detail::merge_factors(factors, rest, 1, FactorKind::Residual));
    out.ordering = {0, 1};
  } else {
    std::vector<int> final_order = sur;
    final_order.insert(final_order.end(), rest.begin(), rest.end());
    out.ordering = final_order;
  }
  return out;
}

}  // namespace damh
