#pragma once

// Small enumerable discrete targets used to brute-force kernel transition
// matrices. States are embedded as 1-d StateVectors {0.0, 1.0, ...}; the
// proposal is uniform over all states, hence symmetric.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "damh/damh.hpp"

namespace fixture {

struct Discrete {
  std::vector<double> pi;              // stationary probabilities
  std::vector<std::vector<double>> g;  // g[k][i]: factor-k potential at state i
  damh::Model model;

  int states() const { return static_cast<int>(pi.size()); }
  int factors() const { return static_cast<int>(g.size()); }

  double log_rho(int k, int i, int j) const { return g[k][j] - g[k][i]; }

  double log_r(int i, int j) const {
    double s = 0.0;
    for (int k = 0; k < factors(); ++k) s += log_rho(k, i, j);
    return s;
  }
};

/// Split log pi into `n_factors` potentials; the first n-1 are arbitrary
/// (seeded) and the last absorbs the remainder, so the product telescopes
/// to the target ratio exactly.
inline Discrete make_discrete(std::vector<double> pi, int n_factors,
                              std::uint64_t seed) {
  Discrete fx;
  fx.pi = std::move(pi);
  const int m = fx.states();
  damh::RngStream rng(seed, 0);
  fx.g.assign(n_factors, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    double rest = std::log(fx.pi[i]);
    for (int k = 0; k < n_factors - 1; ++k) {
      fx.g[k][i] = 2.0 * rng.normal();
      rest -= fx.g[k][i];
    }
    fx.g[n_factors - 1][i] = rest;
  }

  fx.model.name = "discrete";
  fx.model.dim = 1;
  for (int k = 0; k < n_factors; ++k) {
    damh::Factor f;
    f.id = k;
    f.cost_weight = 1.0;
    auto table = fx.g[k];
    f.log_term = [table](const damh::StateVector& x) {
      return table[static_cast<int>(x[0])];
    };
    fx.model.factors.push_back(std::move(f));
  }
  fx.model.init = {0.0};
  return fx;
}

inline damh::KernelConfig make_config(const Discrete& fx,
                                      damh::Variant variant) {
  damh::KernelConfig kc;
  kc.variant = variant;
  const int m = fx.states();
  kc.custom_proposal = [m](const damh::StateVector&, damh::RngStream& rng) {
    return damh::StateVector{static_cast<double>(rng.uniform_int(m))};
  };
  return kc;
}

inline double clamp01(double v) { return std::min(1.0, v); }

inline double alpha_mh(const Discrete& fx, int i, int j) {
  return clamp01(std::exp(fx.log_r(i, j)));
}

/// DA acceptance in a fixed ordering; with clip_c < 1 the first d-1 stages
/// are clamped and the last becomes the residual.
inline double alpha_da(const Discrete& fx, int i, int j,
                       const std::vector<int>& order, double clip_c = 1.0) {
  const int d = fx.factors();
  double acc = 1.0, raw_sum = 0.0, clipped_sum = 0.0;
  const double log_b = clip_c < 1.0 ? std::log(clip_c) / (d - 1) : 0.0;
  for (int s = 0; s < d; ++s) {
    double raw = fx.log_rho(order[s], i, j);
    double stage = raw;
    if (clip_c < 1.0) {
      raw_sum += raw;
      if (s < d - 1) {
        stage = std::clamp(raw, log_b, -log_b);
        clipped_sum += stage;
      } else {
        stage = raw_sum - clipped_sum;
      }
    }
    acc *= clamp01(std::exp(stage));
  }
  return acc;
}

/// min-partial acceptance for one permutation: min over prefixes of
/// 1 ^ prod rho.
inline double alpha_min_partial_perm(const Discrete& fx, int i, int j,
                                     const std::vector<int>& order) {
  double run = 0.0, acc = 1.0;
  for (int k : order) {
    run += fx.log_rho(k, i, j);
    acc = std::min(acc, clamp01(std::exp(run)));
  }
  return acc;
}

inline void for_each_permutation(std::vector<int> idx,
                                 const std::function<void(const std::vector<int>&)>& fn) {
  std::sort(idx.begin(), idx.end());
  do {
    fn(idx);
  } while (std::next_permutation(idx.begin(), idx.end()));
}

/// Ordering-averaged min-partial acceptance.
inline double alpha_min_partial(const Discrete& fx, int i, int j) {
  std::vector<int> idx(fx.factors());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  long count = 0;
  for_each_permutation(idx, [&](const std::vector<int>& order) {
    total += alpha_min_partial_perm(fx, i, j, order);
    ++count;
  });
  return total / static_cast<double>(count);
}

/// Grouped acceptance: product over groups of the ordering-averaged
/// min-partial term within each group (uniforms are independent across
/// groups).
inline double alpha_grouped(const Discrete& fx, int i, int j,
                            const std::vector<std::vector<int>>& groups) {
  double acc = 1.0;
  for (const auto& group : groups) {
    double total = 0.0;
    long count = 0;
    for_each_permutation(group, [&](const std::vector<int>& order) {
      total += alpha_min_partial_perm(fx, i, j, order);
      ++count;
    });
    acc *= total / static_cast<double>(count);
  }
  return acc;
}

/// Full transition matrix from a pointwise acceptance function.
template <typename AlphaFn>
std::vector<std::vector<double>> transition_matrix(const Discrete& fx,
                                                   AlphaFn&& alpha) {
  const int m = fx.states();
  std::vector<std::vector<double>> P(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      P[i][j] = alpha(i, j) / m;
      off += P[i][j];
    }
    P[i][i] = 1.0 - off;
  }
  return P;
}

inline double max_detailed_balance_violation(
    const Discrete& fx, const std::vector<std::vector<double>>& P) {
  double worst = 0.0;
  for (int i = 0; i < fx.states(); ++i)
    for (int j = 0; j < fx.states(); ++j)
      worst = std::max(worst,
                       std::abs(fx.pi[i] * P[i][j] - fx.pi[j] * P[j][i]));
  return worst;
}

}  // namespace fixture
