#pragma once

// Cost-aware efficiency functions, the optimal-acceptance solver, relative
// cost estimation, and Robbins-Monro scale adaptation.

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "damh/core.hpp"
#include "damh/normal.hpp"

namespace damh {

enum class EffFamily { RwmAdditive, RwmReuse, MalaReuse };

inline const char* family_name(EffFamily f) {
  switch (f) {
    case EffFamily::RwmAdditive: return "rwm-additive";
    case EffFamily::RwmReuse: return "rwm-reuse";
    case EffFamily::MalaReuse: return "mala-reuse";
  }
  return "?";
}

/// Random-walk efficiency kernel Phi^{-1}(a/2)^2 * a / cost(delta, a); the
/// 4/I prefactor is constant in a and dropped.
inline double eff_rwm(double delta, double a, bool reuse_cost = false) {
  if (!(a > 0.0 && a < 1.0))
    throw std::domain_error("eff_rwm: a outside (0,1)");
  if (!(delta > 0.0)) throw std::domain_error("eff_rwm: delta must be > 0");
  double q = norm_quantile(0.5 * a);
  double cost = reuse_cost ? delta + a * (1.0 - delta) : delta + a;
  return q * q * a / cost;
}

/// MALA efficiency kernel a * |Phi^{-1}(a/2)|^{2/3} / (delta + a(1-delta));
/// the (2/K)^{2/3} prefactor is dropped and the quantile enters in absolute
/// value so the efficiency is positive.
inline double eff_mala(double delta, double a) {
  if (!(a > 0.0 && a < 1.0))
    throw std::domain_error("eff_mala: a outside (0,1)");
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::domain_error("eff_mala: delta outside (0,1]");
  double q = std::fabs(norm_quantile(0.5 * a));
  return a * std::pow(q, 2.0 / 3.0) / (delta + a * (1.0 - delta));
}

inline double efficiency(EffFamily family, double delta, double a) {
  switch (family) {
    case EffFamily::RwmAdditive: return eff_rwm(delta, a, false);
    case EffFamily::RwmReuse: return eff_rwm(delta, a, true);
    case EffFamily::MalaReuse: return eff_mala(delta, a);
  }
  throw std::logic_error("unknown efficiency family");
}

struct OptimalScaling {
  double a_star = 0.0;
  double ell_shape = 0.0;  // -2 Phi^{-1}(a*/2); caller rescales by 1/sqrt(I)
};

/// Golden-section argmax of the family's efficiency over a in (0,1). A
/// coarse scan first certifies a unique interior bracket.
inline OptimalScaling optimal_acceptance(double delta, EffFamily family) {
  const double lo = 1e-4, hi = 1.0 - 1e-4;
  const int scan = 256;
  int best = -1;
  double best_v = -1.0;
  std::vector<double> vals(scan + 1);
  for (int i = 0; i <= scan; ++i) {
    double a = lo + (hi - lo) * i / scan;
    vals[i] = efficiency(family, delta, a);
    if (vals[i] > best_v) {
      best_v = vals[i];
      best = i;
    }
  }
  if (best <= 0 || best >= scan)
    throw std::runtime_error("optimal_acceptance: no interior maximum");
  // certify a single local maximum on the scan grid
  int n_local_max = 0;
  for (int i = 1; i < scan; ++i)
    if (vals[i] > vals[i - 1] && vals[i] >= vals[i + 1]) n_local_max++;
  if (n_local_max != 1)
    throw std::runtime_error("optimal_acceptance: non-unimodal efficiency");

  double a = lo + (hi - lo) * (best - 1) / scan;
  double b = lo + (hi - lo) * (best + 1) / scan;
  const double gr = 0.6180339887498949;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = efficiency(family, delta, c), fd = efficiency(family, delta, d);
  while (b - a > 1e-7) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = efficiency(family, delta, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = efficiency(family, delta, d);
    }
  }
  OptimalScaling out;
  out.a_star = 0.5 * (a + b);
  out.ell_shape = -2.0 * norm_quantile(0.5 * out.a_star);
  return out;
}

/// delta-hat = stage-1 cost share, from declared cost weights.
inline double estimate_delta(const std::vector<Factor>& factors,
                             const std::set<int>& stage1_ids) {
  double total = 0.0, stage1 = 0.0;
  for (const auto& f : factors) {
    total += f.cost_weight;
    if (stage1_ids.count(f.id)) stage1 += f.cost_weight;
  }
  if (total <= 0.0)
    throw std::invalid_argument("estimate_delta: zero total cost");
  return stage1 / total;
}

struct ScalingState {
  double ell = 1.0;
  double a_target = 0.234;
  double delta_hat = 1.0;
  long step_count = 0;
  bool frozen = false;
};

/// Stochastic-approximation update log ell += gamma_t (1{accepted} - a*),
/// gamma_t = t^{-0.6}.
inline void adapt_scale(ScalingState& state, bool accepted) {
  if (state.frozen) return;
  state.step_count++;
  double gamma = std::pow(static_cast<double>(state.step_count), -0.6);
  state.ell *= std::exp(gamma * ((accepted ? 1.0 : 0.0) - state.a_target));
}

}  // namespace damh
