#pragma once

// Metropolis-Hastings and Delayed Acceptance kernels with per-factor
// evaluation accounting. Every stage of a DA step draws a fresh uniform;
// early exit at the first failing stage is mandatory.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "damh/core.hpp"

namespace damh {

enum class Variant { MH, DA, DAClipped, DAMinPartial, DAGrouped };

// Proposal hook: returns the proposed point. For MALA models the proposal
// correction enters the ratio as one of the model's factors, so the kernel
// never needs the q-ratio here.
using ProposalFn = std::function<StateVector(const StateVector&, RngStream&)>;

struct KernelConfig {
  Variant variant = Variant::DA;
  std::vector<int> ordering;                // empty = identity
  double clip_c = 1.0;                      // da-clipped only
  std::vector<std::vector<int>> groups;     // da-grouped only
  std::shared_ptr<ProposalSpec> proposal;   // shared with MALA models
  ProposalFn custom_proposal;               // overrides family when set

  std::vector<int> effective_ordering(int d) const {
    if (!ordering.empty()) return ordering;
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
};

struct ChainState {
  StateVector x;
  std::vector<double> cached_terms;  // log_term(x) per factor id, NaN if pair-form
  std::uint64_t iteration = 0;
  RngStream rng;

  ChainState(StateVector x0, RngStream r) : x(std::move(x0)), rng(r) {}

  void refresh_cache(const std::vector<Factor>& factors) {
    cached_terms.assign(factors.size(),
                        std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < factors.size(); ++k)
      if (factors[k].has_term()) cached_terms[k] = factors[k].term(x);
  }
};

struct StepOutcome {
  bool accepted = false;
  int rejection_stage = -1;  // 0-based stage index, -1 when accepted
  long factor_evals = 0;     // underlying factor evaluations this step
  double cost_units = 0.0;
  StateVector proposal;
};

namespace detail {

inline StateVector draw_proposal(ChainState& state, const Model& model,
                                 const KernelConfig& cfg) {
  if (cfg.custom_proposal) return cfg.custom_proposal(state.x, state.rng);
  const ProposalSpec& spec = *cfg.proposal;
  if (spec.family == ProposalFamily::Mala)
    return mala_propose(state.x, spec, model.grad_log_target, state.rng).first;
  return rw_propose(state.x, spec, state.rng);
}

// Evaluate factor k at (x, y) using the cached potential at x if available.
// `new_terms[k]` receives the potential at y for later cache commit.
inline double eval_cached(const Factor& f, const ChainState& state,
                          const StateVector& y, std::size_t k,
                          std::vector<double>& new_terms) {
  if (f.has_term() && !std::isnan(state.cached_terms[k])) {
    double ty = f.term(y);
    double v = ty - state.cached_terms[k];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw EvalError(f.id, "non-finite factor log-ratio");
    new_terms[k] = ty;
    return v;
  }
  return f.eval(state.x, y);
}

inline void commit(ChainState& state, StateVector&& y,
                   const std::vector<double>& new_terms) {
  state.x = std::move(y);
  for (std::size_t k = 0; k < new_terms.size(); ++k)
    if (!std::isnan(new_terms[k])) state.cached_terms[k] = new_terms[k];
}

inline bool log_uniform_accepts(RngStream& rng, double log_rho) {
  if (log_rho >= 0.0) {
    rng.uniform();  // keep the draw count deterministic per stage
    return true;
  }
  return std::log(rng.uniform()) < log_rho;
}

}  // namespace detail

inline StepOutcome mh_step(ChainState& state, const Model& model,
                           const KernelConfig& cfg) {
  StepOutcome out;
  out.proposal = detail::draw_proposal(state, model, cfg);
  const auto& factors = model.factors;
  std::vector<double> new_terms(factors.size(),
                                std::numeric_limits<double>::quiet_NaN());
  double log_r = 0.0;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    log_r += detail::eval_cached(factors[k], state, out.proposal, k, new_terms);
    out.factor_evals += factors[k].n_subfactors;
    out.cost_units += factors[k].cost_weight;
  }
  if (detail::log_uniform_accepts(state.rng, log_r)) {
    out.accepted = true;
    detail::commit(state, std::move(out.proposal), new_terms);
    out.proposal = state.x;
  }
  state.iteration++;
  return out;
}

/// Sequential per-factor tests in the configured ordering (Algorithm 1).
/// With variant da-clipped the first d-1 stages are clamped into
/// [log b, -log b] with b = clip_c^{1/(d-1)} and the final stage is the
/// residual log r - sum of clipped logs, so the product is preserved
/// exactly in log scale.
inline StepOutcome da_step(ChainState& state, const Model& model,
                           const KernelConfig& cfg) {
  const auto& factors = model.factors;
  const int d = static_cast<int>(factors.size());
  const bool clipped = cfg.variant == Variant::DAClipped;
  if (clipped && d < 2)
    throw std::invalid_argument("da-clipped requires at least 2 factors");
  const double log_b = clipped ? std::log(cfg.clip_c) / (d - 1) : 0.0;

  StepOutcome out;
  out.proposal = detail::draw_proposal(state, model, cfg);
  std::vector<double> new_terms(factors.size(),
                                std::numeric_limits<double>::quiet_NaN());
  std::vector<int> order = cfg.effective_ordering(d);

  double raw_sum = 0.0, clipped_sum = 0.0;
  for (int s = 0; s < d; ++s) {
    const Factor& f = factors[order[s]];
    double raw = detail::eval_cached(f, state, out.proposal, order[s], new_terms);
    out.factor_evals += f.n_subfactors;
    out.cost_units += f.cost_weight;
    double stage_log = raw;
    if (clipped) {
      raw_sum += raw;
      if (s < d - 1) {
        stage_log = std::clamp(raw, log_b, -log_b);
        clipped_sum += stage_log;
      } else {
        stage_log = raw_sum - clipped_sum;
      }
    }
    if (!detail::log_uniform_accepts(state.rng, stage_log)) {
      out.rejection_stage = s;
      state.iteration++;
      return out;
    }
  }
  out.accepted = true;
  detail::commit(state, std::move(out.proposal), new_terms);
  out.proposal = state.x;
  state.iteration++;
  return out;
}

/// One uniform against running partial products over a fresh uniformly
/// random permutation; realizes acceptance min_k (1 ^ prod_{i<=k} rho_i)
/// with early exit.
inline StepOutcome da_min_partial_step(ChainState& state, const Model& model,
                                       const KernelConfig& cfg) {
  const auto& factors = model.factors;
  const int d = static_cast<int>(factors.size());

  StepOutcome out;
  out.proposal = detail::draw_proposal(state, model, cfg);
  std::vector<double> new_terms(factors.size(),
                                std::numeric_limits<double>::quiet_NaN());
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  for (int i = d - 1; i > 0; --i)
    std::swap(order[i], order[state.rng.uniform_int(i + 1)]);

  double log_u = std::log(state.rng.uniform());
  double run = 0.0;
  for (int s = 0; s < d; ++s) {
    const Factor& f = factors[order[s]];
    run += detail::eval_cached(f, state, out.proposal, order[s], new_terms);
    out.factor_evals += f.n_subfactors;
    out.cost_units += f.cost_weight;
    if (!(run >= log_u)) {
      out.rejection_stage = s;
      state.iteration++;
      return out;
    }
  }
  out.accepted = true;
  detail::commit(state, std::move(out.proposal), new_terms);
  out.proposal = state.x;
  state.iteration++;
  return out;
}

/// Groups visited in configured order; a fresh uniform and a fresh
/// within-group permutation drive a min-partial test per group.
inline StepOutcome da_grouped_step(ChainState& state, const Model& model,
                                   const KernelConfig& cfg) {
  const auto& factors = model.factors;
  if (cfg.groups.empty())
    throw std::invalid_argument("da-grouped requires configured groups");

  StepOutcome out;
  out.proposal = detail::draw_proposal(state, model, cfg);
  std::vector<double> new_terms(factors.size(),
                                std::numeric_limits<double>::quiet_NaN());
  int stage = 0;
  for (const auto& group : cfg.groups) {
    std::vector<int> order = group;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[state.rng.uniform_int(i + 1)]);
    double log_u = std::log(state.rng.uniform());
    double run = 0.0;
    for (int k : order) {
      const Factor& f = factors[k];
      run += detail::eval_cached(f, state, out.proposal, k, new_terms);
      out.factor_evals += f.n_subfactors;
      out.cost_units += f.cost_weight;
      if (!(run >= log_u)) {
        out.rejection_stage = stage;
        state.iteration++;
        return out;
      }
      ++stage;
    }
  }
  out.accepted = true;
  detail::commit(state, std::move(out.proposal), new_terms);
  out.proposal = state.x;
  state.iteration++;
  return out;
}

inline StepOutcome step(ChainState& state, const Model& model,
                        const KernelConfig& cfg) {
  switch (cfg.variant) {
    case Variant::MH:
      return mh_step(state, model, cfg);
    case Variant::DA:
    case Variant::DAClipped:
      return da_step(state, model, cfg);
    case Variant::DAMinPartial:
      return da_min_partial_step(state, model, cfg);
    case Variant::DAGrouped:
      return da_grouped_step(state, model, cfg);
  }
  throw std::logic_error("unknown kernel variant");
}

/// Standalone clipping transform: the first d-1 factors are clamped into
/// [b, 1/b] and the last becomes the residual r / prod of clipped, so the
/// log-sum is preserved exactly. Returned factors are pair-form (the
/// residual needs every raw factor).
inline std::vector<Factor> clip_factors(const std::vector<Factor>& factors,
                                        double clip_c) {
  const int d = static_cast<int>(factors.size());
  if (d < 2)
    throw std::invalid_argument("clip_factors: need at least 2 factors");
  if (!(clip_c > 0.0 && clip_c <= 1.0))
    throw std::invalid_argument("clip_factors: c must lie in (0,1]");
  const double log_b = std::log(clip_c) / (d - 1);

  auto raw = std::make_shared<std::vector<Factor>>(factors);
  std::vector<Factor> out;
  out.reserve(d);
  for (int k = 0; k < d - 1; ++k) {
    Factor f = factors[k];
    f.log_term = nullptr;
    f.log_ratio = [raw, k, log_b](const StateVector& x, const StateVector& y) {
      return std::clamp((*raw)[k].eval(x, y), log_b, -log_b);
    };
    out.push_back(std::move(f));
  }
  Factor res = factors[d - 1];
  res.kind = FactorKind::Residual;
  res.log_term = nullptr;
  res.log_ratio = [raw, d, log_b](const StateVector& x, const StateVector& y) {
    double total = 0.0, clipped = 0.0;
    for (int k = 0; k < d; ++k) {
      double v = (*raw)[k].eval(x, y);
      total += v;
      if (k < d - 1) clipped += std::clamp(v, log_b, -log_b);
    }
    return total - clipped;
  };
  out.push_back(std::move(res));
  return out;
}

}  // namespace damh
