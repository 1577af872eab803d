#pragma once

// States, factors and proposals. A Factor is one multiplicative term of the
// acceptance ratio, always handled in log scale. Factors come in two forms:
//   - potential form: log rho(x,y) = g(y) - g(x) for a single-point
//     potential g; balance holds by construction and g(x) can be cached.
//   - pair form: log rho evaluated directly from (x,y) (proposal
//     corrections, clipped residuals).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "damh/rng.hpp"

namespace damh {

using StateVector = std::vector<double>;

enum class FactorKind {
  LikelihoodBlock,
  PriorRatio,
  ProposalCorrection,
  Surrogate,
  Residual,
};

/// Raised when a factor evaluation produces NaN or +inf, or when a model
/// callback fails. A value of -inf is *not* an error: it encodes a
/// zero-density proposal and rejects deterministically at that stage.
struct EvalError : std::runtime_error {
  int factor_id;
  EvalError(int id, const std::string& what)
      : std::runtime_error(what), factor_id(id) {}
};

struct Factor {
  int id = 0;
  FactorKind kind = FactorKind::LikelihoodBlock;
  double cost_weight = 1.0;
  int n_subfactors = 1;  // >1 after merging factors into a stage

  std::function<double(const StateVector&)> log_term;  // potential form
  std::function<double(const StateVector&, const StateVector&)> log_ratio;

  bool has_term() const { return static_cast<bool>(log_term); }

  double term(const StateVector& x) const { return log_term(x); }

  double eval(const StateVector& x, const StateVector& y) const {
    double v = log_ratio ? log_ratio(x, y) : log_term(y) - log_term(x);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw EvalError(id, "non-finite factor log-ratio");
    return v;
  }
};

inline double factor_log_eval(const Factor& f, const StateVector& x,
                              const StateVector& y) {
  return f.eval(x, y);
}

/// Sum of all factor logs, i.e. log r(x,y).
inline double total_log_ratio(const std::vector<Factor>& factors,
                              const StateVector& x, const StateVector& y) {
  double s = 0.0;
  for (const auto& f : factors) s += f.eval(x, y);
  return s;
}

enum class ProposalFamily { RandomWalk, Mala };

struct ProposalSpec {
  ProposalFamily family = ProposalFamily::RandomWalk;
  double ell = 1.0;
  int dim = 1;

  double rw_sd() const { return ell / std::sqrt(static_cast<double>(dim)); }
  // variance scaling eps^2 = ell^2 / d^{1/3}
  double mala_eps() const {
    return ell / std::pow(static_cast<double>(dim), 1.0 / 6.0);
  }
};

using GradFn = std::function<StateVector(const StateVector&)>;

inline StateVector rw_propose(const StateVector& x, const ProposalSpec& spec,
                              RngStream& rng) {
  StateVector y(x.size());
  double sd = spec.rw_sd();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + sd * rng.normal();
  return y;
}

/// log q(y,x) - log q(x,y) for the Euler-discretised Langevin kernel.
inline double mala_log_q_ratio(const StateVector& x, const StateVector& y,
                               double eps, const GradFn& grad) {
  StateVector gx = grad(x), gy = grad(y);
  double fwd = 0.0, bwd = 0.0;  // squared residuals
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(gx[i]) || !std::isfinite(gy[i]))
      throw EvalError(-1, "non-finite gradient");
    double rf = y[i] - x[i] - 0.5 * eps * eps * gx[i];
    double rb = x[i] - y[i] - 0.5 * eps * eps * gy[i];
    fwd += rf * rf;
    bwd += rb * rb;
  }
  return (fwd - bwd) / (2.0 * eps * eps);
}

/// Langevin proposal; returns (y, log q(y,x) - log q(x,y)).
inline std::pair<StateVector, double> mala_propose(const StateVector& x,
                                                   const ProposalSpec& spec,
                                                   const GradFn& grad,
                                                   RngStream& rng) {
  double eps = spec.mala_eps();
  StateVector gx = grad(x);
  StateVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(gx[i])) throw EvalError(-1, "non-finite gradient");
    y[i] = x[i] + 0.5 * eps * eps * gx[i] + eps * rng.normal();
  }
  double lqr = mala_log_q_ratio(x, y, eps, grad);
  return {std::move(y), lqr};
}

/// A factorized target plus everything a kernel needs to drive it.
struct Model {
  std::string name;
  int dim = 1;
  std::vector<Factor> factors;

  std::function<double(const StateVector&)> log_target;  // unnormalised
  GradFn grad_log_target;

  StateVector init;
  std::vector<double> exact_mean;  // empty when no closed form exists
  std::vector<double> exact_var;
  double ref_scale = 1.0;  // rough posterior sd, used by tuning grids
  std::uint64_t data_checksum = 0;

  double total_cost() const {
    double s = 0.0;
    for (const auto& f : factors) s += f.cost_weight;
    return s;
  }
};

}  // namespace damh
