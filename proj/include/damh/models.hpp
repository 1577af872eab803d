#pragma once

// Bundled factorized targets: normal-normal, Bernoulli-factored
// beta-binomial, blocked logistic regression, a conjugate Gaussian MALA toy
// model, the surrogate/target counter-example, and a 3-component Gaussian
// mixture under a Monte-Carlo Jeffreys prior. Datasets are generated from a
// data seed, never shipped.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <vector>

#include "damh/core.hpp"
#include "damh/normal.hpp"
#include "damh/rng.hpp"

namespace damh {

namespace detail {

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len,
                                 std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t checksum_doubles(const std::vector<double>& v) {
  return fnv1a_bytes(v.data(), v.size() * sizeof(double));
}

inline std::uint64_t hash_state(const StateVector& x) {
  return fnv1a_bytes(x.data(), x.size() * sizeof(double));
}

inline double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace detail

/// Normal likelihood (one observation x = 3, unit variance) with a
/// N(0, sigma_mu^2) prior, sigma_mu = 10. Exact posterior
/// N(3/1.01, 1/1.01). Two factors: likelihood ratio then prior ratio.
inline Model normal_normal_model() {
  Model m;
  m.name = "normal_normal";
  m.dim = 1;
  const double x_obs = 3.0, prior_var = 100.0;

  Factor lik;
  lik.id = 0;
  lik.kind = FactorKind::LikelihoodBlock;
  lik.cost_weight = 1.0;
  lik.log_term = [x_obs](const StateVector& s) {
    double d = x_obs - s[0];
    return -0.5 * d * d;
  };
  Factor prior;
  prior.id = 1;
  prior.kind = FactorKind::PriorRatio;
  prior.cost_weight = 1.0;
  prior.log_term = [prior_var](const StateVector& s) {
    return -0.5 * s[0] * s[0] / prior_var;
  };
  m.factors = {lik, prior};

  const double prec = 1.0 + 1.0 / prior_var;
  m.exact_mean = {x_obs / prec};
  m.exact_var = {1.0 / prec};
  m.ref_scale = std::sqrt(1.0 / prec);
  m.init = m.exact_mean;
  m.log_target = [x_obs, prior_var](const StateVector& s) {
    double d = x_obs - s[0];
    return -0.5 * d * d - 0.5 * s[0] * s[0] / prior_var;
  };
  m.grad_log_target = [x_obs, prior_var](const StateVector& s) {
    return StateVector{x_obs - s[0] - s[0] / prior_var};
  };
  return m;
}

/// Beta-binomial posterior with N = 100, x = 32, Be(7.5, 0.5) prior; the
/// binomial likelihood is split into n_parts Bernoulli blocks (trials
/// assigned round-robin, successes first) plus one prior factor. Exact
/// posterior Be(39.5, 68.5).
inline Model beta_binomial_model(int n_parts) {
  if (n_parts != 10 && n_parts != 20 && n_parts != 50 && n_parts != 100)
    throw std::invalid_argument("beta_binomial_model: n_parts in {10,20,50,100}");
  Model m;
  m.name = "beta_binomial";
  m.dim = 1;
  const int N = 100, x_succ = 32;
  const double a = 7.5, b = 0.5;

  std::vector<double> succ(n_parts, 0.0), fail(n_parts, 0.0);
  for (int i = 0; i < N; ++i)
    (i < x_succ ? succ : fail)[i % n_parts] += 1.0;

  for (int k = 0; k < n_parts; ++k) {
    Factor f;
    f.id = k;
    f.kind = FactorKind::LikelihoodBlock;
    f.cost_weight = static_cast<double>(N) / n_parts;
    double s = succ[k], q = fail[k];
    f.log_term = [s, q](const StateVector& st) {
      double p = st[0];
      if (!(p > 0.0 && p < 1.0))
        return -std::numeric_limits<double>::infinity();
      return s * std::log(p) + q * std::log1p(-p);
    };
    m.factors.push_back(std::move(f));
  }
  Factor prior;
  prior.id = n_parts;
  prior.kind = FactorKind::PriorRatio;
  prior.cost_weight = 0.0;
  prior.log_term = [a, b](const StateVector& st) {
    double p = st[0];
    if (!(p > 0.0 && p < 1.0)) return -std::numeric_limits<double>::infinity();
    return (a - 1.0) * std::log(p) + (b - 1.0) * std::log1p(-p);
  };
  m.factors.push_back(std::move(prior));

  const double post_a = x_succ + a, post_b = N + b - x_succ;
  m.exact_mean = {post_a / (post_a + post_b)};
  m.exact_var = {post_a * post_b /
                 ((post_a + post_b) * (post_a + post_b) *
                  (post_a + post_b + 1.0))};
  m.ref_scale = std::sqrt(m.exact_var[0]);
  m.init = m.exact_mean;
  m.log_target = [post_a, post_b](const StateVector& st) {
    double p = st[0];
    if (!(p > 0.0 && p < 1.0)) return -std::numeric_limits<double>::infinity();
    return (post_a - 1.0) * std::log(p) + (post_b - 1.0) * std::log1p(-p);
  };
  std::vector<double> chk = succ;
  chk.insert(chk.end(), fail.begin(), fail.end());
  m.data_checksum = detail::checksum_doubles(chk);
  return m;
}

/// Bernoulli-logit regression on generated data: X entries standard
/// normal, true coefficients drawn once, labels Bernoulli(sigmoid(X beta)).
/// Factors are likelihood blocks of `block` observations (cost = block
/// size) plus a zero-cost N(0, 100) prior factor.
inline Model logistic_model(int n = 10000, int d = 10, int block = 10,
                            std::uint64_t data_seed = 20240901) {
  Model m;
  m.name = "logistic";
  m.dim = d;

  RngStream rng(data_seed, 0);
  auto X = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n) * d);
  for (auto& v : *X) v = rng.normal();
  // Coefficients are drawn at sd 3 so the linear predictors spread far into
  // the logistic tails: most observations then have near-deterministic
  // labels (negligible Fisher information) while the minority with |eta|
  // near 0 carry most of it.  Together with the information-ordered
  // blocking below this gives the data an informative cheap subset, the
  // regime where a delayed-acceptance surrogate pays off.
  std::vector<double> beta_true(d);
  for (auto& v : beta_true) v = 3.0 * rng.normal();
  auto y = std::make_shared<std::vector<int>>(n);
  std::vector<double> eta_true(n);
  for (int i = 0; i < n; ++i) {
    double eta = 0.0;
    for (int j = 0; j < d; ++j) eta += (*X)[i * d + j] * beta_true[j];
    eta_true[i] = eta;
    (*y)[i] = rng.uniform() < detail::sigmoid(eta) ? 1 : 0;
  }

  // Order observations by ascending |linear predictor| before blocking, so
  // the leading blocks concentrate the high-Fisher-information observations
  // (|eta| near 0 means p near 1/2, the most informative regime).  This
  // gives the surrogate selection an informative cheap subset to find; under
  // an arbitrary blocking every block carries ~1/n_blocks of the information
  // and no small first stage can usefully screen proposals.
  {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(eta_true[a]) < std::abs(eta_true[b]);
    });
    std::vector<double> Xs(X->size());
    std::vector<int> ys(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) Xs[i * d + j] = (*X)[order[i] * d + j];
      ys[i] = (*y)[order[i]];
    }
    *X = std::move(Xs);
    *y = std::move(ys);
  }

  const int n_blocks = (n + block - 1) / block;
  for (int bidx = 0; bidx < n_blocks; ++bidx) {
    int lo = bidx * block, hi = std::min(n, lo + block);
    Factor f;
    f.id = bidx;
    f.kind = FactorKind::LikelihoodBlock;
    f.cost_weight = static_cast<double>(hi - lo);
    f.log_term = [X, y, lo, hi, d](const StateVector& th) {
      double s = 0.0;
      for (int i = lo; i < hi; ++i) {
        double eta = 0.0;
        const double* row = X->data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) eta += row[j] * th[j];
        s += (*y)[i] * eta - detail::softplus(eta);
      }
      return s;
    };
    m.factors.push_back(std::move(f));
  }
  Factor prior;
  prior.id = n_blocks;
  prior.kind = FactorKind::PriorRatio;
  prior.cost_weight = 0.0;
  prior.log_term = [](const StateVector& th) {
    double s = 0.0;
    for (double v : th) s += v * v;
    return -0.5 * s / 100.0;
  };
  m.factors.push_back(std::move(prior));

  m.log_target = [X, y, n, d](const StateVector& th) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double eta = 0.0;
      const double* row = X->data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) eta += row[j] * th[j];
      s += (*y)[i] * eta - detail::softplus(eta);
    }
    double pr = 0.0;
    for (double v : th) pr += v * v;
    return s - 0.5 * pr / 100.0;
  };
  m.init = beta_true;  // mode-adjacent start; data and start share the seed
  m.ref_scale = 2.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> chk = *X;
  for (int v : *y) chk.push_back(static_cast<double>(v));
  m.data_checksum = detail::checksum_doubles(chk);
  return m;
}

/// Conjugate Gaussian toy model for DA-MALA: n_obs draws from N_d(theta, I)
/// with a N_d(0, 100 I) prior. Factor 0 is the (cheap) posterior ratio,
/// factor 1 the MALA proposal-correction ratio reading the live step size
/// from the shared ProposalSpec.
inline Model gaussian_mala_model(std::shared_ptr<ProposalSpec> proposal,
                                 int n_obs = 100, int d = 10,
                                 std::uint64_t data_seed = 20240902) {
  Model m;
  m.name = "gaussian_mala";
  m.dim = d;

  RngStream rng(data_seed, 0);
  std::vector<double> theta_true(d);
  for (auto& v : theta_true) v = rng.normal();
  std::vector<double> zbar(d, 0.0);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(n_obs) * d);
  for (int i = 0; i < n_obs; ++i)
    for (int j = 0; j < d; ++j) {
      double z = theta_true[j] + rng.normal();
      data.push_back(z);
      zbar[j] += z / n_obs;
    }

  const double prior_prec = 1.0 / 100.0;
  const double post_prec = n_obs + prior_prec;
  auto zb = std::make_shared<std::vector<double>>(zbar);

  auto log_post = [zb, n_obs, post_prec, d](const StateVector& th) {
    double s = 0.0;
    for (int j = 0; j < d; ++j)
      s += -0.5 * post_prec * th[j] * th[j] +
           static_cast<double>(n_obs) * (*zb)[j] * th[j];
    return s;
  };
  GradFn grad = [zb, n_obs, post_prec, d](const StateVector& th) {
    StateVector g(d);
    for (int j = 0; j < d; ++j)
      g[j] = static_cast<double>(n_obs) * (*zb)[j] - post_prec * th[j];
    return g;
  };

  Factor post;
  post.id = 0;
  post.kind = FactorKind::LikelihoodBlock;
  post.cost_weight = 1.0;
  post.log_term = log_post;
  Factor corr;
  corr.id = 1;
  corr.kind = FactorKind::ProposalCorrection;
  corr.cost_weight = 9.0;
  corr.log_ratio = [proposal, grad](const StateVector& x,
                                    const StateVector& y) {
    return mala_log_q_ratio(x, y, proposal->mala_eps(), grad);
  };
  m.factors = {post, corr};

  m.log_target = log_post;
  m.grad_log_target = grad;
  m.exact_mean.resize(d);
  m.exact_var.assign(d, 1.0 / post_prec);
  for (int j = 0; j < d; ++j)
    m.exact_mean[j] = n_obs * zbar[j] / post_prec;
  m.init = m.exact_mean;
  m.ref_scale = std::sqrt(1.0 / post_prec);
  m.data_checksum = detail::checksum_doubles(data);
  return m;
}

/// The geometric-ergodicity counter-example: target N(0,1), surrogate
/// N(0, sigma2). Factor 0 is the surrogate ratio, factor 1 the correction.
inline Model counterexample_model(double sigma2 = 0.5) {
  Model m;
  m.name = "counterexample";
  m.dim = 1;
  Factor sur;
  sur.id = 0;
  sur.kind = FactorKind::Surrogate;
  sur.cost_weight = 1.0;
  sur.log_term = [sigma2](const StateVector& s) {
    return -0.5 * s[0] * s[0] / sigma2;
  };
  Factor rest;
  rest.id = 1;
  rest.kind = FactorKind::Residual;
  rest.cost_weight = 1.0;
  rest.log_term = [sigma2](const StateVector& s) {
    return -0.5 * s[0] * s[0] + 0.5 * s[0] * s[0] / sigma2;
  };
  m.factors = {sur, rest};
  m.log_target = [](const StateVector& s) { return -0.5 * s[0] * s[0]; };
  m.exact_mean = {0.0};
  m.exact_var = {1.0};
  m.ref_scale = 1.0;
  m.init = {0.0};
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian mixture with a Monte-Carlo Jeffreys prior.

/// Constrained mixture parameters: k weights on the simplex, k means,
/// k standard deviations.
struct MixtureParams {
  std::vector<double> w, mu, sigma;
  int k() const { return static_cast<int>(mu.size()); }
};

/// Unconstrained parametrization: (k-1) stick-breaking logits, k means,
/// k log standard deviations. Weights sum to 1 exactly by construction.
inline MixtureParams mixture_from_unconstrained(const StateVector& phi,
                                                int k) {
  MixtureParams p;
  p.w.resize(k);
  p.mu.resize(k);
  p.sigma.resize(k);
  double remaining = 1.0;
  for (int i = 0; i < k - 1; ++i) {
    double s = detail::sigmoid(phi[i]);
    p.w[i] = remaining * s;
    remaining -= p.w[i];
  }
  p.w[k - 1] = remaining;
  for (int i = 0; i < k; ++i) p.mu[i] = phi[k - 1 + i];
  for (int i = 0; i < k; ++i) p.sigma[i] = std::exp(phi[2 * k - 1 + i]);
  return p;
}

/// log |d(theta)/d(phi)| of the unconstrained map.
inline double mixture_log_jacobian(const StateVector& phi, int k) {
  double lj = 0.0;
  double remaining = 1.0;
  for (int i = 0; i < k - 1; ++i) {
    double s = detail::sigmoid(phi[i]);
    lj += std::log(remaining) + std::log(s) + std::log1p(-s);
    remaining -= remaining * s;
  }
  for (int i = 0; i < k; ++i) lj += phi[2 * k - 1 + i];  // d sigma/d log sigma
  return lj;
}

inline double mixture_logpdf(const MixtureParams& p, double y) {
  double f = 0.0;
  for (int i = 0; i < p.k(); ++i)
    f += p.w[i] * norm_pdf((y - p.mu[i]) / p.sigma[i]) / p.sigma[i];
  return std::log(f);
}

/// Score of one observation w.r.t. (w_1..w_{k-1}, mu_1..k, sigma_1..k);
/// the last weight is the dependent coordinate. Dimension 3k-1 (2 for k=1).
inline std::vector<double> mixture_score(const MixtureParams& p, double y) {
  const int k = p.k();
  std::vector<double> phi_i(k), score(3 * k - 1, 0.0);
  double f = 0.0;
  for (int i = 0; i < k; ++i) {
    phi_i[i] = norm_pdf((y - p.mu[i]) / p.sigma[i]) / p.sigma[i];
    f += p.w[i] * phi_i[i];
  }
  for (int j = 0; j < k - 1; ++j) score[j] = (phi_i[j] - phi_i[k - 1]) / f;
  for (int i = 0; i < k; ++i) {
    double z = (y - p.mu[i]) / p.sigma[i];
    score[k - 1 + i] = p.w[i] * phi_i[i] * z / (p.sigma[i] * f);
    score[2 * k - 1 + i] =
        p.w[i] * phi_i[i] * (z * z - 1.0) / (p.sigma[i] * f);
  }
  return score;
}

/// Monte-Carlo Fisher information: average score outer product over
/// `n_samples` draws from the mixture, generated from `seed` (common random
/// numbers across the two states of one acceptance test).
inline std::vector<double> mixture_mc_fisher(const MixtureParams& p,
                                             int n_samples,
                                             std::uint64_t seed) {
  const int k = p.k();
  const int dim = 3 * k - 1;
  std::vector<double> info(static_cast<std::size_t>(dim) * dim, 0.0);
  RngStream rng(seed, 1);
  for (int m = 0; m < n_samples; ++m) {
    double u = rng.uniform();
    double z = rng.normal();
    int c = 0;
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      acc += p.w[i];
      if (u < acc || i == k - 1) {
        c = i;
        break;
      }
    }
    double y = p.mu[c] + p.sigma[c] * z;
    auto s = mixture_score(p, y);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        info[i * dim + j] += s[i] * s[j] / n_samples;
  }
  return info;
}

/// 0.5 log det of a symmetric positive-definite matrix via Cholesky.
/// Throws EvalError(factor_id) when the matrix is not positive definite.
inline double half_log_det_spd(std::vector<double> a, int dim,
                               int factor_id) {
  double hld = 0.0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * dim + j];
      for (int t = 0; t < j; ++t) s -= a[i * dim + t] * a[j * dim + t];
      if (i == j) {
        if (!(s > 0.0))
          throw EvalError(factor_id,
                          "Fisher information estimate not positive definite");
        a[i * dim + i] = std::sqrt(s);
        hld += std::log(a[i * dim + i]);
      } else {
        a[i * dim + j] = s / a[j * dim + j];
      }
    }
  }
  return hld;
}

/// 3-component Gaussian mixture posterior under the Monte-Carlo Jeffreys
/// prior, in the unconstrained parametrization. Factor 0: likelihood over
/// observations floor(p n)+1..n (cheap). Factor 1: the first floor(p n)
/// observations times the Jeffreys prior ratio and the reparametrization
/// Jacobian; its Fisher estimate uses a pair-symmetric hash seed so the
/// ratio is deterministic per acceptance test and shares uniforms across
/// the pair.
inline Model mixture_jeffreys_model(int n = 500, int mc_prior_samples = 500,
                                    double p_holdout = 0.05,
                                    std::uint64_t data_seed = 20240903) {
  const int k = 3;
  Model m;
  m.name = "mixture_jeffreys";
  m.dim = 3 * k - 1;

  // generating mixture 0.10 N(-10,2) + 0.65 N(0,5) + 0.25 N(15,7)
  // (component variances 2, 5, 7)
  const double gw[3] = {0.10, 0.65, 0.25};
  const double gmu[3] = {-10.0, 0.0, 15.0};
  const double gvar[3] = {2.0, 5.0, 7.0};
  RngStream rng(data_seed, 0);
  auto data = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(), z = rng.normal();
    int c = u < gw[0] ? 0 : (u < gw[0] + gw[1] ? 1 : 2);
    (*data)[i] = gmu[c] + std::sqrt(gvar[c]) * z;
  }

  const int n_hold = static_cast<int>(std::floor(p_holdout * n));

  auto loglik_range = [data](const MixtureParams& p, int lo, int hi) {
    double s = 0.0;
    for (int i = lo; i < hi; ++i) s += mixture_logpdf(p, (*data)[i]);
    return s;
  };

  Factor main_lik;
  main_lik.id = 0;
  main_lik.kind = FactorKind::LikelihoodBlock;
  main_lik.cost_weight = 1.0;
  main_lik.log_term = [loglik_range, n_hold, n, k](const StateVector& phi) {
    return loglik_range(mixture_from_unconstrained(phi, k), n_hold, n);
  };

  Factor prior_block;
  prior_block.id = 1;
  prior_block.kind = FactorKind::PriorRatio;
  prior_block.cost_weight = 99.0;
  prior_block.log_ratio = [loglik_range, n_hold, mc_prior_samples, k](
                              const StateVector& x, const StateVector& y) {
    std::uint64_t seed = detail::hash_state(x) ^ detail::hash_state(y);
    auto eval_one = [&](const StateVector& phi) {
      MixtureParams p = mixture_from_unconstrained(phi, k);
      double hold = loglik_range(p, 0, n_hold);
      double jeffreys = half_log_det_spd(
          mixture_mc_fisher(p, mc_prior_samples, seed), 3 * k - 1, 1);
      return hold + jeffreys + mixture_log_jacobian(phi, k);
    };
    return eval_one(y) - eval_one(x);
  };
  m.factors = {main_lik, prior_block};

  // truth-adjacent start in unconstrained coordinates
  m.init = {std::log(0.10 / 0.90), std::log(0.65 / 0.25),
            -10.0,  0.0,  15.0,
            0.5 * std::log(2.0), 0.5 * std::log(5.0), 0.5 * std::log(7.0)};
  m.ref_scale = 0.1;
  m.data_checksum = detail::checksum_doubles(*data);
  return m;
}

}  // namespace damh
