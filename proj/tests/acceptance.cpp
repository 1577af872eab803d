// End-to-end acceptance checks, one line of output per criterion.
// Exit status is the number of failed criteria.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "damh/damh.hpp"
#include "discrete_fixture.hpp"

using namespace damh;
using namespace fixture;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  if (!pass) ++failures;
}

double chain_acceptance(const Model& m, Variant v, double ell, long iters,
                        std::uint64_t seed) {
  auto proposal = std::make_shared<ProposalSpec>();
  proposal->dim = m.dim;
  proposal->ell = ell;
  KernelConfig kc;
  kc.variant = v;
  kc.proposal = proposal;
  ChainState state(m.init, RngStream(seed, 0));
  state.refresh_cache(m.factors);
  long acc = 0;
  for (long t = 0; t < iters; ++t) acc += step(state, m, kc).accepted;
  return static_cast<double>(acc) / iters;
}

// Per-proposal acceptance estimate from a fixed start (state reset each
// draw), for the sticking check.
double acceptance_from_point(const Model& m, Variant v, double clip_c,
                             double x0, long draws, std::uint64_t seed) {
  Model model = m;
  if (clip_c < 1.0) model.factors = clip_factors(m.factors, clip_c);
  auto proposal = std::make_shared<ProposalSpec>();
  proposal->dim = 1;
  // A large fixed step exposes the sticking regime: from x the surrogate
  // stage rejects outward moves and the residual stage rejects inward ones,
  // leaving only the O(1/x) sliver of near-neutral proposals.
  proposal->ell = 16.0;
  KernelConfig kc;
  kc.variant = clip_c < 1.0 ? Variant::DAClipped : v;
  kc.clip_c = clip_c;
  kc.proposal = proposal;
  long acc = 0;
  ChainState state({x0}, RngStream(seed, 0));
  for (long t = 0; t < draws; ++t) {
    state.x = {x0};
    state.refresh_cache(model.factors);
    acc += step(state, model, kc).accepted;
  }
  return static_cast<double>(acc) / draws;
}

void criterion_1() {
  double worst = 0.0;
  for (auto pi : {std::vector<double>{0.2, 0.3, 0.5},
                  std::vector<double>{0.05, 0.1, 0.2, 0.25, 0.4}}) {
    for (int nf = 2; nf <= 4; ++nf) {
      Discrete fx = make_discrete(pi, nf, 100 + nf);
      std::vector<int> order(nf);
      std::iota(order.begin(), order.end(), 0);
      auto upd = [&](auto alpha) {
        auto P = transition_matrix(fx, alpha);
        worst = std::max(worst, max_detailed_balance_violation(fx, P));
      };
      upd([&](int i, int j) { return alpha_da(fx, i, j, order); });
      upd([&](int i, int j) { return alpha_da(fx, i, j, order, 0.25); });
      upd([&](int i, int j) { return alpha_min_partial(fx, i, j); });
      std::vector<std::vector<int>> groups;
      for (int k = 0; k < nf; k += 2) {
        groups.push_back(k + 1 < nf ? std::vector<int>{k, k + 1}
                                    : std::vector<int>{k});
      }
      upd([&](int i, int j) { return alpha_grouped(fx, i, j, groups); });
    }
  }
  std::ostringstream os;
  os << "enumerated detailed balance, worst violation " << worst;
  report(1, worst < 1e-12, os.str());
}

void criterion_2() {
  bool pass = true;
  std::ostringstream os;
  // exact sandwich on enumerated pairs
  for (int nf : {2, 3}) {
    Discrete fx = make_discrete({0.2, 0.3, 0.5}, nf, 200 + nf);
    std::vector<int> order(nf);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        double da = alpha_da(fx, i, j, order);
        double mp = alpha_min_partial(fx, i, j);
        double mh = alpha_mh(fx, i, j);
        pass = pass && da <= mp + 1e-12 && mp <= mh + 1e-12;
      }
  }
  os << "sandwich exact";
  // empirical da <= mh on every bundled continuous model
  auto mala_proposal = std::make_shared<ProposalSpec>();
  mala_proposal->family = ProposalFamily::Mala;
  mala_proposal->dim = 10;
  mala_proposal->ell = 1.0;
  struct Probe {
    Model m;
    double ell;
    long iters;
  };
  std::vector<Probe> probes;
  probes.push_back({normal_normal_model(), 2.4, 30000});
  probes.push_back({beta_binomial_model(10), 0.09, 30000});
  probes.push_back({beta_binomial_model(100), 0.09, 30000});
  probes.push_back({logistic_model(2000, 5, 10), 0.05, 5000});
  probes.push_back({counterexample_model(0.5), 2.4, 30000});
  probes.push_back({mixture_jeffreys_model(100, 100), 0.15, 2000});
  for (const auto& p : probes) {
    double da = chain_acceptance(p.m, Variant::DA, p.ell, p.iters, 21);
    double mh = chain_acceptance(p.m, Variant::MH, p.ell, p.iters, 22);
    double se =
        std::sqrt(da * (1 - da) / p.iters + mh * (1 - mh) / p.iters);
    if (da > mh + 3.0 * se) {
      pass = false;
      os << "; " << p.m.name << " da " << da << " > mh " << mh;
    }
  }
  os << "; empirical da <= mh on all bundled models";
  report(2, pass, os.str());
}

void criterion_3() {
  bool pass = true;
  double worst_margin = 1.0;
  for (double c : {0.1, 0.25, 0.5}) {
    for (auto pi : {std::vector<double>{0.2, 0.3, 0.5},
                    std::vector<double>{0.05, 0.1, 0.2, 0.25, 0.4}}) {
      Discrete fx = make_discrete(pi, 3, 300);
      std::vector<int> order{0, 1, 2};
      for (int i = 0; i < fx.states(); ++i)
        for (int j = 0; j < fx.states(); ++j) {
          if (i == j || fx.log_r(i, j) < 0.0) continue;
          double a = alpha_da(fx, i, j, order, c);
          pass = pass && a >= c * c - 1e-12;
          worst_margin = std::min(worst_margin, a - c * c);
        }
    }
  }
  std::ostringstream os;
  os << "clipped acceptance >= c^2 on {r >= 1}, worst margin "
     << worst_margin;
  report(3, pass, os.str());
}

void criterion_4() {
  const double targets[4] = {0.29, 0.25, 0.12, 0.09};
  const int splits[4] = {10, 20, 50, 100};
  Model tune_model = beta_binomial_model(100);
  double sd = tune_rw_scale_esjd(tune_model, 5000, 404);
  bool pass = true;
  std::ostringstream os;
  os << "fig-2 rates (tuned sd " << sd << "):";
  const long iters = 100000;
  for (int s = 0; s < 4; ++s) {
    Model m = beta_binomial_model(splits[s]);
    auto proposal = std::make_shared<ProposalSpec>();
    proposal->dim = 1;
    proposal->ell = sd;
    KernelConfig kc;
    kc.variant = Variant::DA;
    kc.proposal = proposal;
    ChainState state(m.init, RngStream(405 + s, 0));
    state.refresh_cache(m.factors);
    long acc = 0;
    std::vector<double> trace;
    trace.reserve(iters);
    for (long t = 0; t < iters; ++t) {
      acc += step(state, m, kc).accepted;
      trace.push_back(state.x[0]);
    }
    double rate = static_cast<double>(acc) / iters;
    os << " " << splits[s] << "->" << rate;
    pass = pass && std::abs(rate - targets[s]) <= 0.03;
    if (splits[s] == 100) {
      double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / iters;
      double var = 0.0;
      for (double v : trace) var += (v - mean) * (v - mean) / iters;
      double se = std::sqrt(var / ess(trace));
      bool mean_ok = std::abs(mean - 0.36574) <= 3.0 * se;
      pass = pass && mean_ok;
      os << " mean " << mean << " (se " << se << ")";
    }
  }
  report(4, pass, os.str());
}

void criterion_5() {
  ExperimentConfig cfg;
  cfg.model = "normal_normal";
  cfg.variant = "da";
  cfg.iterations = 100000;
  cfg.adapt_iters = 5000;
  cfg.seed = 505;
  RunResult r = run_chain(cfg, 0);
  auto coord = r.trace.coordinate(0);
  const double n = static_cast<double>(coord.size());
  double mean = std::accumulate(coord.begin(), coord.end(), 0.0) / n;
  double var = 0.0;
  for (double v : coord) var += (v - mean) * (v - mean) / n;
  double e = ess(coord);
  double se_mean = std::sqrt(var / e);
  double se_var = var * std::sqrt(2.0 / e);
  bool pass = std::abs(mean - 2.9703) <= 3.0 * se_mean &&
              std::abs(var - 0.9901) <= 3.0 * se_var;
  std::ostringstream os;
  os << "normal-normal mean " << mean << " (se " << se_mean << "), var "
     << var << " (se " << se_var << ")";
  report(5, pass, os.str());
}

void criterion_6() {
  double a_rwm = optimal_acceptance(1000.0, EffFamily::RwmAdditive).a_star;
  double a_reuse1 = optimal_acceptance(1.0, EffFamily::RwmReuse).a_star;
  double a_mala = optimal_acceptance(1.0, EffFamily::MalaReuse).a_star;
  bool pass = std::abs(a_rwm - 0.234) <= 0.001 &&
              std::abs(a_reuse1 - 0.234) <= 0.001 &&
              std::abs(a_mala - 0.574) <= 0.005;
  for (EffFamily fam : {EffFamily::RwmAdditive, EffFamily::RwmReuse,
                        EffFamily::MalaReuse}) {
    // the langevin family is only defined on delta in (0, 1]
    double hi = (fam == EffFamily::MalaReuse) ? 1.0 : 1000.0;
    double prev = -1.0;
    for (int i = 0; i < 20; ++i) {
      double delta = 0.01 * std::pow(hi / 0.01, i / 19.0);
      double a = optimal_acceptance(delta, fam).a_star;
      pass = pass && a > prev;
      prev = a;
    }
  }
  std::ostringstream os;
  os << "a*(1000, rwm-additive) = " << a_rwm << ", a*(1, rwm-reuse) = "
     << a_reuse1 << ", a*(1, mala-reuse) = " << a_mala
     << ", strictly increasing on 20-point log grids";
  report(6, pass, os.str());
}

void criterion_7() {
  Model m = counterexample_model(0.5);
  const long draws = 200000;
  double a2 = acceptance_from_point(m, Variant::DA, 1.0, 2.0, draws, 701);
  double a4 = acceptance_from_point(m, Variant::DA, 1.0, 4.0, draws, 702);
  double a8 = acceptance_from_point(m, Variant::DA, 1.0, 8.0, draws, 703);
  double a8c = acceptance_from_point(m, Variant::DA, 0.1, 8.0, draws, 704);
  bool pass = a2 > a4 && a4 > a8 && a8 < 0.01 && a8c > a8;
  std::ostringstream os;
  os << "sticking: acc(2)=" << a2 << " acc(4)=" << a4 << " acc(8)=" << a8
     << " clipped acc(8)=" << a8c;
  report(7, pass, os.str());
}

void criterion_8() {
  // Wider parameter dimension so pooled correlation reflects genuine
  // information rather than chance alignment of a few blocks; target_corr
  // raised (with a finer stall threshold) so selection keeps absorbing
  // informative blocks instead of stopping at the first aligned pair.
  ExperimentConfig da;
  da.model = "logistic";
  da.d = 50;
  da.variant = "da";
  da.adapt_iters = 6000;
  da.iterations = 40000;
  da.target_corr = 0.90;
  da.eps = 1e-4;
  da.seed = 808;
  RunResult rda = run_chain(da, 0);

  ExperimentConfig mh = da;
  mh.variant = "mh";
  mh.adapt_iters = 3000;
  RunResult rmh = run_chain(mh, 0);

  double d_factors = 1001.0;  // 1000 blocks + prior
  double mean_evals = rda.report.get("mean_factor_evals_per_iteration");
  double eff_da = rda.report.get("ess_per_cost_unit");
  double eff_mh = rmh.report.get("ess_per_cost_unit");
  bool pass = mean_evals < 0.5 * d_factors && eff_da / eff_mh > 1.0;
  std::ostringstream os;
  os << "mean factor evals/iter " << mean_evals << " (< " << 0.5 * d_factors
     << "), ess-per-cost ratio da/mh " << eff_da / eff_mh;
  report(8, pass, os.str());
}

void criterion_9() {
  RngStream rng(909, 0);
  const int n = 100000;
  std::vector<double> iid(n);
  for (auto& v : iid) v = rng.normal();
  double e_iid = ess(iid);

  std::vector<double> ar(n);
  double x = 0.0;
  for (int t = 0; t < n; ++t) {
    x = 0.5 * x + std::sqrt(0.75) * rng.normal();
    ar[t] = x;
  }
  double e_ar = ess(ar);

  double j = esjd({{0.0}, {1.0}, {1.0}, {3.0}});
  bool pass = e_iid >= 0.9 * n && e_iid <= 1.1 * n &&
              std::abs(e_ar - n / 3.0) <= 0.1 * (n / 3.0) &&
              j == 5.0 / 3.0;
  std::ostringstream os;
  os << "ess(iid)=" << e_iid << " ess(ar1)=" << e_ar << " esjd=" << j;
  report(9, pass, os.str());
}

void criterion_10() {
  namespace fs = std::filesystem;
  ExperimentConfig cfg;
  cfg.model = "beta_binomial";
  cfg.n_parts = 20;
  cfg.variant = "da";
  cfg.adapt_iters = 1000;
  cfg.iterations = 5000;
  cfg.seed = 1010;
  cfg.chains = 2;
  fs::path base = fs::temp_directory_path() / "damh_acceptance_rerun";
  fs::remove_all(base);
  bool pass = true;
  std::vector<std::string> first;
  for (int rep = 0; rep < 2; ++rep) {
    cfg.out_dir = (base / std::to_string(rep)).string();
    run_experiment(cfg);
    for (int c = 0; c < cfg.chains; ++c) {
      std::ifstream in(fs::path(cfg.out_dir) / ("chain_" + std::to_string(c)) /
                           "trace.csv",
                       std::ios::binary);
      std::ostringstream os;
      os << in.rdbuf();
      if (rep == 0)
        first.push_back(os.str());
      else
        pass = pass && os.str() == first[c] && !first[c].empty();
    }
  }
  fs::remove_all(base);
  report(10, pass, "reruns produce byte-identical trace csvs");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  return failures;
}
