#pragma once

// Experiment plumbing: flat key=value configuration, model construction,
// the three-phase runner (ranking -> scale adaptation -> frozen sampling),
// scaling tables, and run comparison.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "damh/core.hpp"
#include "damh/diagnostics.hpp"
#include "damh/kernel.hpp"
#include "damh/models.hpp"
#include "damh/ranking.hpp"
#include "damh/scaling.hpp"

namespace damh {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // model
  std::string model = "normal_normal";
  int n_parts = 100;          // beta_binomial split count
  int n = 10000;              // logistic / mixture observation count
  int d = 10;                 // logistic / gaussian_mala dimension
  int block = 10;             // logistic block size
  int n_obs = 100;            // gaussian_mala observations
  double sigma2 = 0.5;        // counterexample surrogate variance
  int mc_prior_samples = 500; // mixture Jeffreys MC size
  double p_holdout = 0.05;    // mixture holdout fraction
  std::uint64_t data_seed = 20240901;

  // kernel
  std::string variant = "da";  // mh | da | da-clipped | da-min-partial | da-grouped
  double clip_c = 1.0;
  int group_size = 0;          // da-grouped: identity order chunked; 0 = one group

  // proposal
  std::string proposal = "rwm";  // rwm | mala
  double ell = 0.0;              // 0 = ref_scale * sqrt(dim)

  // adaptation
  long adapt_iters = 0;
  std::string rank_criterion = "correlation";  // success-rate | variance | correlation
  bool select_surrogate = true;
  double target_corr = 0.85;
  double max_fraction = 0.10;
  double eps = 0.01;
  std::string a_target = "auto";  // "auto" or a rate in (0,1)
  std::string eff_family = "auto";  // auto | rwm-additive | rwm-reuse | mala-reuse

  // run
  long iterations = 10000;
  long burn_in = 0;
  long thinning = 1;
  std::uint64_t seed = 1;
  int chains = 1;
  std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Flat key=value format: '#' comments, blank lines and [section] headers
/// ignored (the key space is flat), unknown keys rejected.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "model") cfg.model = val;
      else if (key == "n_parts") cfg.n_parts = std::stoi(val);
      else if (key == "n") cfg.n = std::stoi(val);
      else if (key == "d") cfg.d = std::stoi(val);
      else if (key == "block") cfg.block = std::stoi(val);
      else if (key == "n_obs") cfg.n_obs = std::stoi(val);
      else if (key == "sigma2") cfg.sigma2 = std::stod(val);
      else if (key == "mc_prior_samples") cfg.mc_prior_samples = std::stoi(val);
      else if (key == "p_holdout") cfg.p_holdout = std::stod(val);
      else if (key == "data_seed") cfg.data_seed = std::stoull(val);
      else if (key == "variant") cfg.variant = val;
      else if (key == "clip_c") cfg.clip_c = std::stod(val);
      else if (key == "group_size") cfg.group_size = std::stoi(val);
      else if (key == "proposal") cfg.proposal = val;
      else if (key == "ell") cfg.ell = std::stod(val);
      else if (key == "adapt_iters") cfg.adapt_iters = std::stol(val);
      else if (key == "rank_criterion") cfg.rank_criterion = val;
      else if (key == "select_surrogate") cfg.select_surrogate = val == "true" || val == "1";
      else if (key == "target_corr") cfg.target_corr = std::stod(val);
      else if (key == "max_fraction") cfg.max_fraction = std::stod(val);
      else if (key == "eps") cfg.eps = std::stod(val);
      else if (key == "a_target") cfg.a_target = val;
      else if (key == "eff_family") cfg.eff_family = val;
      else if (key == "iterations") cfg.iterations = std::stol(val);
      else if (key == "burn_in") cfg.burn_in = std::stol(val);
      else if (key == "thinning") cfg.thinning = std::stol(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "chains") cfg.chains = std::stoi(val);
      else if (key == "out_dir") cfg.out_dir = val;
      else throw ConfigError("unknown config key: " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": bad value for " + key + ": " + val);
    }
  }
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.iterations)
    throw ConfigError("burn_in must be in [0, iterations)");
  if (cfg.thinning < 1) throw ConfigError("thinning must be >= 1");
  if (cfg.chains < 1) throw ConfigError("chains must be >= 1");
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

inline Variant parse_variant(const std::string& name) {
  if (name == "mh") return Variant::MH;
  if (name == "da") return Variant::DA;
  if (name == "da-clipped") return Variant::DAClipped;
  if (name == "da-min-partial") return Variant::DAMinPartial;
  if (name == "da-grouped") return Variant::DAGrouped;
  throw ConfigError("unknown kernel variant: " + name);
}

inline RankCriterion parse_criterion(const std::string& name) {
  if (name == "success-rate") return RankCriterion::SuccessRateAsc;
  if (name == "variance") return RankCriterion::VarianceDesc;
  if (name == "correlation") return RankCriterion::CorrelationDesc;
  throw ConfigError("unknown rank criterion: " + name);
}

inline Model build_model(const ExperimentConfig& cfg,
                         const std::shared_ptr<ProposalSpec>& proposal) {
  if (cfg.model == "normal_normal") return normal_normal_model();
  if (cfg.model == "beta_binomial") return beta_binomial_model(cfg.n_parts);
  if (cfg.model == "logistic")
    return logistic_model(cfg.n, cfg.d, cfg.block, cfg.data_seed);
  if (cfg.model == "gaussian_mala")
    return gaussian_mala_model(proposal, cfg.n_obs, cfg.d, cfg.data_seed);
  if (cfg.model == "counterexample") return counterexample_model(cfg.sigma2);
  if (cfg.model == "mixture_jeffreys")
    return mixture_jeffreys_model(cfg.n, cfg.mc_prior_samples, cfg.p_holdout,
                                  cfg.data_seed);
  throw ConfigError("unknown model: " + cfg.model);
}

struct RunResult {
  Trace trace;
  Report report;
  std::string model_name;
  std::uint64_t data_checksum = 0;
  double delta_hat = 1.0;
  double a_target = 0.0;
  double ell_final = 0.0;
  double achieved_corr = 0.0;
  int surrogate_size = 0;
};

namespace detail {

/// Adaptation-phase DA step that evaluates every factor (full cost) so the
/// ranking statistics can observe the complete log decomposition, while the
/// chain itself still moves with per-stage uniform tests in the configured
/// ordering.
inline StepOutcome da_recording_step(ChainState& state, const Model& model,
                                     const KernelConfig& cfg,
                                     FactorStats& stats) {
  const auto& factors = model.factors;
  const int d = static_cast<int>(factors.size());
  StepOutcome out;
  out.proposal = draw_proposal(state, model, cfg);
  std::vector<double> new_terms(factors.size(),
                                std::numeric_limits<double>::quiet_NaN());
  std::vector<double> logs(factors.size());
  double total = 0.0;
  for (int k = 0; k < d; ++k) {
    logs[k] = eval_cached(factors[k], state, out.proposal, k, new_terms);
    out.factor_evals += factors[k].n_subfactors;
    out.cost_units += factors[k].cost_weight;
    total += logs[k];
  }
  std::vector<int> order = cfg.effective_ordering(d);
  std::vector<bool> passed(factors.size(), false);
  bool alive = true;
  for (int s = 0; s < d; ++s) {
    int k = order[s];
    bool pass = log_uniform_accepts(state.rng, logs[k]);
    passed[k] = pass;
    if (alive && !pass) {
      alive = false;
      out.rejection_stage = s;
    }
  }
  record_iteration(stats, logs, total, passed);
  if (alive) {
    out.accepted = true;
    commit(state, std::move(out.proposal), new_terms);
    out.proposal = state.x;
  }
  state.iteration++;
  return out;
}

inline EffFamily resolve_family(const ExperimentConfig& cfg) {
  if (cfg.eff_family == "rwm-additive") return EffFamily::RwmAdditive;
  if (cfg.eff_family == "rwm-reuse") return EffFamily::RwmReuse;
  if (cfg.eff_family == "mala-reuse") return EffFamily::MalaReuse;
  if (cfg.eff_family != "auto")
    throw ConfigError("unknown eff_family: " + cfg.eff_family);
  if (cfg.proposal == "mala") return EffFamily::MalaReuse;
  // A single-stage kernel recovers plain MH; both rwm families coincide at
  // delta = 1 under the reuse cost model.
  if (cfg.variant == "mh") return EffFamily::RwmReuse;
  return EffFamily::RwmAdditive;
}

}  // namespace detail

/// One seeded chain through the full protocol: 60% of adapt_iters of
/// full-evaluation ranking, freeze (ordering/surrogate + delta_hat + solved
/// a*), 40% of Robbins-Monro scale tuning, then the frozen sampling run of
/// cfg.iterations with burn_in discarded and thinning applied.
inline RunResult run_chain(const ExperimentConfig& cfg, int chain_index) {
  auto proposal = std::make_shared<ProposalSpec>();
  proposal->family = cfg.proposal == "mala" ? ProposalFamily::Mala
                                            : ProposalFamily::RandomWalk;
  if (cfg.proposal != "mala" && cfg.proposal != "rwm")
    throw ConfigError("unknown proposal family: " + cfg.proposal);
  Model model = build_model(cfg, proposal);
  proposal->dim = model.dim;
  proposal->ell =
      cfg.ell > 0.0 ? cfg.ell : model.ref_scale * std::sqrt(model.dim);

  KernelConfig kc;
  kc.variant = parse_variant(cfg.variant);
  kc.clip_c = cfg.clip_c;
  kc.proposal = proposal;
  if (kc.variant == Variant::DAGrouped) {
    const int d = static_cast<int>(model.factors.size());
    const int gs = cfg.group_size > 0 ? cfg.group_size : d;
    for (int lo = 0; lo < d; lo += gs) {
      std::vector<int> g;
      for (int k = lo; k < std::min(d, lo + gs); ++k) g.push_back(k);
      kc.groups.push_back(std::move(g));
    }
  }

  ChainState state(model.init,
                   RngStream(cfg.seed, static_cast<std::uint64_t>(chain_index)));
  state.refresh_cache(model.factors);

  RunResult res;
  res.model_name = model.name;
  res.data_checksum = model.data_checksum;

  const bool da_family = kc.variant != Variant::MH;
  const long rank_iters =
      da_family && cfg.adapt_iters > 0 ? (cfg.adapt_iters * 3) / 5 : 0;
  const long scale_iters = cfg.adapt_iters - rank_iters;

  long iter_context = 0;
  try {
    // phase 1: ranking
    if (rank_iters > 0) {
      FactorStats stats(model.factors);
      for (long t = 0; t < rank_iters; ++t, ++iter_context)
        detail::da_recording_step(state, model, kc, stats);
      AdaptationSchedule sched{rank_iters, false};
      RankingOptions opts;
      opts.criterion = parse_criterion(cfg.rank_criterion);
      opts.select_surrogate = cfg.select_surrogate;
      opts.target_corr = cfg.target_corr;
      opts.max_fraction = cfg.max_fraction;
      opts.eps = cfg.eps;
      FrozenKernel frozen = freeze(sched, stats, model.factors, opts);
      model.factors = frozen.factors;
      kc.ordering = frozen.ordering;
      res.achieved_corr = frozen.achieved_corr;
      res.surrogate_size = static_cast<int>(frozen.surrogate_ids.size());
      if (!frozen.surrogate_ids.empty()) res.delta_hat = frozen.delta_hat;
      state.refresh_cache(model.factors);
    }
    if (res.surrogate_size == 0) {
      if (kc.variant == Variant::MH) {
        res.delta_hat = 1.0;
      } else {
        std::vector<int> order =
            kc.effective_ordering(static_cast<int>(model.factors.size()));
        res.delta_hat = estimate_delta(model.factors, {order[0]});
      }
    }

    const EffFamily family = detail::resolve_family(cfg);
    if (cfg.a_target == "auto") {
      res.a_target = optimal_acceptance(res.delta_hat, family).a_star;
    } else {
      res.a_target = std::stod(cfg.a_target);
      if (!(res.a_target > 0.0 && res.a_target < 1.0))
        throw ConfigError("a_target must lie in (0,1) or be \"auto\"");
    }

    // phase 2: Robbins-Monro scale tuning toward a_target
    if (scale_iters > 0) {
      ScalingState sc;
      sc.ell = proposal->ell;
      sc.a_target = res.a_target;
      sc.delta_hat = res.delta_hat;
      for (long t = 0; t < scale_iters; ++t, ++iter_context) {
        StepOutcome o = step(state, model, kc);
        adapt_scale(sc, o.accepted);
        proposal->ell = sc.ell;
      }
    }
    res.ell_final = proposal->ell;

    // phase 3: frozen sampling
    Trace& tr = res.trace;
    tr.dim = model.dim;
    tr.thinning = static_cast<int>(cfg.thinning);
    tr.delta_hat = res.delta_hat;
    tr.n_stages = static_cast<int>(model.factors.size());
    tr.factor_eval_counts.assign(model.factors.size(), 0);
    double cum_cost = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (long t = 0; t < cfg.iterations; ++t, ++iter_context) {
      StepOutcome o = step(state, model, kc);
      cum_cost += o.cost_units;
      tr.total_factor_evals += o.factor_evals;
      if (t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thinning == 0) {
        tr.samples.push_back(state.x);
        tr.accept_flags.push_back(o.accepted ? 1 : 0);
        tr.rejection_stages.push_back(o.rejection_stage);
        tr.cumulative_cost.push_back(cum_cost);
      }
    }
    tr.wall_time = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  } catch (const EvalError& e) {
    throw std::runtime_error("evaluation error at iteration " +
                             std::to_string(iter_context) + ", factor " +
                             std::to_string(e.factor_id) + ": " + e.what());
  }

  res.report = efficiency_report(res.trace);
  res.report.add("chain", chain_index);
  res.report.add("seed", static_cast<double>(cfg.seed));
  res.report.add("data_checksum", static_cast<double>(res.data_checksum));
  res.report.add("a_target", res.a_target);
  res.report.add("ell_final", res.ell_final);
  res.report.add("achieved_corr", res.achieved_corr);
  res.report.add("surrogate_size", res.surrogate_size);
  for (int i = 0; i < model.dim; ++i) {
    double m = 0.0;
    for (const auto& s : res.trace.samples) m += s[i];
    res.report.add("mean_x" + std::to_string(i),
                   m / static_cast<double>(res.trace.size()));
  }
  return res;
}

/// All chains of one experiment; artifacts written under cfg.out_dir when
/// write_artifacts is set (chain_K/trace.csv, chain_K/report.txt,
/// summary.txt).
inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg,
                                             bool write_artifacts = true) {
  std::vector<RunResult> runs;
  runs.reserve(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c) runs.push_back(run_chain(cfg, c));

  if (write_artifacts) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    for (int c = 0; c < cfg.chains; ++c) {
      fs::path dir = fs::path(cfg.out_dir) / ("chain_" + std::to_string(c));
      fs::create_directories(dir);
      std::ofstream tf(dir / "trace.csv", std::ios::binary);
      write_trace_csv(runs[c].trace, tf);
      std::ofstream rf(dir / "report.txt", std::ios::binary);
      rf << runs[c].report.text();
    }
    std::ofstream sf(fs::path(cfg.out_dir) / "summary.txt", std::ios::binary);
    sf << "model = " << runs[0].model_name << "\n";
    sf << "data_checksum = " << runs[0].data_checksum << "\n";
    sf << "chains = " << cfg.chains << "\n";
    Report pooled;
    pooled.add("delta_hat", runs[0].delta_hat);
    pooled.add("a_target", runs[0].a_target);
    double acc = 0.0;
    for (const auto& r : runs) acc += r.trace.acceptance_rate();
    pooled.add("mean_acceptance_rate", acc / cfg.chains);
    sf << pooled.text();
  }
  return runs;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void ratio_stats(Report& rep, const std::string& key,
                        const std::vector<double>& base,
                        const std::vector<double>& other) {
  double bm = 0.0, om = 0.0;
  for (double v : base) bm += v / base.size();
  for (double v : other) om += v / other.size();
  rep.add(key + "_mean_ratio", om / bm);
  rep.add(key + "_median_ratio", median(other) / median(base));
}

inline std::vector<double> metric_over_chains(
    const std::vector<RunResult>& runs, const std::string& key) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.report.get(key));
  return out;
}

}  // namespace detail

/// Relative metrics of each experiment against the first (the baseline),
/// aggregated over chains by both mean and median. All experiments must
/// share a model and dataset. Wall-clock ratios are informational only.
inline Report compare(const std::vector<std::vector<RunResult>>& experiments) {
  if (experiments.size() < 2)
    throw ConfigError("compare: need at least 2 experiments");
  for (const auto& runs : experiments) {
    if (runs.empty()) throw ConfigError("compare: empty experiment");
    if (runs[0].model_name != experiments[0][0].model_name ||
        runs[0].data_checksum != experiments[0][0].data_checksum)
      throw ConfigError("compare: experiments target different models/data");
  }
  static const char* keys[] = {"ess_min",       "esjd",
                               "cost_per_iteration", "ess_per_cost_unit",
                               "esjd_per_cost_unit", "wall_time_seconds"};
  Report rep;
  rep.add("n_experiments", static_cast<double>(experiments.size()));
  for (std::size_t i = 1; i < experiments.size(); ++i) {
    for (const char* key : keys) {
      detail::ratio_stats(rep, "exp" + std::to_string(i) + "_" + key,
                          detail::metric_over_chains(experiments[0], key),
                          detail::metric_over_chains(experiments[i], key));
    }
  }
  return rep;
}

/// CSV rows (delta, a_star, ell_shape) over an ascending positive grid.
inline std::string scaling_table(EffFamily family,
                                 const std::vector<double>& delta_grid) {
  if (delta_grid.empty())
    throw ConfigError("scaling_table: empty grid");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (delta_grid[i] <= 0.0 ||
        (i > 0 && delta_grid[i] <= delta_grid[i - 1]))
      throw ConfigError("scaling_table: grid must be positive ascending");
  }
  std::ostringstream os;
  os << "delta,a_star,ell_shape\n";
  char buf[128];
  for (double d : delta_grid) {
    OptimalScaling s = optimal_acceptance(d, family);
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", d, s.a_star,
                  s.ell_shape);
    os << buf;
  }
  return os.str();
}

/// MH-optimal random-walk tuning by ESJD: grid of multipliers on the
/// model's reference scale, short MH pilot run per candidate, returns the
/// ESJD-maximizing per-coordinate proposal sd.
inline double tune_rw_scale_esjd(const Model& model, long pilot_iters,
                                 std::uint64_t seed) {
  static const double mult[] = {0.5, 1.0, 2.0, 4.0, 8.0};
  double best_sd = model.ref_scale, best_esjd = -1.0;
  for (std::size_t i = 0; i < sizeof(mult) / sizeof(mult[0]); ++i) {
    auto proposal = std::make_shared<ProposalSpec>();
    proposal->family = ProposalFamily::RandomWalk;
    proposal->dim = model.dim;
    proposal->ell = mult[i] * model.ref_scale * std::sqrt(model.dim);
    KernelConfig kc;
    kc.variant = Variant::MH;
    kc.proposal = proposal;
    ChainState state(model.init, RngStream(seed, 100 + i));
    state.refresh_cache(model.factors);
    double total = 0.0;
    for (long t = 0; t < pilot_iters; ++t) {
      StateVector prev = state.x;
      step(state, model, kc);
      for (int j = 0; j < model.dim; ++j) {
        double dj = state.x[j] - prev[j];
        total += dj * dj;
      }
    }
    if (total > best_esjd) {
      best_esjd = total;
      best_sd = proposal->rw_sd();
    }
  }
  return best_sd;
}

}  // namespace damh
