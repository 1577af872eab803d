#pragma once

// Trace container and estimator diagnostics: autocorrelation, effective
// sample size, expected squared jumping distance, cost-aware reports.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "damh/core.hpp"

namespace damh {

struct DegenerateSeriesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Trace {
  int dim = 1;
  int thinning = 1;
  std::vector<StateVector> samples;       // per iteration, post burn-in
  std::vector<std::uint8_t> accept_flags;
  std::vector<int> rejection_stages;      // -1 when accepted
  std::vector<double> cumulative_cost;    // non-decreasing
  std::vector<long> factor_eval_counts;   // cumulative per factor id
  long total_factor_evals = 0;
  double wall_time = 0.0;                 // informational only
  double delta_hat = 1.0;
  int n_stages = 1;                       // configured stage count

  std::size_t size() const { return samples.size(); }

  std::vector<double> coordinate(int i) const {
    std::vector<double> out(samples.size());
    for (std::size_t t = 0; t < samples.size(); ++t) out[t] = samples[t][i];
    return out;
  }

  double acceptance_rate() const {
    if (accept_flags.empty()) return 0.0;
    long acc = 0;
    for (auto a : accept_flags) acc += a;
    return static_cast<double>(acc) / accept_flags.size();
  }
};

/// Sample autocorrelations at lags 0..max_lag (lag 0 == 1).
inline std::vector<double> acf(const std::vector<double>& series,
                               int max_lag) {
  const long n = static_cast<long>(series.size());
  if (max_lag < 1 || n <= max_lag)
    throw std::invalid_argument("acf: need length > max_lag >= 1");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  if (var <= 0.0) throw DegenerateSeriesError("acf: constant series");
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (int lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (long t = 0; t + lag < n; ++t)
      c += (series[t] - mean) * (series[t + lag] - mean);
    out[lag] = c / var;
  }
  return out;
}

/// n / ACT with initial-positive truncation. A negative lag-1
/// autocorrelation is included before truncating, so antithetic chains
/// report ESS > n (flagged as super-efficient downstream); the ACT is
/// floored at 0.1.
inline double ess(const std::vector<double>& series) {
  const long n = static_cast<long>(series.size());
  if (n < 100) throw std::invalid_argument("ess: need length >= 100");
  const int max_lag = static_cast<int>(std::min<long>(n - 2, 2000));
  std::vector<double> rho = acf(series, max_lag);
  double act = 1.0;
  if (rho[1] < 0.0) {
    act += 2.0 * rho[1];
  } else {
    for (int t = 1; t <= max_lag && rho[t] > 0.0; ++t) act += 2.0 * rho[t];
  }
  act = std::max(act, 0.1);
  return static_cast<double>(n) / act;
}

/// Mean squared displacement between successive chain states, computed on
/// the per-iteration chain (rejections contribute zero). Optional beta
/// rescales per coordinate.
inline double esjd(const std::vector<StateVector>& samples,
                   const std::vector<double>& beta = {}) {
  if (samples.size() < 2)
    throw std::invalid_argument("esjd: need at least 2 samples");
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < samples.size(); ++t) {
    for (std::size_t i = 0; i < samples[t].size(); ++i) {
      double d = samples[t + 1][i] - samples[t][i];
      double b = beta.empty() ? 1.0 : beta[i];
      total += d * d / (b * b);
    }
  }
  return total / static_cast<double>(samples.size() - 1);
}

/// Flat key/value report. Keys are emitted in insertion order.
struct Report {
  std::vector<std::pair<std::string, double>> values;

  void add(const std::string& key, double v) { values.emplace_back(key, v); }

  double get(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    throw std::out_of_range("report key not found: " + key);
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return true;
    return false;
  }

  std::string text() const {
    std::string out;
    char buf[64];
    for (const auto& [k, v] : values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += k;
      out += " = ";
      out += buf;
      out += "\n";
    }
    return out;
  }
};

inline Report efficiency_report(const Trace& trace) {
  if (trace.size() == 0)
    throw std::invalid_argument("efficiency_report: empty trace");
  Report rep;
  const double n = static_cast<double>(trace.size());
  rep.add("iterations", n);
  rep.add("acceptance_rate", trace.acceptance_rate());

  std::map<int, long> stage_hist;
  for (int s : trace.rejection_stages)
    if (s >= 0) stage_hist[s]++;
  rep.add("rejection_stages_used", static_cast<double>(stage_hist.size()));
  for (const auto& [s, c] : stage_hist)
    rep.add("rejections_at_stage_" + std::to_string(s),
            static_cast<double>(c));

  double ess_min = std::numeric_limits<double>::infinity();
  bool super_efficient = false;
  for (int i = 0; i < trace.dim; ++i) {
    auto coord = trace.coordinate(i);
    double e;
    try {
      e = ess(coord);
    } catch (const DegenerateSeriesError&) {
      e = 0.0;
    }
    rep.add("ess_coord_" + std::to_string(i), e);
    ess_min = std::min(ess_min, e);
    if (e > n) super_efficient = true;
  }
  rep.add("ess_min", ess_min);
  rep.add("flag_super_efficient", super_efficient ? 1.0 : 0.0);

  double jump = esjd(trace.samples);
  rep.add("esjd", jump);

  double total_cost =
      trace.cumulative_cost.empty() ? 0.0 : trace.cumulative_cost.back();
  double cost_per_iter = total_cost / n;
  rep.add("cost_per_iteration", cost_per_iter);
  rep.add("mean_factor_evals_per_iteration",
          static_cast<double>(trace.total_factor_evals) / n);
  rep.add("delta_hat", trace.delta_hat);
  if (total_cost > 0.0) {
    rep.add("ess_per_cost_unit", ess_min / total_cost);
    rep.add("esjd_per_cost_unit", jump / total_cost);
  }
  if (trace.wall_time > 0.0) {
    rep.add("wall_time_seconds", trace.wall_time);
    rep.add("ess_per_second", ess_min / trace.wall_time);
  }
  return rep;
}

/// CSV schema: iteration, x0..x{d-1}, accepted, rejection_stage,
/// cumulative_cost.
inline void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "iteration";
  for (int i = 0; i < trace.dim; ++i) os << ",x" << i;
  os << ",accepted,rejection_stage,cumulative_cost\n";
  char buf[64];
  for (std::size_t t = 0; t < trace.size(); ++t) {
    os << t;
    for (int i = 0; i < trace.dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", trace.samples[t][i]);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", trace.cumulative_cost[t]);
    os << ',' << int(trace.accept_flags[t]) << ',' << trace.rejection_stages[t]
       << ',' << buf << '\n';
  }
}

}  // namespace damh
