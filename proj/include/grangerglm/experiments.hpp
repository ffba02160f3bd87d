#pragma once

// Experiment configuration and the simulation/analysis studies behind the
// command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grangerglm/io.hpp"
#include "grangerglm/mcmc.hpp"
#include "grangerglm/mle.hpp"
#include "grangerglm/presets.hpp"
#include "grangerglm/random.hpp"

namespace grangerglm {

// ---------------------------------------------------------------------------
// configuration

struct ExperimentConfig {
  std::string kind = "simulate";
  std::string preset = "poisson-gamma-mle";
  std::optional<ModelSpec> spec;  // explicit model; overrides the preset
  std::optional<ParamVector> theta;
  std::size_t replications = 1;
  std::vector<std::size_t> sample_sizes{1000};
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  unsigned workers = 0;  // 0: all cores; never changes results
  std::size_t sim_burn_in = kDefaultBurnIn;

  // inputs
  std::string data;
  std::string raw;
  std::optional<double> sample_rate;
  std::string band = "beta";
  std::size_t window = 30;
  std::size_t stft_segment = 0;  // 0: plain per-window periodogram

  // frequentist
  std::vector<double> levels{0.01, 0.05, 0.10};
  std::string target = "granger";  // or a parameter name
  std::vector<std::string> fixed;
  std::size_t bootstrap = 0;
  double bootstrap_level = 0.95;

  // Bayesian
  std::size_t iterations = 11000;
  std::size_t burn_in = 1000;
  std::size_t thinning = 1;
  bool spike_slab = true;
  std::optional<std::size_t> k_max;
  std::string excluded_lags = "pseudo-prior";
  double prior_variance = 100.0;
  double phi_prior_variance = 100.0;
  double slab_variance = 100.0;
  double omega_a = 1.0, omega_b = 1.0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"simulate", "preprocess", "fit-mle",     "lr-test",
                                          "fit-bayes", "lag-scan",  "pairwise",    "table1",
                                          "table2",    "spike-slab"};
  return k;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["preset"] = c.preset;
  j["spec"] = c.spec ? to_json(*c.spec) : json(nullptr);
  j["theta"] = c.theta && c.spec ? to_json(*c.spec, *c.theta) : json(nullptr);
  j["replications"] = c.replications;
  j["sample_sizes"] = c.sample_sizes;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["sim_burn_in"] = c.sim_burn_in;
  j["data"] = c.data;
  j["raw"] = c.raw;
  j["sample_rate"] = c.sample_rate ? json(*c.sample_rate) : json(nullptr);
  j["band"] = c.band;
  j["window"] = c.window;
  j["stft_segment"] = c.stft_segment;
  j["levels"] = c.levels;
  j["target"] = c.target;
  j["fixed"] = c.fixed;
  j["bootstrap"] = c.bootstrap;
  j["bootstrap_level"] = c.bootstrap_level;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thinning"] = c.thinning;
  j["spike_slab"] = c.spike_slab;
  j["k_max"] = c.k_max ? json(*c.k_max) : json(nullptr);
  j["excluded_lags"] = c.excluded_lags;
  j["prior_variance"] = c.prior_variance;
  j["phi_prior_variance"] = c.phi_prior_variance;
  j["slab_variance"] = c.slab_variance;
  j["omega_a"] = c.omega_a;
  j["omega_b"] = c.omega_b;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  const json known = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("unknown config key: " + key);
  auto get = [&]<class T>(const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
  };
  auto get_opt = [&]<class T>(const char* key, std::optional<T>& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
  };
  try {
    get("kind", c.kind);
    get("preset", c.preset);
    if (j.contains("spec") && !j.at("spec").is_null()) c.spec = spec_from_json(j.at("spec"));
    if (j.contains("theta") && !j.at("theta").is_null()) {
      if (!c.spec) throw std::invalid_argument("theta given without spec");
      c.theta = theta_from_json(*c.spec, j.at("theta"));
    }
    get("replications", c.replications);
    get("sample_sizes", c.sample_sizes);
    get_opt("seed", c.seed);
    get("output_dir", c.output_dir);
    get("workers", c.workers);
    get("sim_burn_in", c.sim_burn_in);
    get("data", c.data);
    get("raw", c.raw);
    get_opt("sample_rate", c.sample_rate);
    get("band", c.band);
    get("window", c.window);
    get("stft_segment", c.stft_segment);
    get("levels", c.levels);
    get("target", c.target);
    get("fixed", c.fixed);
    get("bootstrap", c.bootstrap);
    get("bootstrap_level", c.bootstrap_level);
    get("iterations", c.iterations);
    get("burn_in", c.burn_in);
    get("thinning", c.thinning);
    get("spike_slab", c.spike_slab);
    get_opt("k_max", c.k_max);
    get("excluded_lags", c.excluded_lags);
    get("prior_variance", c.prior_variance);
    get("phi_prior_variance", c.phi_prior_variance);
    get("slab_variance", c.slab_variance);
    get("omega_a", c.omega_a);
    get("omega_b", c.omega_b);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return c;
}

/// Hash of the result-relevant configuration (workers and output_dir excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("workers");
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

inline unsigned resolve_workers(const ExperimentConfig& c) {
  return c.workers ? c.workers : default_workers();
}

inline std::uint64_t require_seed(const ExperimentConfig& c) {
  if (!c.seed) throw std::invalid_argument(c.kind + " needs an explicit seed");
  return *c.seed;
}

inline Preset resolve_model(const ExperimentConfig& c) {
  if (c.spec) {
    if (!c.theta && c.kind != "fit-mle" && c.kind != "lr-test" && c.kind != "fit-bayes" &&
        c.kind != "lag-scan" && c.kind != "pairwise")
      throw std::invalid_argument("an explicit spec needs theta for " + c.kind);
    return {"custom", *c.spec, c.theta ? *c.theta : zero_params(*c.spec)};
  }
  return preset_by_name(c.preset);
}

inline std::vector<bool> fixed_mask(const ModelSpec& spec, const std::vector<std::string>& names) {
  const auto layout = parameter_layout(spec);
  std::vector<bool> m(layout.size(), false);
  for (const auto& n : names) {
    const auto i = find_slot(layout, n);
    if (!i) throw std::invalid_argument("parameter not found: " + n);
    m[*i] = true;
  }
  return m;
}

inline PriorSpec prior_of(const ExperimentConfig& c) {
  PriorSpec p;
  p.default_tau2 = c.prior_variance;
  p.phi_variance = c.phi_prior_variance;
  p.slab_variance = c.slab_variance;
  p.a = c.omega_a;
  p.b = c.omega_b;
  return p;
}

inline ExcludedLags parse_excluded(const std::string& s) {
  if (s == "pseudo-prior") return ExcludedLags::pseudo_prior;
  if (s == "retain") return ExcludedLags::retain;
  throw std::invalid_argument("excluded_lags must be pseudo-prior or retain, got " + s);
}

inline ChainConfig chain_of(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.iterations <= c.burn_in)
    throw std::invalid_argument("iterations (" + std::to_string(c.iterations) +
                                ") must exceed burn_in (" + std::to_string(c.burn_in) + ")");
  if (c.thinning < 1) throw std::invalid_argument("thinning must be >= 1");
  ChainConfig ch;
  ch.iterations = c.iterations;
  ch.burn_in = c.burn_in;
  ch.thinning = c.thinning;
  ch.spike_slab = c.spike_slab;
  ch.seed = seed;
  ch.excluded = parse_excluded(c.excluded_lags);
  return ch;
}

/// Orders widened to k_max lags; theta is padded with zero coefficients.
inline Preset with_k(Preset p, std::size_t k) {
  p.spec.orders.k = k;
  p.theta.gamma.resize(k, 0.0);
  return p;
}

inline std::uint64_t task_id(std::size_t n, std::size_t rep) {
  return (std::uint64_t(n) << 24) ^ std::uint64_t(rep);
}

inline BivariateSeries simulate_task(const Preset& m, std::size_t n, std::uint64_t seed,
                                     std::uint64_t task, std::size_t burn_in, Rng* keep = nullptr) {
  auto rng = make_stream(seed, task);
  auto s = simulate(m.spec, m.theta, n, burn_in, rng);
  if (keep) *keep = rng;
  return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation study

struct Table1Row {
  std::string parameter;
  double truth = 0;
  std::size_t n = 0;
  double mean = 0;
  std::optional<double> emp_se;  // needs two successful replications
  std::size_t used = 0, failed = 0;
};

struct Table1Result {
  std::vector<std::string> names;
  std::vector<Table1Row> rows;
  std::vector<std::size_t> sizes;
  /// estimates[size][replicate]: flattened theta_hat, or nullopt on failure.
  std::vector<std::vector<std::optional<std::vector<double>>>> estimates;
  std::vector<std::string> failures;
};

inline void check_study(const ExperimentConfig& c) {
  if (c.replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (c.sample_sizes.empty()) throw std::invalid_argument("no sample sizes given");
}

inline Table1Result run_table1_study(const ExperimentConfig& c) {
  check_study(c);
  const auto seed = require_seed(c);
  const auto model = resolve_model(c);
  for (const auto& d : validate_spec(model.spec, model.theta))
    if (d.severity == Diagnostic::Severity::error) throw std::invalid_argument(d.message);
  const auto layout = parameter_layout(model.spec);
  const auto mask = fixed_mask(model.spec, c.fixed);
  const auto truth = flatten(model.spec, model.theta);
  Table1Result out;
  for (const auto& s : layout) out.names.push_back(s.name);
  out.sizes = c.sample_sizes;
  for (std::size_t n : c.sample_sizes) {
    std::vector<std::optional<std::vector<double>>> est(c.replications);
    std::vector<std::string> why(c.replications);
    parallel_for(c.replications, resolve_workers(c), [&](std::size_t r) {
      try {
        const auto data = simulate_task(model, n, seed, task_id(n, r), c.sim_burn_in);
        const auto fit = fit_mle(model.spec, data, std::nullopt, {}, mask);
        if (!fit.converged) {
          why[r] = "fit did not converge";
          return;
        }
        est[r] = flatten(model.spec, fit.theta_hat);
      } catch (const std::exception& e) {
        why[r] = e.what();
      }
    });
    for (std::size_t r = 0; r < c.replications; ++r)
      if (!est[r])
        out.failures.push_back("n=" + std::to_string(n) + " replicate " + std::to_string(r) +
                               ": " + why[r]);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      std::vector<double> v;
      for (const auto& e : est)
        if (e) v.push_back((*e)[i]);
      Table1Row row{layout[i].name, truth[i], n, std::nan(""), std::nullopt, v.size(),
                    c.replications - v.size()};
      if (!v.empty()) row.mean = detail::mean_of(v);
      if (v.size() >= 2) {
        double ss = 0;
        for (double x : v) ss += (x - row.mean) * (x - row.mean);
        row.emp_se = std::sqrt(ss / double(v.size() - 1));
      }
      out.rows.push_back(row);
    }
    out.estimates.push_back(std::move(est));
  }
  return out;
}

inline std::string table1_to_csv(const Table1Result& r) {
  CsvTable t{{"parameter", "true", "n", "mean", "emp_SE", "used", "failed"}, {}};
  for (const auto& row : r.rows)
    t.rows.push_back({row.parameter, format_double(row.truth), std::to_string(row.n),
                      format_double(row.mean), row.emp_se ? format_double(*row.emp_se) : "",
                      std::to_string(row.used), std::to_string(row.failed)});
  return to_csv(t);
}

/// Long format for boxplots: one row per (n, replicate).
inline std::string table1_estimates_to_csv(const Table1Result& r) {
  CsvTable t{{"n", "replicate", "status"}, {}};
  t.header.insert(t.header.end(), r.names.begin(), r.names.end());
  for (std::size_t s = 0; s < r.sizes.size(); ++s)
    for (std::size_t i = 0; i < r.estimates[s].size(); ++i) {
      std::vector<std::string> row{std::to_string(r.sizes[s]), std::to_string(i),
                                   r.estimates[s][i] ? "ok" : "failed"};
      for (std::size_t p = 0; p < r.names.size(); ++p)
        row.push_back(r.estimates[s][i] ? format_double((*r.estimates[s][i])[p]) : "");
      t.rows.push_back(std::move(row));
    }
  return to_csv(t);
}

// ---------------------------------------------------------------------------
// LR test size study

struct Table2Replicate {
  bool ok = false;
  double lr_stat = 0, lr_raw = 0, p_value = 1;
  int df = 0;
  bool convergence_defect = false;
  std::string error;
};

struct Table2Row {
  std::size_t n = 0;
  double level = 0;
  std::size_t rejections = 0, used = 0, failed = 0;
  double rate = 0;  // rejections / used
};

struct Table2Result {
  std::vector<Table2Row> rows;
  std::vector<std::size_t> sizes;
  std::vector<std::vector<Table2Replicate>> replicates;
  std::size_t convergence_defects = 0;
  double min_lr_raw = 0;
};

inline Table2Result run_table2_study(const ExperimentConfig& c) {
  check_study(c);
  if (c.levels.empty()) throw std::invalid_argument("no nominal levels given");
  for (double a : c.levels)
    if (!(a > 0 && a < 1))
      throw std::invalid_argument("nominal level must lie in (0, 1), got " + format_double(a));
  const auto seed = require_seed(c);
  const auto model = resolve_model(c);
  if (model.theta.rho != 0.0 ||
      std::any_of(model.theta.gamma.begin(), model.theta.gamma.end(), [](double g) { return g != 0.0; }))
    throw std::invalid_argument("the size study simulates under the null: gamma and rho must be 0");
  TestOptions opt;
  opt.fixed = fixed_mask(model.spec, c.fixed);
  Table2Result out;
  out.sizes = c.sample_sizes;
  for (std::size_t n : c.sample_sizes) {
    std::vector<Table2Replicate> reps(c.replications);
    parallel_for(c.replications, resolve_workers(c), [&](std::size_t r) {
      auto& rep = reps[r];
      try {
        const auto data = simulate_task(model, n, seed, task_id(n, r), c.sim_burn_in);
        const auto t = lr_granger_test(model.spec, data, opt);
        if (!t.fit_alt.converged || !t.fit_null.converged) {
          rep.error = "fit did not converge";
          return;
        }
        rep = {true, t.lr_stat, t.lr_raw, t.p_value, t.df, t.convergence_defect, {}};
      } catch (const std::exception& e) {
        rep.error = e.what();
      }
    });
    for (double a : c.levels) {
      Table2Row row{n, a, 0, 0, 0, 0};
      for (const auto& r : reps) {
        if (!r.ok) {
          ++row.failed;
          continue;
        }
        ++row.used;
        if (r.p_value < a) ++row.rejections;
      }
      row.rate = row.used ? double(row.rejections) / double(row.used) : std::nan("");
      out.rows.push_back(row);
    }
    for (const auto& r : reps)
      if (r.ok) {
        out.convergence_defects += r.convergence_defect;
        out.min_lr_raw = std::min(out.min_lr_raw, r.lr_raw);
      }
    out.replicates.push_back(std::move(reps));
  }
  return out;
}

inline std::string table2_to_csv(const Table2Result& r) {
  CsvTable t{{"n", "level", "rejections", "used", "failed", "rate"}, {}};
  for (const auto& row : r.rows)
    t.rows.push_back({std::to_string(row.n), format_double(row.level),
                      std::to_string(row.rejections), std::to_string(row.used),
                      std::to_string(row.failed), format_double(row.rate)});
  return to_csv(t);
}

inline std::string table2_replicates_to_csv(const Table2Result& r) {
  CsvTable t{{"n", "replicate", "status", "lr_stat", "lr_raw", "df", "p_value", "error"}, {}};
  for (std::size_t s = 0; s < r.sizes.size(); ++s)
    for (std::size_t i = 0; i < r.replicates[s].size(); ++i) {
      const auto& x = r.replicates[s][i];
      std::string err = x.error;
      std::replace(err.begin(), err.end(), ',', ';');
      t.rows.push_back({std::to_string(r.sizes[s]), std::to_string(i), x.ok ? "ok" : "failed",
                        x.ok ? format_double(x.lr_stat) : "", x.ok ? format_double(x.lr_raw) : "",
                        x.ok ? std::to_string(x.df) : "", x.ok ? format_double(x.p_value) : "",
                        err});
    }
  return to_csv(t);
}

// ---------------------------------------------------------------------------
// Bayesian study: lag selection (spike and slab on) or posterior recovery

struct BayesReplicate {
  bool ok = false;
  std::vector<double> inclusion;     // per lag
  std::vector<int> covered;          // truth inside the 95% interval, per parameter
  std::vector<double> acceptance;    // post burn-in, per parameter
  std::vector<double> post_mean;
  std::string error;
};

struct BayesStudyResult {
  std::vector<std::string> names;
  std::vector<double> truth;
  std::size_t n = 0, k_max = 0;
  bool spike_slab = true;
  std::vector<BayesReplicate> replicates;

  std::size_t used() const {
    return static_cast<std::size_t>(
        std::count_if(replicates.begin(), replicates.end(), [](const auto& r) { return r.ok; }));
  }
  std::vector<double> median_inclusion() const {
    std::vector<double> out(k_max, std::nan(""));
    for (std::size_t l = 0; l < k_max; ++l) {
      std::vector<double> v;
      for (const auto& r : replicates)
        if (r.ok) v.push_back(r.inclusion[l]);
      if (!v.empty()) out[l] = quantile(v, 0.5);
    }
    return out;
  }
  std::vector<double> coverage() const {
    std::vector<double> out(names.size(), 0.0);
    const auto u = used();
    for (const auto& r : replicates)
      if (r.ok)
        for (std::size_t i = 0; i < names.size(); ++i) out[i] += r.covered[i];
    for (auto& v : out) v = u ? v / double(u) : std::nan("");
    return out;
  }
};

inline BayesStudyResult run_spike_slab_study(const ExperimentConfig& c) {
  check_study(c);
  const auto seed = require_seed(c);
  const auto truth_model = resolve_model(c);
  const std::size_t k_max = c.k_max.value_or(c.spike_slab ? 5 : truth_model.spec.orders.k);
  if (c.spike_slab && k_max == 0) throw std::invalid_argument("k_max must be >= 1");
  if (k_max < truth_model.spec.orders.k)
    throw std::invalid_argument("k_max is below the true order");
  const auto fit_model = with_k(truth_model, k_max);
  const auto pr = prior_of(c);
  const auto base = chain_of(c, 0);
  const std::size_t n = c.sample_sizes.front();
  BayesStudyResult out;
  out.n = n;
  out.k_max = k_max;
  out.spike_slab = c.spike_slab;
  for (const auto& s : parameter_layout(fit_model.spec)) out.names.push_back(s.name);
  out.truth = flatten(fit_model.spec, fit_model.theta);
  out.replicates.resize(c.replications);
  parallel_for(c.replications, resolve_workers(c), [&](std::size_t r) {
    auto& rep = out.replicates[r];
    try {
      Rng rng;
      const auto data = simulate_task(truth_model, n, seed, task_id(n, r), c.sim_burn_in, &rng);
      ChainConfig ch = base;
      ch.seed = rng();
      const auto s = run_chain(fit_model.spec, data, pr, ch);
      const auto sum = summarize_posterior(s);
      rep.inclusion = sum.inclusion;
      rep.inclusion.resize(k_max, 1.0);
      rep.acceptance = s.acceptance_rates;
      for (std::size_t i = 0; i < sum.params.size(); ++i) {
        rep.covered.push_back(sum.params[i].lo <= out.truth[i] && out.truth[i] <= sum.params[i].hi);
        rep.post_mean.push_back(sum.params[i].mean);
      }
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.error = e.what();
    }
  });
  return out;
}

inline std::string inclusion_to_csv(const BayesStudyResult& r) {
  CsvTable t{{"replicate", "status"}, {}};
  for (std::size_t l = 0; l < r.k_max; ++l) t.header.push_back("P_delta_" + std::to_string(l + 1));
  for (std::size_t i = 0; i < r.replicates.size(); ++i) {
    const auto& x = r.replicates[i];
    std::vector<std::string> row{std::to_string(i), x.ok ? "ok" : "failed"};
    for (std::size_t l = 0; l < r.k_max; ++l) row.push_back(x.ok ? format_double(x.inclusion[l]) : "");
    t.rows.push_back(std::move(row));
  }
  return to_csv(t);
}

inline std::string coverage_to_csv(const BayesStudyResult& r) {
  CsvTable t{{"parameter", "true", "coverage", "mean_acceptance", "used", "failed"}, {}};
  const auto cov = r.coverage();
  const auto u = r.used();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    std::vector<double> acc;
    for (const auto& x : r.replicates)
      if (x.ok) acc.push_back(x.acceptance[i]);
    t.rows.push_back({r.names[i], format_double(r.truth[i]), format_double(cov[i]),
                      acc.empty() ? std::string() : format_double(detail::mean_of(acc)), std::to_string(u),
                      std::to_string(r.replicates.size() - u)});
  }
  return to_csv(t);
}

/// Post burn-in acceptance rate per replicate and parameter.
inline std::string acceptance_to_csv(const BayesStudyResult& r) {
  CsvTable t{{"replicate", "status"}, {}};
  t.header.insert(t.header.end(), r.names.begin(), r.names.end());
  for (std::size_t i = 0; i < r.replicates.size(); ++i) {
    const auto& x = r.replicates[i];
    std::vector<std::string> row{std::to_string(i), x.ok ? "ok" : "failed"};
    for (std::size_t p = 0; p < r.names.size(); ++p)
      row.push_back(x.ok ? format_double(x.acceptance[p]) : "");
    t.rows.push_back(std::move(row));
  }
  return to_csv(t);
}

// ---------------------------------------------------------------------------
// lag scan

struct LagScanResult {
  ModelSpec spec;
  PosteriorSamples samples;
  PosteriorSummary summary;
  double prob_rho_negative = 0;
  std::size_t argmax_lag = 0;  // 1-based
};

/// Default scan model: the configured families with p = q = r = s = 1 and
/// k = k_max (15 unless set).
inline ModelSpec lag_scan_spec(const ExperimentConfig& c) {
  ModelSpec spec = c.spec ? *c.spec : preset_by_name(c.preset).spec;
  const std::size_t k = c.k_max.value_or(15);
  if (k == 0) throw std::invalid_argument("k_max must be >= 1 for a lag scan");
  if (!c.spec) spec.orders = {.p = 1, .q = 1, .r = 1, .s = 1, .k = k};
  spec.orders.k = k;
  return spec;
}

inline LagScanResult run_lag_scan(const ExperimentConfig& c, const BivariateSeries& data) {
  LagScanResult out;
  out.spec = lag_scan_spec(c);
  check_series(out.spec, data);
  ExperimentConfig cc = c;
  cc.spike_slab = true;
  const auto ch = chain_of(cc, require_seed(c));
  out.samples = run_chain(out.spec, data, prior_of(c), ch);
  out.summary = summarize_posterior(out.samples, out.spec, data);
  for (const auto& p : out.summary.params)
    if (p.name == "rho") out.prob_rho_negative = p.prob_negative;
  const auto& inc = out.summary.inclusion;
  out.argmax_lag = std::size_t(std::max_element(inc.begin(), inc.end()) - inc.begin()) + 1;
  return out;
}

inline std::string lag_probabilities_to_csv(const PosteriorSummary& s) {
  CsvTable t{{"lag", "P_delta"}, {}};
  for (std::size_t l = 0; l < s.inclusion.size(); ++l)
    t.rows.push_back({std::to_string(l + 1), format_double(s.inclusion[l])});
  return to_csv(t);
}

namespace presets {

/// Poisson-Gamma scan model with p = q = r = s = 1 and a single causal lag
/// `lag` of size `gamma`; gamma = 0 gives the null scan.
inline Preset planted_lag(std::size_t lag = 10, double gamma = 0.6) {
  Preset p{"planted-lag", poisson_gamma_spec(), {}};
  p.spec.orders = {.p = 1, .q = 1, .r = 1, .s = 1, .k = std::max<std::size_t>(lag, 1)};
  p.theta.beta1 = {0.1, 0.2};
  p.theta.alpha1 = {0.3};
  p.theta.beta2 = {0.2, 0.3};
  p.theta.alpha2 = {0.2};
  p.theta.gamma.assign(p.spec.orders.k, 0.0);
  if (lag) p.theta.gamma[lag - 1] = gamma;
  p.theta.rho = 0.0;
  p.theta.phi1 = 1.0;
  return p;
}

/// Geometric pair with lag-one coupling of size `gamma` and no
/// contemporaneous term; gamma = 0 gives independent series.
inline Preset coupled_counts(double gamma = 0.6) {
  Preset p = geometric_geometric();
  p.name = "coupled-counts";
  p.theta.gamma = {gamma};
  p.theta.rho = 0.0;
  return p;
}

}  // namespace presets

// ---------------------------------------------------------------------------
// pairwise tests

struct PairwiseReport {
  std::vector<std::string> names;
  /// [effect][cause]; diagonal and failed pairs are empty.
  std::vector<std::vector<std::optional<TestReport>>> rho, gamma1;
  std::vector<std::string> failures;
};

inline void check_counts(const NamedSeries& s) {
  if (s.values.size() < 2) throw std::invalid_argument("pairwise analysis needs at least 2 series");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (s.values[i].size() != s.values.front().size())
      throw std::invalid_argument("series differ in length");
    for (double v : s.values[i])
      if (!(v >= 0) || v != std::floor(v))
        throw std::invalid_argument("series " + s.names[i] + " is not a count series");
  }
}

inline PairwiseReport run_pairwise(const ExperimentConfig& c, const NamedSeries& series) {
  check_counts(series);
  const ModelSpec spec = c.spec ? *c.spec : presets::geometric_geometric_spec(1);
  if (!find_slot(parameter_layout(spec), "gamma_1"))
    throw std::invalid_argument("pairwise model needs k >= 1");
  const std::size_t m = series.values.size();
  PairwiseReport out;
  out.names = series.names;
  out.rho.assign(m, std::vector<std::optional<TestReport>>(m));
  out.gamma1 = out.rho;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t e = 0; e < m; ++e)
    for (std::size_t k = 0; k < m; ++k)
      if (e != k) pairs.emplace_back(e, k);
  std::vector<std::string> why(pairs.size());
  parallel_for(pairs.size(), resolve_workers(c), [&](std::size_t i) {
    const auto [e, k] = pairs[i];
    try {
      BivariateSeries data;
      data.y1 = series.values[k];
      data.y2 = series.values[e];
      data.support1 = data.support2 = Support::nonneg_integers;
      const LikelihoodKernel kernel(spec, data);
      TestOptions opt;
      opt.cause = series.names[k];
      opt.effect = series.names[e];
      opt.fixed = fixed_mask(spec, c.fixed);
      out.rho[e][k] = lr_scalar_test(kernel, "rho", opt);
      out.gamma1[e][k] = lr_scalar_test(kernel, "gamma_1", opt);
    } catch (const std::exception& ex) {
      out.rho[e][k].reset();
      out.gamma1[e][k].reset();
      why[i] = series.names[k] + " -> " + series.names[e] + ": " + ex.what();
    }
  });
  for (const auto& w : why)
    if (!w.empty()) out.failures.push_back(w);
  return out;
}

/// Rows are effects, columns causes; `stat` picks p_value or lr_stat.
inline std::string pairwise_matrix_to_csv(const PairwiseReport& r,
                                          const std::vector<std::vector<std::optional<TestReport>>>& m,
                                          bool p_value) {
  CsvTable t{{"effect"}, {}};
  t.header.insert(t.header.end(), r.names.begin(), r.names.end());
  for (std::size_t e = 0; e < r.names.size(); ++e) {
    std::vector<std::string> row{r.names[e]};
    for (std::size_t k = 0; k < r.names.size(); ++k)
      row.push_back(m[e][k] ? format_double(p_value ? m[e][k]->p_value : m[e][k]->lr_stat) : "");
    t.rows.push_back(std::move(row));
  }
  return to_csv(t);
}

/// Edge list weighted by LR statistics; `triangle` is upper when the cause
/// column lies right of the effect row.
inline std::string pairwise_edges_to_csv(const PairwiseReport& r) {
  CsvTable t{{"cause", "effect", "test", "lr_stat", "p_value", "triangle"}, {}};
  for (const auto& [name, m] : {std::pair{"rho", &r.rho}, std::pair{"gamma_1", &r.gamma1}})
    for (std::size_t e = 0; e < r.names.size(); ++e)
      for (std::size_t k = 0; k < r.names.size(); ++k)
        if ((*m)[e][k])
          t.rows.push_back({r.names[k], r.names[e], name, format_double((*m)[e][k]->lr_stat),
                            format_double((*m)[e][k]->p_value), k > e ? "upper" : "lower"});
  return to_csv(t);
}

}  // namespace grangerglm
