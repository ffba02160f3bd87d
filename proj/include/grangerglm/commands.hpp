#pragma once

// Runs one configured command: reads inputs, writes outputs and a manifest
// under the output directory.

#include <filesystem>
#include <string>
#include <vector>

#include "grangerglm/experiments.hpp"

namespace grangerglm {

/// Reads a config file; a manifest is accepted too and yields its config.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(std::string("not valid JSON (") + e.what() + ")", path);
  }
  if (j.is_object() && j.contains("config") && j.contains("config_hash")) return config_from_json(j.at("config"));
  return config_from_json(j);
}

inline void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  write_text(path, to_json(c).dump(2) + "\n");
}

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }
  void text(const std::string& name, const std::string& content) {
    write_text(root_ / name, content);
    files_.push_back(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline json make_manifest(const ExperimentConfig& c, const std::vector<std::string>& files) {
  return {{"command", c.kind},
          {"config_hash", config_hash(c)},
          {"seed", c.seed ? json(*c.seed) : json(nullptr)},
          {"version", kVersion},
          {"config", to_json(c)},
          {"outputs", files}};
}

namespace detail {

inline ModelSpec fit_spec(const ExperimentConfig& c) {
  ModelSpec spec = resolve_model(c).spec;
  if (c.k_max) spec.orders.k = *c.k_max;
  return spec;
}

inline BivariateSeries load_data(const ExperimentConfig& c, const ModelSpec& spec) {
  if (c.data.empty()) throw std::invalid_argument(c.kind + " needs a data file");
  return read_series(c.data, spec);
}

inline void cmd_simulate(const ExperimentConfig& c, OutputDir& out) {
  const auto model = resolve_model(c);
  for (const auto& d : validate_spec(model.spec, model.theta))
    if (d.severity == Diagnostic::Severity::error) throw std::invalid_argument(d.message);
  auto rng = make_stream(require_seed(c));
  const auto s = simulate(model.spec, model.theta, c.sample_sizes.front(), c.sim_burn_in, rng);
  out.text("series.csv", series_to_csv(s));
  out.json_file("model.json", {{"spec", to_json(model.spec)},
                               {"theta", to_json(model.spec, model.theta)}});
}

inline void cmd_preprocess(const ExperimentConfig& c, OutputDir& out) {
  if (c.raw.empty()) throw std::invalid_argument("preprocess needs a raw recording");
  const auto rec = read_raw(c.raw, c.sample_rate);
  const auto band = band_by_name(c.band);
  std::vector<std::string> warnings;
  const auto power = c.stft_segment ? band_power_series_stft(rec, band, c.window, c.stft_segment)
                                    : band_power_series(rec, band, c.window, &warnings);
  const auto spikes = bin_spikes(rec, c.window);
  auto pair = align_pair(power, spikes);
  warnings.insert(warnings.end(), pair.warnings.begin(), pair.warnings.end());
  out.text("series.csv", series_to_csv(pair.series));
  out.json_file("preprocess.json", {{"band", band.name},
                                    {"band_lo", band.lo},
                                    {"band_hi", band.hi},
                                    {"window", c.window},
                                    {"stft_segment", c.stft_segment},
                                    {"sample_rate", rec.sample_rate},
                                    {"n", pair.series.size()},
                                    {"warnings", warnings}});
}

inline void cmd_fit_mle(const ExperimentConfig& c, OutputDir& out) {
  const auto spec = fit_spec(c);
  const auto data = load_data(c, spec);
  const LikelihoodKernel kernel(spec, data);
  const auto fit = fit_mle(kernel, std::nullopt, {}, fixed_mask(spec, c.fixed));
  auto j = to_json(fit);
  if (c.bootstrap) {
    const auto b = bootstrap_inclusion(fit, data.size(), c.bootstrap, c.bootstrap_level,
                                       require_seed(c), resolve_workers(c));
    j["bootstrap"] = {{"level", c.bootstrap_level},
                      {"requested", b.requested},
                      {"used", b.used},
                      {"dropped", b.dropped},
                      {"inclusion", b.inclusion}};
  }
  out.json_file("fit.json", j);
}

inline void cmd_lr_test(const ExperimentConfig& c, OutputDir& out) {
  const auto spec = fit_spec(c);
  const auto data = load_data(c, spec);
  const LikelihoodKernel kernel(spec, data);
  TestOptions opt;
  opt.fixed = fixed_mask(spec, c.fixed);
  const auto rep = c.target == "granger" ? lr_granger_test(kernel, opt)
                                         : lr_scalar_test(kernel, c.target, opt);
  out.json_file("test.json", to_json(rep));
}

inline void write_posterior(OutputDir& out, const PosteriorSamples& s, const PosteriorSummary& sum,
                            const ModelSpec& spec, json extra = json::object()) {
  out.text("posterior.csv", posterior_to_csv(s));
  json j = to_json(sum, s);
  j["spec"] = to_json(spec);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  out.json_file("posterior.json", j);
  if (sum.joint_effect) {
    out.text("c_t.csv", joint_effect_to_csv(*sum.joint_effect, spec.orders.max_lag()));
    out.text("c_t_histogram.csv", joint_histogram_to_csv(*sum.joint_effect));
  }
}

inline void cmd_fit_bayes(const ExperimentConfig& c, OutputDir& out) {
  const auto ch = chain_of(c, require_seed(c));
  const auto spec = fit_spec(c);
  const auto data = load_data(c, spec);
  const auto s = run_chain(spec, data, prior_of(c), ch);
  write_posterior(out, s, summarize_posterior(s, spec, data), spec);
}

inline void cmd_lag_scan(const ExperimentConfig& c, OutputDir& out) {
  const auto spec = lag_scan_spec(c);
  const auto data = load_data(c, spec);
  const auto r = run_lag_scan(c, data);
  out.text("lag_probabilities.csv", lag_probabilities_to_csv(r.summary));
  write_posterior(out, r.samples, r.summary, r.spec,
                  {{"prob_rho_negative", r.prob_rho_negative}, {"argmax_lag", r.argmax_lag}});
}

inline void cmd_pairwise(const ExperimentConfig& c, OutputDir& out) {
  if (c.data.empty()) throw std::invalid_argument("pairwise needs a data file");
  const auto series = read_multi_series(c.data);
  const auto r = run_pairwise(c, series);
  out.text("rho_p.csv", pairwise_matrix_to_csv(r, r.rho, true));
  out.text("rho_lr.csv", pairwise_matrix_to_csv(r, r.rho, false));
  out.text("gamma1_p.csv", pairwise_matrix_to_csv(r, r.gamma1, true));
  out.text("gamma1_lr.csv", pairwise_matrix_to_csv(r, r.gamma1, false));
  out.text("edges.csv", pairwise_edges_to_csv(r));
  json reports = json::array();
  for (std::size_t e = 0; e < r.names.size(); ++e)
    for (std::size_t k = 0; k < r.names.size(); ++k) {
      if (r.rho[e][k]) reports.push_back(to_json(*r.rho[e][k]));
      if (r.gamma1[e][k]) reports.push_back(to_json(*r.gamma1[e][k]));
    }
  out.json_file("pairwise.json", {{"series", r.names}, {"failures", r.failures}, {"tests", reports}});
}

inline void cmd_table1(const ExperimentConfig& c, OutputDir& out) {
  const auto r = run_table1_study(c);
  out.text("table1.csv", table1_to_csv(r));
  out.text("table1_estimates.csv", table1_estimates_to_csv(r));
  out.json_file("table1.json", {{"replications", c.replications},
                                {"sample_sizes", c.sample_sizes},
                                {"failures", r.failures}});
}

inline void cmd_table2(const ExperimentConfig& c, OutputDir& out) {
  const auto r = run_table2_study(c);
  out.text("table2.csv", table2_to_csv(r));
  out.text("table2_replicates.csv", table2_replicates_to_csv(r));
  out.json_file("table2.json", {{"replications", c.replications},
                                {"sample_sizes", c.sample_sizes},
                                {"levels", c.levels},
                                {"convergence_defects", r.convergence_defects},
                                {"min_lr_raw", number(r.min_lr_raw)}});
}

inline void cmd_spike_slab(const ExperimentConfig& c, OutputDir& out) {
  const auto r = run_spike_slab_study(c);
  if (r.spike_slab) out.text("inclusion.csv", inclusion_to_csv(r));
  out.text("coverage.csv", coverage_to_csv(r));
  out.text("acceptance.csv", acceptance_to_csv(r));
  json errors = json::array();
  for (std::size_t i = 0; i < r.replicates.size(); ++i)
    if (!r.replicates[i].ok) errors.push_back({{"replicate", i}, {"error", r.replicates[i].error}});
  json med = json::array();
  for (double v : r.median_inclusion()) med.push_back(number(v));
  out.json_file("spike_slab.json", {{"n", r.n},
                                    {"k_max", r.k_max},
                                    {"spike_slab", r.spike_slab},
                                    {"used", r.used()},
                                    {"failed", r.replicates.size() - r.used()},
                                    {"median_inclusion", med},
                                    {"errors", errors}});
}

}  // namespace detail

/// Runs c.kind and returns the manifest, which is also written as
/// manifest.json next to the outputs.
inline json execute(const ExperimentConfig& c) {
  if (c.sample_sizes.empty()) throw std::invalid_argument("no sample sizes given");
  OutputDir out(c.output_dir);
  const auto& k = c.kind;
  if (k == "simulate") detail::cmd_simulate(c, out);
  else if (k == "preprocess") detail::cmd_preprocess(c, out);
  else if (k == "fit-mle") detail::cmd_fit_mle(c, out);
  else if (k == "lr-test") detail::cmd_lr_test(c, out);
  else if (k == "fit-bayes") detail::cmd_fit_bayes(c, out);
  else if (k == "lag-scan") detail::cmd_lag_scan(c, out);
  else if (k == "pairwise") detail::cmd_pairwise(c, out);
  else if (k == "table1") detail::cmd_table1(c, out);
  else if (k == "table2") detail::cmd_table2(c, out);
  else if (k == "spike-slab") detail::cmd_spike_slab(c, out);
  else throw std::invalid_argument("unknown command: " + k);
  const auto manifest = make_manifest(c, out.files());
  write_text(out.root() / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace grangerglm
