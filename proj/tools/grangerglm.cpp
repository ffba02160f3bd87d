#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grangerglm/commands.hpp"

using namespace grangerglm;

namespace {

struct Flags {
  std::vector<std::function<void(ExperimentConfig&)>> apply;

  template <class T, class Set>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help, Set set) {
    auto v = std::make_shared<T>();
    auto* o = app->add_option(name, *v, help);
    apply.push_back([o, v, set](ExperimentConfig& c) {
      if (o->count()) set(c, *v);
    });
    return o;
  }

  void flag(CLI::App* app, const std::string& name, const std::string& help,
            std::function<void(ExperimentConfig&)> set) {
    auto* o = app->add_flag(name, help);
    apply.push_back([o, set](ExperimentConfig& c) {
      if (o->count()) set(c);
    });
  }
};

struct Sub {
  CLI::App* app;
  std::string kind;
  std::shared_ptr<std::string> config = std::make_shared<std::string>();
  Flags flags;
};

void model_options(Sub& s) {
  s.flags.add<std::string>(s.app, "--preset", "named model: " + [] {
    std::string all;
    for (const auto& n : presets::names()) all += (all.empty() ? "" : ", ") + n;
    return all;
  }(), [](auto& c, const std::string& v) {
    preset_by_name(v);
    c.preset = v;
    c.spec.reset();
    c.theta.reset();
  });
  s.flags.add<std::string>(s.app, "--model", "JSON file with spec (and theta)",
                           [](auto& c, const std::string& path) {
                             const auto j = json::parse(read_text(path));
                             c.spec = spec_from_json(j.at("spec"));
                             c.theta.reset();
                             if (j.contains("theta")) c.theta = theta_from_json(*c.spec, j.at("theta"));
                           });
}

void data_option(Sub& s) {
  s.flags.add<std::string>(s.app, "--data", "input CSV", [](auto& c, const std::string& v) { c.data = v; });
}

void fit_options(Sub& s) {
  s.flags.add<std::vector<std::string>>(s.app, "--fixed", "parameters held at their initial values",
                                        [](auto& c, const auto& v) { c.fixed = v; });
  s.flags.add<std::size_t>(s.app, "--k-max", "number of causal lags",
                           [](auto& c, std::size_t v) { c.k_max = v; });
}

void chain_options(Sub& s, bool selection) {
  s.flags.add<std::size_t>(s.app, "--iterations", "MCMC iterations including burn-in",
                           [](auto& c, std::size_t v) { c.iterations = v; });
  s.flags.add<std::size_t>(s.app, "--burn-in", "MCMC burn-in iterations",
                           [](auto& c, std::size_t v) { c.burn_in = v; });
  s.flags.add<std::size_t>(s.app, "--thinning", "keep every k-th draw",
                           [](auto& c, std::size_t v) { c.thinning = v; });
  if (selection) {
    s.flags.flag(s.app, "--spike-slab", "select causal lags", [](auto& c) { c.spike_slab = true; });
    s.flags.flag(s.app, "--no-spike-slab", "keep all causal lags", [](auto& c) { c.spike_slab = false; });
  }
  s.flags.add<std::string>(s.app, "--excluded-lags", "pseudo-prior | retain",
                           [](auto& c, const std::string& v) {
                             parse_excluded(v);
                             c.excluded_lags = v;
                           });
  s.flags.add<double>(s.app, "--prior-variance", "variance of the normal priors",
                      [](auto& c, double v) { c.prior_variance = v; });
  s.flags.add<double>(s.app, "--slab-variance", "variance of the slab",
                      [](auto& c, double v) { c.slab_variance = v; });
}

void study_options(Sub& s) {
  s.flags.add<std::size_t>(s.app, "--replications", "simulated datasets per sample size",
                           [](auto& c, std::size_t v) { c.replications = v; });
  s.flags.add<std::vector<std::size_t>>(s.app, "--sizes", "sample sizes",
                                        [](auto& c, const auto& v) { c.sample_sizes = v; });
  s.flags.add<std::size_t>(s.app, "--sim-burn-in", "discarded simulation prefix",
                           [](auto& c, std::size_t v) { c.sim_burn_in = v; });
}

Sub make_sub(CLI::App& app, const std::string& name, const std::string& kind,
             const std::string& help) {
  Sub s{app.add_subcommand(name, help), kind};
  s.app->add_option("--config", *s.config, "config or manifest JSON; flags override it");
  s.flags.add<std::string>(s.app, "--out", "output directory",
                           [](auto& c, const std::string& v) { c.output_dir = v; });
  s.flags.add<std::uint64_t>(s.app, "--seed", "random seed",
                             [](auto& c, std::uint64_t v) { c.seed = v; });
  s.flags.add<unsigned>(s.app, "--workers", "threads (0: all cores)",
                        [](auto& c, unsigned v) { c.workers = v; });
  s.flags.add<std::string>(s.app, "--save-config", "also write the effective config here",
                           [](auto&, const std::string&) {});
  return s;
}

int fail(const std::string& type, const std::string& message, int code,
         const std::string& path = {}) {
  json e{{"error", {{"type", type}, {"message", message}}}};
  if (!path.empty()) e["error"]["path"] = path;
  std::cerr << e.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Granger causality in generalized linear models for pairs of time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::vector<Sub> subs;

  {
    auto s = make_sub(app, "run", "", "run the command recorded in a config or manifest");
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "simulate", "simulate", "simulate a bivariate series");
    model_options(s);
    s.flags.add<std::size_t>(s.app, "--n", "series length",
                             [](auto& c, std::size_t v) { c.sample_sizes = {v}; });
    s.flags.add<std::size_t>(s.app, "--sim-burn-in", "discarded simulation prefix",
                             [](auto& c, std::size_t v) { c.sim_burn_in = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "preprocess", "preprocess", "band power and spike counts from a raw recording");
    s.flags.add<std::string>(s.app, "--raw", "CSV with sample,lfp,spike",
                             [](auto& c, const std::string& v) { c.raw = v; });
    s.flags.add<double>(s.app, "--sample-rate", "Hz; default from <raw>.json",
                        [](auto& c, double v) { c.sample_rate = v; });
    s.flags.add<std::string>(s.app, "--band", "delta, theta, alpha, beta, gamma or beta-alt",
                             [](auto& c, const std::string& v) {
                               band_by_name(v);
                               c.band = v;
                             });
    s.flags.add<std::size_t>(s.app, "--window", "samples per window",
                             [](auto& c, std::size_t v) { c.window = v; });
    s.flags.add<std::size_t>(s.app, "--stft-segment", "analysis segment for short-time mode",
                             [](auto& c, std::size_t v) { c.stft_segment = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "fit-mle", "fit-mle", "maximum likelihood fit");
    model_options(s);
    data_option(s);
    fit_options(s);
    s.flags.add<std::size_t>(s.app, "--bootstrap", "parametric bootstrap replicas",
                             [](auto& c, std::size_t v) { c.bootstrap = v; });
    s.flags.add<double>(s.app, "--bootstrap-level", "confidence level of the inclusion rule",
                        [](auto& c, double v) { c.bootstrap_level = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "lr-test", "lr-test", "likelihood ratio test");
    model_options(s);
    data_option(s);
    fit_options(s);
    s.flags.add<std::string>(s.app, "--target", "granger or a parameter name such as rho",
                             [](auto& c, const std::string& v) { c.target = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "fit-bayes", "fit-bayes", "posterior sampling");
    model_options(s);
    data_option(s);
    fit_options(s);
    chain_options(s, true);
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "lag-scan", "lag-scan", "causal lag selection over k_max lags");
    model_options(s);
    data_option(s);
    s.flags.add<std::size_t>(s.app, "--k-max", "lags scanned (default 15)",
                             [](auto& c, std::size_t v) { c.k_max = v; });
    chain_options(s, false);
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "pairwise", "pairwise", "directed tests between count series");
    data_option(s);
    s.flags.add<std::vector<std::string>>(s.app, "--fixed", "parameters held at their initial values",
                                          [](auto& c, const auto& v) { c.fixed = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "study-table1", "table1", "estimation accuracy study");
    model_options(s);
    study_options(s);
    s.flags.add<std::vector<std::string>>(s.app, "--fixed", "parameters held at their initial values",
                                          [](auto& c, const auto& v) { c.fixed = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "study-table2", "table2", "LR test size study");
    model_options(s);
    study_options(s);
    s.flags.add<std::vector<double>>(s.app, "--levels", "nominal levels",
                                     [](auto& c, const auto& v) { c.levels = v; });
    subs.push_back(std::move(s));
  }
  {
    auto s = make_sub(app, "study-spike-slab", "spike-slab", "lag selection / posterior recovery study");
    model_options(s);
    study_options(s);
    s.flags.add<std::size_t>(s.app, "--k-max", "lags in the fitted model (default 5)",
                             [](auto& c, std::size_t v) { c.k_max = v; });
    chain_options(s, true);
    subs.push_back(std::move(s));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("usage", e.what(), 2);
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      ExperimentConfig c;
      if (!s.config->empty()) c = load_config(*s.config);
      else if (s.kind.empty()) return fail("usage", "run needs --config", 2);
      if (!s.kind.empty()) c.kind = s.kind;
      for (auto& a : s.flags.apply) a(c);
      if (auto* o = s.app->get_option("--save-config"); o->count())
        save_config(o->as<std::string>(), c);
      const auto manifest = execute(c);
      std::cout << (std::filesystem::path(c.output_dir) / "manifest.json").string() << "\n";
      return 0;
    } catch (const IoError& e) {
      return fail("io", e.what(), 4, e.path().string());
    } catch (const SimulationDiverged& e) {
      return fail("numerical", e.what(), 5);
    } catch (const NumericalOverflow& e) {
      return fail("numerical", e.what(), 5);
    } catch (const std::invalid_argument& e) {
      return fail("config", e.what(), 3);
    } catch (const std::domain_error& e) {
      return fail("config", e.what(), 3);
    } catch (const json::exception& e) {
      return fail("config", e.what(), 3);
    } catch (const std::exception& e) {
      return fail("runtime", e.what(), 1);
    }
  }
  return fail("usage", "no command given", 2);
}
