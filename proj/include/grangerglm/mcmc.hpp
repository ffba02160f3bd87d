#pragma once

// Single-site Metropolis-Hastings for the Granger-GLM with optional Dirac
// spike-and-slab selection of the causal lags.
//
// The likelihood is any type with
//   double ell1(const ParamVector&) const;
//   double ell2(const ParamVector&, std::span<const int> delta) const;
// LikelihoodKernel is the production implementation; tests plug in toys.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "grangerglm/mle.hpp"
#include "grangerglm/model.hpp"
#include "grangerglm/random.hpp"

namespace grangerglm {

template <class T>
concept LikelihoodTarget = requires(const T& t, const ParamVector& th, std::span<const int> d) {
  { t.ell1(th) } -> std::convertible_to<double>;
  { t.ell2(th, d) } -> std::convertible_to<double>;
};

struct PriorSpec {
  /// Normal prior variances aligned with parameter_layout; empty means
  /// default_tau2 everywhere. Dispersion and gamma entries are ignored.
  std::vector<double> tau2;
  double default_tau2 = 100.0;
  double phi_variance = 100.0;  // truncated normal on (0, inf), mean 0
  double slab_variance = 100.0;
  double a = 1.0, b = 1.0;

  double variance(std::size_t slot) const { return tau2.empty() ? default_tau2 : tau2.at(slot); }
};

/// Log prior density of one coordinate, up to a constant.
inline double log_prior(const PriorSpec& pr, const ParamSlot& s, std::size_t slot, double v) {
  if (s.positive) {
    if (!(v > 0)) return -std::numeric_limits<double>::infinity();
    return -v * v / (2 * pr.phi_variance);
  }
  const double var = s.role == Role::gamma ? pr.slab_variance : pr.variance(slot);
  return std::isinf(var) ? 0.0 : -v * v / (2 * var);
}

/// How gamma_l is treated while delta_l = 0.
///  retain: gamma_l keeps its last sampled value; delta_l is drawn from the
///    likelihood ratio alone.
///  pseudo_prior: gamma_l is refreshed from a pseudo-prior N(mean_l, sd_l)
///    before each delta_l draw and the slab/pseudo-prior density ratio enters
///    the inclusion odds (Gibbs variable selection). Both toggles still use
///    the current gamma_l.
enum class ExcludedLags { retain, pseudo_prior };

struct PseudoPrior {
  std::vector<double> mean, sd;  // per lag
  double slab_variance = 100.0;
};

struct ChainState {
  ParamVector theta;
  std::vector<int> delta;  // k_max entries; 1 = lag included
  double omega = 0.5;
  std::vector<double> scales;  // proposal sd per layout slot (log scale for dispersions)
  std::vector<std::size_t> accepted, proposed;  // lifetime tallies per slot
  std::vector<std::size_t> window_accepted, window_proposed;
  double ell1 = 0.0, ell2 = 0.0;  // cached at the current theta/delta
  std::size_t numerical_failures = 0;  // NaN likelihoods
  std::size_t delta_undetermined = 0;
  bool adaptation_frozen = false;
  ExcludedLags excluded = ExcludedLags::retain;
  PseudoPrior pseudo;
};

/// Fresh state at `theta`; all lags included, scales at `initial_scale`.
template <LikelihoodTarget Target>
ChainState make_state(const ModelSpec& spec, const Target& target, ParamVector theta,
                      double initial_scale = 0.1) {
  check_params(spec, theta);
  const std::size_t d = parameter_layout(spec).size();
  ChainState st;
  st.theta = std::move(theta);
  st.delta.assign(spec.orders.k, 1);
  st.scales.assign(d, initial_scale);
  st.accepted.assign(d, 0);
  st.proposed.assign(d, 0);
  st.window_accepted.assign(d, 0);
  st.window_proposed.assign(d, 0);
  st.ell1 = target.ell1(st.theta);
  st.ell2 = target.ell2(st.theta, st.delta);
  if (!std::isfinite(st.ell1) || !std::isfinite(st.ell2))
    throw std::invalid_argument("initial state has a non-finite likelihood");
  return st;
}

namespace detail {

template <LikelihoodTarget Target, class RngT>
void mh_block(ChainState& st, const ModelSpec& spec, const Target& target, const PriorSpec& pr,
              RngT& rng, bool causal) {
  const auto layout = parameter_layout(spec);
  boost::random::normal_distribution<double> norm;
  boost::random::uniform_01<double> unif;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& s = layout[i];
    if (s.causal_block != causal) continue;
    if (s.role == Role::gamma && !st.delta.empty() && st.delta[s.index] == 0) continue;
    double& v = slot_ref(st.theta, s);
    const double old = v;
    double log_ratio = 0.0;
    const double z = norm(rng);
    if (s.positive) {
      v = old * std::exp(st.scales[i] * z);
      log_ratio += std::log(v / old);  // log-normal proposal asymmetry
    } else {
      v = old + st.scales[i] * z;
    }
    ++st.proposed[i];
    ++st.window_proposed[i];
    const double ell = causal ? target.ell1(st.theta) : target.ell2(st.theta, st.delta);
    if (!std::isfinite(ell)) {  // zero density or an explosive recursion: reject
      if (std::isnan(ell)) ++st.numerical_failures;
      v = old;
      continue;
    }
    const double cur = causal ? st.ell1 : st.ell2;
    log_ratio += ell - cur + log_prior(pr, s, i, v) - log_prior(pr, s, i, old);
    if (log_ratio >= 0 || std::log(unif(rng)) < log_ratio) {
      (causal ? st.ell1 : st.ell2) = ell;
      ++st.accepted[i];
      ++st.window_accepted[i];
    } else {
      v = old;
    }
  }
}

}  // namespace detail

/// One sweep over (beta1, alpha1, phi1) using ell1 only.
template <LikelihoodTarget Target, class RngT>
void mh_update_theta1(ChainState& st, const ModelSpec& spec, const Target& target,
                      const PriorSpec& pr, RngT& rng) {
  detail::mh_block(st, spec, target, pr, rng, true);
}

/// One sweep over (beta2, alpha2, gamma, rho, phi2) with the delta-masked
/// ell2; gamma_l with delta_l = 0 is skipped.
template <LikelihoodTarget Target, class RngT>
void mh_update_theta2(ChainState& st, const ModelSpec& spec, const Target& target,
                      const PriorSpec& pr, RngT& rng) {
  detail::mh_block(st, spec, target, pr, rng, false);
}

/// omega ~ Beta(a + sum delta, b + k_max - sum delta).
template <class RngT>
double gibbs_update_omega(std::span<const int> delta, double a, double b, RngT& rng) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("Beta hyperparameters must be positive");
  double on = 0;
  for (int d : delta) on += d;
  boost::random::beta_distribution<double> beta(a + on, b + double(delta.size()) - on);
  return beta(rng);
}

/// P(delta_i = 1 | rest) from the two toggled log-likelihoods, plus an
/// optional log density ratio between the inclusion and exclusion priors.
inline double inclusion_probability(double omega, double ell_on, double ell_off,
                                    double log_prior_ratio = 0.0) {
  if (omega >= 1.0) return 1.0;
  if (omega <= 0.0) return 0.0;
  if (ell_on == ell_off && log_prior_ratio == 0.0) return omega;
  // p = 1 / (1 + exp(d)), evaluated on the side that cannot overflow
  const double d =
      (std::log1p(-omega) + ell_off) - (std::log(omega) + ell_on + log_prior_ratio);
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

/// Sequential sweep over delta_1..delta_kmax. gamma_i keeps its value in
/// both toggles.
template <LikelihoodTarget Target, class RngT>
void gibbs_update_delta(ChainState& st, const Target& target, RngT& rng) {
  if (st.delta.empty()) throw std::invalid_argument("delta update needs k_max >= 1");
  boost::random::uniform_01<double> unif;
  boost::random::normal_distribution<double> norm;
  const bool pseudo = st.excluded == ExcludedLags::pseudo_prior;
  if (pseudo && (st.pseudo.mean.size() != st.delta.size() || st.pseudo.sd.size() != st.delta.size()))
    throw std::invalid_argument("pseudo-prior needs one mean and sd per lag");
  auto log_normal = [](double x, double m, double var) {
    return -0.5 * std::log(2 * M_PI * var) - (x - m) * (x - m) / (2 * var);
  };
  for (std::size_t i = 0; i < st.delta.size(); ++i) {
    const int cur = st.delta[i];
    double log_ratio = 0.0;
    if (pseudo) {
      const double m = st.pseudo.mean[i], sd = st.pseudo.sd[i];
      // ell2 does not depend on an excluded gamma_i, so the cache stays valid
      if (cur == 0) st.theta.gamma[i] = m + sd * norm(rng);
      const double g = st.theta.gamma[i];
      log_ratio = log_normal(g, 0.0, st.pseudo.slab_variance) - log_normal(g, m, sd * sd);
    }
    st.delta[i] = 1 - cur;
    const double other = target.ell2(st.theta, st.delta);
    st.delta[i] = cur;
    const double ell_on = cur ? st.ell2 : other;
    const double ell_off = cur ? other : st.ell2;
    if (!std::isfinite(ell_on) && !std::isfinite(ell_off)) {
      ++st.delta_undetermined;
      continue;
    }
    const double p = inclusion_probability(st.omega, ell_on, ell_off, log_ratio);
    const int next = unif(rng) < p ? 1 : 0;
    if (next != cur) {
      st.delta[i] = next;
      st.ell2 = other;
    }
  }
}

inline constexpr double kTargetAcceptance = 0.44;
inline constexpr std::size_t kAdaptBatch = 50;

/// log sigma += (window rate - 0.44) / sqrt(batch_index) per coordinate.
/// Returns false (and changes nothing) once adaptation has been frozen.
inline bool adapt_scales(ChainState& st, std::size_t batch_index,
                         double target = kTargetAcceptance) {
  if (st.adaptation_frozen) return false;
  const double eta = 1.0 / std::sqrt(double(std::max<std::size_t>(1, batch_index)));
  for (std::size_t i = 0; i < st.scales.size(); ++i) {
    if (st.window_proposed[i] == 0) continue;
    const double rate = double(st.window_accepted[i]) / double(st.window_proposed[i]);
    st.scales[i] *= std::exp(eta * (rate - target));
    st.window_accepted[i] = st.window_proposed[i] = 0;
  }
  return true;
}

struct ChainConfig {
  std::size_t iterations = 11000;  // including burn-in
  std::size_t burn_in = 1000;
  std::size_t thinning = 1;
  bool spike_slab = false;
  std::uint64_t seed = 0;
  std::optional<ParamVector> init;  // default: MLE
  double initial_scale = 0.1;
  double max_failure_rate = 0.01;
  ExcludedLags excluded = ExcludedLags::pseudo_prior;
  /// Pseudo-prior moments per lag; the data entry point fills them from the
  /// MLE when empty, the generic one falls back to N(0, 0.1^2).
  std::vector<double> pseudo_mean, pseudo_sd;
};

struct PosteriorSamples {
  std::vector<std::string> names;  // parameter_layout order
  std::vector<std::vector<double>> draws;
  std::vector<std::vector<int>> delta;
  std::vector<double> omega;
  std::size_t burn_in = 0, thinning = 1, iterations = 0;
  bool spike_slab = false;
  std::vector<double> acceptance_rates;  // post burn-in, per parameter
  std::vector<std::string> diagnostics;
};

/// Algorithm order per iteration: theta1 MH, omega, delta, theta2 MH.
template <LikelihoodTarget Target>
PosteriorSamples run_chain(const ModelSpec& spec, const Target& target, const PriorSpec& pr,
                           const ChainConfig& cfg, ParamVector init,
                           std::vector<double> initial_scales = {}) {
  if (cfg.iterations <= cfg.burn_in)
    throw std::invalid_argument("iterations must exceed burn_in");
  if (cfg.thinning < 1) throw std::invalid_argument("thinning must be >= 1");
  const auto layout = parameter_layout(spec);
  auto rng = make_stream(cfg.seed, 0x6d636d63);
  ChainState st = make_state(spec, target, std::move(init), cfg.initial_scale);
  if (!initial_scales.empty()) st.scales = initial_scales;
  const bool select = cfg.spike_slab && spec.orders.k > 0;
  st.excluded = cfg.excluded;
  st.pseudo.slab_variance = pr.slab_variance;
  st.pseudo.mean = cfg.pseudo_mean.empty() ? std::vector<double>(spec.orders.k, 0.0) : cfg.pseudo_mean;
  st.pseudo.sd = cfg.pseudo_sd.empty() ? std::vector<double>(spec.orders.k, 0.1) : cfg.pseudo_sd;

  PosteriorSamples out;
  for (const auto& s : layout) out.names.push_back(s.name);
  out.burn_in = cfg.burn_in;
  out.thinning = cfg.thinning;
  out.iterations = cfg.iterations;
  out.spike_slab = select;
  std::vector<std::size_t> acc0, prop0;
  std::size_t failing_iterations = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::size_t fails_before = st.numerical_failures;
    mh_update_theta1(st, spec, target, pr, rng);
    if (select) {
      st.omega = gibbs_update_omega(st.delta, pr.a, pr.b, rng);
      gibbs_update_delta(st, target, rng);
    }
    mh_update_theta2(st, spec, target, pr, rng);
    if (st.numerical_failures != fails_before) ++failing_iterations;

    if (it < cfg.burn_in && (it + 1) % kAdaptBatch == 0)
      adapt_scales(st, (it + 1) / kAdaptBatch);
    if (it + 1 == cfg.burn_in) {
      st.adaptation_frozen = true;
      acc0 = st.accepted;
      prop0 = st.proposed;
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0) {
      std::vector<double> row(layout.size());
      for (std::size_t i = 0; i < layout.size(); ++i) {
        row[i] = slot_value(st.theta, layout[i]);
        if (layout[i].role == Role::gamma && st.delta[layout[i].index] == 0) row[i] = 0.0;
      }
      out.draws.push_back(std::move(row));
      out.delta.push_back(st.delta);
      out.omega.push_back(select ? st.omega : 1.0);
    }
  }
  if (acc0.empty()) {
    acc0.assign(layout.size(), 0);
    prop0.assign(layout.size(), 0);
  }
  out.acceptance_rates.resize(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto p = st.proposed[i] - prop0[i];
    out.acceptance_rates[i] = p ? double(st.accepted[i] - acc0[i]) / double(p) : 0.0;
  }
  if (double(failing_iterations) > cfg.max_failure_rate * double(cfg.iterations))
    throw std::runtime_error("chain aborted: " + std::to_string(failing_iterations) + " of " +
                             std::to_string(cfg.iterations) +
                             " iterations produced a NaN likelihood");
  if (failing_iterations)
    out.diagnostics.push_back(std::to_string(failing_iterations) +
                              " iterations produced a NaN likelihood");
  if (st.delta_undetermined)
    out.diagnostics.push_back(std::to_string(st.delta_undetermined) +
                              " delta updates left unchanged (both toggles non-finite)");
  return out;
}

/// Production entry point: starts from the MLE (unless cfg.init is set) with
/// proposal sds at 2.4 standard errors; the gamma pseudo-prior defaults to
/// N(MLE, SE^2).
inline PosteriorSamples run_chain(const ModelSpec& spec, const BivariateSeries& data,
                                  const PriorSpec& pr = {}, const ChainConfig& cfg = {}) {
  const LikelihoodKernel kernel(spec, data);
  ChainConfig c = cfg;
  const bool need_pseudo = c.spike_slab && c.excluded == ExcludedLags::pseudo_prior &&
                           (c.pseudo_mean.empty() || c.pseudo_sd.empty());
  ParamVector init;
  std::vector<double> scales;
  if (!c.init || need_pseudo) {
    const auto fit = fit_mle(kernel);
    const auto layout = parameter_layout(spec);
    if (need_pseudo) {
      c.pseudo_mean = fit.theta_hat.gamma;
      c.pseudo_sd.assign(spec.orders.k, 0.1);
      if (fit.std_errors)
        for (std::size_t l = 0; l < spec.orders.k; ++l) {
          const double se = (*fit.std_errors)[*find_slot(layout, "gamma_" + std::to_string(l + 1))];
          if (std::isfinite(se) && se > 0) c.pseudo_sd[l] = se;
        }
    }
    if (!c.init) {
      init = fit.theta_hat;
      if (fit.std_errors) {
        scales.resize(layout.size());
        for (std::size_t i = 0; i < layout.size(); ++i) {
          double se = (*fit.std_errors)[i];
          if (layout[i].positive) se /= slot_value(init, layout[i]);  // log scale
          scales[i] = std::isfinite(se) && se > 0 ? std::min(2.4 * se, 1.0) : c.initial_scale;
        }
      }
    }
  }
  if (c.init) init = *c.init;
  return run_chain(spec, kernel, pr, c, std::move(init), std::move(scales));
}

// ---------------------------------------------------------------------------
// summaries

struct ParamSummary {
  std::string name;
  double mean = 0, sd = 0, lo = 0, hi = 0;  // 95% equal-tailed interval
  double prob_negative = 0;
  double acceptance = 0;
};

struct JointEffect {
  std::vector<double> mean, lo, hi;  // pointwise over t = l..n-1
  std::vector<double> histogram_edges;
  std::vector<std::size_t> histogram_counts;  // of the posterior-mean series
};

struct PosteriorSummary {
  std::vector<ParamSummary> params;
  std::vector<double> inclusion;  // P(delta_l = 1)
  double omega_mean = 0;
  std::size_t draws = 0;
  std::optional<JointEffect> joint_effect;
};

/// Equal-tailed quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * double(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - double(i)) * (v[j] - v[i]);
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

}  // namespace detail

/// c_t = h_rho(y1_t) * exp(sum over included l of gamma_l T1(y1_{t-l})),
/// computed for at most `max_draws` evenly spaced draws.
inline JointEffect joint_effect(const PosteriorSamples& s, const ModelSpec& spec,
                                const BivariateSeries& data, std::size_t max_draws = 2000,
                                std::size_t bins = 30) {
  if (s.draws.empty()) throw std::invalid_argument("no posterior draws");
  const auto layout = parameter_layout(spec);
  const auto rho_i = *find_slot(layout, "rho");
  std::vector<std::size_t> gam;
  for (std::size_t l = 1; l <= spec.orders.k; ++l)
    gam.push_back(*find_slot(layout, "gamma_" + std::to_string(l)));
  const std::size_t n = data.size(), lag = spec.orders.max_lag();
  std::vector<double> tr(n);
  for (std::size_t t = 0; t < n; ++t) tr[t] = transform_T(spec.link1, data.y1[t]);
  const std::size_t stride = std::max<std::size_t>(1, s.draws.size() / max_draws);
  std::vector<std::size_t> use;
  for (std::size_t d = 0; d < s.draws.size(); d += stride) use.push_back(d);

  JointEffect je;
  std::vector<double> col(use.size());
  for (std::size_t t = lag; t < n; ++t) {
    for (std::size_t u = 0; u < use.size(); ++u) {
      const auto& row = s.draws[use[u]];
      double z = 0;
      for (std::size_t l = 0; l < gam.size(); ++l) z += row[gam[l]] * tr[t - l - 1];
      col[u] = coupling_h(spec.coupling, row[rho_i], data.y1[t]) * std::exp(z);
    }
    je.mean.push_back(detail::mean_of(col));
    je.lo.push_back(quantile(col, 0.025));
    je.hi.push_back(quantile(col, 0.975));
  }
  const auto [mn, mx] = std::minmax_element(je.mean.begin(), je.mean.end());
  const double lo = *mn, width = (*mx - *mn) > 0 ? (*mx - *mn) / double(bins) : 1.0;
  je.histogram_counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) je.histogram_edges.push_back(lo + width * double(b));
  for (double v : je.mean)
    ++je.histogram_counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))];
  return je;
}

inline PosteriorSummary summarize_posterior(const PosteriorSamples& s) {
  if (s.draws.empty()) throw std::invalid_argument("no posterior draws");
  PosteriorSummary out;
  out.draws = s.draws.size();
  const std::size_t d = s.names.size();
  std::vector<double> col(s.draws.size());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t r = 0; r < s.draws.size(); ++r) col[r] = s.draws[r][i];
    ParamSummary p;
    p.name = s.names[i];
    p.mean = detail::mean_of(col);
    double ss = 0, neg = 0;
    for (double v : col) {
      ss += (v - p.mean) * (v - p.mean);
      neg += v < 0 ? 1 : 0;
    }
    p.sd = col.size() > 1 ? std::sqrt(ss / double(col.size() - 1)) : 0.0;
    p.lo = quantile(col, 0.025);
    p.hi = quantile(col, 0.975);
    p.prob_negative = neg / double(col.size());
    p.acceptance = i < s.acceptance_rates.size() ? s.acceptance_rates[i] : 0.0;
    out.params.push_back(p);
  }
  const std::size_t k = s.delta.empty() ? 0 : s.delta.front().size();
  out.inclusion.assign(k, 0.0);
  for (const auto& row : s.delta)
    for (std::size_t l = 0; l < k; ++l) out.inclusion[l] += row[l];
  for (auto& v : out.inclusion) v /= double(s.delta.size());
  out.omega_mean = s.omega.empty() ? 0.0 : detail::mean_of(s.omega);
  return out;
}

inline PosteriorSummary summarize_posterior(const PosteriorSamples& s, const ModelSpec& spec,
                                            const BivariateSeries& data) {
  auto out = summarize_posterior(s);
  out.joint_effect = joint_effect(s, spec, data);
  return out;
}

}  // namespace grangerglm
