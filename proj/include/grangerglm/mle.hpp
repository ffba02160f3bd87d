#pragma once

// Maximum-likelihood fitting, Hessian standard errors, likelihood-ratio
// Granger tests and the parametric-bootstrap inclusion procedure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "grangerglm/model.hpp"
#include "grangerglm/optimize.hpp"
#include "grangerglm/random.hpp"

namespace grangerglm {

struct FitOptions {
  std::size_t simplex_evaluations = 3000;
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-7;  // on the per-observation objective
  bool standard_errors = true;
  double max_condition = 1e12;
  /// Present the free coordinates to the optimizer in reverse order. Only
  /// useful to check that results do not depend on the flattening order.
  bool reverse_coordinates = false;
};

struct FitResult {
  ModelSpec spec;
  ParamVector theta_hat;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t iterations = 0;
  /// Aligned with parameter_layout(spec); NaN for fixed parameters.
  std::optional<std::vector<double>> std_errors;
  std::optional<double> hessian_condition;
  std::vector<bool> fixed;
  std::vector<std::string> warnings;
};

/// Intercepts at link(sample mean), autoregressive and feedback coefficients
/// at 0.1, causal terms (gamma, rho) at 0 and free dispersions by moments.
inline ParamVector default_init(const LikelihoodKernel& kernel) {
  const auto& spec = kernel.spec();
  const auto& data = kernel.data();
  ParamVector th = zero_params(spec);
  auto mean_var = [&](const std::vector<double>& y) {
    const std::size_t from = kernel.conditioned();
    const double m = std::accumulate(y.begin() + static_cast<std::ptrdiff_t>(from), y.end(), 0.0) /
                     double(y.size() - from);
    double v = 0;
    for (std::size_t t = from; t < y.size(); ++t) v += (y[t] - m) * (y[t] - m);
    return std::pair{m, v / std::max<double>(1.0, double(y.size() - from) - 1.0)};
  };
  auto intercept = [](Family f, Link l, double m) {
    if (f == Family::bernoulli) m = std::clamp(m, 0.01, 0.99);
    if (l == Link::log) m = std::max(m, 0.01);
    return link_apply(l, m);
  };
  auto dispersion = [](Family f, double m, double v) {
    if (f == Family::gamma) return std::clamp(v / (m * m), 1e-3, 1e3);
    if (f == Family::gaussian) return std::max(v, 1e-6);
    return 1.0;
  };
  const auto [m1, v1] = mean_var(data.y1);
  const auto [m2, v2] = mean_var(data.y2);
  th.beta1[0] = intercept(spec.family1, spec.link1.link, m1);
  th.beta2[0] = intercept(spec.family2, spec.link2.link, m2);
  for (std::size_t i = 1; i < th.beta1.size(); ++i) th.beta1[i] = 0.1;
  for (std::size_t i = 1; i < th.beta2.size(); ++i) th.beta2[i] = 0.1;
  std::fill(th.alpha1.begin(), th.alpha1.end(), 0.1);
  std::fill(th.alpha2.begin(), th.alpha2.end(), 0.1);
  th.phi1 = dispersion(spec.family1, m1, v1);
  th.phi2 = dispersion(spec.family2, m2, v2);
  return th;
}

namespace detail {

struct BlockFit {
  bool converged = true;
  std::size_t iterations = 0;
  bool se_ok = true;
  double condition = 1.0;
};

inline double block_loglik(const LikelihoodKernel& kernel, const ParamVector& th, bool causal) {
  return causal ? kernel.ell1(th) : kernel.ell2(th);
}

/// Maximizes the causal or caused partial log-likelihood over the free
/// slots of that block, in place. The two blocks share no parameters, so
/// the joint maximizer is the pair of block maximizers.
inline BlockFit fit_block(const LikelihoodKernel& kernel, ParamVector& th,
                          const std::vector<ParamSlot>& layout, const std::vector<bool>& fixed,
                          bool causal, const FitOptions& opt, std::vector<double>* se) {
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].causal_block == causal && !fixed[i]) free.push_back(i);
  if (opt.reverse_coordinates) std::reverse(free.begin(), free.end());
  BlockFit out;
  if (free.empty()) return out;

  const double scale = 1.0 / double(kernel.scored());
  auto to_x = [&](const ParamVector& p) {
    std::vector<double> x(free.size());
    for (std::size_t j = 0; j < free.size(); ++j) {
      const double v = slot_value(p, layout[free[j]]);
      x[j] = layout[free[j]].positive ? std::log(v) : v;
    }
    return x;
  };
  auto from_x = [&](const std::vector<double>& x, ParamVector& p) {
    for (std::size_t j = 0; j < free.size(); ++j)
      slot_ref(p, layout[free[j]]) = layout[free[j]].positive ? std::exp(x[j]) : x[j];
  };
  ParamVector work = th;
  const optimize::Objective f = [&](const std::vector<double>& x) {
    from_x(x, work);
    const double v = block_loglik(kernel, work, causal);
    return std::isfinite(v) ? -v * scale : std::numeric_limits<double>::infinity();
  };

  std::vector<double> x = to_x(th);
  optimize::SimplexOptions sopt;
  sopt.max_evaluations = opt.simplex_evaluations;
  auto nm = optimize::nelder_mead(f, x, sopt);
  if (nm.value <= f(x)) x = nm.x;
  optimize::BfgsOptions bopt;
  bopt.max_iterations = opt.max_iterations;
  bopt.gradient_tolerance = opt.gradient_tolerance;
  auto res = optimize::bfgs(f, x, bopt);
  out.iterations = nm.iterations + res.iterations;
  // Polish: restart from any improving coordinate perturbation of 1e-3 on
  // the natural scale.
  for (int round = 0; round < 5; ++round) {
    from_x(res.x, work);
    const double base = block_loglik(kernel, work, causal);
    ParamVector probe = work;
    std::optional<ParamVector> better;
    double best = base;
    for (std::size_t j = 0; j < free.size(); ++j) {
      for (double d : {-1e-3, 1e-3}) {
        probe = work;
        double& v = slot_ref(probe, layout[free[j]]);
        v += d;
        if (layout[free[j]].positive && !(v > 0)) continue;
        const double ll = block_loglik(kernel, probe, causal);
        if (ll > best + 1e-7) {
          best = ll;
          better = probe;
        }
      }
    }
    if (!better) break;
    auto again = optimize::bfgs(f, to_x(*better), bopt);
    out.iterations += again.iterations;
    if (again.value < res.value) res = again;
    else break;
  }
  from_x(res.x, th);
  out.converged = res.converged && std::isfinite(res.value);

  if (se) {
    // Numerical Hessian of the block log-likelihood on the natural scale.
    const std::size_t d = free.size();
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j)
      h[j] = 1e-4 * std::max(1.0, std::abs(slot_value(th, layout[free[j]])));
    auto eval = [&](std::size_t a, double da, std::size_t b, double db) {
      ParamVector p = th;
      slot_ref(p, layout[free[a]]) += da;
      slot_ref(p, layout[free[b]]) += db;
      return block_loglik(kernel, p, causal);
    };
    const double f0 = block_loglik(kernel, th, causal);
    Eigen::MatrixXd H(d, d);
    for (std::size_t a = 0; a < d; ++a) {
      H(a, a) = (eval(a, h[a], a, 0) - 2 * f0 + eval(a, -h[a], a, 0)) / (h[a] * h[a]);
      for (std::size_t b = 0; b < a; ++b) {
        const double v = (eval(a, h[a], b, h[b]) - eval(a, h[a], b, -h[b]) -
                          eval(a, -h[a], b, h[b]) + eval(a, -h[a], b, -h[b])) /
                         (4 * h[a] * h[b]);
        H(a, b) = H(b, a) = v;
      }
    }
    const Eigen::MatrixXd info = -H;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    out.condition = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!info.allFinite() || !(lo > 0) || out.condition > opt.max_condition) {
      out.se_ok = false;
    } else {
      const Eigen::MatrixXd cov =
          eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
          eig.eigenvectors().transpose();
      for (std::size_t j = 0; j < d; ++j) (*se)[free[j]] = std::sqrt(cov(j, j));
    }
  }
  return out;
}

inline void merge(FitResult& fit, const BlockFit& b) {
  fit.converged = fit.converged && b.converged;
  fit.iterations += b.iterations;
}

inline void finish(FitResult& fit, const LikelihoodKernel& kernel,
                   const std::vector<std::optional<BlockFit>>& blocks,
                   std::vector<double>& se, bool want_se) {
  fit.loglik = log_likelihood(kernel, fit.theta_hat).ell;
  if (!fit.converged) fit.warnings.push_back("optimizer did not converge; returning best point");
  if (!want_se) return;
  bool ok = true;
  double cond = 1.0;
  for (const auto& b : blocks)
    if (b) {
      ok = ok && b->se_ok;
      cond = std::max(cond, b->condition);
    }
  fit.hessian_condition = cond;
  if (ok) fit.std_errors = std::move(se);
  else fit.warnings.push_back("singular or ill-conditioned Hessian (condition " +
                              std::to_string(cond) + "); standard errors omitted");
}

}  // namespace detail

/// Maximizes ell over the parameters not frozen by `fixed_mask` (aligned
/// with parameter_layout; frozen entries keep their init values).
inline FitResult fit_mle(const LikelihoodKernel& kernel, std::optional<ParamVector> init = {},
                         const FitOptions& opt = {}, std::vector<bool> fixed_mask = {}) {
  const auto& spec = kernel.spec();
  const auto layout = parameter_layout(spec);
  if (fixed_mask.empty()) fixed_mask.assign(layout.size(), false);
  if (fixed_mask.size() != layout.size())
    throw std::invalid_argument("fixed mask has " + std::to_string(fixed_mask.size()) +
                                " entries, layout has " + std::to_string(layout.size()));
  ParamVector th = init ? *init : default_init(kernel);
  check_params(spec, th);
  if (!(th.phi1 > 0) || !(th.phi2 > 0))
    throw std::invalid_argument("initial dispersions must be positive");

  // A block whose start is not finite restarts from the default values.
  for (bool causal : {true, false}) {
    if (std::isfinite(detail::block_loglik(kernel, th, causal))) continue;
    const ParamVector fallback = default_init(kernel);
    for (std::size_t i = 0; i < layout.size(); ++i)
      if (layout[i].causal_block == causal && !fixed_mask[i])
        slot_ref(th, layout[i]) = slot_value(fallback, layout[i]);
    if (!std::isfinite(detail::block_loglik(kernel, th, causal)))
      throw std::runtime_error(std::string("no finite starting point for the ") +
                               (causal ? "causal" : "caused") + " block");
  }

  FitResult fit;
  fit.spec = spec;
  fit.fixed = fixed_mask;
  fit.converged = true;
  std::vector<double> se(layout.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::optional<detail::BlockFit>> blocks;
  for (bool causal : {true, false}) {
    auto b = detail::fit_block(kernel, th, layout, fixed_mask, causal, opt,
                               opt.standard_errors ? &se : nullptr);
    detail::merge(fit, b);
    blocks.push_back(b);
  }
  fit.theta_hat = th;
  detail::finish(fit, kernel, blocks, se, opt.standard_errors);
  return fit;
}

inline FitResult fit_mle(const ModelSpec& spec, const BivariateSeries& data,
                         std::optional<ParamVector> init = {}, const FitOptions& opt = {},
                         std::vector<bool> fixed_mask = {}) {
  return fit_mle(LikelihoodKernel(spec, data), std::move(init), opt, std::move(fixed_mask));
}

// ---------------------------------------------------------------------------
// likelihood-ratio tests

inline constexpr double kLrNegativeTolerance = 1e-4;
inline constexpr std::size_t kSmallSampleWarning = 1000;

struct TestOptions {
  FitOptions fit;
  std::optional<ParamVector> init;
  /// Parameters frozen at their init values in both fits.
  std::vector<bool> fixed;
  std::string cause = "y1";
  std::string effect = "y2";
};

struct TestReport {
  std::string cause = "y1", effect = "y2";
  std::vector<std::string> tested;  // parameter names set to 0 under the null
  double lr_stat = 0.0;
  double lr_raw = 0.0;  // before clipping at zero
  int df = 0;
  double p_value = 1.0;
  FitResult fit_null, fit_alt;
  bool convergence_defect = false;
  std::vector<std::string> warnings;
};

inline double chi_square_upper_tail(double x, int df) {
  if (df <= 0) return 1.0;
  if (!(x > 0)) return 1.0;
  boost::math::chi_squared_distribution<double> d(df);
  return boost::math::cdf(boost::math::complement(d, x));
}

/// LR test of theta[slot] = 0 for every slot named in `null_names`.
inline TestReport lr_test(const LikelihoodKernel& kernel, const std::vector<std::string>& null_names,
                          const TestOptions& opt = {}) {
  const auto& spec = kernel.spec();
  const auto layout = parameter_layout(spec);
  std::vector<bool> alt_mask = opt.fixed.empty() ? std::vector<bool>(layout.size(), false) : opt.fixed;
  if (alt_mask.size() != layout.size())
    throw std::invalid_argument("fixed mask does not match the parameter layout");
  std::vector<std::size_t> targets;
  for (const auto& name : null_names) {
    const auto idx = find_slot(layout, name);
    if (!idx) throw std::invalid_argument("parameter not found: " + name);
    if (layout[*idx].causal_block)
      throw std::invalid_argument("only caused-block parameters can be tested: " + name);
    targets.push_back(*idx);
  }

  TestReport rep;
  rep.cause = opt.cause;
  rep.effect = opt.effect;
  rep.tested = null_names;
  ParamVector init = opt.init ? *opt.init : default_init(kernel);
  rep.fit_alt = fit_mle(kernel, init, opt.fit, alt_mask);

  std::vector<bool> null_mask = alt_mask;
  ParamVector null_init = rep.fit_alt.theta_hat;
  for (std::size_t i : targets) {
    if (!alt_mask[i]) ++rep.df;
    null_mask[i] = true;
    slot_ref(null_init, layout[i]) = 0.0;
  }
  // The causal block does not involve the tested parameters; reuse its fit.
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].causal_block) null_mask[i] = true;
  rep.fit_null = fit_mle(kernel, null_init, opt.fit, null_mask);
  rep.fit_null.fixed = alt_mask;
  for (std::size_t i : targets) rep.fit_null.fixed[i] = true;
  if (rep.fit_null.std_errors && rep.fit_alt.std_errors)
    for (std::size_t i = 0; i < layout.size(); ++i)
      if (layout[i].causal_block) (*rep.fit_null.std_errors)[i] = (*rep.fit_alt.std_errors)[i];
  rep.fit_null.converged = rep.fit_null.converged && rep.fit_alt.converged;

  if (rep.df == 0) {
    rep.fit_null = rep.fit_alt;
    rep.lr_stat = rep.lr_raw = 0.0;
    rep.p_value = 1.0;
    return rep;
  }
  if (rep.fit_null.loglik > rep.fit_alt.loglik) {
    // The alternative nests the null; restart it from the null optimum.
    auto refit = fit_mle(kernel, rep.fit_null.theta_hat, opt.fit, alt_mask);
    if (refit.loglik > rep.fit_alt.loglik) rep.fit_alt = std::move(refit);
  }
  rep.lr_raw = 2.0 * (rep.fit_alt.loglik - rep.fit_null.loglik);
  rep.lr_stat = std::max(0.0, rep.lr_raw);
  if (rep.lr_raw < -kLrNegativeTolerance) {
    rep.convergence_defect = true;
    rep.warnings.push_back("negative LR statistic " + std::to_string(rep.lr_raw) +
                           " clipped to 0: convergence defect");
  }
  rep.p_value = chi_square_upper_tail(rep.lr_stat, rep.df);
  if (!rep.fit_alt.converged || !rep.fit_null.converged)
    rep.warnings.push_back("a fit did not converge; p-value may be unreliable");
  if (kernel.size() < kSmallSampleWarning)
    rep.warnings.push_back("n = " + std::to_string(kernel.size()) +
                           " < 1000: the LR test is poorly calibrated at this sample size "
                           "(over-rejects at n = 500)");
  return rep;
}

/// Full Granger test: gamma_1..gamma_k = 0 and rho = 0, df = k + 1.
inline TestReport lr_granger_test(const LikelihoodKernel& kernel, const TestOptions& opt = {}) {
  std::vector<std::string> names;
  for (std::size_t l = 1; l <= kernel.spec().orders.k; ++l)
    names.push_back("gamma_" + std::to_string(l));
  names.push_back("rho");
  return lr_test(kernel, names, opt);
}

inline TestReport lr_granger_test(const ModelSpec& spec, const BivariateSeries& data,
                                  const TestOptions& opt = {}) {
  return lr_granger_test(LikelihoodKernel(spec, data), opt);
}

/// Single-parameter test; `target` is "rho" or "gamma_<l>".
inline TestReport lr_scalar_test(const LikelihoodKernel& kernel, const std::string& target,
                                 const TestOptions& opt = {}) {
  if (target != "rho" && target.rfind("gamma_", 0) != 0)
    throw std::invalid_argument("test target must be rho or gamma_<lag>, got " + target);
  return lr_test(kernel, {target}, opt);
}

inline TestReport lr_scalar_test(const ModelSpec& spec, const BivariateSeries& data,
                                 const std::string& target, const TestOptions& opt = {}) {
  return lr_scalar_test(LikelihoodKernel(spec, data), target, opt);
}

// ---------------------------------------------------------------------------
// parametric bootstrap

struct BootstrapResult {
  std::vector<double> inclusion;  // per gamma lag
  std::size_t requested = 0, used = 0, dropped = 0;
};

inline constexpr double kBootstrapMaxDropped = 0.2;

/// For each replica: simulate n points from the fitted theta, refit and count
/// gamma_l as included when its Wald interval at `level` excludes zero.
inline BootstrapResult bootstrap_inclusion(const FitResult& fit, std::size_t n, std::size_t B,
                                           double level, std::uint64_t seed,
                                           unsigned workers = 1, const FitOptions& opt = {}) {
  if (B < 1) throw std::invalid_argument("bootstrap needs B >= 1 replicas");
  if (!fit.converged) throw std::invalid_argument("bootstrap needs a converged fit");
  if (!(level > 0 && level < 1)) throw std::invalid_argument("level must lie in (0, 1)");
  const auto& spec = fit.spec;
  const auto layout = parameter_layout(spec);
  const std::size_t k = spec.orders.k;
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(),
                                         0.5 + level / 2.0);
  std::vector<std::vector<int>> hits(B);
  std::vector<char> ok(B, 0);
  FitOptions o = opt;
  o.standard_errors = true;
  parallel_for(B, workers, [&](std::size_t b) {
    auto rng = make_stream(seed, b);
    try {
      const auto sim = simulate(spec, fit.theta_hat, n, kDefaultBurnIn, rng);
      const auto refit = fit_mle(spec, sim, fit.theta_hat, o, fit.fixed);
      if (!refit.converged || !refit.std_errors) return;
      std::vector<int> inc(k, 0);
      for (std::size_t l = 0; l < k; ++l) {
        const auto idx = find_slot(layout, "gamma_" + std::to_string(l + 1));
        const double se = (*refit.std_errors)[*idx];
        inc[l] = std::abs(refit.theta_hat.gamma[l]) > z * se ? 1 : 0;
      }
      hits[b] = std::move(inc);
      ok[b] = 1;
    } catch (const SimulationDiverged&) {
    } catch (const NumericalOverflow&) {
    }
  });
  BootstrapResult out;
  out.requested = B;
  out.inclusion.assign(k, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    if (!ok[b]) {
      ++out.dropped;
      continue;
    }
    ++out.used;
    for (std::size_t l = 0; l < k; ++l) out.inclusion[l] += hits[b][l];
  }
  if (double(out.dropped) > kBootstrapMaxDropped * double(B))
    throw std::runtime_error("bootstrap dropped " + std::to_string(out.dropped) + " of " +
                             std::to_string(B) + " replicas (limit 20%)");
  for (auto& v : out.inclusion) v /= double(out.used);
  return out;
}

}  // namespace grangerglm
