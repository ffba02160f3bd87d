#pragma once

// The bivariate Granger-GLM: specification, parameter layout, recursive
// conditional means, exact conditional log-likelihood and simulation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grangerglm/expfam.hpp"

namespace grangerglm {

struct Orders {
  std::size_t p = 0;  // beta2 lags (caused series on itself)
  std::size_t q = 0;  // alpha2 lags (caused feedback)
  std::size_t r = 0;  // beta1 lags (causal series on itself)
  std::size_t s = 0;  // alpha1 lags (causal feedback)
  std::size_t k = 0;  // gamma lags (causal -> caused)

  std::size_t max_lag() const { return std::max({p, q, r, s, k}); }
  friend bool operator==(const Orders&, const Orders&) = default;
};

/// Series 1 is the causal series, series 2 the caused one.
struct ModelSpec {
  Family family1 = Family::gamma;
  Family family2 = Family::poisson;
  LinkSpec link1{Link::log, Transform::same_as_link};
  LinkSpec link2{Link::log, Transform::log1p};
  Coupling coupling = Coupling::exp;
  Orders orders;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// theta = (beta1, alpha1, phi1, beta2, alpha2, gamma, rho, phi2).
/// beta vectors carry the intercept first; alpha/gamma are indexed by lag.
struct ParamVector {
  std::vector<double> beta1{0.0};
  std::vector<double> alpha1;
  std::vector<double> beta2{0.0};
  std::vector<double> alpha2;
  std::vector<double> gamma;
  double rho = 0.0;
  double phi1 = 1.0;
  double phi2 = 1.0;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// Parameter roles in the documented flattening order.
enum class Role { beta1, alpha1, phi1, beta2, alpha2, gamma, rho, phi2 };

/// One free coordinate of theta. `index` is the position inside its vector.
struct ParamSlot {
  Role role;
  std::size_t index = 0;
  std::string name;
  bool causal_block = true;  // theta1 = (beta1, alpha1, phi1)
  bool positive = false;     // dispersions
};

inline double& slot_ref(ParamVector& th, const ParamSlot& s) {
  switch (s.role) {
    case Role::beta1: return th.beta1[s.index];
    case Role::alpha1: return th.alpha1[s.index];
    case Role::phi1: return th.phi1;
    case Role::beta2: return th.beta2[s.index];
    case Role::alpha2: return th.alpha2[s.index];
    case Role::gamma: return th.gamma[s.index];
    case Role::rho: return th.rho;
    case Role::phi2: return th.phi2;
  }
  return th.rho;
}

inline double slot_value(const ParamVector& th, const ParamSlot& s) {
  return slot_ref(const_cast<ParamVector&>(th), s);
}

/// Free parameters of `spec` in flattening order. Dispersions of
/// fixed-dispersion families are not free and do not appear.
inline std::vector<ParamSlot> parameter_layout(const ModelSpec& spec) {
  std::vector<ParamSlot> out;
  const auto& o = spec.orders;
  for (std::size_t i = 0; i <= o.r; ++i)
    out.push_back({Role::beta1, i, "beta1_" + std::to_string(i), true, false});
  for (std::size_t j = 0; j < o.s; ++j)
    out.push_back({Role::alpha1, j, "alpha1_" + std::to_string(j + 1), true, false});
  if (has_free_dispersion(spec.family1)) out.push_back({Role::phi1, 0, "phi1", true, true});
  for (std::size_t i = 0; i <= o.p; ++i)
    out.push_back({Role::beta2, i, "beta2_" + std::to_string(i), false, false});
  for (std::size_t j = 0; j < o.q; ++j)
    out.push_back({Role::alpha2, j, "alpha2_" + std::to_string(j + 1), false, false});
  for (std::size_t l = 0; l < o.k; ++l)
    out.push_back({Role::gamma, l, "gamma_" + std::to_string(l + 1), false, false});
  out.push_back({Role::rho, 0, "rho", false, false});
  if (has_free_dispersion(spec.family2)) out.push_back({Role::phi2, 0, "phi2", false, true});
  return out;
}

inline std::optional<std::size_t> find_slot(const std::vector<ParamSlot>& layout,
                                            std::string_view name) {
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name == name) return i;
  return std::nullopt;
}

/// Zero-valued theta with vector lengths matching the spec.
inline ParamVector zero_params(const ModelSpec& spec) {
  ParamVector th;
  th.beta1.assign(spec.orders.r + 1, 0.0);
  th.alpha1.assign(spec.orders.s, 0.0);
  th.beta2.assign(spec.orders.p + 1, 0.0);
  th.alpha2.assign(spec.orders.q, 0.0);
  th.gamma.assign(spec.orders.k, 0.0);
  return th;
}

inline std::vector<double> flatten(const ModelSpec& spec, const ParamVector& th) {
  const auto layout = parameter_layout(spec);
  std::vector<double> out;
  out.reserve(layout.size());
  for (const auto& s : layout) out.push_back(slot_value(th, s));
  return out;
}

inline ParamVector unflatten(const ModelSpec& spec, std::span<const double> values) {
  const auto layout = parameter_layout(spec);
  if (values.size() != layout.size())
    throw std::invalid_argument("flat parameter vector has " + std::to_string(values.size()) +
                                " entries, layout expects " + std::to_string(layout.size()));
  ParamVector th = zero_params(spec);
  for (std::size_t i = 0; i < layout.size(); ++i) slot_ref(th, layout[i]) = values[i];
  return th;
}

/// Aligned trajectories; y1 causes y2.
struct BivariateSeries {
  std::vector<double> y1;
  std::vector<double> y2;
  Support support1 = Support::positive_reals;
  Support support2 = Support::nonneg_integers;

  std::size_t size() const { return y1.size(); }
};

/// Throws std::invalid_argument unless `data` can be scored under `spec`.
inline void check_series(const ModelSpec& spec, const BivariateSeries& data) {
  if (data.y1.size() != data.y2.size())
    throw std::invalid_argument("series lengths differ: " + std::to_string(data.y1.size()) +
                                " vs " + std::to_string(data.y2.size()));
  const std::size_t l = spec.orders.max_lag();
  if (data.size() <= l)
    throw std::invalid_argument("series length " + std::to_string(data.size()) +
                                " must exceed the maximal lag " + std::to_string(l));
  if (data.support1 != support_of(spec.family1) || data.support2 != support_of(spec.family2))
    throw std::invalid_argument("series support tags do not match the model families (" +
                                std::string(to_string(data.support1)) + "/" +
                                std::string(to_string(data.support2)) + " vs " +
                                std::string(to_string(support_of(spec.family1))) + "/" +
                                std::string(to_string(support_of(spec.family2))) + ")");
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (!in_support(data.support1, data.y1[t]))
      throw std::invalid_argument("y1[" + std::to_string(t) + "] = " + std::to_string(data.y1[t]) +
                                  " outside its support");
    if (!in_support(data.support2, data.y2[t]))
      throw std::invalid_argument("y2[" + std::to_string(t) + "] = " + std::to_string(data.y2[t]) +
                                  " outside its support");
  }
}

/// Linear predictors and means. Entries before `conditioned` are
/// initialization values (not scored).
struct MeanPaths {
  std::vector<double> nu1, nu2;
  std::vector<double> mu1, mu2;
  std::vector<double> effective_mu2;  // mu2[t] * h_rho(y1[t])
  std::size_t conditioned = 0;
};

/// Thrown when a recursion produces a non-finite value.
class NumericalOverflow : public std::runtime_error {
 public:
  NumericalOverflow(std::size_t t, const std::string& what)
      : std::runtime_error(what + " (first non-finite value at t=" + std::to_string(t) + ")"),
        t_(t) {}
  std::size_t t() const { return t_; }

 private:
  std::size_t t_;
};

class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogLikelihood {
  double ell1 = 0.0;
  double ell2 = 0.0;
  double ell = 0.0;
};

/// Result of one pass over the data: the partial log-likelihood, or the
/// first time index with a non-finite predictor/mean.
struct PassResult {
  double value = 0.0;
  std::ptrdiff_t bad_t = -1;

  bool ok() const { return bad_t < 0; }
};

/// Caches everything about (spec, data) that does not depend on theta.
/// Both partial log-likelihoods are evaluated from here; compute_means,
/// log_likelihood, the MLE objective and the MCMC sweeps all share it.
class LikelihoodKernel {
 public:
  LikelihoodKernel(ModelSpec spec, BivariateSeries data)
      : spec_(std::move(spec)), data_(std::move(data)) {
    check_series(spec_, data_);
    const std::size_t n = data_.size();
    lag_ = spec_.orders.max_lag();
    tr1_.resize(n);
    tr2_.resize(n);
    ycon1_.resize(n);
    ycon2_.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      tr1_[t] = transform_T(spec_.link1, data_.y1[t]);
      tr2_[t] = transform_T(spec_.link2, data_.y2[t]);
      if (!std::isfinite(tr1_[t]) || !std::isfinite(tr2_[t]))
        throw std::domain_error("series transform is not finite at t=" + std::to_string(t));
      ycon1_[t] = detail::y_constant(spec_.family1, data_.y1[t]);
      ycon2_[t] = detail::y_constant(spec_.family2, data_.y2[t]);
    }
    fast2_ = spec_.link2.link == Link::log && spec_.coupling == Coupling::exp;
  }

  const ModelSpec& spec() const { return spec_; }
  const BivariateSeries& data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  /// Number of leading observations conditioned upon.
  std::size_t conditioned() const { return lag_; }
  std::size_t scored() const { return data_.size() - lag_; }
  std::span<const double> transformed1() const { return tr1_; }
  std::span<const double> transformed2() const { return tr2_; }

  /// ell1 over t = l+1..n. Optionally records the paths.
  PassResult causal_pass(const ParamVector& th, MeanPaths* paths = nullptr) const {
    const auto& o = spec_.orders;
    const std::size_t n = data_.size();
    const Family fam = spec_.family1;
    const double phi = effective_dispersion(fam, th.phi1);
    if (!(phi > 0.0)) return {-std::numeric_limits<double>::infinity(), 0};
    const double gnorm = fam == Family::gamma ? std::lgamma(1.0 / phi) : 0.0;
    std::vector<double> nu(n);
    if (paths) {
      paths->nu1.assign(n, 0.0);
      paths->mu1.assign(n, 0.0);
    }
    double ell = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double v;
      if (t < lag_) {
        v = tr1_[t];
      } else {
        v = th.beta1[0];
        for (std::size_t i = 1; i <= o.r; ++i) v += th.beta1[i] * tr1_[t - i];
        for (std::size_t j = 1; j <= o.s; ++j) v += th.alpha1[j - 1] * nu[t - j];
      }
      nu[t] = v;
      const double mu = link_invert(spec_.link1.link, v);
      if (paths) {
        paths->nu1[t] = v;
        paths->mu1[t] = mu;
      }
      if (!std::isfinite(v) || !std::isfinite(mu))
        return {-std::numeric_limits<double>::infinity(), static_cast<std::ptrdiff_t>(t)};
      if (t < lag_) continue;
      ell += density(fam, data_.y1[t], ycon1_[t], mu, phi, gnorm);
    }
    return {ell, -1};
  }

  /// ell2 over t = l+1..n with gamma_l masked by delta_l (all included when
  /// delta is empty).
  PassResult caused_pass(const ParamVector& th, std::span<const int> delta = {},
                         MeanPaths* paths = nullptr) const {
    const auto& o = spec_.orders;
    const std::size_t n = data_.size();
    const Family fam = spec_.family2;
    const double phi = effective_dispersion(fam, th.phi2);
    if (!(phi > 0.0)) return {-std::numeric_limits<double>::infinity(), 0};
    const double gnorm = fam == Family::gamma ? std::lgamma(1.0 / phi) : 0.0;
    std::vector<std::size_t> active;  // unmasked causal lags
    active.reserve(o.k);
    for (std::size_t l = 1; l <= o.k; ++l)
      if (delta.empty() || delta[l - 1] != 0) active.push_back(l);
    std::vector<double> nu(n);
    if (paths) {
      paths->nu2.assign(n, 0.0);
      paths->mu2.assign(n, 0.0);
      paths->effective_mu2.assign(n, 0.0);
    }
    double ell = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double v;
      if (t < lag_) {
        v = tr2_[t];
      } else {
        v = th.beta2[0];
        for (std::size_t i = 1; i <= o.p; ++i) v += th.beta2[i] * tr2_[t - i];
        for (std::size_t j = 1; j <= o.q; ++j) v += th.alpha2[j - 1] * nu[t - j];
        for (std::size_t l : active) v += th.gamma[l - 1] * tr1_[t - l];
      }
      nu[t] = v;
      const double y1 = data_.y1[t];
      double mu, eff, log_eff;
      if (fast2_) {
        const double z = std::min(th.rho * y1, kCouplingLogCap);
        mu = std::exp(v);
        log_eff = th.rho == 0.0 ? v : v + z;
        eff = th.rho == 0.0 ? mu : std::exp(log_eff);
      } else {
        mu = link_invert(spec_.link2.link, v);
        eff = mu * coupling_h(spec_.coupling, th.rho, y1);
        log_eff = std::log(eff);
      }
      if (paths) {
        paths->nu2[t] = v;
        paths->mu2[t] = mu;
        paths->effective_mu2[t] = eff;
      }
      if (!std::isfinite(v) || !std::isfinite(mu) || !std::isfinite(eff))
        return {-std::numeric_limits<double>::infinity(), static_cast<std::ptrdiff_t>(t)};
      if (t < lag_) continue;
      ell += density_log(fam, data_.y2[t], ycon2_[t], eff, log_eff, phi, gnorm);
    }
    return {ell, -1};
  }

  double ell1(const ParamVector& th) const { return causal_pass(th).value; }
  double ell2(const ParamVector& th, std::span<const int> delta = {}) const {
    return caused_pass(th, delta).value;
  }

 private:
  static double density(Family f, double y, double ycon, double mu, double phi, double gnorm) {
    if (!in_mean_domain(f, mu)) return -std::numeric_limits<double>::infinity();
    return detail::log_density_unchecked(f, y, ycon, mu, phi, gnorm);
  }

  // Same as density() but reuses log(mu) where the family needs it.
  static double density_log(Family f, double y, double ycon, double mu, double log_mu, double phi,
                            double gnorm) {
    if (!in_mean_domain(f, mu)) return -std::numeric_limits<double>::infinity();
    switch (f) {
      case Family::poisson: return y * log_mu - mu - ycon;
      case Family::geometric: return y * log_mu - (y + 1.0) * std::log1p(mu);
      case Family::gamma: {
        const double shape = 1.0 / phi;
        return (shape - 1.0) * ycon - y / (mu * phi) - shape * (log_mu + std::log(phi)) - gnorm;
      }
      default: return detail::log_density_unchecked(f, y, ycon, mu, phi, gnorm);
    }
  }

  ModelSpec spec_;
  BivariateSeries data_;
  std::size_t lag_ = 0;
  std::vector<double> tr1_, tr2_, ycon1_, ycon2_;
  bool fast2_ = false;
};

inline void check_params(const ModelSpec& spec, const ParamVector& th) {
  const auto& o = spec.orders;
  auto need = [](const char* what, std::size_t have, std::size_t want) {
    if (have != want)
      throw std::invalid_argument(std::string(what) + " has length " + std::to_string(have) +
                                  ", expected " + std::to_string(want));
  };
  need("beta1", th.beta1.size(), o.r + 1);
  need("alpha1", th.alpha1.size(), o.s);
  need("beta2", th.beta2.size(), o.p + 1);
  need("alpha2", th.alpha2.size(), o.q);
  need("gamma", th.gamma.size(), o.k);
}

inline void check_delta(const ModelSpec& spec, std::span<const int> delta) {
  if (!delta.empty() && delta.size() != spec.orders.k)
    throw std::invalid_argument("delta has length " + std::to_string(delta.size()) +
                                ", expected k = " + std::to_string(spec.orders.k));
}

/// nu/mu paths for both series. Throws NumericalOverflow at the first
/// non-finite intermediate.
inline MeanPaths compute_means(const ModelSpec& spec, const ParamVector& th,
                               const BivariateSeries& data, std::span<const int> delta = {}) {
  check_params(spec, th);
  check_delta(spec, delta);
  LikelihoodKernel kernel(spec, data);
  MeanPaths paths;
  paths.conditioned = kernel.conditioned();
  if (auto r = kernel.causal_pass(th, &paths); !r.ok())
    throw NumericalOverflow(static_cast<std::size_t>(r.bad_t), "causal recursion overflowed");
  if (auto r = kernel.caused_pass(th, delta, &paths); !r.ok())
    throw NumericalOverflow(static_cast<std::size_t>(r.bad_t), "caused recursion overflowed");
  return paths;
}

/// ell = ell1 + ell2, each summed over t = l+1..n. A zero density yields
/// -inf rather than an error; a non-finite recursion throws.
inline LogLikelihood log_likelihood(const LikelihoodKernel& kernel, const ParamVector& th,
                                    std::span<const int> delta = {}) {
  check_params(kernel.spec(), th);
  check_delta(kernel.spec(), delta);
  const auto r1 = kernel.causal_pass(th);
  if (!r1.ok())
    throw NumericalOverflow(static_cast<std::size_t>(r1.bad_t), "causal recursion overflowed");
  const auto r2 = kernel.caused_pass(th, delta);
  if (!r2.ok())
    throw NumericalOverflow(static_cast<std::size_t>(r2.bad_t), "caused recursion overflowed");
  return {r1.value, r2.value, r1.value + r2.value};
}

inline LogLikelihood log_likelihood(const ModelSpec& spec, const ParamVector& th,
                                    const BivariateSeries& data, std::span<const int> delta = {}) {
  return log_likelihood(LikelihoodKernel(spec, data), th, delta);
}

// ---------------------------------------------------------------------------
// validation

struct Diagnostic {
  enum class Severity { warning, error };
  Severity severity = Severity::warning;
  std::string code;
  std::string message;
};

inline std::vector<Diagnostic> validate_spec(const ModelSpec& spec, const ParamVector& th) {
  std::vector<Diagnostic> out;
  auto err = [&](std::string code, std::string msg) {
    out.push_back({Diagnostic::Severity::error, std::move(code), std::move(msg)});
  };
  auto warn = [&](std::string code, std::string msg) {
    out.push_back({Diagnostic::Severity::warning, std::move(code), std::move(msg)});
  };
  const auto& o = spec.orders;
  auto len = [&](const char* what, std::size_t have, std::size_t want) {
    if (have != want)
      err("length-mismatch", std::string(what) + " has length " + std::to_string(have) +
                                 ", orders require " + std::to_string(want));
  };
  len("beta1", th.beta1.size(), o.r + 1);
  len("alpha1", th.alpha1.size(), o.s);
  len("beta2", th.beta2.size(), o.p + 1);
  len("alpha2", th.alpha2.size(), o.q);
  len("gamma", th.gamma.size(), o.k);

  auto dispersion = [&](const char* what, Family f, double phi) {
    if (!has_free_dispersion(f) && phi != 1.0)
      err("fixed-dispersion", std::string(what) + " must be 1 for the " +
                                  std::string(to_string(f)) + " family");
    if (!(phi > 0.0) || !std::isfinite(phi))
      err("dispersion-domain", std::string(what) + " must be positive");
  };
  dispersion("phi1", spec.family1, th.phi1);
  dispersion("phi2", spec.family2, th.phi2);

  auto link_check = [&](const char* which, Family f, const LinkSpec& l) {
    if (!link_compatible(f, l.link))
      err("link-family", std::string(which) + ": " + std::string(to_string(l.link)) +
                             " link does not map into the " + std::string(to_string(f)) +
                             " mean domain");
    if (l.transform == Transform::log1p &&
        (l.link != Link::log || support_of(f) != Support::nonneg_integers))
      err("transform", std::string(which) + ": log1p transform requires a log link on counts");
    if (l.transform == Transform::same_as_link && l.link == Link::logit)
      warn("transform", std::string(which) +
                            ": logit transform is infinite on binary data; use the raw transform");
    if (l.transform == Transform::same_as_link && l.link == Link::log &&
        support_of(f) == Support::nonneg_integers)
      warn("transform", std::string(which) + ": log transform is infinite at y = 0; use log1p");
  };
  link_check("series 1", spec.family1, spec.link1);
  link_check("series 2", spec.family2, spec.link2);
  if (spec.coupling != default_coupling(spec.family2))
    warn("coupling", "coupling kind differs from the default for the caused family's support");

  auto sum_abs = [](const std::vector<double>& v, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < v.size(); ++i) s += v[i];
    return std::abs(s);
  };
  auto stability = [&](const char* which, const std::vector<double>& alpha,
                       const std::vector<double>& beta) {
    const double total = sum_abs(alpha, 0) + sum_abs(beta, 1);
    if (total >= 1.0)
      warn("stability", std::string(which) + ": |sum alpha| + |sum beta| = " +
                            std::to_string(total) + " >= 1; recursion may be non-stationary");
  };
  stability("series 1", th.alpha1, th.beta1);
  stability("series 2", th.alpha2, th.beta2);
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& d) {
  return std::any_of(d.begin(), d.end(),
                     [](const Diagnostic& x) { return x.severity == Diagnostic::Severity::error; });
}

// ---------------------------------------------------------------------------
// simulation

inline constexpr std::size_t kDefaultBurnIn = 500;
/// |nu| cap under log links while simulating.
inline constexpr double kSimulationNuCap = 50.0;

namespace detail {

inline double start_value(const std::vector<double>& beta, const std::vector<double>& alpha) {
  const double denom = 1.0 - std::accumulate(alpha.begin(), alpha.end(), 0.0);
  if (denom > -0.1 && denom < 0.1) return beta[0];
  return beta[0] / denom;
}

inline void check_nu(const LinkSpec& link, double v, std::size_t t, const char* which) {
  const double cap = link.link == Link::identity ? 1e12 : kSimulationNuCap;
  if (!std::isfinite(v) || std::abs(v) > cap)
    throw SimulationDiverged(std::string(which) + " linear predictor " + std::to_string(v) +
                             " exceeded the divergence cap at step " + std::to_string(t));
}

}  // namespace detail

/// Draws n observations after discarding `burn_in` leading points. The
/// first l predictors start at beta0 / (1 - sum alpha).
template <class RngT>
BivariateSeries simulate(const ModelSpec& spec, const ParamVector& th, std::size_t n,
                         std::size_t burn_in, RngT& rng) {
  check_params(spec, th);
  const std::size_t l = spec.orders.max_lag();
  if (n <= l)
    throw std::invalid_argument("n = " + std::to_string(n) + " must exceed the maximal lag " +
                                std::to_string(l));
  const auto& o = spec.orders;
  const std::size_t total = n + burn_in;
  std::vector<double> y1(total), y2(total), nu1(total), nu2(total), tr1(total), tr2(total);
  const double start1 = detail::start_value(th.beta1, th.alpha1);
  const double start2 = detail::start_value(th.beta2, th.alpha2);
  for (std::size_t t = 0; t < total; ++t) {
    double v1, v2;
    if (t < l) {
      v1 = start1;
      v2 = start2;
    } else {
      v1 = th.beta1[0];
      for (std::size_t i = 1; i <= o.r; ++i) v1 += th.beta1[i] * tr1[t - i];
      for (std::size_t j = 1; j <= o.s; ++j) v1 += th.alpha1[j - 1] * nu1[t - j];
      v2 = th.beta2[0];
      for (std::size_t i = 1; i <= o.p; ++i) v2 += th.beta2[i] * tr2[t - i];
      for (std::size_t j = 1; j <= o.q; ++j) v2 += th.alpha2[j - 1] * nu2[t - j];
      for (std::size_t m = 1; m <= o.k; ++m) v2 += th.gamma[m - 1] * tr1[t - m];
    }
    detail::check_nu(spec.link1, v1, t, "causal");
    detail::check_nu(spec.link2, v2, t, "caused");
    nu1[t] = v1;
    nu2[t] = v2;
    y1[t] = ef_sample(spec.family1, link_invert(spec.link1.link, v1), th.phi1, rng);
    const auto h = coupling_h_checked(spec.coupling, th.rho, y1[t]);
    const double eff = link_invert(spec.link2.link, v2) * h.value;
    if (h.saturated || (spec.link2.link == Link::log && std::log(eff) > kSimulationNuCap))
      throw SimulationDiverged("effective caused mean overflowed at step " + std::to_string(t));
    if (!in_mean_domain(spec.family2, eff))
      throw SimulationDiverged("effective caused mean " + std::to_string(eff) +
                               " left the mean domain at step " + std::to_string(t));
    y2[t] = ef_sample(spec.family2, eff, th.phi2, rng);
    tr1[t] = transform_T(spec.link1, y1[t]);
    tr2[t] = transform_T(spec.link2, y2[t]);
    if (!std::isfinite(tr1[t]) || !std::isfinite(tr2[t]))
      throw SimulationDiverged("series transform not finite at step " + std::to_string(t));
  }
  BivariateSeries out;
  out.y1.assign(y1.begin() + static_cast<std::ptrdiff_t>(burn_in), y1.end());
  out.y2.assign(y2.begin() + static_cast<std::ptrdiff_t>(burn_in), y2.end());
  out.support1 = support_of(spec.family1);
  out.support2 = support_of(spec.family2);
  return out;
}

}  // namespace grangerglm
