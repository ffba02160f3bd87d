#pragma once

// Exponential-family kernels, links, series transforms and the
// contemporaneous coupling h_rho used by the bivariate Granger-GLM.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/geometric_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

namespace grangerglm {

enum class Family { gaussian, poisson, gamma, geometric, bernoulli };
enum class Support { reals, nonneg_integers, positive_reals, binary };

enum class Link { log, identity, logit };

/// How y enters the recursion. `same_as_link` applies g itself; `log1p` is
/// log(y + 1) for counts under a log link; `raw` leaves y untouched (needed
/// for binary series, where logit(y) is infinite).
enum class Transform { same_as_link, log1p, raw };

struct LinkSpec {
  Link link = Link::log;
  Transform transform = Transform::same_as_link;

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

enum class Coupling { exp, two_logit };

/// exp-coupling saturation point; h never exceeds exp(700).
inline constexpr double kCouplingLogCap = 700.0;

// ---------------------------------------------------------------------------
// names

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::poisson: return "poisson";
    case Family::gamma: return "gamma";
    case Family::geometric: return "geometric";
    case Family::bernoulli: return "bernoulli";
  }
  return "?";
}

inline std::string_view to_string(Support s) {
  switch (s) {
    case Support::reals: return "reals";
    case Support::nonneg_integers: return "nonneg-integers";
    case Support::positive_reals: return "positive-reals";
    case Support::binary: return "binary";
  }
  return "?";
}

inline std::string_view to_string(Link l) {
  switch (l) {
    case Link::log: return "log";
    case Link::identity: return "identity";
    case Link::logit: return "logit";
  }
  return "?";
}

inline std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::same_as_link: return "same-as-link";
    case Transform::log1p: return "log1p";
    case Transform::raw: return "raw";
  }
  return "?";
}

inline std::string_view to_string(Coupling c) {
  return c == Coupling::exp ? "exp" : "two-logit";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::gaussian, Family::poisson, Family::gamma, Family::geometric,
                 Family::bernoulli})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown family: " + std::string(s));
}

inline Support parse_support(std::string_view s) {
  for (auto v : {Support::reals, Support::nonneg_integers, Support::positive_reals,
                 Support::binary})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown support: " + std::string(s));
}

inline Link parse_link(std::string_view s) {
  for (auto l : {Link::log, Link::identity, Link::logit})
    if (to_string(l) == s) return l;
  throw std::invalid_argument("unknown link: " + std::string(s));
}

inline Transform parse_transform(std::string_view s) {
  for (auto t : {Transform::same_as_link, Transform::log1p, Transform::raw})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown transform: " + std::string(s));
}

inline Coupling parse_coupling(std::string_view s) {
  if (s == "exp") return Coupling::exp;
  if (s == "two-logit") return Coupling::two_logit;
  throw std::invalid_argument("unknown coupling: " + std::string(s));
}

// ---------------------------------------------------------------------------
// family metadata

inline Support support_of(Family f) {
  switch (f) {
    case Family::gaussian: return Support::reals;
    case Family::poisson:
    case Family::geometric: return Support::nonneg_integers;
    case Family::gamma: return Support::positive_reals;
    case Family::bernoulli: return Support::binary;
  }
  return Support::reals;
}

/// Gaussian and Gamma carry a free dispersion; the rest fix phi = 1.
inline bool has_free_dispersion(Family f) {
  return f == Family::gaussian || f == Family::gamma;
}

inline Coupling default_coupling(Family caused) {
  return support_of(caused) == Support::binary ? Coupling::two_logit : Coupling::exp;
}

inline bool in_support(Support s, double y) {
  if (!std::isfinite(y)) return false;
  switch (s) {
    case Support::reals: return true;
    case Support::nonneg_integers: return y >= 0.0 && y == std::floor(y);
    case Support::positive_reals: return y > 0.0;
    case Support::binary: return y == 0.0 || y == 1.0;
  }
  return false;
}

inline bool in_mean_domain(Family f, double mu) {
  if (!std::isfinite(mu)) return false;
  switch (f) {
    case Family::gaussian: return true;
    case Family::poisson:
    case Family::gamma:
    case Family::geometric: return mu > 0.0;
    case Family::bernoulli: return mu > 0.0 && mu < 1.0;
  }
  return false;
}

/// V(mu) such that Var(Y) = phi * V(mu).
inline double variance_function(Family f, double mu) {
  switch (f) {
    case Family::gaussian: return 1.0;
    case Family::poisson: return mu;
    case Family::gamma: return mu * mu;
    case Family::geometric: return mu * (1.0 + mu);
    case Family::bernoulli: return mu * (1.0 - mu);
  }
  return 1.0;
}

inline double effective_dispersion(Family f, double phi) {
  return has_free_dispersion(f) ? phi : 1.0;
}

namespace detail {

inline void check_args(Family f, double mu, double phi) {
  if (!in_mean_domain(f, mu))
    throw std::domain_error("mean " + std::to_string(mu) + " outside the " +
                            std::string(to_string(f)) + " mean domain");
  if (has_free_dispersion(f) && !(phi > 0.0 && std::isfinite(phi)))
    throw std::domain_error("dispersion must be positive and finite");
}

// Density pieces that only depend on y. The likelihood kernel caches these;
// ef_log_density recomputes them.
inline double y_constant(Family f, double y) {
  switch (f) {
    case Family::poisson: return std::lgamma(y + 1.0);
    case Family::gamma: return std::log(y);
    default: return 0.0;
  }
}

// log f(y; mu, phi) given y_constant(f, y). `gamma_norm` is
// lgamma(1/phi) for the Gamma family (ignored otherwise).
inline double log_density_unchecked(Family f, double y, double ycon, double mu, double phi,
                                    double gamma_norm) {
  switch (f) {
    case Family::gaussian: {
      const double r = y - mu;
      return -0.5 * std::log(2.0 * M_PI * phi) - r * r / (2.0 * phi);
    }
    case Family::poisson:
      return y * std::log(mu) - mu - ycon;
    case Family::gamma: {
      // shape 1/phi, scale mu*phi
      const double shape = 1.0 / phi;
      const double scale = mu * phi;
      return (shape - 1.0) * ycon - y / scale - shape * std::log(scale) - gamma_norm;
    }
    case Family::geometric:
      // success probability 1/(1+mu), failures before the first success
      return y * std::log(mu) - (y + 1.0) * std::log1p(mu);
    case Family::bernoulli:
      return y == 1.0 ? std::log(mu) : std::log1p(-mu);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// log f(y) for Y ~ EF(mu, phi). phi is ignored for fixed-dispersion families.
/// Throws std::domain_error when y is outside the support or mu outside the
/// mean domain.
inline double ef_log_density(Family f, double y, double mu, double phi = 1.0) {
  if (!in_support(support_of(f), y))
    throw std::domain_error("y = " + std::to_string(y) + " outside the " +
                            std::string(to_string(f)) + " support");
  detail::check_args(f, mu, phi);
  phi = effective_dispersion(f, phi);
  const double gnorm = f == Family::gamma ? std::lgamma(1.0 / phi) : 0.0;
  return detail::log_density_unchecked(f, y, detail::y_constant(f, y), mu, phi, gnorm);
}

/// One draw from EF(mu, phi).
template <class Rng>
double ef_sample(Family f, double mu, double phi, Rng& rng) {
  detail::check_args(f, mu, phi);
  switch (f) {
    case Family::gaussian:
      return boost::random::normal_distribution<double>(mu, std::sqrt(phi))(rng);
    case Family::poisson:
      return static_cast<double>(boost::random::poisson_distribution<long long, double>(mu)(rng));
    case Family::gamma:
      return boost::random::gamma_distribution<double>(1.0 / phi, mu * phi)(rng);
    case Family::geometric:
      return static_cast<double>(
          boost::random::geometric_distribution<long long, double>(1.0 / (1.0 + mu))(rng));
    case Family::bernoulli:
      return boost::random::bernoulli_distribution<double>(mu)(rng) ? 1.0 : 0.0;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// links and transforms

inline double link_apply(Link l, double x) {
  switch (l) {
    case Link::log:
      if (!(x > 0.0)) throw std::domain_error("log link requires x > 0");
      return std::log(x);
    case Link::identity:
      return x;
    case Link::logit:
      if (!(x > 0.0 && x < 1.0)) throw std::domain_error("logit link requires 0 < x < 1");
      return std::log(x / (1.0 - x));
  }
  return x;
}

inline double link_invert(Link l, double v) {
  switch (l) {
    case Link::log: return std::exp(v);
    case Link::identity: return v;
    case Link::logit: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

inline double link_apply(const LinkSpec& l, double x) { return link_apply(l.link, x); }
inline double link_invert(const LinkSpec& l, double v) { return link_invert(l.link, v); }

/// T(y): the series transform entering the recursion.
inline double transform_T(const LinkSpec& l, double y) {
  switch (l.transform) {
    case Transform::log1p:
      if (!(y >= 0.0)) throw std::domain_error("log1p transform requires y >= 0");
      return std::log1p(y);
    case Transform::raw:
      return y;
    case Transform::same_as_link:
      return link_apply(l.link, y);
  }
  return y;
}

/// Whether link_invert always lands in the family's mean domain.
inline bool link_compatible(Family f, Link l) {
  switch (l) {
    case Link::log: return f != Family::bernoulli;
    case Link::logit: return f == Family::bernoulli;
    case Link::identity: return f == Family::gaussian;
  }
  return false;
}

// ---------------------------------------------------------------------------
// coupling

struct CouplingValue {
  double value = 1.0;
  bool saturated = false;
};

/// h_rho(y) with the saturation flag for the exp kind.
inline CouplingValue coupling_h_checked(Coupling c, double rho, double y) {
  if (rho == 0.0) return {1.0, false};
  const double z = rho * y;
  if (c == Coupling::exp) {
    if (z > kCouplingLogCap) return {std::exp(kCouplingLogCap), true};
    return {std::exp(z), false};
  }
  return {2.0 / (1.0 + std::exp(-z)), false};
}

inline double coupling_h(Coupling c, double rho, double y) {
  return coupling_h_checked(c, rho, y).value;
}

}  // namespace grangerglm
