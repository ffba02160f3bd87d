#pragma once

// Named model configurations used by the simulation studies.

#include <stdexcept>
#include <string>
#include <vector>

#include "grangerglm/model.hpp"

namespace grangerglm {

struct Preset {
  std::string name;
  ModelSpec spec;
  ParamVector theta;
};

namespace presets {

/// Gamma (log link, T = log y) causing Poisson (log link, T = log(y+1)),
/// orders r = 1, s = 2, p = 1, q = 2, k = 2.
inline ModelSpec poisson_gamma_spec() {
  ModelSpec s;
  s.family1 = Family::gamma;
  s.family2 = Family::poisson;
  s.link1 = {Link::log, Transform::same_as_link};
  s.link2 = {Link::log, Transform::log1p};
  s.coupling = Coupling::exp;
  s.orders = {.p = 1, .q = 2, .r = 1, .s = 2, .k = 2};
  return s;
}

/// Frequentist simulation configuration: alpha1 = (0.1, 0.4), rho = 0.1.
inline Preset poisson_gamma_mle() {
  Preset p{"poisson-gamma-mle", poisson_gamma_spec(), {}};
  p.theta.beta1 = {0.1, -0.1};
  p.theta.alpha1 = {0.1, 0.4};
  p.theta.beta2 = {0.2, 0.3};
  p.theta.alpha2 = {0.2, -0.1};
  p.theta.gamma = {-0.1, -0.5};
  p.theta.rho = 0.1;
  p.theta.phi1 = 1.0;
  p.theta.phi2 = 1.0;
  return p;
}

/// Bayesian simulation configuration: alpha1 = (0.2, 0.4), rho = 0.5.
inline Preset poisson_gamma_bayes() {
  Preset p = poisson_gamma_mle();
  p.name = "poisson-gamma-bayes";
  p.theta.alpha1 = {0.2, 0.4};
  p.theta.rho = 0.5;
  return p;
}

/// No Granger causality: gamma = 0 and rho = 0, otherwise as the MLE preset.
inline Preset poisson_gamma_null() {
  Preset p = poisson_gamma_mle();
  p.name = "poisson-gamma-null";
  p.theta.gamma = {0.0, 0.0};
  p.theta.rho = 0.0;
  return p;
}

/// Geometric causing Geometric, both log link with log(y+1), all orders 1.
inline ModelSpec geometric_geometric_spec(std::size_t k = 1) {
  ModelSpec s;
  s.family1 = Family::geometric;
  s.family2 = Family::geometric;
  s.link1 = {Link::log, Transform::log1p};
  s.link2 = {Link::log, Transform::log1p};
  s.coupling = Coupling::exp;
  s.orders = {.p = 1, .q = 1, .r = 1, .s = 1, .k = k};
  return s;
}

/// gamma1 = -0.5; the remaining values keep both means near 1.5-2.
inline Preset geometric_geometric() {
  Preset p{"geometric-geometric", geometric_geometric_spec(1), {}};
  p.theta.beta1 = {0.3, 0.3};
  p.theta.alpha1 = {0.2};
  p.theta.beta2 = {0.5, 0.2};
  p.theta.alpha2 = {0.2};
  p.theta.gamma = {-0.5};
  p.theta.rho = 0.1;
  return p;
}

inline std::vector<std::string> names() {
  return {"poisson-gamma-mle", "poisson-gamma-bayes", "poisson-gamma-null",
          "geometric-geometric"};
}

}  // namespace presets

inline Preset preset_by_name(const std::string& name) {
  if (name == "poisson-gamma-mle") return presets::poisson_gamma_mle();
  if (name == "poisson-gamma-bayes") return presets::poisson_gamma_bayes();
  if (name == "poisson-gamma-null") return presets::poisson_gamma_null();
  if (name == "geometric-geometric") return presets::geometric_geometric();
  throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace grangerglm
