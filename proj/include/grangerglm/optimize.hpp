#pragma once

// Unconstrained minimizers: a Nelder-Mead simplex for the rough search and
// BFGS on central-difference gradients for the refinement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace grangerglm::optimize {

using Objective = std::function<double(const std::vector<double>&)>;

struct Result {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  double gradient_norm = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double safe_eval(const Objective& f, const std::vector<double>& x, std::size_t& evals) {
  ++evals;
  const double v = f(x);
  return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

}  // namespace detail

struct SimplexOptions {
  std::size_t max_evaluations = 2000;
  double initial_step = 0.1;
  double ftol = 1e-10;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2).
inline Result nelder_mead(const Objective& f, std::vector<double> x0,
                          const SimplexOptions& opt = {}) {
  const std::size_t d = x0.size();
  Result res;
  if (d == 0) {
    res.x = x0;
    res.value = detail::safe_eval(f, x0, res.evaluations);
    res.converged = true;
    return res;
  }
  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i < d; ++i) {
    const double step = opt.initial_step * std::max(1.0, std::abs(x0[i]));
    pts[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= d; ++i) vals[i] = detail::safe_eval(f, pts[i], res.evaluations);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), trial(d), trial2(d);
  auto point_at = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (worst[j] - centroid[j]);
  };

  while (res.evaluations < opt.max_evaluations) {
    ++res.iterations;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    const double spread = std::abs(vals[worst] - vals[best]);
    if (std::isfinite(vals[worst]) &&
        spread <= opt.ftol * (std::abs(vals[best]) + std::abs(vals[worst]) + 1e-20)) {
      res.converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / double(d);

    point_at(-1.0, trial, pts[worst]);
    const double fr = detail::safe_eval(f, trial, res.evaluations);
    if (fr < vals[best]) {
      point_at(-2.0, trial2, pts[worst]);
      const double fe = detail::safe_eval(f, trial2, res.evaluations);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    // contraction (outside if the reflection helped at all, else inside)
    const bool outside = fr < vals[worst];
    point_at(outside ? -0.5 : 0.5, trial2, pts[worst]);
    const double fc = detail::safe_eval(f, trial2, res.evaluations);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < d; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      vals[i] = detail::safe_eval(f, pts[i], res.evaluations);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

/// Central-difference gradient with per-coordinate step h*max(1, |x_i|).
inline std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x,
                                            double h, std::size_t& evals) {
  std::vector<double> g(x.size());
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = detail::safe_eval(f, xp, evals);
    xp[i] = x[i] - step;
    const double fm = detail::safe_eval(f, xp, evals);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

struct BfgsOptions {
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-7;  // infinity norm
  double fd_step = 1e-5;
  /// A run that stops making progress is still accepted as converged when
  /// the gradient is below gradient_tolerance * stall_factor (difference
  /// noise floor).
  double stall_factor = 100.0;
};

/// BFGS with an inverse-Hessian update and backtracking Armijo line search.
inline Result bfgs(const Objective& f, std::vector<double> x, const BfgsOptions& opt = {}) {
  const std::size_t d = x.size();
  Result res;
  double fx = detail::safe_eval(f, x, res.evaluations);
  if (d == 0) {
    res.x = x;
    res.value = fx;
    res.converged = true;
    res.gradient_norm = 0;
    return res;
  }
  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };
  std::vector<double> g = numeric_gradient(f, x, opt.fd_step, res.evaluations);
  std::vector<double> H(d * d, 0.0);
  auto reset_h = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) H[i * d + i] = 1.0;
  };
  reset_h();
  std::vector<double> p(d), xn(d), s(d), yv(d), Hy(d);
  bool fresh = true;
  bool stalled = false;
  int flat_steps = 0;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (!std::isfinite(fx)) break;
    if (inf_norm(g) < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0;
      for (std::size_t j = 0; j < d; ++j) v -= H[i * d + j] * g[j];
      p[i] = v;
    }
    double slope = std::inner_product(p.begin(), p.end(), g.begin(), 0.0);
    if (!(slope < 0)) {  // not a descent direction
      reset_h();
      for (std::size_t i = 0; i < d; ++i) p[i] = -g[i];
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }
    double t = 1.0;
    double fn = std::numeric_limits<double>::infinity();
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < d; ++i) xn[i] = x[i] + t * p[i];
      fn = detail::safe_eval(f, xn, res.evaluations);
      if (fn <= fx + 1e-4 * t * slope) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      if (fresh) {  // steepest descent failed too: at numerical precision
        stalled = true;
        break;
      }
      reset_h();
      fresh = true;
      continue;
    }
    const auto gn = numeric_gradient(f, xn, opt.fd_step, res.evaluations);
    for (std::size_t i = 0; i < d; ++i) {
      s[i] = xn[i] - x[i];
      yv[i] = gn[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), yv.begin(), 0.0);
    if (sy > 1e-12 * std::sqrt(std::inner_product(s.begin(), s.end(), s.begin(), 0.0) *
                               std::inner_product(yv.begin(), yv.end(), yv.begin(), 0.0))) {
      if (fresh) {
        // scale the initial inverse Hessian
        const double yy = std::inner_product(yv.begin(), yv.end(), yv.begin(), 0.0);
        for (std::size_t i = 0; i < d; ++i) H[i * d + i] = sy / yy;
      }
      for (std::size_t i = 0; i < d; ++i) {
        double v = 0;
        for (std::size_t j = 0; j < d; ++j) v += H[i * d + j] * yv[j];
        Hy[i] = v;
      }
      const double yHy = std::inner_product(yv.begin(), yv.end(), Hy.begin(), 0.0);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          H[i * d + j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
      fresh = false;
    }
    flat_steps = fx - fn <= 1e-15 * (1.0 + std::abs(fx)) ? flat_steps + 1 : 0;
    x = xn;
    fx = fn;
    g = gn;
    if (flat_steps >= 5) {
      stalled = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  res.gradient_norm = inf_norm(g);
  if (!res.converged && res.gradient_norm < opt.gradient_tolerance) res.converged = true;
  if (!res.converged && stalled && res.gradient_norm < opt.gradient_tolerance * opt.stall_factor)
    res.converged = true;
  return res;
}

}  // namespace grangerglm::optimize
