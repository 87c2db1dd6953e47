#ifndef MTSCALE_BFGS_HPP
#define MTSCALE_BFGS_HPP

// Dense BFGS with a backtracking (Armijo) line search, for the handful of
// parameters a scaling law has. The objective writes its gradient into the
// span it is given and returns the value; non-finite values are treated as
// "step too long" by the line search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace mtscale::optim {

using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BfgsOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-12;  // on max |g_i|
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
  // Stop when the last `stall_window` iterations improved the value by less
  // than stall_relative * |value|.
  int stall_window = 20;
  double stall_relative = 1e-10;
};

struct BfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;  // max |g_i|
  int iterations = 0;
  bool converged = false;
};

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline BfgsResult minimize_bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& opt = {}) {
  const std::size_t n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), p(n), s(n), y(n), Hy(n);
  r.value = f(r.x, g);
  if (!std::isfinite(r.value)) return r;

  // Inverse Hessian approximation, row-major.
  std::vector<double> H(n * n, 0.0);
  auto reset_h = [&](double scale) {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = scale;
  };
  reset_h(1.0);
  bool scaled = false;
  bool just_reset = true;
  bool stuck = false;
  std::vector<double> history;

  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    r.gradient_norm = max_abs(g);
    if (r.gradient_norm <= opt.gradient_tolerance) {
      r.converged = true;
      return r;
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc -= H[i * n + j] * g[j];
      p[i] = acc;
      slope += acc * g[i];
    }
    if (!(slope < 0.0)) {
      // Lost positive definiteness; fall back to steepest descent.
      reset_h(1.0);
      scaled = false;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope -= g[i] * g[i];
    }

    double step = 1.0;
    double value_new = 0.0;
    bool accepted = false;
    for (int k = 0; k < opt.max_backtracks; ++k) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = r.x[i] + step * p[i];
      value_new = f(x_new, g_new);
      if (std::isfinite(value_new) && value_new <= r.value + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      if (just_reset) {  // steepest descent cannot make progress either
        stuck = true;
        break;
      }
      reset_h(1.0);
      scaled = false;
      just_reset = true;
      continue;
    }
    just_reset = false;

    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - r.x[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
      yy += y[i] * y[i];
    }
    const bool stalled = value_new == r.value && max_abs(s) == 0.0;
    r.x.swap(x_new);
    g.swap(g_new);
    r.value = value_new;
    if (stalled) {
      stuck = true;
      break;
    }
    history.push_back(r.value);
    if (opt.stall_window > 0 && history.size() > std::size_t(opt.stall_window)) {
      const double before = history[history.size() - 1 - std::size_t(opt.stall_window)];
      if (before - r.value <= opt.stall_relative * std::abs(r.value)) {
        stuck = true;
        break;
      }
    }

    if (sy > 1e-300 && std::isfinite(sy)) {
      if (!scaled) {
        reset_h(sy / yy);
        scaled = true;
      }
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      double yHy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * y[j];
        Hy[i] = acc;
        yHy += y[i] * acc;
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          H[i * n + j] += -rho * (Hy[i] * s[j] + s[i] * Hy[j]) + (rho * rho * yHy + rho) * s[i] * s[j];
    }
  }
  r.gradient_norm = max_abs(g);
  // Stuck at machine precision with a small gradient is as good as it gets.
  r.converged = r.gradient_norm <= opt.gradient_tolerance ||
                (stuck && r.gradient_norm <= 1e-6 * std::max(1.0, std::abs(r.value)));
  return r;
}

/// Central differences with relative step h * max(1, |x_i|).
inline std::vector<double> central_difference(const Objective& f, std::span<const double> x, double h = 1e-6) {
  std::vector<double> xp(x.begin(), x.end()), grad(x.size()), scratch(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double up = f(xp, scratch);
    xp[i] = x[i] - step;
    const double down = f(xp, scratch);
    xp[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace mtscale::optim

#endif  // MTSCALE_BFGS_HPP
