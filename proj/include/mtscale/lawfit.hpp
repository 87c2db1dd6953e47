#ifndef MTSCALE_LAWFIT_HPP
#define MTSCALE_LAWFIT_HPP

// Robust fitting of loss scaling laws.
//
//   power law    L(N)    = alpha N^-p + beta
//   Chinchilla   L(N, D) = E + a / N^alpha + b / D^beta
//
// Both forms are sums of terms exp(c_k - e_k log x_k). Scale coefficients are
// optimized in log space, so they stay positive, and the prediction is a
// log-sum-exp of the terms. The objective is the Huber loss of the residuals
// (log-space by default), minimized by BFGS from every point of a start grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mtscale/bfgs.hpp"
#include "mtscale/error.hpp"
#include "mtscale/rng.hpp"

namespace mtscale::lawfit {

enum class ResidualSpace { Log, Linear };
enum class DataUnit { Samples, Tokens };
enum class LawKind { Power, Chinchilla };

struct Observation {
  std::string model;
  double N = 0.0;  // non-embedding parameters
  double D = 0.0;  // samples or tokens seen
  double loss = 0.0;
  std::string direction;
  std::string domain;
};

struct FitConfig {
  double huber_delta = 0.01;
  ResidualSpace residual_space = ResidualSpace::Log;
  // Starting points in the internal parameterization; empty selects the
  // default grid for the law being fitted.
  std::vector<std::vector<double>> init_grid;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-12;
  std::uint64_t seed = 0;
  std::size_t random_starts = 0;  // extra uniform starts inside the grid's box
  bool analytic_gradient = true;
  double parsimony_tolerance = 1e-12;  // per observation
  DataUnit unit = DataUnit::Samples;
};

/// Huber loss: r^2/2 inside [-delta, delta], linear outside.
inline double huber(double r, double delta) {
  require(delta > 0.0, ErrorCode::InvalidInput, "huber delta must be > 0");
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double r, double delta) { return std::clamp(r, -delta, delta); }

struct PowerLawFit {
  double alpha = 0.0;
  double p = 0.0;
  double beta = 0.0;
  double objective = 0.0;
  bool converged = false;
  std::size_t n_points = 0;
};

struct ChinchillaFit {
  double E = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  double b = 0.0;
  double beta = 0.0;
  double objective = 0.0;
  bool converged = false;
  std::size_t n_points = 0;
  DataUnit unit = DataUnit::Samples;
};

using LawFit = std::variant<PowerLawFit, ChinchillaFit>;

inline double predict(const PowerLawFit& f, double N) {
  require(N > 0.0, ErrorCode::InvalidInput, "N must be > 0");
  return f.alpha * std::pow(N, -f.p) + f.beta;
}

inline double predict(const ChinchillaFit& f, double N, double D) {
  require(N > 0.0 && D > 0.0, ErrorCode::InvalidInput, "N and D must be > 0");
  return f.E + f.a * std::pow(N, -f.alpha) + f.b * std::pow(D, -f.beta);
}

inline double predict(const LawFit& fit, double N, std::optional<double> D = std::nullopt) {
  if (const auto* pw = std::get_if<PowerLawFit>(&fit)) return predict(*pw, N);
  require(D.has_value(), ErrorCode::InvalidInput, "Chinchilla prediction needs D");
  return predict(std::get<ChinchillaFit>(fit), N, *D);
}

// ---------------------------------------------------------------------------
// Generic sum-of-power-terms objective

enum class Variable { None, N, D };

struct Term {
  std::size_t coef;      // index of the log-coefficient
  int exponent;          // index of the exponent, -1 for a constant term
  Variable variable;
};

struct LawShape {
  std::size_t n_params;
  std::vector<Term> terms;
  std::vector<std::size_t> droppable;  // terms the parsimony pass may remove
};

inline const LawShape& power_shape() {
  // theta = [log alpha, p, log beta]
  static const LawShape s{3, {{0, 1, Variable::N}, {2, -1, Variable::None}}, {0}};
  return s;
}

inline const LawShape& chinchilla_shape() {
  // theta = [log E, log a, alpha, log b, beta]
  static const LawShape s{5, {{0, -1, Variable::None}, {1, 2, Variable::N}, {3, 4, Variable::D}}, {2, 1}};
  return s;
}

class HuberObjective {
 public:
  HuberObjective(const LawShape& shape, const std::vector<Observation>& obs, double delta, ResidualSpace space)
      : shape_(shape), delta_(delta), space_(space), active_(shape.terms.size(), true) {
    require(delta > 0.0, ErrorCode::InvalidInput, "huber delta must be > 0");
    for (const auto& o : obs) {
      log_n_.push_back(std::log(o.N));
      log_d_.push_back(std::log(o.D));
      loss_.push_back(o.loss);
      log_loss_.push_back(std::log(o.loss));
    }
  }

  void set_active(std::vector<bool> active) { active_ = std::move(active); }
  const std::vector<bool>& active() const { return active_; }

  /// Log of the predicted loss for observation i; fills per-term weights.
  double log_prediction(std::span<const double> x, std::size_t i, std::span<double> weights) const {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < shape_.terms.size(); ++k) {
      if (!active_[k]) {
        weights[k] = -std::numeric_limits<double>::infinity();
        continue;
      }
      weights[k] = term_log(x, shape_.terms[k], i);
      hi = std::max(hi, weights[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < shape_.terms.size(); ++k)
      if (active_[k]) sum += std::exp(weights[k] - hi);
    const double lp = hi + std::log(sum);
    for (std::size_t k = 0; k < shape_.terms.size(); ++k)
      weights[k] = active_[k] ? std::exp(weights[k] - lp) : 0.0;
    return lp;
  }

  double operator()(std::span<const double> x, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::array<double, 8> w{};
    double total = 0.0;
    for (std::size_t i = 0; i < loss_.size(); ++i) {
      const double lp = log_prediction(x, i, w);
      double r, dr;
      if (space_ == ResidualSpace::Log) {
        r = lp - log_loss_[i];
        dr = 1.0;
      } else {
        dr = std::exp(lp);
        r = dr - loss_[i];
      }
      total += huber_value(r);
      const double scale = huber_derivative(r, delta_) * dr;
      for (std::size_t k = 0; k < shape_.terms.size(); ++k) {
        if (!active_[k]) continue;
        const auto& t = shape_.terms[k];
        grad[t.coef] += scale * w[k];
        if (t.exponent >= 0) grad[std::size_t(t.exponent)] -= scale * w[k] * variable_log(t.variable, i);
      }
    }
    return total;
  }

  std::size_t size() const { return loss_.size(); }

 private:
  double huber_value(double r) const {
    const double a = std::abs(r);
    return a <= delta_ ? 0.5 * r * r : delta_ * (a - 0.5 * delta_);
  }

  double variable_log(Variable v, std::size_t i) const {
    switch (v) {
      case Variable::N: return log_n_[i];
      case Variable::D: return log_d_[i];
      case Variable::None: break;
    }
    return 0.0;
  }

  double term_log(std::span<const double> x, const Term& t, std::size_t i) const {
    double v = x[t.coef];
    if (t.exponent >= 0) v -= x[std::size_t(t.exponent)] * variable_log(t.variable, i);
    return v;
  }

  const LawShape& shape_;
  double delta_;
  ResidualSpace space_;
  std::vector<bool> active_;
  std::vector<double> log_n_, log_d_, loss_, log_loss_;
};

// ---------------------------------------------------------------------------
// Start grids

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
  return v;
}

inline const std::vector<double>& exponent_axis() {
  static const std::vector<double> v{0.0, 0.5, 1.0, 1.5, 2.0};
  return v;
}

inline const std::vector<double>& log_scale_axis() {
  static const std::vector<double> v = linspace(-1.0, 20.0, 5);
  return v;
}

/// Cartesian product, first axis varying slowest.
inline std::vector<std::vector<double>> cartesian(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * axis.size());
    for (const auto& prefix : out)
      for (double v : axis) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    out = std::move(next);
  }
  return out;
}

/// Power law: 5 x 5 x 5 starts. Chinchilla: the log-scale axes are thinned
/// to {-1, 9.5, 20} (675 starts in total) to keep a fit within seconds.
inline std::vector<std::vector<double>> default_grid(LawKind law) {
  const auto& e = exponent_axis();
  if (law == LawKind::Power) {
    const auto& s = log_scale_axis();
    return cartesian({s, e, s});
  }
  const auto s = linspace(-1.0, 20.0, 3);
  return cartesian({s, s, e, s, e});
}

// ---------------------------------------------------------------------------
// Fitting driver

struct RawFit {
  std::vector<double> theta;
  std::vector<bool> active;
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
};

namespace detail {

inline void validate_observations(const std::vector<Observation>& obs) {
  for (const auto& o : obs)
    require(std::isfinite(o.N) && std::isfinite(o.D) && std::isfinite(o.loss) && o.N > 0 && o.D > 0 && o.loss > 0,
            ErrorCode::InvalidInput, "observation '" + o.model + "' has a non-positive N, D or loss");
}

inline std::size_t distinct(const std::vector<Observation>& obs, double Observation::*field) {
  std::set<double> s;
  for (const auto& o : obs) s.insert(o.*field);
  return s.size();
}

inline optim::Objective wrap(const HuberObjective& obj, bool analytic) {
  if (analytic) return [&obj](std::span<const double> x, std::span<double> g) { return obj(x, g); };
  return [&obj](std::span<const double> x, std::span<double> g) {
    std::vector<double> scratch(g.size());
    const double v = obj(x, scratch);
    const optim::Objective plain = [&obj](std::span<const double> y, std::span<double> h) { return obj(y, h); };
    const auto fd = optim::central_difference(plain, x);
    std::copy(fd.begin(), fd.end(), g.begin());
    return v;
  };
}

inline std::vector<std::vector<double>> starts(LawKind law, const LawShape& shape, const FitConfig& cfg) {
  auto grid = cfg.init_grid.empty() ? default_grid(law) : cfg.init_grid;
  require(!grid.empty(), ErrorCode::InvalidInput, "start grid is empty");
  for (const auto& g : grid)
    require(g.size() == shape.n_params, ErrorCode::InvalidInput, "start point has the wrong dimension");
  if (cfg.random_starts > 0) {
    std::vector<double> lo(shape.n_params, std::numeric_limits<double>::infinity());
    std::vector<double> hi(shape.n_params, -std::numeric_limits<double>::infinity());
    for (const auto& g : grid)
      for (std::size_t i = 0; i < g.size(); ++i) {
        lo[i] = std::min(lo[i], g[i]);
        hi[i] = std::max(hi[i], g[i]);
      }
    std::mt19937_64 gen(cfg.seed);
    for (std::size_t k = 0; k < cfg.random_starts; ++k) {
      std::vector<double> x(shape.n_params);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * uniform_unit(gen);
      grid.push_back(std::move(x));
    }
  }
  return grid;
}

}  // namespace detail

/// Multi-start BFGS, then a parsimony pass that removes terms the data
/// cannot distinguish from a constant. Deterministic: the lowest objective
/// wins, ties go to the earliest start.
inline RawFit fit_shape(LawKind law, const std::vector<Observation>& obs, const FitConfig& cfg) {
  const LawShape& shape = law == LawKind::Power ? power_shape() : chinchilla_shape();
  HuberObjective obj(shape, obs, cfg.huber_delta, cfg.residual_space);
  const auto f = detail::wrap(obj, cfg.analytic_gradient);
  optim::BfgsOptions opt;
  opt.max_iterations = cfg.max_iterations;
  opt.gradient_tolerance = cfg.gradient_tolerance;

  RawFit best;
  std::vector<double> scratch(shape.n_params);
  for (const auto& x0 : detail::starts(law, shape, cfg)) {
    if (!std::isfinite(obj(x0, scratch))) continue;
    auto r = optim::minimize_bfgs(f, x0, opt);
    if (std::isfinite(r.value) && r.value < best.objective) {
      best.theta = std::move(r.x);
      best.objective = r.value;
      best.converged = r.converged;
    }
  }
  require(std::isfinite(best.objective), ErrorCode::FitFailed, "objective is non-finite at every start");
  best.active.assign(shape.terms.size(), true);

  const double slack = cfg.parsimony_tolerance * double(obs.size());
  for (std::size_t k : shape.droppable) {
    auto active = best.active;
    active[k] = false;
    obj.set_active(active);
    auto r = optim::minimize_bfgs(f, best.theta, opt);
    if (std::isfinite(r.value) && r.value <= best.objective + slack) {
      best.theta = std::move(r.x);
      best.objective = r.value;
      best.converged = r.converged;
      best.active = active;
    }
  }
  return best;
}

inline PowerLawFit fit_power_law(const std::vector<Observation>& obs, const FitConfig& cfg = {}) {
  detail::validate_observations(obs);
  require(obs.size() >= 3 && detail::distinct(obs, &Observation::N) >= 3, ErrorCode::InsufficientData,
          "power law needs at least 3 distinct N values");
  const auto raw = fit_shape(LawKind::Power, obs, cfg);
  PowerLawFit fit;
  if (raw.active[0]) {
    fit.alpha = std::exp(raw.theta[0]);
    fit.p = raw.theta[1];
  }
  fit.beta = std::exp(raw.theta[2]);
  fit.objective = raw.objective;
  fit.converged = raw.converged;
  fit.n_points = obs.size();
  return fit;
}

inline ChinchillaFit fit_chinchilla(const std::vector<Observation>& obs, const FitConfig& cfg = {}) {
  detail::validate_observations(obs);
  require(obs.size() >= 5 && detail::distinct(obs, &Observation::N) >= 2 &&
              detail::distinct(obs, &Observation::D) >= 2,
          ErrorCode::InsufficientData, "Chinchilla law needs >= 5 points spanning >= 2 distinct N and D");
  const auto raw = fit_shape(LawKind::Chinchilla, obs, cfg);
  ChinchillaFit fit;
  fit.E = std::exp(raw.theta[0]);
  if (raw.active[1]) {
    fit.a = std::exp(raw.theta[1]);
    fit.alpha = raw.theta[2];
  }
  if (raw.active[2]) {
    fit.b = std::exp(raw.theta[3]);
    fit.beta = raw.theta[4];
  }
  fit.objective = raw.objective;
  fit.converged = raw.converged;
  fit.n_points = obs.size();
  fit.unit = cfg.unit;
  return fit;
}

inline LawFit fit_law(LawKind law, const std::vector<Observation>& obs, const FitConfig& cfg = {}) {
  if (law == LawKind::Power) return fit_power_law(obs, cfg);
  return fit_chinchilla(obs, cfg);
}

/// Keeps the last checkpoint (largest D) of every (model, direction, domain).
inline std::vector<Observation> final_checkpoints(const std::vector<Observation>& obs) {
  std::map<std::array<std::string, 3>, Observation> last;
  for (const auto& o : obs) {
    auto [it, inserted] = last.try_emplace({o.model, o.direction, o.domain}, o);
    if (!inserted && o.D > it->second.D) it->second = o;
  }
  std::vector<Observation> out;
  for (const auto& o : obs) {
    const auto& keep = last.at({o.model, o.direction, o.domain});
    if (keep.D == o.D && keep.loss == o.loss) out.push_back(o);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grouped fits

enum class GroupKey { Direction, Domain, Both };

inline std::string group_of(const Observation& o, GroupKey key) {
  switch (key) {
    case GroupKey::Direction: return o.direction;
    case GroupKey::Domain: return o.domain;
    case GroupKey::Both: return o.direction + "/" + o.domain;
  }
  return {};
}

struct GroupResult {
  std::optional<LawFit> fit;  // empty when skipped
  std::string status;         // "ok" or the reason the group was skipped
  std::size_t n_points = 0;
};

/// Independent fit per group; groups that cannot be fitted are reported
/// with their reason instead of aborting the others.
inline std::map<std::string, GroupResult> fit_grouped(const std::vector<Observation>& obs, GroupKey key, LawKind law,
                                                      const FitConfig& cfg = {}) {
  std::map<std::string, std::vector<Observation>> groups;
  for (const auto& o : obs) groups[group_of(o, key)].push_back(o);
  std::map<std::string, GroupResult> out;
  for (const auto& [name, members] : groups) {
    GroupResult r;
    r.n_points = members.size();
    try {
      r.fit = fit_law(law, members, cfg);
      r.status = "ok";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::FitFailed) throw;
      r.status = e.what();
    }
    out.emplace(name, std::move(r));
  }
  return out;
}

}  // namespace mtscale::lawfit

#endif  // MTSCALE_LAWFIT_HPP
