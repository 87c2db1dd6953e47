#ifndef MTSCALE_PLANNER_HPP
#define MTSCALE_PLANNER_HPP

// Budget questions answered by inverting a fitted Chinchilla law.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mtscale/error.hpp"
#include "mtscale/lawfit.hpp"
#include "mtscale/ledger.hpp"

namespace mtscale::planner {

using lawfit::ChinchillaFit;
using lawfit::DataUnit;

/// Result of a law inversion. An unreachable target is a normal outcome
/// that carries the asymptotic floor the target would have to exceed.
struct Inversion {
  bool feasible = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  double floor = 0.0;
  DataUnit unit = DataUnit::Samples;
};

/// D such that predict(fit, N, D) == target.
inline Inversion data_needed(const ChinchillaFit& fit, double N, double target) {
  require(N > 0.0, ErrorCode::InvalidInput, "N must be > 0");
  Inversion r;
  r.unit = fit.unit;
  r.floor = fit.E + fit.a * std::pow(N, -fit.alpha);
  const double gap = target - r.floor;
  if (!(gap > 0.0) || fit.b <= 0.0 || fit.beta <= 0.0) return r;
  r.value = std::pow(fit.b / gap, 1.0 / fit.beta);
  r.feasible = std::isfinite(r.value) && r.value > 0.0;
  return r;
}

/// N such that predict(fit, N, D) == target.
inline Inversion params_needed(const ChinchillaFit& fit, double D, double target) {
  require(D > 0.0, ErrorCode::InvalidInput, "D must be > 0");
  Inversion r;
  r.unit = fit.unit;
  r.floor = fit.E + fit.b * std::pow(D, -fit.beta);
  const double gap = target - r.floor;
  if (!(gap > 0.0) || fit.a <= 0.0 || fit.alpha <= 0.0) return r;
  r.value = std::pow(fit.a / gap, 1.0 / fit.alpha);
  r.feasible = std::isfinite(r.value) && r.value > 0.0;
  return r;
}

/// Training FLOP per unit of D (sample or token) as a function of N.
struct FlopCounter {
  DataUnit unit = DataUnit::Samples;
  std::function<double(double)> per_unit;

  /// 6 N per token; tokens_per_sample converts when D counts samples.
  static FlopCounter six_nd(DataUnit unit, double tokens_per_sample = 512.0) {
    const double k = unit == DataUnit::Samples ? tokens_per_sample : 1.0;
    return {unit, [k](double N) { return 6.0 * N * k; }};
  }

  /// Scales 6 N by the exact-to-6ND ratio of a reference architecture, so
  /// attention and head costs carry over to neighbouring sizes.
  static FlopCounter from_arch(const ledger::ModelArch& arch, ledger::FlopMode mode, DataUnit unit) {
    const auto exact = ledger::flops(arch, mode);
    const auto six = ledger::flops(arch, ledger::FlopMode::SixND);
    const double ratio = exact.train_per_token / six.train_per_token;
    const double k = unit == DataUnit::Samples ? double(arch.seq_len) : 1.0;
    return {unit, [ratio, k](double N) { return 6.0 * N * ratio * k; }};
  }

  double operator()(double N, double D, DataUnit data_unit) const {
    require(data_unit == unit, ErrorCode::UnitMismatch, "fit and FLOP counter use different data units");
    return per_unit(N) * D;
  }
};

struct MatchResult {
  Inversion inversion;  // data the small model needs
  double target_loss = 0.0;
  double multiplier = std::numeric_limits<double>::quiet_NaN();
  double small_flops = std::numeric_limits<double>::quiet_NaN();
  double big_flops = std::numeric_limits<double>::quiet_NaN();
};

/// How much more data a small model needs to reach the loss of a big model
/// trained on big_D, and what both runs cost.
inline MatchResult match_model(const ChinchillaFit& fit, double small_N, double big_N, double big_D,
                               const FlopCounter& counter) {
  require(small_N > 0.0 && big_N > 0.0 && big_D > 0.0, ErrorCode::InvalidInput, "N and D must be > 0");
  MatchResult m;
  m.target_loss = lawfit::predict(fit, big_N, big_D);
  m.big_flops = counter(big_N, big_D, fit.unit);
  if (small_N == big_N) {
    m.inversion = {true, big_D, fit.E + fit.a * std::pow(small_N, -fit.alpha), fit.unit};
  } else {
    m.inversion = data_needed(fit, small_N, m.target_loss);
  }
  if (m.inversion.feasible) {
    m.multiplier = m.inversion.value / big_D;
    m.small_flops = counter(small_N, m.inversion.value, fit.unit);
  }
  return m;
}

struct CurvePoint {
  double N = 0.0;
  double D = 0.0;
  double loss = 0.0;
};

struct IsoFlopResult {
  double N = 0.0;
  double D = 0.0;
  double loss = 0.0;
  double budget = 0.0;
  DataUnit unit = DataUnit::Samples;
  std::vector<CurvePoint> curve;
};

struct IsoFlopOptions {
  double min_N = 1.0;
  std::optional<double> max_N;  // default: where D drops to one unit
  std::size_t scan_points = 400;
  std::size_t curve_points = 64;
  double tolerance = 1e-12;  // on log N
};

/// Minimizes predict(N, D) subject to per_unit(N) * D = budget: a coarse scan
/// over log N followed by golden-section refinement around the best point.
inline IsoFlopResult isoflop_optimum(const ChinchillaFit& fit, double budget, const FlopCounter& counter,
                                     const IsoFlopOptions& opt = {}) {
  require(budget > 0.0 && std::isfinite(budget), ErrorCode::InvalidInput, "FLOP budget must be > 0");
  require(fit.alpha > 0.0 && fit.beta > 0.0, ErrorCode::InvalidInput, "isoflop search needs alpha, beta > 0");
  require(counter.unit == fit.unit, ErrorCode::UnitMismatch, "fit and FLOP counter use different data units");

  auto data_at = [&](double u) { return budget / counter.per_unit(std::exp(u)); };
  auto loss_at = [&](double u) {
    const double D = data_at(u);
    if (!(D > 0.0) || !std::isfinite(D)) return std::numeric_limits<double>::infinity();
    return lawfit::predict(fit, std::exp(u), D);
  };

  double lo = std::log(opt.min_N);
  double hi;
  if (opt.max_N) {
    hi = std::log(*opt.max_N);
  } else {
    // Largest N that still sees one unit of data.
    double a = lo, b = lo + 1.0;
    while (data_at(b) > 1.0 && b < 700.0) b += 1.0 + (b - lo);
    for (int i = 0; i < 200 && data_at(a) > 1.0; ++i) {
      const double m = 0.5 * (a + b);
      (data_at(m) > 1.0 ? a : b) = m;
      if (b - a < 1e-12) break;
    }
    hi = std::max(a, lo + 1e-9);
  }
  require(hi > lo, ErrorCode::InvalidInput, "empty N range for the isoflop search");

  const std::size_t n = std::max<std::size_t>(opt.scan_points, 3);
  std::size_t best = n;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = loss_at(lo + (hi - lo) * double(i) / double(n - 1));
    if (v < best_loss) {
      best_loss = v;
      best = i;
    }
  }
  require(best < n, ErrorCode::FitFailed, "predicted loss is non-finite along the whole constraint");

  const double step = (hi - lo) / double(n - 1);
  double a = lo + step * double(best == 0 ? 0 : best - 1);
  double b = lo + step * double(std::min(best + 1, n - 1));
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = loss_at(c), fd = loss_at(d);
  while (b - a > opt.tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = loss_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = loss_at(d);
    }
  }
  double u = 0.5 * (a + b);
  if (loss_at(u) > best_loss) u = lo + step * double(best);

  IsoFlopResult r;
  r.N = std::exp(u);
  r.D = data_at(u);
  r.loss = loss_at(u);
  r.budget = budget;
  r.unit = fit.unit;
  const std::size_t m = std::max<std::size_t>(opt.curve_points, 2);
  for (std::size_t i = 0; i < m; ++i) {
    const double v = lo + (hi - lo) * double(i) / double(m - 1);
    r.curve.push_back({std::exp(v), data_at(v), loss_at(v)});
  }
  return r;
}

}  // namespace mtscale::planner

#endif  // MTSCALE_PLANNER_HPP
