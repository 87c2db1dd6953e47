#ifndef MTSCALE_HOLDOUT_HPP
#define MTSCALE_HOLDOUT_HPP

// Subset-extrapolation study: fit on the smallest models of a ladder and
// measure how well the law predicts the final loss of the larger ones.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mtscale/error.hpp"
#include "mtscale/lawfit.hpp"

namespace mtscale::lawfit {

struct HeldOutPoint {
  std::string model;
  double N = 0.0;
  double D = 0.0;
  double observed = 0.0;
  double predicted = 0.0;
  double signed_error = 0.0;    // predicted - observed
  double relative_error = 0.0;  // signed_error / observed
};

struct HoldoutRow {
  std::size_t dropped = 0;  // number of largest models held out
  std::vector<std::string> fitted_models;
  LawFit fit;
  double max_in_sample_relative = 0.0;  // max |residual| / observed on the fit set
  std::vector<HeldOutPoint> held_out;
};

struct HoldoutReport {
  LawKind law = LawKind::Power;
  std::vector<std::string> ladder;
  std::vector<HoldoutRow> rows;
};

/// For k = 1 .. len(ladder) - 3, fits on all but the k largest models.
/// Power laws use each model's final checkpoint; Chinchilla uses every
/// checkpoint of the fitted models. Held-out models are scored on their
/// final checkpoint.
inline HoldoutReport holdout_extrapolation(const std::vector<Observation>& obs, const std::vector<std::string>& ladder,
                                           LawKind law, const FitConfig& cfg = {}) {
  require(ladder.size() >= 4, ErrorCode::InsufficientData, "holdout ladder needs at least 4 models");

  std::map<std::string, std::vector<Observation>> by_model;
  for (const auto& o : obs) by_model[o.model].push_back(o);
  std::vector<Observation> finals;
  double prev_n = 0.0;
  for (const auto& name : ladder) {
    auto it = by_model.find(name);
    require(it != by_model.end(), ErrorCode::InvalidInput, "ladder model '" + name + "' has no observations");
    const auto last = *std::max_element(it->second.begin(), it->second.end(),
                                        [](const Observation& a, const Observation& b) { return a.D < b.D; });
    require(last.N > prev_n, ErrorCode::InvalidInput, "ladder is not ordered by N ascending at '" + name + "'");
    prev_n = last.N;
    finals.push_back(last);
  }

  HoldoutReport report;
  report.law = law;
  report.ladder = ladder;
  for (std::size_t k = 1; k + 3 <= ladder.size(); ++k) {
    const std::size_t keep = ladder.size() - k;
    std::vector<Observation> train;
    HoldoutRow row;
    row.dropped = k;
    for (std::size_t i = 0; i < keep; ++i) {
      row.fitted_models.push_back(ladder[i]);
      if (law == LawKind::Power) {
        train.push_back(finals[i]);
      } else {
        const auto& all = by_model.at(ladder[i]);
        train.insert(train.end(), all.begin(), all.end());
      }
    }
    row.fit = fit_law(law, train, cfg);
    for (const auto& o : train) {
      const double rel = std::abs(predict(row.fit, o.N, o.D) - o.loss) / o.loss;
      row.max_in_sample_relative = std::max(row.max_in_sample_relative, rel);
    }
    for (std::size_t i = keep; i < ladder.size(); ++i) {
      const auto& o = finals[i];
      HeldOutPoint h{o.model, o.N, o.D, o.loss, predict(row.fit, o.N, o.D), 0.0, 0.0};
      h.signed_error = h.predicted - h.observed;
      h.relative_error = h.signed_error / h.observed;
      row.held_out.push_back(h);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Ladder of all models in the observations, ordered by N.
inline std::vector<std::string> ladder_by_size(const std::vector<Observation>& obs) {
  std::map<std::string, double> n;
  for (const auto& o : obs) n[o.model] = o.N;
  std::vector<std::string> names;
  for (const auto& [name, _] : n) names.push_back(name);
  std::stable_sort(names.begin(), names.end(), [&](const auto& a, const auto& b) { return n[a] < n[b]; });
  return names;
}

}  // namespace mtscale::lawfit

#endif  // MTSCALE_HOLDOUT_HPP
