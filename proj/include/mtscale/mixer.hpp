#ifndef MTSCALE_MIXER_HPP
#define MTSCALE_MIXER_HPP

// Temperature sampling over a collection of parallel corpora.
//
// Given raw sizes N_i, the sampling distribution P(D_i) = N_i / sum N_j is
// flattened by T_i = P(D_i)^(1/t). Every dataset is then resized to
//
//     k_i = floor( T_i * max_j N_j / max_j T_j )
//
// so that the largest dataset keeps its size and the others are oversampled.
// The post-mixing probability is P_t(D_i) = k_i / sum k_j.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mtscale/error.hpp"
#include "mtscale/rng.hpp"

namespace mtscale::mixer {

struct DatasetSpec {
  std::string id;
  std::string group;
  std::uint64_t size = 0;
};

struct MixEntry {
  std::string id;
  std::uint64_t original_size = 0;
  double factor = 0.0;           // T_i
  std::uint64_t oversampled = 0;  // k_i
  double probability = 0.0;      // P_t(D_i)
};

struct MixPlan {
  double temperature = 1.0;
  std::vector<MixEntry> entries;

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& e : entries) s += e.oversampled;
    return s;
  }
};

namespace detail {

inline void validate(const std::vector<DatasetSpec>& specs) {
  require(!specs.empty(), ErrorCode::InvalidInput, "dataset list is empty");
  std::set<std::string> seen;
  for (const auto& s : specs) {
    require(s.size >= 1, ErrorCode::InvalidInput, "dataset '" + s.id + "' has size 0");
    require(seen.insert(s.id).second, ErrorCode::InvalidInput, "duplicate dataset id '" + s.id + "'");
  }
}

inline std::uint64_t max_size(const std::vector<DatasetSpec>& specs) {
  std::uint64_t m = 0;
  for (const auto& s : specs) m = std::max(m, s.size);
  return m;
}

}  // namespace detail

/// P(D_i) = N_i / sum N_j.
inline std::vector<double> dataset_probabilities(const std::vector<DatasetSpec>& specs) {
  require(!specs.empty(), ErrorCode::InvalidInput, "dataset list is empty");
  long double total = 0;
  for (const auto& s : specs) {
    require(s.size >= 1, ErrorCode::InvalidInput, "dataset '" + s.id + "' has size 0");
    total += static_cast<long double>(s.size);
  }
  std::vector<double> p;
  p.reserve(specs.size());
  for (const auto& s : specs) p.push_back(static_cast<double>(static_cast<long double>(s.size) / total));
  return p;
}

/// The real value T_i * max N / max T before flooring.
///
/// T_i / max T equals (N_i / max N)^(1/t) exactly in real arithmetic; using
/// the size ratio keeps the argmax dataset at exactly max N and keeps the
/// rounding error of the sum out of the result.
inline long double oversampled_real(std::uint64_t size, std::uint64_t largest, double t) {
  const long double ratio = static_cast<long double>(size) / static_cast<long double>(largest);
  const long double scaled = (t == 1.0) ? ratio : std::pow(ratio, 1.0L / static_cast<long double>(t));
  return scaled * static_cast<long double>(largest);
}

/// floor() that does not lose an integer to a few ulps of rounding noise.
inline std::uint64_t tolerant_floor(long double x) {
  const long double f = std::floor(x);
  if ((f + 1.0L) - x <= 1e-12L * (f + 1.0L)) return static_cast<std::uint64_t>(f + 1.0L);
  return static_cast<std::uint64_t>(f);
}

inline MixPlan mix_plan(const std::vector<DatasetSpec>& specs, double t) {
  require(std::isfinite(t) && t > 0.0, ErrorCode::InvalidInput, "temperature must be > 0");
  detail::validate(specs);

  const auto probs = dataset_probabilities(specs);
  const std::uint64_t largest = detail::max_size(specs);

  MixPlan plan;
  plan.temperature = t;
  plan.entries.reserve(specs.size());
  long double k_total = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    MixEntry e;
    e.id = specs[i].id;
    e.original_size = specs[i].size;
    e.factor = std::pow(probs[i], 1.0 / t);
    // t < 1 can push tiny datasets below one sample; never drop a dataset.
    e.oversampled = std::max<std::uint64_t>(1, tolerant_floor(oversampled_real(specs[i].size, largest, t)));
    k_total += static_cast<long double>(e.oversampled);
    plan.entries.push_back(std::move(e));
  }
  for (auto& e : plan.entries)
    e.probability = static_cast<double>(static_cast<long double>(e.oversampled) / k_total);
  return plan;
}

/// Applies mix_plan independently inside each group.
inline std::map<std::string, MixPlan> grouped_mix(const std::vector<DatasetSpec>& specs, double t) {
  require(!specs.empty(), ErrorCode::InvalidInput, "dataset list is empty");
  std::map<std::string, std::vector<DatasetSpec>> by_group;
  for (const auto& s : specs) {
    require(!s.group.empty(), ErrorCode::InvalidInput, "dataset '" + s.id + "' has no group label");
    by_group[s.group].push_back(s);
  }
  std::map<std::string, MixPlan> out;
  for (const auto& [group, members] : by_group) out.emplace(group, mix_plan(members, t));
  return out;
}

struct IndexRef {
  std::string dataset_id;
  std::uint64_t index = 0;

  friend bool operator==(const IndexRef&, const IndexRef&) = default;
};

/// Expands a plan into k_i references per dataset: whole passes over the
/// dataset, then a seeded random subset for the remainder, then one global
/// seeded shuffle. Same plan and seed give the same sequence.
inline std::vector<IndexRef> materialize_indices(const MixPlan& plan, std::uint64_t seed) {
  std::vector<IndexRef> out;
  out.reserve(plan.total());
  for (std::size_t d = 0; d < plan.entries.size(); ++d) {
    const auto& e = plan.entries[d];
    require(e.original_size >= 1, ErrorCode::InvalidInput, "plan entry '" + e.id + "' has size 0");
    const std::uint64_t passes = e.oversampled / e.original_size;
    const std::uint64_t remainder = e.oversampled % e.original_size;
    for (std::uint64_t p = 0; p < passes; ++p)
      for (std::uint64_t i = 0; i < e.original_size; ++i) out.push_back({e.id, i});
    if (remainder > 0) {
      std::mt19937_64 gen(mix_seed(seed, d + 1));
      // Partial Fisher-Yates over a sparse permutation: O(remainder) memory.
      std::map<std::uint64_t, std::uint64_t> swapped;
      auto at = [&](std::uint64_t i) {
        auto it = swapped.find(i);
        return it == swapped.end() ? i : it->second;
      };
      for (std::uint64_t r = 0; r < remainder; ++r) {
        const std::uint64_t j = r + uniform_below(gen, e.original_size - r);
        const std::uint64_t vr = at(r), vj = at(j);
        swapped[r] = vj;
        swapped[j] = vr;
        out.push_back({e.id, vj});
      }
    }
  }
  std::mt19937_64 gen(mix_seed(seed, 0));
  fisher_yates(out, gen);
  return out;
}

}  // namespace mtscale::mixer

#endif  // MTSCALE_MIXER_HPP
