#ifndef MTSCALE_LEDGER_HPP
#define MTSCALE_LEDGER_HPP

// Parameter and FLOP accounting for GPT-NeoX style decoder-only models.
//
// Per layer (hidden size d, 4x feed-forward expansion):
//   attention     4d^2 + 4d   (QKV + output projection, with biases)
//   feed-forward  8d^2 + 5d
//   layer norms   4d          (two, scale + shift)
// plus a final layer norm (2d) and the untied output head (V' d), where V'
// is the vocabulary padded to a multiple of 512.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtscale/error.hpp"

namespace mtscale::ledger {

struct ModelArch {
  std::string name;
  std::uint64_t layers = 1;
  std::uint64_t hidden = 1;
  std::uint64_t heads = 1;
  std::uint64_t vocab_size = 1;
  std::uint64_t seq_len = 512;
  bool tied_embeddings = false;

  void validate() const {
    require(layers >= 1 && hidden >= 1 && heads >= 1 && vocab_size >= 1 && seq_len >= 1,
            ErrorCode::InvalidInput, "architecture '" + name + "' has a zero dimension");
    require(hidden % heads == 0, ErrorCode::InvalidInput, "architecture '" + name + "': dim not divisible by heads");
  }
};

struct ParamCount {
  std::uint64_t embedding = 0;
  std::uint64_t non_embedding = 0;
  std::uint64_t total = 0;
  std::uint64_t padded_vocab = 0;
};

enum class FlopMode { Exact, SixND };

struct FlopEstimate {
  FlopMode mode = FlopMode::SixND;
  double forward_per_token = 0.0;
  double train_per_token = 0.0;
  std::uint64_t seq_len = 0;

  double train_total(double tokens) const { return train_per_token * tokens; }
  double train_per_sample() const { return train_per_token * double(seq_len); }
};

inline constexpr std::uint64_t kVocabMultiple = 512;
inline constexpr double kBackwardToForward = 2.0;

inline std::uint64_t pad_vocab(std::uint64_t vocab, std::uint64_t multiple = kVocabMultiple) {
  require(vocab >= 1 && multiple >= 1, ErrorCode::InvalidInput, "vocab and multiple must be >= 1");
  return (vocab + multiple - 1) / multiple * multiple;
}

inline std::uint64_t layer_params(std::uint64_t d) { return 12 * d * d + 13 * d; }

inline ParamCount param_count(const ModelArch& arch) {
  arch.validate();
  const std::uint64_t d = arch.hidden;
  ParamCount c;
  c.padded_vocab = pad_vocab(arch.vocab_size);
  c.embedding = c.padded_vocab * d;
  c.non_embedding = arch.layers * layer_params(d) + 2 * d + (arch.tied_embeddings ? 0 : c.padded_vocab * d);
  c.total = c.embedding + c.non_embedding;
  return c;
}

/// Forward FLOP per token: two per multiply-accumulate over the weight
/// matrices (layers and head), plus QK^T and attention-weighted values.
inline double exact_forward_per_token(std::uint64_t layers, std::uint64_t d, std::uint64_t padded_vocab,
                                      double avg_context) {
  const double L = double(layers), D = double(d);
  return 2.0 * (L * 12.0 * D * D + double(padded_vocab) * D) + 4.0 * L * D * avg_context;
}

inline FlopEstimate flops(const ModelArch& arch, FlopMode mode, std::optional<double> avg_context = std::nullopt) {
  const auto params = param_count(arch);
  FlopEstimate f;
  f.mode = mode;
  f.seq_len = arch.seq_len;
  if (mode == FlopMode::SixND) {
    f.forward_per_token = 2.0 * double(params.non_embedding);
  } else {
    const double ctx = avg_context.value_or(double(arch.seq_len) / 2.0);
    require(ctx >= 0.0, ErrorCode::InvalidInput, "average context must be >= 0");
    f.forward_per_token = exact_forward_per_token(arch.layers, arch.hidden, params.padded_vocab, ctx);
  }
  f.train_per_token = (1.0 + kBackwardToForward) * f.forward_per_token;
  return f;
}

struct ScalingRow {
  std::string name;
  std::uint64_t layers = 0;
  std::uint64_t hidden = 0;
  std::uint64_t non_embedding = 0;
  std::uint64_t embedding = 0;
  double train_flop_per_sample = 0.0;
  double relative_flop = 1.0;
};

/// Base first, then each variant in the given order.
inline std::vector<ScalingRow> scaling_table(const ModelArch& base, const std::vector<ModelArch>& variants,
                                             FlopMode mode) {
  const auto base_flops = flops(base, mode);
  auto row = [&](const ModelArch& a) {
    const auto p = param_count(a);
    const auto f = flops(a, mode);
    return ScalingRow{a.name,        a.layers, a.hidden, p.non_embedding, p.embedding, f.train_per_sample(),
                      f.train_per_token / base_flops.train_per_token};
  };
  std::vector<ScalingRow> rows{row(base)};
  for (const auto& v : variants) {
    require(v.vocab_size == base.vocab_size && v.seq_len == base.seq_len, ErrorCode::InvalidComparison,
            "variant '" + v.name + "' does not share vocab and seq_len with '" + base.name + "'");
    rows.push_back(row(v));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Presets

struct Preset {
  std::string key;  // lookup name
  ModelArch arch;
  // Counts as published for the trained models, when known.
  std::optional<std::uint64_t> published_non_embedding;
  std::optional<std::uint64_t> published_embedding;
};

inline ModelArch make_arch(std::string name, std::uint64_t layers, std::uint64_t hidden, std::uint64_t heads) {
  return ModelArch{std::move(name), layers, hidden, heads, 100000, 512, false};
}

/// The six trained models.
inline const std::vector<Preset>& base_presets() {
  static const std::vector<Preset> p{
      {"70m", make_arch("70M", 6, 512, 8), 70295552ULL, 51380224ULL},
      {"160m", make_arch("160M", 12, 768, 16), 162126336ULL, 77070336ULL},
      {"410m", make_arch("410M", 24, 1024, 16), 405071872ULL, 102760448ULL},
      {"610m", make_arch("610M", 16, 1536, 16), 607448064ULL, 154140672ULL},
      {"1b", make_arch("1B", 16, 2048, 8), 1011257344ULL, 205520896ULL},
      {"6.9b", make_arch("6.9B", 32, 4096, 32), 6855204864ULL, 411041792ULL},
  };
  return p;
}

/// Width and depth variants of the 70M model. The published non-embedding
/// count of 70M+12l repeats the 70M+d1024 value; the formula gives 89,209,856.
inline const std::vector<Preset>& scaled_presets() {
  static const std::vector<Preset> p{
      {"70m+d768", make_arch("70M+d768", 6, 768, 8), 119599104ULL, 77070336ULL},
      {"70m+12l", make_arch("70M+12l", 12, 512, 8), 178339840ULL, 51380224ULL},
      {"70m+d1024", make_arch("70M+d1024", 6, 1024, 8), 178339840ULL, 102760448ULL},
      {"70m+24l", make_arch("70M+24l", 24, 512, 8), 127038464ULL, 51380224ULL},
  };
  return p;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

/// Accepts "70m", "70M", "pythia70m", "70m+12l", ...
inline const Preset& find_preset(const std::string& name) {
  std::string key = lowercase(name);
  if (key.rfind("pythia", 0) == 0) key = key.substr(6);
  if (key.rfind("-", 0) == 0) key = key.substr(1);
  for (const auto* list : {&base_presets(), &scaled_presets()})
    for (const auto& p : *list)
      if (p.key == key) return p;
  throw Error(ErrorCode::InvalidInput, "unknown architecture preset '" + name + "'");
}

/// Notes for presets whose formula count differs from the published value.
inline std::vector<std::string> discrepancy_notes(const std::vector<Preset>& presets) {
  std::vector<std::string> notes;
  for (const auto& p : presets) {
    const auto c = param_count(p.arch);
    if (p.published_non_embedding && *p.published_non_embedding != c.non_embedding)
      notes.push_back(p.arch.name + ": published non-embedding " + std::to_string(*p.published_non_embedding) +
                      " differs from formula value " + std::to_string(c.non_embedding));
    if (p.published_embedding && *p.published_embedding != c.embedding)
      notes.push_back(p.arch.name + ": published embedding " + std::to_string(*p.published_embedding) +
                      " differs from formula value " + std::to_string(c.embedding));
  }
  return notes;
}

}  // namespace mtscale::ledger

#endif  // MTSCALE_LEDGER_HPP
