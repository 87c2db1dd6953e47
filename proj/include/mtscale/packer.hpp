#ifndef MTSCALE_PACKER_HPP
#define MTSCALE_PACKER_HPP

// Sentence-pair layout, target-only loss masks and fixed-length packing.
//
// Training layout of one pair:
//
//     SOURCE </src> <tgt_lang> <src_lang> <dom> TARGET <eos>
//
// The source and the target language are inputs; everything from the source
// language token onwards is predicted and therefore loss-bearing.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mtscale/error.hpp"

namespace mtscale::packer {

using TokenId = std::uint32_t;

struct SpecialTokenRegistry {
  TokenId end_of_source = 0;    // </src>
  TokenId end_of_sequence = 0;  // <eos>
  TokenId pad = 0;
  std::map<std::string, TokenId> languages;  // "en" -> <lang_en>
  std::map<std::string, TokenId> domains;    // "general" -> <dom_general>
  std::uint32_t vocab_size = 0;

  TokenId language(const std::string& code) const {
    auto it = languages.find(code);
    require(it != languages.end(), ErrorCode::UnknownControlToken, "no token for language '" + code + "'");
    return it->second;
  }

  TokenId domain(const std::string& name) const {
    auto it = domains.find(name);
    require(it != domains.end(), ErrorCode::UnknownControlToken, "no token for domain '" + name + "'");
    return it->second;
  }

  bool is_special(TokenId id) const {
    if (id == end_of_source || id == end_of_sequence || id == pad) return true;
    for (const auto& [_, v] : languages)
      if (v == id) return true;
    for (const auto& [_, v] : domains)
      if (v == id) return true;
    return false;
  }

  void validate() const {
    require(!languages.empty(), ErrorCode::InvalidInput, "registry has no language tokens");
    require(!domains.empty(), ErrorCode::InvalidInput, "registry has no domain tokens");
    std::set<TokenId> ids{end_of_source, end_of_sequence, pad};
    require(ids.size() == 3, ErrorCode::InvalidInput, "</src>, <eos> and <pad> ids must differ");
    std::size_t expected = 3;
    for (const auto& [_, v] : languages) ids.insert(v);
    for (const auto& [_, v] : domains) ids.insert(v);
    expected += languages.size() + domains.size();
    require(ids.size() == expected, ErrorCode::InvalidInput, "special token ids are not distinct");
    require(vocab_size > 0 && *ids.rbegin() < vocab_size, ErrorCode::InvalidInput,
            "special token id outside the vocabulary");
  }
};

struct SamplePair {
  std::vector<TokenId> source_tokens;
  std::vector<TokenId> target_tokens;
  std::string source_lang;
  std::string target_lang;
  std::string domain;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

struct FormattedSample {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> loss_mask;  // 0/1, same length as tokens

  std::size_t size() const { return tokens.size(); }
  std::size_t loss_count() const {
    return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
  }
};

/// Number of control tokens wrapped around source and target.
inline constexpr std::size_t kControlTokens = 5;

namespace detail {

inline void check_content(std::span<const TokenId> tokens, const SpecialTokenRegistry& reg,
                          const char* what) {
  require(!tokens.empty(), ErrorCode::InvalidInput, std::string(what) + " is empty");
  for (TokenId t : tokens) {
    require(t < reg.vocab_size, ErrorCode::InvalidInput, std::string(what) + " token outside the vocabulary");
    require(!reg.is_special(t), ErrorCode::InvalidInput, std::string(what) + " contains a special token");
  }
}

}  // namespace detail

inline FormattedSample format_sample(const SamplePair& pair, const SpecialTokenRegistry& reg) {
  const TokenId tgt_lang = reg.language(pair.target_lang);
  const TokenId src_lang = reg.language(pair.source_lang);
  const TokenId dom = reg.domain(pair.domain);
  detail::check_content(pair.source_tokens, reg, "source");
  detail::check_content(pair.target_tokens, reg, "target");

  FormattedSample out;
  const std::size_t n = pair.source_tokens.size() + pair.target_tokens.size() + kControlTokens;
  out.tokens.reserve(n);
  out.loss_mask.reserve(n);
  auto push = [&](TokenId t, bool loss) {
    out.tokens.push_back(t);
    out.loss_mask.push_back(loss ? 1 : 0);
  };
  for (TokenId t : pair.source_tokens) push(t, false);
  push(reg.end_of_source, false);
  push(tgt_lang, false);
  push(src_lang, true);
  push(dom, true);
  for (TokenId t : pair.target_tokens) push(t, true);
  push(reg.end_of_sequence, true);
  return out;
}

/// Inverse of format_sample, driven only by token positions and roles.
inline SamplePair decode_sample(std::span<const TokenId> tokens, const SpecialTokenRegistry& reg) {
  auto reverse = [](const std::map<std::string, TokenId>& m, TokenId id, const char* what) {
    for (const auto& [k, v] : m)
      if (v == id) return k;
    throw Error(ErrorCode::UnknownControlToken, std::string("token is not a ") + what + " control token");
  };
  const auto src_end = std::find(tokens.begin(), tokens.end(), reg.end_of_source);
  require(src_end != tokens.end(), ErrorCode::InvalidInput, "missing </src>");
  const auto ctl = static_cast<std::size_t>(src_end - tokens.begin());
  require(ctl >= 1 && ctl + 4 < tokens.size(), ErrorCode::InvalidInput, "sample too short");
  require(tokens.back() == reg.end_of_sequence, ErrorCode::InvalidInput, "sample does not end with <eos>");

  SamplePair p;
  p.source_tokens.assign(tokens.begin(), src_end);
  p.target_lang = reverse(reg.languages, tokens[ctl + 1], "language");
  p.source_lang = reverse(reg.languages, tokens[ctl + 2], "language");
  p.domain = reverse(reg.domains, tokens[ctl + 3], "domain");
  p.target_tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(ctl + 4), tokens.end() - 1);
  require(!p.target_tokens.empty(), ErrorCode::InvalidInput, "empty target");
  return p;
}

/// Inference-time input. With eos_prefix the source is preceded by <eos>,
/// which is what every non-initial source sees in a packed training stream.
inline std::vector<TokenId> inference_prefix(std::span<const TokenId> source, const std::string& target_lang,
                                             const std::optional<std::string>& source_lang,
                                             const std::optional<std::string>& domain,
                                             const SpecialTokenRegistry& reg, bool eos_prefix = true) {
  const TokenId tgt = reg.language(target_lang);
  const std::optional<TokenId> src = source_lang ? std::optional(reg.language(*source_lang)) : std::nullopt;
  const std::optional<TokenId> dom = domain ? std::optional(reg.domain(*domain)) : std::nullopt;
  require(!source.empty(), ErrorCode::InvalidInput, "source is empty");

  std::vector<TokenId> out;
  out.reserve(source.size() + 5);
  if (eos_prefix) out.push_back(reg.end_of_sequence);
  out.insert(out.end(), source.begin(), source.end());
  out.push_back(reg.end_of_source);
  out.push_back(tgt);
  if (src) out.push_back(*src);
  if (dom) out.push_back(*dom);
  return out;
}

enum class BoundaryPolicy : std::uint8_t { Split = 0, DropTail = 1 };

struct PackedSequence {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> loss_mask;

  friend bool operator==(const PackedSequence&, const PackedSequence&) = default;
};

struct PackedShard {
  std::uint32_t seq_len = 0;
  std::uint32_t vocab_size = 0;
  BoundaryPolicy policy = BoundaryPolicy::Split;
  std::vector<PackedSequence> sequences;

  friend bool operator==(const PackedShard&, const PackedShard&) = default;
};

struct PackResult {
  PackedShard shard;
  std::size_t accepted = 0;
  std::size_t skipped = 0;  // DropTail only: samples longer than seq_len
};

/// Sequential packer; feed samples in stream order, then finish().
class Packer {
 public:
  Packer(std::uint32_t seq_len, BoundaryPolicy policy, const SpecialTokenRegistry& reg)
      : pad_(reg.pad) {
    require(seq_len >= 2, ErrorCode::InvalidInput, "seq_len must be >= 2");
    result_.shard.seq_len = seq_len;
    result_.shard.vocab_size = reg.vocab_size;
    result_.shard.policy = policy;
  }

  /// Returns false when the sample was skipped.
  bool add(const FormattedSample& s) {
    require(s.tokens.size() == s.loss_mask.size(), ErrorCode::InvalidInput, "mask length differs from tokens");
    const std::size_t L = result_.shard.seq_len;
    if (result_.shard.policy == BoundaryPolicy::DropTail) {
      if (s.size() > L) {
        ++result_.skipped;
        return false;
      }
      if (!open_ || L - current_.tokens.size() < s.size()) flush();
      open_ = true;
      append(s.tokens, s.loss_mask, 0, s.size());
      if (current_.tokens.size() == L) flush();
    } else {
      std::size_t pos = 0;
      while (pos < s.size()) {
        open_ = true;
        const std::size_t take = std::min(L - current_.tokens.size(), s.size() - pos);
        append(s.tokens, s.loss_mask, pos, take);
        pos += take;
        if (current_.tokens.size() == L) flush();
      }
    }
    ++result_.accepted;
    return true;
  }

  PackResult finish() {
    flush();
    return std::move(result_);
  }

 private:
  void append(const std::vector<TokenId>& t, const std::vector<std::uint8_t>& m, std::size_t from, std::size_t n) {
    current_.tokens.insert(current_.tokens.end(), t.begin() + static_cast<std::ptrdiff_t>(from),
                           t.begin() + static_cast<std::ptrdiff_t>(from + n));
    current_.loss_mask.insert(current_.loss_mask.end(), m.begin() + static_cast<std::ptrdiff_t>(from),
                              m.begin() + static_cast<std::ptrdiff_t>(from + n));
  }

  void flush() {
    if (!open_) return;
    current_.tokens.resize(result_.shard.seq_len, pad_);
    current_.loss_mask.resize(result_.shard.seq_len, 0);
    result_.shard.sequences.push_back(std::move(current_));
    current_ = {};
    open_ = false;
  }

  TokenId pad_;
  PackResult result_;
  PackedSequence current_;
  bool open_ = false;
};

inline PackResult pack(std::span<const FormattedSample> samples, std::uint32_t seq_len, BoundaryPolicy policy,
                       const SpecialTokenRegistry& reg) {
  Packer p(seq_len, policy, reg);
  for (const auto& s : samples) p.add(s);
  return p.finish();
}

/// The shard's non-pad tokens (with mask bits) in stream order.
inline FormattedSample unpadded_stream(const PackedShard& shard, TokenId pad) {
  FormattedSample out;
  for (const auto& seq : shard.sequences)
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      if (seq.tokens[i] == pad) continue;
      out.tokens.push_back(seq.tokens[i]);
      out.loss_mask.push_back(seq.loss_mask[i]);
    }
  return out;
}

/// Splits a shard back into its sample pairs (a sample ends at each <eos>).
inline std::vector<SamplePair> decode_shard(const PackedShard& shard, const SpecialTokenRegistry& reg) {
  const auto stream = unpadded_stream(shard, reg.pad);
  std::vector<SamplePair> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < stream.tokens.size(); ++i) {
    if (stream.tokens[i] != reg.end_of_sequence) continue;
    out.push_back(decode_sample(std::span(stream.tokens).subspan(start, i + 1 - start), reg));
    start = i + 1;
  }
  require(start == stream.tokens.size(), ErrorCode::InvalidInput, "stream ends inside a sample");
  return out;
}

struct ShardStats {
  std::uint64_t total_tokens = 0;
  std::uint64_t loss_tokens = 0;
  std::uint64_t pad_tokens = 0;
  std::uint64_t samples_started = 0;

  double loss_fraction() const {
    const auto used = total_tokens - pad_tokens;
    return used == 0 ? 0.0 : double(loss_tokens) / double(used);
  }
};

inline ShardStats shard_stats(const PackedShard& shard, TokenId pad, TokenId eos) {
  ShardStats s;
  bool at_start = true;
  for (const auto& seq : shard.sequences)
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      ++s.total_tokens;
      if (seq.loss_mask[i]) ++s.loss_tokens;
      if (seq.tokens[i] == pad) {
        ++s.pad_tokens;
        continue;
      }
      if (at_start) ++s.samples_started;
      at_start = seq.tokens[i] == eos;
    }
  return s;
}

inline ShardStats shard_stats(const PackedShard& shard, const SpecialTokenRegistry& reg) {
  return shard_stats(shard, reg.pad, reg.end_of_sequence);
}

}  // namespace mtscale::packer

#endif  // MTSCALE_PACKER_HPP
