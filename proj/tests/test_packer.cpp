#include <gtest/gtest.h>

#include <random>

#include "mtscale/packer.hpp"

using namespace mtscale;
using namespace mtscale::packer;

namespace {

constexpr TokenId PAD = 0, EOS = 1, SRC = 2, EN = 3, FR = 4, DE = 5, GEN = 6, FIN = 7;

SpecialTokenRegistry registry() {
  SpecialTokenRegistry r;
  r.end_of_source = SRC;
  r.end_of_sequence = EOS;
  r.pad = PAD;
  r.languages = {{"en", EN}, {"fr", FR}, {"de", DE}};
  r.domains = {{"general", GEN}, {"finance", FIN}};
  r.vocab_size = 1000;
  return r;
}

SamplePair pair(std::vector<TokenId> src, std::vector<TokenId> tgt, std::string sl = "en", std::string tl = "fr",
                std::string dom = "general") {
  return {std::move(src), std::move(tgt), std::move(sl), std::move(tl), std::move(dom)};
}

FormattedSample raw(std::size_t n, TokenId base) {
  FormattedSample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.tokens.push_back(base + TokenId(i));
    s.loss_mask.push_back(i % 2);
  }
  return s;
}

SamplePair random_pair(std::mt19937_64& gen) {
  static const std::vector<std::string> langs{"en", "fr", "de"}, doms{"general", "finance"};
  std::uniform_int_distribution<int> len(1, 30);
  std::uniform_int_distribution<TokenId> tok(10, 999);
  SamplePair p;
  for (int i = len(gen); i > 0; --i) p.source_tokens.push_back(tok(gen));
  for (int i = len(gen); i > 0; --i) p.target_tokens.push_back(tok(gen));
  p.source_lang = langs[gen() % 3];
  p.target_lang = langs[gen() % 3];
  p.domain = doms[gen() % 2];
  return p;
}

}  // namespace

TEST(Registry, Validation) {
  auto r = registry();
  EXPECT_NO_THROW(r.validate());
  r.domains["kiid"] = EN;
  EXPECT_THROW(r.validate(), Error);
  r = registry();
  r.vocab_size = 5;
  EXPECT_THROW(r.validate(), Error);
  r = registry();
  r.languages.clear();
  EXPECT_THROW(r.validate(), Error);
}

TEST(FormatSample, WorkedExample) {
  const auto f = format_sample(pair({11, 12, 13}, {21, 22}), registry());
  EXPECT_EQ(f.tokens, (std::vector<TokenId>{11, 12, 13, SRC, FR, EN, GEN, 21, 22, EOS}));
  EXPECT_EQ(f.loss_mask, (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(f.loss_count(), 2u + 2u + 1u);
}

TEST(FormatSample, ShortestCase) {
  const auto f = format_sample(pair({5 + 10}, {6 + 10}), registry());
  EXPECT_EQ(f.size(), 7u);
  EXPECT_EQ(f.loss_count(), 4u);
}

TEST(FormatSample, UnknownDomain) {
  try {
    format_sample(pair({11}, {12}, "en", "fr", "kiid"), registry());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownControlToken);
  }
  EXPECT_THROW(format_sample(pair({11}, {12}, "xx"), registry()), Error);
}

TEST(FormatSample, RejectsEmptyOrSpecialContent) {
  EXPECT_THROW(format_sample(pair({}, {12}), registry()), Error);
  EXPECT_THROW(format_sample(pair({11}, {}), registry()), Error);
  EXPECT_THROW(format_sample(pair({11, EOS}, {12}), registry()), Error);
  EXPECT_THROW(format_sample(pair({11}, {5000}), registry()), Error);
}

TEST(FormatSample, DecodeRoundTripProperty) {
  std::mt19937_64 gen(11);
  const auto reg = registry();
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_pair(gen);
    const auto f = format_sample(p, reg);
    ASSERT_EQ(f.loss_count(), p.target_tokens.size() + 3);
    ASSERT_EQ(decode_sample(f.tokens, reg), p);
  }
}

TEST(InferencePrefix, FullWithEos) {
  const std::vector<TokenId> src{11, 12};
  EXPECT_EQ(inference_prefix(src, "fr", "en", "general", registry(), true),
            (std::vector<TokenId>{EOS, 11, 12, SRC, FR, EN, GEN}));
}

TEST(InferencePrefix, MinimalWithoutEos) {
  const std::vector<TokenId> src{11, 12};
  EXPECT_EQ(inference_prefix(src, "fr", std::nullopt, std::nullopt, registry(), false),
            (std::vector<TokenId>{11, 12, SRC, FR}));
}

TEST(InferencePrefix, EosDiffersByOneLeadingToken) {
  const std::vector<TokenId> src{11, 12, 13};
  const auto with = inference_prefix(src, "de", std::nullopt, "finance", registry());
  const auto without = inference_prefix(src, "de", std::nullopt, "finance", registry(), false);
  ASSERT_EQ(with.size(), without.size() + 1);
  EXPECT_EQ(with.front(), EOS);
  EXPECT_TRUE(std::equal(without.begin(), without.end(), with.begin() + 1));
  EXPECT_THROW(inference_prefix(src, "xx", std::nullopt, std::nullopt, registry()), Error);
  EXPECT_THROW(inference_prefix({}, "fr", std::nullopt, std::nullopt, registry()), Error);
}

TEST(Pack, ExactFitSplit) {
  std::vector<FormattedSample> s{raw(5, 10), raw(5, 20)};
  const auto r = pack(s, 10, BoundaryPolicy::Split, registry());
  ASSERT_EQ(r.shard.sequences.size(), 1u);
  EXPECT_EQ(std::count(r.shard.sequences[0].tokens.begin(), r.shard.sequences[0].tokens.end(), PAD), 0);
}

TEST(Pack, SplitCarriesOverflow) {
  std::vector<FormattedSample> s{raw(7, 10), raw(7, 20)};
  const auto r = pack(s, 10, BoundaryPolicy::Split, registry());
  ASSERT_EQ(r.shard.sequences.size(), 2u);
  EXPECT_EQ(r.shard.sequences[0].tokens, (std::vector<TokenId>{10, 11, 12, 13, 14, 15, 16, 20, 21, 22}));
  EXPECT_EQ(r.shard.sequences[0].loss_mask, (std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1, 0, 0, 1, 0}));
  EXPECT_EQ(r.shard.sequences[1].tokens, (std::vector<TokenId>{23, 24, 25, 26, PAD, PAD, PAD, PAD, PAD, PAD}));
  EXPECT_EQ(r.shard.sequences[1].loss_mask, (std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(Pack, DropTailStartsFreshSequence) {
  std::vector<FormattedSample> s{raw(7, 10), raw(7, 20)};
  const auto r = pack(s, 10, BoundaryPolicy::DropTail, registry());
  ASSERT_EQ(r.shard.sequences.size(), 2u);
  for (const auto& seq : r.shard.sequences) {
    EXPECT_EQ(std::count(seq.tokens.begin(), seq.tokens.end(), PAD), 3);
    EXPECT_EQ(seq.tokens[7], PAD);
  }
  EXPECT_EQ(r.skipped, 0u);
}

TEST(Pack, DropTailSharesSequenceWhenItFits) {
  std::vector<FormattedSample> s{raw(4, 10), raw(5, 20), raw(3, 30)};
  const auto r = pack(s, 10, BoundaryPolicy::DropTail, registry());
  ASSERT_EQ(r.shard.sequences.size(), 2u);
  EXPECT_EQ(r.shard.sequences[0].tokens[8], 24u);
  EXPECT_EQ(r.shard.sequences[0].tokens[9], PAD);
  EXPECT_EQ(r.shard.sequences[1].tokens[0], 30u);
}

TEST(Pack, DropTailSkipsLongSamples) {
  std::vector<FormattedSample> s{raw(12, 10), raw(3, 30)};
  const auto r = pack(s, 10, BoundaryPolicy::DropTail, registry());
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.accepted, 1u);
  ASSERT_EQ(r.shard.sequences.size(), 1u);
  EXPECT_EQ(r.shard.sequences[0].tokens[0], 30u);
}

TEST(Pack, RejectsTinySeqLen) { EXPECT_THROW(Packer(1, BoundaryPolicy::Split, registry()), Error); }

TEST(Pack, EmptyInput) {
  const auto r = pack({}, 16, BoundaryPolicy::Split, registry());
  EXPECT_TRUE(r.shard.sequences.empty());
}

TEST(Pack, SplitConservationProperty) {
  std::mt19937_64 gen(5);
  const auto reg = registry();
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SamplePair> pairs;
    std::vector<FormattedSample> samples;
    FormattedSample concat;
    for (int i = 0; i < 40; ++i) {
      pairs.push_back(random_pair(gen));
      samples.push_back(format_sample(pairs.back(), reg));
      concat.tokens.insert(concat.tokens.end(), samples.back().tokens.begin(), samples.back().tokens.end());
      concat.loss_mask.insert(concat.loss_mask.end(), samples.back().loss_mask.begin(),
                              samples.back().loss_mask.end());
    }
    const std::uint32_t seq_len = 8 + std::uint32_t(gen() % 100);
    const auto r = pack(samples, seq_len, BoundaryPolicy::Split, reg);
    const auto stream = unpadded_stream(r.shard, PAD);
    EXPECT_EQ(stream.tokens, concat.tokens);
    EXPECT_EQ(stream.loss_mask, concat.loss_mask);
    EXPECT_EQ(decode_shard(r.shard, reg), pairs);

    // Every <eos> is followed by the next sample's first source token or pad.
    std::vector<TokenId> flat;
    for (const auto& seq : r.shard.sequences) flat.insert(flat.end(), seq.tokens.begin(), seq.tokens.end());
    std::size_t sample = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (flat[i] != EOS) continue;
      ++sample;
      if (i + 1 == flat.size()) break;
      if (sample < pairs.size())
        EXPECT_EQ(flat[i + 1], pairs[sample].source_tokens.front());
      else
        EXPECT_EQ(flat[i + 1], PAD);
    }
    const auto stats = shard_stats(r.shard, reg);
    EXPECT_EQ(stats.samples_started, pairs.size());
    EXPECT_EQ(stats.loss_tokens, concat.loss_count());
  }
}

TEST(ShardStats, TwoWorkedExamples) {
  const auto f = format_sample(pair({11, 12, 13}, {21, 22}), registry());
  std::vector<FormattedSample> s{f, f};
  const auto r = pack(s, 10, BoundaryPolicy::Split, registry());
  const auto st = shard_stats(r.shard, registry());
  EXPECT_EQ(st.total_tokens, 20u);
  EXPECT_EQ(st.loss_tokens, 10u);
  EXPECT_EQ(st.pad_tokens, 0u);
  EXPECT_EQ(st.samples_started, 2u);
  EXPECT_DOUBLE_EQ(st.loss_fraction(), 0.5);
}

TEST(ShardStats, AllPad) {
  PackedShard shard{4, 1000, BoundaryPolicy::DropTail, {{{PAD, PAD, PAD, PAD}, {0, 0, 0, 0}}}};
  const auto st = shard_stats(shard, registry());
  EXPECT_EQ(st.loss_tokens, 0u);
  EXPECT_EQ(st.pad_tokens, 4u);
  EXPECT_EQ(st.samples_started, 0u);
  EXPECT_DOUBLE_EQ(st.loss_fraction(), 0.0);
}

TEST(ShardStats, SymmetricCorpusFraction) {
  const auto reg = registry();
  for (std::size_t len : {1u, 5u, 20u, 100u}) {
    std::vector<FormattedSample> s;
    for (int i = 0; i < 50; ++i)
      s.push_back(format_sample(pair(std::vector<TokenId>(len, 42), std::vector<TokenId>(len, 43)), reg));
    const auto st = shard_stats(pack(s, 512, BoundaryPolicy::Split, reg).shard, reg);
    EXPECT_DOUBLE_EQ(st.loss_fraction(), double(len + 3) / double(2 * len + 5));
  }
}
