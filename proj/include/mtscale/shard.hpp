#ifndef MTSCALE_SHARD_HPP
#define MTSCALE_SHARD_HPP

// Binary shard format, little-endian throughout:
//
//   offset  size  field
//   0       4     magic "PKSH"
//   4       4     format version (u32, = 1)
//   8       4     seq_len (u32)
//   12      4     vocab_size (u32)
//   16      8     sequence count (u64)
//   24      1     boundary policy (u8, 0 = Split, 1 = DropTail)
//   25      ...   sequences
//
// Each sequence is seq_len u32 token ids followed by ceil(seq_len / 8) mask
// bytes, bit i of the sequence stored LSB-first in byte i / 8.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mtscale/error.hpp"
#include "mtscale/fileio.hpp"
#include "mtscale/packer.hpp"

namespace mtscale::packer {

inline constexpr std::array<char, 4> kShardMagic{'P', 'K', 'S', 'H'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderSize = 25;

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_shard(const PackedShard& shard) {
  require(shard.policy == BoundaryPolicy::Split || shard.policy == BoundaryPolicy::DropTail,
          ErrorCode::InvalidInput, "unknown boundary policy");
  const std::size_t L = shard.seq_len;
  const std::size_t mask_bytes = (L + 7) / 8;
  std::vector<std::uint8_t> out;
  out.reserve(kShardHeaderSize + shard.sequences.size() * (4 * L + mask_bytes));
  out.insert(out.end(), kShardMagic.begin(), kShardMagic.end());
  detail::put_le<std::uint32_t>(out, kShardVersion);
  detail::put_le<std::uint32_t>(out, shard.seq_len);
  detail::put_le<std::uint32_t>(out, shard.vocab_size);
  detail::put_le<std::uint64_t>(out, shard.sequences.size());
  out.push_back(static_cast<std::uint8_t>(shard.policy));
  for (const auto& seq : shard.sequences) {
    require(seq.tokens.size() == L && seq.loss_mask.size() == L, ErrorCode::InvalidInput,
            "sequence length differs from seq_len");
    for (TokenId t : seq.tokens) detail::put_le<std::uint32_t>(out, t);
    std::vector<std::uint8_t> bits(mask_bytes, 0);
    for (std::size_t i = 0; i < L; ++i)
      if (seq.loss_mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out.insert(out.end(), bits.begin(), bits.end());
  }
  return out;
}

inline PackedShard decode_shard_bytes(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 4, ErrorCode::TruncatedFile, "file shorter than the magic");
  require(std::memcmp(bytes.data(), kShardMagic.data(), 4) == 0, ErrorCode::MagicMismatch, "not a PKSH shard");
  require(bytes.size() >= kShardHeaderSize, ErrorCode::TruncatedFile, "header truncated");
  const std::uint8_t* p = bytes.data();
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  require(version == kShardVersion, ErrorCode::VersionMismatch,
          "shard version " + std::to_string(version) + ", expected " + std::to_string(kShardVersion));

  PackedShard shard;
  shard.seq_len = detail::get_le<std::uint32_t>(p + 8);
  shard.vocab_size = detail::get_le<std::uint32_t>(p + 12);
  const auto count = detail::get_le<std::uint64_t>(p + 16);
  const std::uint8_t policy = p[24];
  require(policy <= 1, ErrorCode::CorruptShard, "unknown boundary policy " + std::to_string(policy));
  shard.policy = static_cast<BoundaryPolicy>(policy);

  const std::size_t L = shard.seq_len;
  const std::size_t mask_bytes = (L + 7) / 8;
  const std::size_t per_seq = 4 * L + mask_bytes;
  const std::size_t body = bytes.size() - kShardHeaderSize;
  require(per_seq == 0 ? count == 0 : count <= body / per_seq, ErrorCode::TruncatedFile, "body truncated");
  require(body == count * per_seq, ErrorCode::CorruptShard, "trailing bytes after the last sequence");

  shard.sequences.resize(count);
  const std::uint8_t* q = p + kShardHeaderSize;
  for (auto& seq : shard.sequences) {
    seq.tokens.resize(L);
    seq.loss_mask.resize(L);
    for (std::size_t i = 0; i < L; ++i, q += 4) seq.tokens[i] = detail::get_le<std::uint32_t>(q);
    for (std::size_t i = 0; i < L; ++i) seq.loss_mask[i] = (q[i / 8] >> (i % 8)) & 1u;
    // Bits past seq_len in the last mask byte must be zero.
    if (L % 8 != 0) require((q[mask_bytes - 1] >> (L % 8)) == 0, ErrorCode::CorruptShard, "stray mask bits");
    q += mask_bytes;
  }
  return shard;
}

inline void write_shard(const PackedShard& shard, const std::filesystem::path& path) {
  const auto bytes = encode_shard(shard);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

inline PackedShard read_shard(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_shard_bytes(bytes);
}

}  // namespace mtscale::packer

#endif  // MTSCALE_SHARD_HPP
