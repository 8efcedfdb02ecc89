#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bertgram/corpus.hpp"

namespace bertgram {

/// Token ids of one sequence plus a row-major T x dim block of contextual vectors.
struct EmbeddedSequence {
  std::uint64_t seq_id = 0;
  std::uint32_t dim = 0;
  std::vector<TokenId> ids;
  std::vector<float> vectors;

  std::size_t length() const { return ids.size(); }
  std::span<const float> row(std::size_t t) const {
    return {vectors.data() + t * dim, dim};
  }
  std::span<float> row(std::size_t t) { return {vectors.data() + t * dim, dim}; }

  /// Throws DataError if rows != T * dim or any entry is non-finite.
  void validate() const;
  bool operator==(const EmbeddedSequence&) const = default;
};

struct EmbeddedCorpus {
  std::uint32_t dim = 0;
  std::vector<EmbeddedSequence> sequences;

  std::size_t token_count() const;
  /// Shared dimension, unique seq ids, per-sequence validity.
  void validate() const;
  bool operator==(const EmbeddedCorpus&) const = default;
};

// EMBD: "EMBD", u32 version = 1, u32 d, u64 num_sequences; per sequence
// u64 seq_id, u32 T, T x u32 ids, T*d x f32. Little-endian.
std::string serialize_dump(const EmbeddedCorpus& corpus);
EmbeddedCorpus deserialize_dump(std::string_view bytes);
void write_dump(const EmbeddedCorpus& corpus, const std::filesystem::path& path);
EmbeddedCorpus read_dump(const std::filesystem::path& path);

/// Deterministic stand-in for a contextual encoder. The vector at position t is
/// a pseudo-random direction seeded by (w_{t-c} .. w_{t+c}, seed), scaled to the
/// given norm. Out-of-range window slots hash as a boundary marker.
struct SyntheticEmbedder {
  std::size_t window = 1;
  std::uint32_t dim = 16;
  std::uint64_t seed = 0;
  double scale = 1.0;

  EmbeddedSequence operator()(std::span<const TokenId> ids, std::uint64_t seq_id = 0) const;
  EmbeddedCorpus embed(std::span<const Sequence> sequences) const;
};

EmbeddedSequence synthetic_embed(std::span<const TokenId> ids, std::size_t window, std::uint32_t dim,
                                 std::uint64_t seed, double scale = 1.0);

}  // namespace bertgram
