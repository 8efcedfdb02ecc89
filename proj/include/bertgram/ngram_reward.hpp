#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bertgram/corpus.hpp"

namespace bertgram {

/// Per order n, the maximum count of each n-gram over all references.
/// Lookups of absent n-grams return 0.
class MaxCountTable {
 public:
  using Map = std::unordered_map<NGram, std::uint32_t, NGramHash>;

  MaxCountTable() = default;
  explicit MaxCountTable(std::size_t n_max);

  std::size_t n_max() const { return orders_.size(); }
  std::uint32_t count(std::span<const TokenId> ngram) const;
  const Map& order(std::size_t n) const;
  /// Keeps the larger of the stored and the given count.
  void raise(const NGram& ngram, std::uint32_t count);
  std::size_t entry_count() const;

  bool operator==(const MaxCountTable& other) const { return orders_ == other.orders_; }

 private:
  std::vector<Map> orders_;
};

struct BleuParams {
  std::vector<double> weights;  // one per order, sums to 1
  bool smoothing = true;

  static BleuParams uniform(std::size_t n_max, bool smoothing = true);
  void validate() const;
};

/// Clipped match count and number of candidate n-grams (T - n + 1, or 0).
struct PrecisionCounts {
  std::uint64_t matched = 0;
  std::uint64_t total = 0;
  bool operator==(const PrecisionCounts&) const = default;
};

MaxCountTable build_max_count_table(const Corpus& references, std::size_t n_max);
MaxCountTable build_max_count_table(std::span<const Sequence> references, std::size_t n_max);

PrecisionCounts modified_precision(std::span<const TokenId> candidate, const MaxCountTable& table,
                                   std::size_t n);

/// Sentence BLEU without brevity penalty from per-order counts (index 0 is n = 1).
/// Zero-match orders are smoothed geometrically: the i-th such order gets
/// 1 / (2^i * total). Orders with total = 0 are dropped and the remaining
/// weights renormalized. The result lies on a 2^-52 grid so that differences of
/// scores are exact.
double bleu_from_counts(std::span<const PrecisionCounts> counts, const BleuParams& params);

double bleu(std::span<const TokenId> candidate, const MaxCountTable& table, const BleuParams& params);

/// R_t = bleu(s_1..t) - bleu(s_1..t-1) with bleu of the empty prefix = 0.
/// Summing left to right reproduces bleu(candidate) bit for bit.
std::vector<double> shaped_increments(std::span<const TokenId> candidate, const MaxCountTable& table,
                                      const BleuParams& params);

// NGTB: "NGTB", u32 version = 1, u32 n_max, then per order: u64 entries,
// entries of (n x u32 ids, u32 count). Little-endian; entries sorted by ids.
std::string serialize_table(const MaxCountTable& table);
MaxCountTable deserialize_table(std::string_view bytes);
void write_table(const MaxCountTable& table, const std::filesystem::path& path);
MaxCountTable read_table(const std::filesystem::path& path);

}  // namespace bertgram
