#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"
#include "bertgram/kmeans.hpp"

namespace bertgram {

/// Where a vector came from in the embedded corpus.
struct Occurrence {
  std::uint64_t seq_id = 0;
  std::uint32_t position = 0;
  bool operator==(const Occurrence&) const = default;
};

/// All corpus vectors of one word type.
struct TypePartition {
  TokenId token = 0;
  std::vector<float> rows;  // count x dim
  std::vector<Occurrence> occurrences;

  std::size_t size() const { return occurrences.size(); }
};

/// The k_w prototypes of one word type and, per prototype, the corpus
/// occurrence closest to it.
struct TypeCentroids {
  std::vector<float> centroids;  // k_w x dim
  std::vector<Occurrence> exemplars;

  std::size_t k() const { return exemplars.size(); }
  bool operator==(const TypeCentroids&) const = default;
};

struct CentroidHit {
  std::size_t centroid = 0;
  double squared_distance = 0.0;
};

class BertGramIndex {
 public:
  BertGramIndex() = default;
  BertGramIndex(std::uint32_t dim, std::uint32_t k_max) : dim_(dim), k_max_(k_max) {}

  std::uint32_t dim() const { return dim_; }
  std::uint32_t k_max() const { return k_max_; }
  std::size_t type_count() const { return types_.size(); }
  const std::map<TokenId, TypeCentroids>& types() const { return types_; }
  const TypeCentroids* find(TokenId token) const;
  std::span<const float> centroid(TokenId token, std::size_t k) const;

  void insert(TokenId token, TypeCentroids centroids);

  /// Linear scan over the centroids of `token`; nullopt when the type is not
  /// indexed. Throws DataError on dimension mismatch.
  std::optional<CentroidHit> nearest_centroid(TokenId token, std::span<const float> v) const;

  bool operator==(const BertGramIndex&) const = default;

 private:
  std::uint32_t dim_ = 0;
  std::uint32_t k_max_ = 0;
  std::map<TokenId, TypeCentroids> types_;
};

std::map<TokenId, TypePartition> partition_by_type(const EmbeddedCorpus& corpus);

struct IndexOptions {
  std::size_t k = 100;
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
  double tol = 1e-4;
  std::size_t threads = 1;
};

/// Clusters every type partition independently. Each type gets its own seed
/// derived from (seed, token), so the result does not depend on scheduling.
BertGramIndex build_index(const EmbeddedCorpus& corpus, const IndexOptions& options);

inline std::optional<CentroidHit> nearest_centroid(const BertGramIndex& index, TokenId token,
                                                   std::span<const float> v) {
  return index.nearest_centroid(token, v);
}

// BGIX: "BGIX", u32 version = 1, u32 d, u32 K_max, u32 num_types; per type:
// u32 token, u32 k_w, k_w x (d x f32 centroid, u64 seq_id, u32 position).
// Little-endian, types in ascending id order.
std::string serialize_index(const BertGramIndex& index);
BertGramIndex deserialize_index(std::string_view bytes);
void write_index(const BertGramIndex& index, const std::filesystem::path& path);
BertGramIndex read_index(const std::filesystem::path& path);

}  // namespace bertgram
