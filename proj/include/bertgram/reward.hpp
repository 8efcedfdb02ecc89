#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bertgram/bertgram_index.hpp"
#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"

namespace bertgram {

inline constexpr double kDefaultGamma = 0.06;
inline constexpr double kDefaultMixWeight = 0.25;

struct RewardParams {
  double gamma = kDefaultGamma;
  double mix_weight = kDefaultMixWeight;  // weight on the BERT-gram component
  TokenId pad_id = kPadId;

  void validate() const;
};

struct RewardBreakdown {
  std::vector<double> per_position;
  double total = 0.0;

  std::size_t length() const { return per_position.size(); }
};

/// exp(-gamma * ||u - v||^2)
double rbf(std::span<const float> u, std::span<const float> v, double gamma);

/// Position-wise RBF between two equal-length embedded sequences; total is the mean.
RewardBreakdown pairwise_reward(const EmbeddedSequence& a, const EmbeddedSequence& b, double gamma);

struct SetRewardResult {
  std::size_t ref_index = 0;
  std::uint64_t ref_seq_id = 0;
  RewardBreakdown breakdown;
};

/// Brute force: the best pairwise reward over all references of the candidate's
/// length. Throws DataError if none has that length.
SetRewardResult exact_set_reward(const EmbeddedSequence& candidate,
                                 std::span<const EmbeddedSequence> references, double gamma);

/// Per position, the RBF to the nearest prototype of the token at that position.
/// Tokens missing from the index (PAD included) score 0.
RewardBreakdown indexed_reward(std::span<const TokenId> ids, const EmbeddedSequence& emb,
                               const BertGramIndex& index, double gamma);
inline RewardBreakdown indexed_reward(const EmbeddedSequence& emb, const BertGramIndex& index,
                                      double gamma) {
  return indexed_reward(emb.ids, emb, index, gamma);
}

/// per_position[t] = w * bert[t] + (1 - w) * ngram[t], unclamped.
/// total = w * bert.total + (1 - w) * sum(ngram), i.e. the sequence-level mix of
/// the BERT-gram reward and the BLEU score the increments telescope to.
RewardBreakdown mixed_reward(const RewardBreakdown& bert, std::span<const double> ngram_increments,
                             double mix_weight);

/// Truncates to the first `target` tokens or pads with `pad`.
std::vector<TokenId> normalize_length(std::span<const TokenId> ids, std::size_t target, TokenId pad);

}  // namespace bertgram
