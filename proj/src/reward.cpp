#include "bertgram/reward.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "bertgram/error.hpp"

namespace bertgram {

void RewardParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  if (!(mix_weight >= 0.0 && mix_weight <= 1.0)) throw InvalidArgument("mix weight must lie in [0, 1]");
}

double rbf(std::span<const float> u, std::span<const float> v, double gamma) {
  if (u.size() != v.size()) {
    throw DataError("rbf: dimensions " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  return std::exp(-gamma * squared_distance(u, v));
}

namespace {

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

RewardBreakdown pairwise_reward(const EmbeddedSequence& a, const EmbeddedSequence& b, double gamma) {
  if (a.length() != b.length()) {
    throw DataError("pairwise reward needs equal lengths, got " + std::to_string(a.length()) + " and " +
                    std::to_string(b.length()));
  }
  if (a.dim != b.dim) throw DataError("pairwise reward needs equal dimensions");
  RewardBreakdown out;
  out.per_position.reserve(a.length());
  for (std::size_t t = 0; t < a.length(); ++t) out.per_position.push_back(rbf(a.row(t), b.row(t), gamma));
  out.total = mean(out.per_position);
  return out;
}

SetRewardResult exact_set_reward(const EmbeddedSequence& candidate,
                                 std::span<const EmbeddedSequence> references, double gamma) {
  std::optional<SetRewardResult> best;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto& ref = references[i];
    if (ref.length() != candidate.length()) continue;
    auto r = pairwise_reward(candidate, ref, gamma);
    if (!best || r.total > best->breakdown.total) best = SetRewardResult{i, ref.seq_id, std::move(r)};
  }
  if (!best) {
    throw DataError("no reference of length " + std::to_string(candidate.length()) + " to compare against");
  }
  return std::move(*best);
}

RewardBreakdown indexed_reward(std::span<const TokenId> ids, const EmbeddedSequence& emb,
                               const BertGramIndex& index, double gamma) {
  if (ids.size() != emb.length()) {
    throw DataError("indexed reward: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(emb.length()) + " vectors");
  }
  if (emb.dim != index.dim()) {
    throw DataError("indexed reward: embedding d=" + std::to_string(emb.dim) + ", index d=" +
                    std::to_string(index.dim()));
  }
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  RewardBreakdown out;
  out.per_position.reserve(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto hit = index.nearest_centroid(ids[t], emb.row(t));
    out.per_position.push_back(hit ? std::exp(-gamma * hit->squared_distance) : 0.0);
  }
  out.total = mean(out.per_position);
  return out;
}

RewardBreakdown mixed_reward(const RewardBreakdown& bert, std::span<const double> ngram_increments,
                             double mix_weight) {
  if (bert.length() != ngram_increments.size()) {
    throw DataError("mixed reward: " + std::to_string(bert.length()) + " BERT-gram values vs " +
                    std::to_string(ngram_increments.size()) + " n-gram increments");
  }
  if (!(mix_weight >= 0.0 && mix_weight <= 1.0)) throw InvalidArgument("mix weight must lie in [0, 1]");
  if (mix_weight == 1.0) return bert;

  RewardBreakdown out;
  out.per_position.reserve(bert.length());
  double ngram_total = 0.0;
  for (std::size_t t = 0; t < bert.length(); ++t) {
    ngram_total += ngram_increments[t];
    if (mix_weight == 0.0) {
      out.per_position.push_back(ngram_increments[t]);
    } else {
      out.per_position.push_back(mix_weight * bert.per_position[t] + (1.0 - mix_weight) * ngram_increments[t]);
    }
  }
  out.total = mix_weight == 0.0 ? ngram_total : mix_weight * bert.total + (1.0 - mix_weight) * ngram_total;
  return out;
}

std::vector<TokenId> normalize_length(std::span<const TokenId> ids, std::size_t target, TokenId pad) {
  if (target == 0) throw InvalidArgument("target length must be >= 1");
  std::vector<TokenId> out(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), target)));
  out.resize(target, pad);
  return out;
}

}  // namespace bertgram
