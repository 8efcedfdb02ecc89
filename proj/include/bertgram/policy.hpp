#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "bertgram/corpus.hpp"

namespace bertgram {

/// Autoregressive categorical policy with one logit row per context of the
/// last `order` tokens. Contexts never updated share a default row.
class TabularPolicy {
 public:
  using Context = NGram;
  using Row = std::vector<double>;
  using Table = std::unordered_map<Context, Row, NGramHash>;

  /// Marks positions before the start of the sequence in a context.
  static constexpr TokenId kBos = kPadId - 1;

  TabularPolicy(std::size_t vocab_size, std::size_t order = 2);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t order() const { return order_; }

  /// The context seen when predicting position prefix.size().
  Context context_of(std::span<const TokenId> prefix) const;

  std::span<const double> logits(const Context& ctx) const;
  /// Materializes the row from the default on first write.
  Row& mutable_logits(const Context& ctx);
  Row& default_logits() { return default_row_; }
  const Row& default_logits() const { return default_row_; }
  const Table& rows() const { return rows_; }

  std::vector<double> probabilities(const Context& ctx) const;
  double log_prob(std::span<const TokenId> sequence) const;

 private:
  std::size_t vocab_size_;
  std::size_t order_;
  Row default_row_;
  Table rows_;
};

std::vector<double> softmax(std::span<const double> logits);
/// Shannon entropy in nats.
double entropy(std::span<const double> probs);
/// d log softmax(z)[token] / dz = onehot(token) - softmax(z)
std::vector<double> log_prob_gradient(std::span<const double> logits, TokenId token);
/// dH(softmax(z)) / dz_j = -p_j (log p_j + H)
std::vector<double> entropy_gradient(std::span<const double> logits);

/// beta * t^-alpha for 1-based position t.
double entropy_schedule(double beta, double alpha, std::size_t t);

struct SampledSequence {
  std::vector<TokenId> ids;
  std::vector<double> log_probs;  // log p(w_t | ctx) per step
  std::vector<double> entropies;  // H(p(. | ctx)) per step
};

/// Draws a length from `lengths`, then exactly that many tokens.
SampledSequence sample_sequence(const TabularPolicy& policy, const LengthDistribution& lengths,
                                std::mt19937_64& rng);

/// Mean over sequences of log p(sequence).
double mean_log_likelihood(const TabularPolicy& policy, std::span<const Sequence> sequences);

/// Full-batch gradient ascent on mean_log_likelihood. Returns the objective
/// after every step.
std::vector<double> pretrain_ml(TabularPolicy& policy, std::span<const Sequence> sequences,
                                std::size_t steps, double learning_rate);

}  // namespace bertgram
