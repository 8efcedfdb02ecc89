#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bertgram/bertgram_index.hpp"
#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"
#include "bertgram/ngram_reward.hpp"
#include "bertgram/policy.hpp"
#include "bertgram/reward.hpp"

namespace bertgram {

enum class Credit {
  kSequenceTotal,  // every step gets R(s) - baseline
  kRewardToGo,     // step t gets sum_{t' >= t} R_t' minus the batch mean of that quantity
};

struct TrainConfig {
  double beta = 0.0065;
  double alpha = 0.75;
  double gamma = kDefaultGamma;
  double mix_weight = kDefaultMixWeight;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  std::size_t pretrain_steps = 200;
  double learning_rate = 4.0;
  double pretrain_learning_rate = 4.0;
  std::uint64_t seed = 0;
  std::size_t log_interval = 50;
  std::size_t context_order = 2;
  std::size_t n_max = 4;
  Credit credit = Credit::kSequenceTotal;

  // Synthetic embedder used for sampled candidates.
  std::size_t embed_window = 1;
  std::uint32_t embed_dim = 32;
  double embed_scale = 4.0;
  std::uint64_t embed_seed = 0;

  void validate() const;
  SyntheticEmbedder embedder() const { return {embed_window, embed_dim, embed_seed, embed_scale}; }
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

/// Everything needed to score a sampled candidate.
struct RewardModel {
  const MaxCountTable* table = nullptr;
  const BertGramIndex* index = nullptr;
  BleuParams bleu;
  std::function<EmbeddedSequence(std::span<const TokenId>)> embed;
};

struct ScoredSample {
  SampledSequence sample;
  RewardBreakdown reward;  // mixed
  double bert_reward = 0.0;
  double ngram_reward = 0.0;
};

ScoredSample score_sample(SampledSequence sample, const RewardModel& model, double gamma,
                          double mix_weight);

/// Shifted mean x0 + sum(x_i - x0) / n; exact when all values are equal.
double batch_mean(std::span<const double> values);

struct PolicyGradient {
  TabularPolicy::Table policy_term;   // advantage x grad log p
  TabularPolicy::Table entropy_term;  // beta_t x grad H
  double baseline = 0.0;
};

PolicyGradient reinforce_gradient(const TabularPolicy& policy, std::span<const ScoredSample> batch,
                                  const TrainConfig& config);

struct StepStats {
  double baseline = 0.0;
  double policy_grad_norm = 0.0;
  double entropy_grad_norm = 0.0;
};

/// One plain gradient-ascent step on the entropy-regularized objective.
StepStats reinforce_step(TabularPolicy& policy, std::span<const ScoredSample> batch,
                         const TrainConfig& config);

struct TrainRecord {
  std::size_t step = 0;
  double reward = 0.0;
  double bert_reward = 0.0;
  double ngram_reward = 0.0;
  double entropy = 0.0;  // mean per-step entropy, nats
  double mean_length = 0.0;
  double rho = 0.0;
  double rho_2 = 0.0;
  double rho_4 = 0.0;
  bool operator==(const TrainRecord&) const = default;
};

struct TrainTrace {
  std::vector<TrainRecord> records;
};

struct TrainResult {
  TrainTrace trace;
  TabularPolicy policy;
};

/// ML pre-training followed by REINFORCE against the mixed reward. Logs the
/// batch drawn right after pre-training as step 0, then every log_interval steps.
TrainResult train(const TrainConfig& config, const RewardModel& model, const Corpus& corpus);

void write_trace(const TrainTrace& trace, std::ostream& out);

}  // namespace bertgram
