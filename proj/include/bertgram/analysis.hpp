#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"

namespace bertgram {

// Nearest neighbours -------------------------------------------------------

struct NeighborFilter {
  enum class Mode { kNone, kOnly, kExclude };
  Mode mode = Mode::kNone;
  TokenId token = 0;

  static NeighborFilter none() { return {}; }
  static NeighborFilter only(TokenId t) { return {Mode::kOnly, t}; }
  static NeighborFilter exclude(TokenId t) { return {Mode::kExclude, t}; }
};

struct NeighborHit {
  TokenId token = 0;
  std::uint64_t seq_id = 0;
  std::uint32_t position = 0;
  double squared_distance = 0.0;
};

/// k closest corpus positions to `query`, ascending by squared distance (ties
/// keep corpus order).
std::vector<NeighborHit> nearest_neighbors(const EmbeddedCorpus& corpus, std::span<const float> query,
                                           std::size_t k, NeighborFilter filter = {});

// Perturbation sensitivity --------------------------------------------------

struct PerturbEntry {
  std::size_t sequence = 0;  // index into the corpus
  std::uint32_t position = 0;
  TokenId replacement = 0;
};

/// One entry per sequence: a uniformly drawn position and a replacement token
/// drawn from the corpus unigram distribution.
std::vector<PerturbEntry> perturb_plan(const Corpus& corpus, std::uint64_t seed);
std::vector<Sequence> apply_plan(const Corpus& corpus, std::span<const PerturbEntry> plan);

struct PerturbedPair {
  const EmbeddedSequence* original = nullptr;
  const EmbeddedSequence* perturbed = nullptr;
  std::size_t position = 0;
};

struct SensitivityMatrix {
  std::size_t length = 0;
  std::vector<double> mean;             // length x length, row = perturbed position
  std::vector<std::uint64_t> samples;   // per row

  double at(std::size_t perturbed, std::size_t t) const { return mean[perturbed * length + t]; }
};

/// Cell (j, t): mean over pairs perturbed at j of rbf(original[t], perturbed[t]).
SensitivityMatrix sensitivity_matrix(std::span<const PerturbedPair> pairs, double gamma);

// Two-sample t-test ---------------------------------------------------------

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Pooled-variance (equal variance) two-sample t-test. Needs >= 2 samples each.
TTestResult pooled_t_test(std::span<const double> a, std::span<const double> b);

// Aligned real / fake comparison --------------------------------------------

struct AnchoredRewards {
  std::vector<double> rewards;     // per position
  std::size_t anchor_begin = 0;
  std::size_t anchor_length = 1;   // multi-token anchors are averaged into offset 0
};

struct AlignedRow {
  long offset = 0;
  double mean_real = 0.0;
  double mean_fake = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::optional<TTestResult> test;  // absent when either side has < 2 samples
};

struct AlignedComparison {
  std::vector<AlignedRow> rows;  // contiguous offsets, ascending
  const AlignedRow* at(long offset) const;
};

/// Maps every position to its offset from the anchor; positions before the
/// anchor get negative offsets, the anchor itself 0, positions after it 1, 2, ...
std::vector<std::pair<long, double>> aligned_samples(const AnchoredRewards& item);

AlignedComparison aligned_comparison(std::span<const AnchoredRewards> real,
                                     std::span<const AnchoredRewards> fake);

// Diversity -------------------------------------------------------------------

struct DiversityMetrics {
  double rho = 0.0;
  double rho_2 = 0.0;
  double rho_4 = 0.0;
  double mean_length = 0.0;
};

enum class NGramDiversity { kBatchWide, kPerSequence };

/// rho: distinct sequences / batch size. rho_n: distinct n-grams over n-gram
/// tokens, either pooled over the batch or averaged per sequence.
DiversityMetrics diversity_metrics(std::span<const Sequence> batch,
                                   NGramDiversity mode = NGramDiversity::kBatchWide);
double distinct_ngram_ratio(std::span<const Sequence> batch, std::size_t n, NGramDiversity mode);

}  // namespace bertgram
