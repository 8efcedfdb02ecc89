#include "bertgram/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "bertgram/error.hpp"
#include "bertgram/kmeans.hpp"
#include "bertgram/reward.hpp"

namespace bertgram {

std::vector<NeighborHit> nearest_neighbors(const EmbeddedCorpus& corpus, std::span<const float> query,
                                           std::size_t k, NeighborFilter filter) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  if (corpus.token_count() == 0) throw DataError("nearest neighbours in an empty corpus");
  if (query.size() != corpus.dim) {
    throw DataError("query has dimension " + std::to_string(query.size()) + ", corpus has " +
                    std::to_string(corpus.dim));
  }
  std::vector<NeighborHit> hits;
  for (const auto& seq : corpus.sequences) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const TokenId tok = seq.ids[t];
      if (filter.mode == NeighborFilter::Mode::kOnly && tok != filter.token) continue;
      if (filter.mode == NeighborFilter::Mode::kExclude && tok == filter.token) continue;
      hits.push_back({tok, seq.seq_id, static_cast<std::uint32_t>(t), squared_distance(query, seq.row(t))});
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const NeighborHit& a, const NeighborHit& b) { return a.squared_distance < b.squared_distance; });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<PerturbEntry> perturb_plan(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.sequences.empty()) throw DataError("perturbation plan for an empty corpus");
  std::vector<double> unigram;
  for (const auto& seq : corpus.sequences) {
    for (TokenId id : seq.ids) {
      if (id == kPadId) continue;
      if (id >= unigram.size()) unigram.resize(id + 1, 0.0);
      unigram[id] += 1.0;
    }
  }
  if (unigram.empty()) throw DataError("perturbation plan: corpus has no tokens");
  std::discrete_distribution<TokenId> draw_token(unigram.begin(), unigram.end());
  std::mt19937_64 gen(seed);
  std::vector<PerturbEntry> plan;
  plan.reserve(corpus.sequences.size());
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const auto len = corpus.sequences[i].length();
    if (len == 0) throw DataError("perturbation plan: empty sequence " + std::to_string(i));
    std::uniform_int_distribution<std::uint32_t> pos(0, static_cast<std::uint32_t>(len - 1));
    const auto p = pos(gen);
    plan.push_back({i, p, draw_token(gen)});
  }
  return plan;
}

std::vector<Sequence> apply_plan(const Corpus& corpus, std::span<const PerturbEntry> plan) {
  std::vector<Sequence> out;
  out.reserve(plan.size());
  for (const auto& e : plan) {
    if (e.sequence >= corpus.sequences.size()) throw DataError("plan refers to missing sequence " + std::to_string(e.sequence));
    Sequence s = corpus.sequences[e.sequence];
    if (e.position >= s.length()) throw DataError("plan position outside sequence " + std::to_string(e.sequence));
    s.ids[e.position] = e.replacement;
    out.push_back(std::move(s));
  }
  return out;
}

SensitivityMatrix sensitivity_matrix(std::span<const PerturbedPair> pairs, double gamma) {
  if (pairs.empty()) throw DataError("sensitivity matrix needs at least one pair");
  const std::size_t T = pairs.front().original->length();
  SensitivityMatrix m;
  m.length = T;
  std::vector<double> sums(T * T, 0.0);
  m.samples.assign(T, 0);
  for (const auto& pair : pairs) {
    const auto& a = *pair.original;
    const auto& b = *pair.perturbed;
    if (a.length() != T || b.length() != T) {
      throw DataError("sensitivity matrix: sequence " + std::to_string(a.seq_id) + " does not have length " +
                      std::to_string(T));
    }
    if (pair.position >= T) throw DataError("sensitivity matrix: perturbed position outside sequence");
    const auto rewards = pairwise_reward(a, b, gamma);
    for (std::size_t t = 0; t < T; ++t) sums[pair.position * T + t] += rewards.per_position[t];
    ++m.samples[pair.position];
  }
  m.mean.assign(T * T, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < T; ++j) {
    if (m.samples[j] == 0) continue;
    for (std::size_t t = 0; t < T; ++t) m.mean[j * T + t] = sums[j * T + t] / static_cast<double>(m.samples[j]);
  }
  return m;
}

TTestResult pooled_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("t-test needs at least two samples per group");
  auto moments = [](std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss};
  };
  const auto [mean_a, ss_a] = moments(a);
  const auto [mean_b, ss_b] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  TTestResult r;
  r.df = na + nb - 2.0;
  const double pooled_var = (ss_a + ss_b) / r.df;
  const double se = std::sqrt(pooled_var * (1.0 / na + 1.0 / nb));
  const double diff = mean_a - mean_b;
  if (se == 0.0) {
    if (diff == 0.0) return {0.0, r.df, 1.0};
    return {diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), r.df, 0.0};
  }
  r.t = diff / se;
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

std::vector<std::pair<long, double>> aligned_samples(const AnchoredRewards& item) {
  const std::size_t T = item.rewards.size();
  if (item.anchor_length == 0) throw DataError("anchor length must be >= 1");
  if (item.anchor_begin + item.anchor_length > T) throw DataError("anchor outside the sequence");
  const auto begin = static_cast<long>(item.anchor_begin);
  const auto last = static_cast<long>(item.anchor_begin + item.anchor_length - 1);
  std::vector<std::pair<long, double>> out;
  out.reserve(T - item.anchor_length + 1);
  for (long t = 0; t < begin; ++t) out.emplace_back(t - begin, item.rewards[static_cast<std::size_t>(t)]);
  double anchor = 0.0;
  for (long t = begin; t <= last; ++t) anchor += item.rewards[static_cast<std::size_t>(t)];
  out.emplace_back(0, anchor / static_cast<double>(item.anchor_length));
  for (long t = last + 1; t < static_cast<long>(T); ++t) out.emplace_back(t - last, item.rewards[static_cast<std::size_t>(t)]);
  return out;
}

const AlignedRow* AlignedComparison::at(long offset) const {
  for (const auto& row : rows) {
    if (row.offset == offset) return &row;
  }
  return nullptr;
}

AlignedComparison aligned_comparison(std::span<const AnchoredRewards> real, std::span<const AnchoredRewards> fake) {
  std::map<long, std::vector<double>> by_offset[2];
  for (int side = 0; side < 2; ++side) {
    for (const auto& item : side == 0 ? real : fake) {
      for (auto [offset, r] : aligned_samples(item)) by_offset[side][offset].push_back(r);
    }
  }
  AlignedComparison out;
  if (by_offset[0].empty() && by_offset[1].empty()) return out;
  long lo = std::numeric_limits<long>::max();
  long hi = std::numeric_limits<long>::min();
  for (const auto& side : by_offset) {
    if (side.empty()) continue;
    lo = std::min(lo, side.begin()->first);
    hi = std::max(hi, side.rbegin()->first);
  }
  auto mean_of = [](const std::vector<double>& xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  static const std::vector<double> kEmpty;
  for (long offset = lo; offset <= hi; ++offset) {
    auto find = [&](int side) -> const std::vector<double>& {
      auto it = by_offset[side].find(offset);
      return it == by_offset[side].end() ? kEmpty : it->second;
    };
    const auto& r = find(0);
    const auto& f = find(1);
    AlignedRow row{offset, mean_of(r), mean_of(f), r.size(), f.size(), std::nullopt};
    if (r.size() >= 2 && f.size() >= 2) row.test = pooled_t_test(r, f);
    out.rows.push_back(row);
  }
  return out;
}

double distinct_ngram_ratio(std::span<const Sequence> batch, std::size_t n, NGramDiversity mode) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (mode == NGramDiversity::kBatchWide) {
    std::set<NGram> distinct;
    std::size_t total = 0;
    for (const auto& seq : batch) {
      for (const auto& [gram, c] : ngrams(seq.ids, n)) {
        distinct.insert(gram);
        total += c;
      }
    }
    return total == 0 ? 1.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& seq : batch) {
    if (seq.length() < n) continue;
    const auto grams = ngrams(seq.ids, n);
    sum += static_cast<double>(grams.size()) / static_cast<double>(seq.length() - n + 1);
    ++counted;
  }
  return counted == 0 ? 1.0 : sum / static_cast<double>(counted);
}

DiversityMetrics diversity_metrics(std::span<const Sequence> batch, NGramDiversity mode) {
  if (batch.empty()) throw InvalidArgument("diversity of an empty batch");
  std::set<std::vector<TokenId>> unique;
  std::size_t tokens = 0;
  for (const auto& seq : batch) {
    unique.insert(seq.ids);
    tokens += static_cast<std::size_t>(std::count_if(seq.ids.begin(), seq.ids.end(), [](TokenId id) { return id != kPadId; }));
  }
  DiversityMetrics m;
  const double size = static_cast<double>(batch.size());
  m.rho = static_cast<double>(unique.size()) / size;
  m.rho_2 = distinct_ngram_ratio(batch, 2, mode);
  m.rho_4 = distinct_ngram_ratio(batch, 4, mode);
  m.mean_length = static_cast<double>(tokens) / size;
  return m;
}

}  // namespace bertgram
