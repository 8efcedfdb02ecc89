// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bertgram/analysis.hpp"
#include "bertgram/bertgram_index.hpp"
#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"
#include "bertgram/error.hpp"
#include "bertgram/ngram_reward.hpp"
#include "bertgram/policy.hpp"
#include "bertgram/reward.hpp"
#include "bertgram/rl.hpp"
#include "binary_io.hpp"

using namespace bertgram;

namespace {

// Tolerances and budgets.
constexpr double kNgramBudgetS = 10.0;
constexpr double kIndexBudgetS = 30.0;
constexpr double kIndexRelTol = 1e-6;
constexpr double kThroughputDrift = 0.20;
constexpr double kExactSlowdown = 5.0;
constexpr double kOffBandMin = 0.999;
constexpr double kDiagonalMax = 0.5;
constexpr double kSensitivityBudgetS = 120.0;
constexpr double kTTol = 1e-3;
constexpr double kAlignedAlpha = 0.01;
constexpr double kGradRelTol = 1e-5;
constexpr double kGradFloor = 1e-3;  // denominator floor for the relative error
constexpr double kRewardGain = 0.5;
constexpr double kCollapsedEntropy = 0.1;
constexpr double kRlBudgetS = 300.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Sequence> random_sequences(std::mt19937_64& rng, std::size_t count, std::size_t vocab, std::size_t lo,
                                       std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab - 1));
  std::vector<Sequence> out(count);
  for (auto& s : out) {
    s.ids.resize(len(rng));
    for (auto& id : s.ids) id = tok(rng);
  }
  return out;
}

Vocabulary numbered_vocab(std::size_t n) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(i));
  return Vocabulary(std::move(toks));
}

// 1 ---------------------------------------------------------------------------

Outcome ngram_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> nrefs(1, 10), vocab(1, 12), ncand(1, 8);
  std::size_t checks = 0, mismatches = 0;
  for (int corpus = 0; corpus < 500; ++corpus) {
    const auto v = vocab(rng);
    const auto refs = random_sequences(rng, nrefs(rng), v, 1, 8);
    const auto table = build_max_count_table(refs, 8);
    std::vector<std::vector<std::map<NGram, std::uint32_t>>> ref_counts(refs.size());
    for (std::size_t r = 0; r < refs.size(); ++r) {
      for (std::size_t n = 1; n <= 8; ++n) ref_counts[r].push_back(ngrams(refs[r].ids, n));
    }
    for (const auto& cand : random_sequences(rng, ncand(rng), v, 1, 8)) {
      for (std::size_t n = 1; n <= 8; ++n) {
        std::uint64_t brute = 0;
        for (const auto& [gram, c] : ngrams(cand.ids, n)) {
          std::uint32_t best = 0;
          for (const auto& rc : ref_counts) {
            auto it = rc[n - 1].find(gram);
            if (it != rc[n - 1].end()) best = std::max(best, std::min(c, it->second));
          }
          brute += best;
        }
        const auto got = modified_precision(cand.ids, table, n);
        const std::uint64_t total = cand.length() >= n ? cand.length() - n + 1 : 0;
        ++checks;
        if (got.matched != brute || got.total != total) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kNgramBudgetS,
          fmt("500 corpora, %zu precision checks, %zu mismatches, %.2fs (budget %.0fs)", checks, mismatches, secs,
              kNgramBudgetS)};
}

// 2 ---------------------------------------------------------------------------

Outcome telescoping() {
  std::mt19937_64 rng(202);
  std::size_t bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto refs = random_sequences(rng, 1 + i % 10, 3 + i % 9, 2, 12);
    const auto table = build_max_count_table(refs, 4);
    const auto cand = random_sequences(rng, 1, 3 + i % 9, 1, 16)[0];
    const auto params = BleuParams::uniform(4);
    double sum = 0.0;
    for (double r : shaped_increments(cand.ids, table, params)) sum += r;
    if (std::bit_cast<std::uint64_t>(sum) != std::bit_cast<std::uint64_t>(bleu(cand.ids, table, params))) ++bad;
  }
  const std::vector<Sequence> ref{{{4, 2, 7, 1, 3, 2, 5}}};
  const auto inc = shaped_increments(ref[0].ids, build_max_count_table(ref, 1), BleuParams::uniform(1));
  std::vector<double> expect(inc.size(), 0.0);
  expect[0] = 1.0;
  const bool identity = inc == expect;
  return {bad == 0 && identity,
          fmt("200 candidates, %zu not bitwise equal; unigram identity increments [1,0,...,0]: %s", bad,
              identity ? "yes" : "no")};
}

// 3 ---------------------------------------------------------------------------

Outcome index_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(303);
  const double gamma = kDefaultGamma;
  std::size_t positions = 0, lossless_bad = 0, lossy_checked = 0, lossy_above = 0, in_corpus = 0, in_corpus_above = 0;
  double worst_rel = 0.0, worst_excess = 0.0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    const SyntheticEmbedder emb{1, 16, static_cast<std::uint64_t>(corpus), 2.0};
    const std::size_t vocab = 2 + corpus % 11;
    const auto refs = emb.embed(random_sequences(rng, 10, vocab, 2, 8));
    const auto parts = partition_by_type(refs);
    std::size_t biggest = 0;
    for (const auto& [tok, p] : parts) biggest = std::max(biggest, p.size());
    const auto full = build_index(refs, {.k = biggest, .seed = 7});
    const auto small = build_index(refs, {.k = 2, .seed = 7});

    // queries taken from the corpus itself
    for (const auto& s : refs.sequences) {
      const auto a = indexed_reward(s, full, gamma);
      const auto b = indexed_reward(s, small, gamma);
      for (std::size_t t = 0; t < s.length(); ++t) {
        ++in_corpus;
        in_corpus_above += b.per_position[t] > a.per_position[t];
      }
    }
    for (const auto& c : random_sequences(rng, 5, vocab + 1, 1, 8)) {
      const auto cand = emb(c.ids);
      const auto a = indexed_reward(cand, full, gamma);
      const auto b = indexed_reward(cand, small, gamma);
      for (std::size_t t = 0; t < cand.length(); ++t) {
        double brute = 0.0;
        auto it = parts.find(cand.ids[t]);
        if (it != parts.end()) {
          for (std::size_t i = 0; i < it->second.size(); ++i) {
            brute = std::max(brute, rbf(cand.row(t), std::span<const float>(it->second.rows).subspan(i * 16, 16), gamma));
          }
        }
        const double rel = std::abs(a.per_position[t] - brute) / std::max(brute, 1e-300);
        worst_rel = std::max(worst_rel, brute == 0.0 ? std::abs(a.per_position[t]) : rel);
        if (brute == 0.0 ? a.per_position[t] != 0.0 : rel > kIndexRelTol) ++lossless_bad;
        ++positions;
        ++lossy_checked;
        if (b.per_position[t] > a.per_position[t]) {
          ++lossy_above;
          worst_excess = std::max(worst_excess, b.per_position[t] - a.per_position[t]);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {lossless_bad == 0 && lossy_above == 0 && secs < kIndexBudgetS,
          fmt("lossless: %zu positions, %zu off by >1e-6 rel (worst %.2e); K=2: %zu/%zu novel-query positions above "
              "lossless (max excess %.4f), %zu/%zu in-corpus; %.2fs (budget %.0fs)",
              positions, lossless_bad, worst_rel, lossy_above, lossy_checked, worst_excess, in_corpus_above, in_corpus,
              secs, kIndexBudgetS)};
}

// 4 ---------------------------------------------------------------------------

template <class Fn>
double best_time(int repeats, Fn fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Outcome corpus_size_independence() {
  const SyntheticEmbedder emb{1, 32, 11, 1.0};
  const std::size_t vocab = 20;
  std::mt19937_64 rng(404);
  const auto big_text = random_sequences(rng, 10000, vocab, 5, 15);
  const auto small_text = std::vector<Sequence>(big_text.begin(), big_text.begin() + 1000);
  const auto big = emb.embed(big_text);
  const auto small = emb.embed(small_text);
  const IndexOptions opts{.k = 100, .seed = 3};
  const auto big_index = build_index(big, opts);
  const auto small_index = build_index(small, opts);
  std::size_t min_k = SIZE_MAX;
  for (const auto* index : {&small_index, &big_index}) {
    for (const auto& [tok, entry] : index->types()) min_k = std::min(min_k, entry.k());
  }

  std::vector<EmbeddedSequence> cands;
  for (const auto& s : random_sequences(rng, 2000, vocab, 5, 15)) cands.push_back(emb(s.ids));

  volatile double sink = 0.0;  // keeps the scoring loops alive
  auto score_all = [&](const BertGramIndex& index) {
    for (const auto& c : cands) sink = sink + indexed_reward(c, index, kDefaultGamma).total;
  };
  // interleaved so drift in machine speed hits both sides
  double t_small = 1e300, t_big = 1e300;
  for (int r = 0; r < 15; ++r) {
    t_small = std::min(t_small, best_time(1, [&] { score_all(small_index); }));
    t_big = std::min(t_big, best_time(1, [&] { score_all(big_index); }));
  }

  const std::vector<EmbeddedSequence> exact_cands(cands.begin(), cands.begin() + 40);
  auto exact_all = [&](const EmbeddedCorpus& refs) {
    for (const auto& c : exact_cands) sink = sink + exact_set_reward(c, refs.sequences, kDefaultGamma).breakdown.total;
  };
  const double e_small = best_time(3, [&] { exact_all(small); });
  const double e_big = best_time(3, [&] { exact_all(big); });

  const double drift = std::abs(t_big - t_small) / t_small;
  const double slowdown = e_big / e_small;
  return {drift < kThroughputDrift && slowdown >= kExactSlowdown && min_k == 100,
          fmt("indexed scoring 1k: %.1f cand/s, 10k: %.1f cand/s (change %.1f%%, limit %.0f%%); exact set reward "
              "slowdown %.1fx (need >= %.0fx); min k_w %zu",
              cands.size() / t_small, cands.size() / t_big, 100 * drift, 100 * kThroughputDrift, slowdown,
              kExactSlowdown, min_k)};
}

// 5 ---------------------------------------------------------------------------

// Zipf-distributed fixed-length corpus.
Corpus zipf_corpus(std::size_t n, std::size_t length, std::size_t vocab, std::uint64_t seed) {
  std::vector<double> w(vocab);
  for (std::size_t i = 0; i < vocab; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<TokenId> draw(w.begin(), w.end());
  std::mt19937_64 rng(seed);
  Corpus c{numbered_vocab(vocab), std::vector<Sequence>(n)};
  for (auto& s : c.sequences) {
    s.ids.resize(length);
    for (auto& id : s.ids) id = draw(rng);
  }
  return c;
}

struct BandStats {
  double off_band = 0.0;
  double diagonal = 0.0;
  double band = 0.0;  // within the window, excluding the diagonal
};

BandStats sensitivity_run(std::size_t window, std::size_t pairs_total) {
  const std::size_t T = 14;
  const auto corpus = zipf_corpus(pairs_total, T, 2000, 505 + window);
  const auto plan = perturb_plan(corpus, 17);
  const auto perturbed = apply_plan(corpus, plan);
  const SyntheticEmbedder emb{window, 32, 5, 4.0};

  // chunked so both embedded corpora need not be held at once
  std::vector<double> sums(T * T, 0.0);
  std::vector<std::uint64_t> rows(T, 0);
  const std::size_t chunk = 4096;
  for (std::size_t lo = 0; lo < pairs_total; lo += chunk) {
    const std::size_t hi = std::min(pairs_total, lo + chunk);
    std::vector<EmbeddedSequence> orig, pert;
    orig.reserve(hi - lo);
    pert.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      orig.push_back(emb(corpus.sequences[i].ids, i));
      pert.push_back(emb(perturbed[i].ids, i));
    }
    std::vector<PerturbedPair> pairs;
    for (std::size_t i = 0; i < orig.size(); ++i) pairs.push_back({&orig[i], &pert[i], plan[lo + i].position});
    const auto m = sensitivity_matrix(pairs, kDefaultGamma);
    for (std::size_t j = 0; j < T; ++j) {
      if (m.samples[j] == 0) continue;
      rows[j] += m.samples[j];
      for (std::size_t t = 0; t < T; ++t) sums[j * T + t] += m.at(j, t) * static_cast<double>(m.samples[j]);
    }
  }
  BandStats s;
  double n_off = 0, n_diag = 0, n_band = 0;
  for (std::size_t j = 0; j < T; ++j) {
    for (std::size_t t = 0; t < T; ++t) {
      const double v = sums[j * T + t] / static_cast<double>(rows[j]);
      const std::size_t d = t > j ? t - j : j - t;
      if (d == 0) {
        s.diagonal += v, ++n_diag;
      } else if (d <= window) {
        s.band += v, ++n_band;
      } else {
        s.off_band += v, ++n_off;
      }
    }
  }
  s.off_band /= n_off;
  s.diagonal /= n_diag;
  s.band = n_band ? s.band / n_band : NAN;
  return s;
}

Outcome sensitivity_banding() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c3 = sensitivity_run(3, 64000);
  const auto c0 = sensitivity_run(0, 64000);
  const double secs = seconds_since(t0);
  const bool pass = c3.off_band >= kOffBandMin && c3.diagonal <= kDiagonalMax && c0.off_band >= kOffBandMin &&
                    c0.diagonal <= kDiagonalMax && secs < kSensitivityBudgetS;
  return {pass, fmt("c=3: off-band %.6f, diagonal %.4f, in-band %.4f; c=0: off-diagonal %.6f, diagonal %.4f; "
                    "64k pairs each, %.1fs (budget %.0fs)",
                    c3.off_band, c3.diagonal, c3.band, c0.off_band, c0.diagonal, secs, kSensitivityBudgetS)};
}

// 6 ---------------------------------------------------------------------------

// Topic language: sentence = first clause of a topic, a connective, second
// clause of the same topic. Fakes join halves of two reals sharing the
// connective.
struct Clauses {
  std::size_t topics = 12;
  std::size_t variants = 3;
  std::vector<std::vector<TokenId>> first, second;  // [topic * variants + v]
  std::vector<TokenId> connectives{0, 1, 2};
};

Clauses make_clauses(std::mt19937_64& rng) {
  Clauses c;
  TokenId next = 3;
  std::uniform_int_distribution<std::size_t> len(4, 6);
  for (std::size_t t = 0; t < c.topics; ++t) {
    // topic words are shared between its clauses
    std::vector<TokenId> words(6);
    for (auto& w : words) w = next++;
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    for (std::size_t v = 0; v < c.variants; ++v) {
      std::vector<TokenId> a(len(rng)), b(len(rng));
      for (auto& x : a) x = words[pick(rng)];
      for (auto& x : b) x = words[pick(rng)];
      c.first.push_back(a);
      c.second.push_back(b);
    }
  }
  return c;
}

struct Sentence {
  std::vector<TokenId> ids;
  std::size_t anchor = 0;
  TokenId connective = 0;
};

std::vector<Sentence> real_sentences(const Clauses& c, std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> topic(0, c.topics - 1), var(0, c.variants - 1), conn(0, 2);
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = topic(rng);
    const auto& a = c.first[t * c.variants + var(rng)];
    const auto& b = c.second[t * c.variants + var(rng)];
    Sentence s;
    s.connective = c.connectives[conn(rng)];
    s.ids = a;
    s.anchor = a.size();
    s.ids.push_back(s.connective);
    s.ids.insert(s.ids.end(), b.begin(), b.end());
    out.push_back(std::move(s));
  }
  return out;
}

// Each real contributes its first half once and its second half once.
std::vector<Sentence> fake_sentences(const std::vector<Sentence>& reals, std::mt19937_64& rng) {
  std::map<TokenId, std::vector<std::size_t>> by_conn;
  for (std::size_t i = 0; i < reals.size(); ++i) by_conn[reals[i].connective].push_back(i);
  std::vector<Sentence> out;
  for (auto& [conn, idx] : by_conn) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& a = reals[idx[k]];
      const auto& b = reals[idx[(k + 1) % idx.size()]];
      Sentence s;
      s.connective = conn;
      s.anchor = a.anchor;
      s.ids.assign(a.ids.begin(), a.ids.begin() + static_cast<long>(a.anchor) + 1);
      s.ids.insert(s.ids.end(), b.ids.begin() + static_cast<long>(b.anchor) + 1, b.ids.end());
      out.push_back(std::move(s));
    }
  }
  return out;
}

Outcome t_test_and_alignment() {
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  const auto r = pooled_t_test(a, b);
  const bool textbook = std::abs(r.t - (-1.2247)) < kTTol && r.df == 4.0 && std::abs(r.p - 0.2879) < kTTol;

  const std::size_t c = 3;
  std::mt19937_64 rng(606);
  const auto clauses = make_clauses(rng);
  const auto fit = real_sentences(clauses, rng, 4000);
  const auto reals = real_sentences(clauses, rng, 2000);
  const auto fakes = fake_sentences(reals, rng);
  const SyntheticEmbedder emb{c, 32, 9, 4.0};
  std::vector<Sequence> fit_seqs;
  for (const auto& s : fit) fit_seqs.push_back({s.ids});
  const auto index = build_index(emb.embed(fit_seqs), {.k = 100, .seed = 1});

  auto anchored = [&](const std::vector<Sentence>& ss) {
    std::vector<AnchoredRewards> out;
    for (const auto& s : ss) out.push_back({indexed_reward(emb(s.ids), index, kDefaultGamma).per_position, s.anchor, 1});
    return out;
  };
  const auto cmp = aligned_comparison(anchored(reals), anchored(fakes));

  std::string offsets;
  bool all_significant = true, real_higher = true;
  for (long off = -static_cast<long>(c); off <= static_cast<long>(c); ++off) {
    const auto* row = cmp.at(off);
    const double p = row && row->test ? row->test->p : 1.0;
    if (!(p < kAlignedAlpha)) all_significant = false;
    if (off == 0 && !(row && row->mean_real > row->mean_fake)) real_higher = false;
    offsets += fmt("%s%+ld:%.2g", offsets.empty() ? "" : " ", off, p);
  }
  return {textbook && all_significant && real_higher,
          fmt("pooled t=%.4f df=%.0f p=%.4f (%s); aligned p by offset [%s]; real > fake at 0: %s", r.t, r.df, r.p,
              textbook ? "ok" : "off", offsets.c_str(), real_higher ? "yes" : "no")};
}

// 7 ---------------------------------------------------------------------------

Outcome gradient_checks() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> g(0.0, 1.5);
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t entries = 0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradFloor}); };

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t V = 2 + trial % 9;
    TabularPolicy policy(V, 1 + trial % 3);
    for (auto& x : policy.default_logits()) x = g(rng);
    LengthDistribution len{{{6, 1.0}}};
    std::mt19937_64 srng(rng());
    const auto sample = sample_sequence(policy, len, srng);
    for (std::size_t t = 0; t < sample.ids.size(); ++t) {
      auto& row = policy.mutable_logits(policy.context_of(std::span(sample.ids).first(t)));
      for (auto& x : row) x = g(rng);
    }
    // gradient of log p(sequence) with respect to every visited row
    std::map<NGram, std::vector<double>> analytic;
    for (std::size_t t = 0; t < sample.ids.size(); ++t) {
      const auto ctx = policy.context_of(std::span(sample.ids).first(t));
      const auto grad = log_prob_gradient(policy.logits(ctx), sample.ids[t]);
      auto& acc = analytic[ctx];
      acc.resize(V, 0.0);
      for (std::size_t j = 0; j < V; ++j) acc[j] += grad[j];
    }
    for (auto& [ctx, grad] : analytic) {
      const auto h_grad = entropy_gradient(policy.logits(ctx));
      for (std::size_t j = 0; j < V; ++j) {
        auto& z = policy.mutable_logits(ctx)[j];
        const double z0 = z;
        z = z0 + h;
        const double lp_up = policy.log_prob(sample.ids), h_up = entropy(policy.probabilities(ctx));
        z = z0 - h;
        const double lp_dn = policy.log_prob(sample.ids), h_dn = entropy(policy.probabilities(ctx));
        z = z0;
        worst = std::max(worst, rel(grad[j], (lp_up - lp_dn) / (2 * h)));
        worst = std::max(worst, rel(h_grad[j], (h_up - h_dn) / (2 * h)));
        entries += 2;
      }
    }
  }

  // all-equal rewards cancel against the baseline
  TabularPolicy policy(5, 2);
  for (auto& x : policy.default_logits()) x = g(rng);
  LengthDistribution len{{{4, 0.5}, {7, 0.5}}};
  std::vector<ScoredSample> batch(16);
  for (auto& s : batch) {
    s.sample = sample_sequence(policy, len, rng);
    s.reward.per_position.assign(s.sample.ids.size(), 0.7 / static_cast<double>(s.sample.ids.size()));
    s.reward.total = 0.7;
  }
  std::size_t nonzero = 0;
  for (const auto& [ctx, row] : reinforce_gradient(policy, batch, TrainConfig{}).policy_term) {
    for (double x : row) nonzero += x != 0.0;
  }
  return {worst <= kGradRelTol && nonzero == 0,
          fmt("100 policies, %zu gradient entries, worst relative error %.2e (tol %.0e); non-zero policy-gradient "
              "entries with equal rewards: %zu",
              entries, worst, kGradRelTol, nonzero)};
}

// 8 ---------------------------------------------------------------------------

// Random trigram language: per context a Dirichlet-distributed next-token row.
std::vector<Sequence> trigram_language(std::size_t V, std::size_t n, double concentration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gam(concentration, 1.0);
  std::map<std::pair<TokenId, TokenId>, std::discrete_distribution<TokenId>> rows;
  auto row = [&](TokenId a, TokenId b) -> std::discrete_distribution<TokenId>& {
    auto it = rows.find({a, b});
    if (it == rows.end()) {
      std::vector<double> w(V);
      for (auto& x : w) x = gam(rng);
      it = rows.emplace(std::pair{a, b}, std::discrete_distribution<TokenId>(w.begin(), w.end())).first;
    }
    return it->second;
  };
  std::uniform_int_distribution<std::size_t> len(5, 10);
  std::vector<Sequence> out(n);
  for (auto& s : out) {
    TokenId a = TabularPolicy::kBos, b = TabularPolicy::kBos;
    const std::size_t L = len(rng);
    for (std::size_t t = 0; t < L; ++t) {
      const TokenId next = row(a, b)(rng);
      s.ids.push_back(next);
      a = b;
      b = next;
    }
  }
  return out;
}

double tail_mean(const TrainTrace& trace, double TrainRecord::*field, std::size_t last) {
  double sum = 0.0;
  const std::size_t n = std::min(last, trace.records.size() - 1);
  for (std::size_t i = trace.records.size() - n; i < trace.records.size(); ++i) sum += trace.records[i].*field;
  return sum / static_cast<double>(n);
}

Outcome rl_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;  // beta 0.0065, alpha 0.75, gamma 0.06, mix 0.25, 200 pretrain epochs, 2000 steps
  cfg.seed = 8;
  cfg.embed_window = 1;
  const Corpus corpus{numbered_vocab(20), trigram_language(20, 1000, 1.0, 808)};
  const auto table = build_max_count_table(corpus, cfg.n_max);
  const auto index = build_index(cfg.embedder().embed(corpus.sequences), {.k = 100, .seed = 8});
  const RewardModel model{&table, &index, BleuParams::uniform(cfg.n_max),
                          [emb = cfg.embedder()](std::span<const TokenId> ids) { return emb(ids); }};

  const auto run = train(cfg, model, corpus);
  const auto repeat = train(cfg, model, corpus);
  auto no_entropy = cfg;
  no_entropy.beta = 0.0;
  const auto collapsed = train(no_entropy, model, corpus);
  const double secs = seconds_since(t0);

  const auto& first = run.trace.records.front();
  const double reward_end = tail_mean(run.trace, &TrainRecord::reward, 5);
  const double entropy_end = tail_mean(run.trace, &TrainRecord::entropy, 5);
  const double collapsed_entropy = tail_mean(collapsed.trace, &TrainRecord::entropy, 5);
  const double gain = (reward_end - first.reward) / first.reward;
  const bool deterministic = run.trace.records == repeat.trace.records;
  return {gain >= kRewardGain && entropy_end < first.entropy && collapsed_entropy < kCollapsedEntropy &&
              deterministic && secs < kRlBudgetS,
          fmt("reward %.4f -> %.4f (%+.0f%%, need +%.0f%%); entropy %.3f -> %.3f nats/step; beta=0 entropy %.4f "
              "(need < %.1f); deterministic: %s; %.1fs for three runs (budget %.0fs)",
              first.reward, reward_end, 100 * gain, 100 * kRewardGain, first.entropy, entropy_end, collapsed_entropy,
              kCollapsedEntropy, deterministic ? "yes" : "no", secs, kRlBudgetS)};
}

// 9 ---------------------------------------------------------------------------

Outcome golden_formats() {
  const std::string dir = BERTGRAM_GOLDEN_DIR;
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto rejects = [&](const std::string& name, const std::string& bytes, auto reader) {
    std::vector<std::pair<std::string, std::string>> cases;
    auto bad = bytes;
    bad[0] = 'X';
    cases.emplace_back("magic", bad);
    bad = bytes;
    bad[4] = 2;
    cases.emplace_back("version", bad);
    cases.emplace_back("truncated", bytes.substr(0, bytes.size() - 2));
    cases.emplace_back("trailing", bytes + "junk");
    for (const auto& [label, b] : cases) {
      try {
        reader(b);
        failures.push_back(name + " accepted " + label);
      } catch (const FormatError&) {
      }
    }
  };

  EmbeddedCorpus dump;
  dump.dim = 3;
  dump.sequences.push_back({7, 3, {0, 1}, {0.5f, -1.25f, 2.0f, 0.0f, 1.0f, -0.75f}});
  dump.sequences.push_back({3, 3, {2}, {3.5f, -0.5f, 0.25f}});
  BertGramIndex index(2, 3);
  index.insert(1, {{0.5f, -1.0f, 2.0f, 0.25f}, {{7, 0}, {3, 1}}});
  index.insert(4, {{1.5f, -2.0f}, {{9, 2}}});
  const std::vector<Sequence> refs{{{0, 1, 0}}, {{1, 1}}};
  const auto table = build_max_count_table(refs, 2);

  const auto embd = detail::read_file(dir + "/tiny.embd");
  const auto bgix = detail::read_file(dir + "/tiny.bgix");
  const auto ngtb = detail::read_file(dir + "/tiny.ngtb");
  expect(serialize_dump(dump) == embd, "EMBD bytes");
  expect(serialize_index(index) == bgix, "BGIX bytes");
  expect(serialize_table(table) == ngtb, "NGTB bytes");
  rejects("EMBD", embd, [](const std::string& b) { return deserialize_dump(b); });
  rejects("BGIX", bgix, [](const std::string& b) { return deserialize_index(b); });
  rejects("NGTB", ngtb, [](const std::string& b) { return deserialize_table(b); });
  auto nan = embd;
  nan.replace(nan.size() - 4, 4, std::string("\x00\x00\xc0\x7f", 4));
  try {
    deserialize_dump(nan);
    failures.push_back("EMBD accepted NaN");
  } catch (const DataError&) {
  }

  std::string detail = "3 golden files reproduced, magic/version/truncation/trailing/NaN rejected";
  if (!failures.empty()) {
    detail = "failures:";
    for (const auto& f : failures) detail += " " + f + ";";
  }
  return {failures.empty(), detail};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ngram-oracle-equivalence", ngram_oracle},
      {"shaping-telescoping", telescoping},
      {"index-oracle-equivalence", index_oracle},
      {"corpus-size-independence", corpus_size_independence},
      {"sensitivity-banding", sensitivity_banding},
      {"t-test-and-aligned-comparison", t_test_and_alignment},
      {"gradient-checks", gradient_checks},
      {"rl-smoke-benchmark", rl_benchmark},
      {"format-golden", golden_formats},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const auto n = static_cast<std::size_t>(std::atoi(argv[a]));
    if (n >= 1 && n <= criteria.size()) selected[n - 1] = true;
  }
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
