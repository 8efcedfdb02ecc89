#include "bertgram/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bertgram/error.hpp"

namespace bertgram {

TabularPolicy::TabularPolicy(std::size_t vocab_size, std::size_t order)
    : vocab_size_(vocab_size), order_(order), default_row_(vocab_size, 0.0) {
  if (vocab_size == 0) throw InvalidArgument("policy vocabulary must be non-empty");
}

TabularPolicy::Context TabularPolicy::context_of(std::span<const TokenId> prefix) const {
  Context ctx(order_, kBos);
  const std::size_t take = std::min(order_, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

std::span<const double> TabularPolicy::logits(const Context& ctx) const {
  auto it = rows_.find(ctx);
  return it == rows_.end() ? std::span<const double>(default_row_) : std::span<const double>(it->second);
}

TabularPolicy::Row& TabularPolicy::mutable_logits(const Context& ctx) {
  auto it = rows_.find(ctx);
  if (it == rows_.end()) it = rows_.emplace(ctx, default_row_).first;
  return it->second;
}

std::vector<double> TabularPolicy::probabilities(const Context& ctx) const { return softmax(logits(ctx)); }

double TabularPolicy::log_prob(std::span<const TokenId> sequence) const {
  double lp = 0.0;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    if (sequence[t] >= vocab_size_) throw DataError("token " + std::to_string(sequence[t]) + " outside the policy vocabulary");
    const auto p = probabilities(context_of(sequence.first(t)));
    lp += std::log(p[sequence[t]]);
  }
  return lp;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double top = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

std::vector<double> log_prob_gradient(std::span<const double> logits, TokenId token) {
  if (token >= logits.size()) throw InvalidArgument("token outside the logit row");
  auto g = softmax(logits);
  for (auto& v : g) v = -v;
  g[token] += 1.0;
  return g;
}

std::vector<double> entropy_gradient(std::span<const double> logits) {
  const auto p = softmax(logits);
  const double h = entropy(p);
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) g[j] = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) : 0.0;
  return g;
}

double entropy_schedule(double beta, double alpha, std::size_t t) {
  if (t == 0) throw InvalidArgument("entropy schedule positions start at 1");
  return beta * std::pow(static_cast<double>(t), -alpha);
}

SampledSequence sample_sequence(const TabularPolicy& policy, const LengthDistribution& lengths, std::mt19937_64& rng) {
  if (lengths.probs.empty()) throw InvalidArgument("empty length distribution");
  std::vector<std::size_t> support;
  std::vector<double> weights;
  for (auto [len, p] : lengths.probs) {
    support.push_back(len);
    weights.push_back(p);
  }
  std::discrete_distribution<std::size_t> pick_length(weights.begin(), weights.end());
  const std::size_t length = support[pick_length(rng)];

  SampledSequence out;
  out.ids.reserve(length);
  out.log_probs.reserve(length);
  out.entropies.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const auto p = policy.probabilities(policy.context_of(out.ids));
    std::discrete_distribution<TokenId> pick(p.begin(), p.end());
    const TokenId w = pick(rng);
    out.ids.push_back(w);
    out.log_probs.push_back(std::log(p[w]));
    out.entropies.push_back(entropy(p));
  }
  return out;
}

double mean_log_likelihood(const TabularPolicy& policy, std::span<const Sequence> sequences) {
  if (sequences.empty()) throw InvalidArgument("log-likelihood of no sequences");
  double total = 0.0;
  for (const auto& s : sequences) total += policy.log_prob(s.ids);
  return total / static_cast<double>(sequences.size());
}

std::vector<double> pretrain_ml(TabularPolicy& policy, std::span<const Sequence> sequences, std::size_t steps,
                                double learning_rate) {
  if (sequences.empty()) throw InvalidArgument("maximum-likelihood training needs a non-empty corpus");
  const std::size_t V = policy.vocab_size();

  // Sufficient statistics: per context, how often each token follows it.
  TabularPolicy::Table counts;
  for (const auto& s : sequences) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      if (s.ids[t] >= V) throw DataError("token " + std::to_string(s.ids[t]) + " outside the policy vocabulary");
      auto& row = counts.try_emplace(policy.context_of(std::span(s.ids).first(t)), V, 0.0).first->second;
      row[s.ids[t]] += 1.0;
    }
  }
  const double scale = 1.0 / static_cast<double>(sequences.size());

  auto objective = [&] {
    double ll = 0.0;
    for (const auto& [ctx, row] : counts) {
      const auto p = policy.probabilities(ctx);
      for (std::size_t v = 0; v < V; ++v) {
        if (row[v] > 0.0) ll += row[v] * std::log(p[v]);
      }
    }
    return ll * scale;
  };

  std::vector<double> history;
  history.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    for (const auto& [ctx, row] : counts) {
      auto& logits = policy.mutable_logits(ctx);
      const auto p = softmax(logits);
      const double n = std::accumulate(row.begin(), row.end(), 0.0);
      for (std::size_t v = 0; v < V; ++v) logits[v] += learning_rate * scale * (row[v] - n * p[v]);
    }
    history.push_back(objective());
  }
  return history;
}

}  // namespace bertgram
