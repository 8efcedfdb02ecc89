#include "bertgram/rl.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "bertgram/analysis.hpp"
#include "bertgram/error.hpp"
#include "binary_io.hpp"

namespace bertgram {

void TrainConfig::validate() const {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  if (!(mix_weight >= 0.0 && mix_weight <= 1.0)) throw InvalidArgument("mix_weight must lie in [0, 1]");
  if (batch_size < 2) throw InvalidArgument("batch_size must be >= 2 for the mean baseline");
  if (!(learning_rate > 0.0) || !(pretrain_learning_rate > 0.0)) throw InvalidArgument("learning rates must be > 0");
  if (log_interval == 0) throw InvalidArgument("log_interval must be >= 1");
  if (n_max == 0) throw InvalidArgument("n_max must be >= 1");
  if (embed_dim < 2) throw InvalidArgument("embed_dim must be >= 2");
  if (!(embed_scale > 0.0)) throw InvalidArgument("embed_scale must be > 0");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw InvalidArgument("config: bad value \"" + value + "\" for " + key);
  return out;
}

}  // namespace

TrainConfig parse_train_config(std::string_view text, TrainConfig config) {
  using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;
  auto real = [](double TrainConfig::*field) -> Setter {
    return [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<double>(k, v); };
  };
  auto count = [](std::size_t TrainConfig::*field) -> Setter {
    return [field](TrainConfig& c, const std::string& k, const std::string& v) {
      if (!v.empty() && v[0] == '-') throw InvalidArgument("config: " + k + " must be non-negative");
      c.*field = parse_number<std::size_t>(k, v);
    };
  };
  const std::map<std::string, Setter> setters = {
      {"beta", real(&TrainConfig::beta)},
      {"alpha", real(&TrainConfig::alpha)},
      {"gamma", real(&TrainConfig::gamma)},
      {"mix_weight", real(&TrainConfig::mix_weight)},
      {"batch_size", count(&TrainConfig::batch_size)},
      {"steps", count(&TrainConfig::steps)},
      {"pretrain_steps", count(&TrainConfig::pretrain_steps)},
      {"learning_rate", real(&TrainConfig::learning_rate)},
      {"pretrain_learning_rate", real(&TrainConfig::pretrain_learning_rate)},
      {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"log_interval", count(&TrainConfig::log_interval)},
      {"context_order", count(&TrainConfig::context_order)},
      {"n_max", count(&TrainConfig::n_max)},
      {"credit",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "total") {
           c.credit = Credit::kSequenceTotal;
         } else if (v == "reward_to_go") {
           c.credit = Credit::kRewardToGo;
         } else {
           throw InvalidArgument("config: " + k + " must be total or reward_to_go");
         }
       }},
      {"embed_window", count(&TrainConfig::embed_window)},
      {"embed_dim", [](TrainConfig& c, const std::string& k, const std::string& v) { c.embed_dim = parse_number<std::uint32_t>(k, v); }},
      {"embed_scale", real(&TrainConfig::embed_scale)},
      {"embed_seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.embed_seed = parse_number<std::uint64_t>(k, v); }},
  };

  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(std::string_view(content).substr(0, eq));
    const auto value = trim(std::string_view(content).substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    it->second(config, key, value);
  }
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  return parse_train_config(detail::read_file(path), base);
}

ScoredSample score_sample(SampledSequence sample, const RewardModel& model, double gamma, double mix_weight) {
  if (!model.table || !model.index || !model.embed) throw InvalidArgument("reward model is incomplete");
  ScoredSample out;
  const auto emb = model.embed(sample.ids);
  const auto bert = indexed_reward(sample.ids, emb, *model.index, gamma);
  const auto increments = shaped_increments(sample.ids, *model.table, model.bleu);
  out.reward = mixed_reward(bert, increments, mix_weight);
  out.bert_reward = bert.total;
  double bleu_total = 0.0;
  for (double r : increments) bleu_total += r;
  out.ngram_reward = bleu_total;
  out.sample = std::move(sample);
  return out;
}

double batch_mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of no values");
  const double anchor = values.front();
  double shift = 0.0;
  for (double v : values) shift += v - anchor;
  return anchor + shift / static_cast<double>(values.size());
}

namespace {

void add_scaled(TabularPolicy::Table& table, const TabularPolicy::Context& ctx, std::span<const double> g, double scale) {
  auto& row = table.try_emplace(ctx, g.size(), 0.0).first->second;
  for (std::size_t i = 0; i < g.size(); ++i) row[i] += scale * g[i];
}

double table_norm(const TabularPolicy::Table& table) {
  double s = 0.0;
  for (const auto& [ctx, row] : table) {
    for (double v : row) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

PolicyGradient reinforce_gradient(const TabularPolicy& policy, std::span<const ScoredSample> batch,
                                  const TrainConfig& config) {
  if (batch.size() < 2) throw InvalidArgument("REINFORCE needs a batch of at least two sequences");
  PolicyGradient grad;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<double> totals;
  totals.reserve(batch.size());
  for (const auto& s : batch) totals.push_back(s.reward.total);
  grad.baseline = batch_mean(totals);

  // Reward-to-go per sequence and its batch mean per position.
  std::vector<std::vector<double>> to_go;
  std::vector<double> to_go_baseline;
  if (config.credit == Credit::kRewardToGo) {
    std::size_t longest = 0;
    for (const auto& s : batch) {
      const auto& r = s.reward.per_position;
      std::vector<double> g(r.size());
      double acc = 0.0;
      for (std::size_t t = r.size(); t-- > 0;) g[t] = acc += r[t];
      longest = std::max(longest, g.size());
      to_go.push_back(std::move(g));
    }
    to_go_baseline.resize(longest);
    for (std::size_t t = 0; t < longest; ++t) {
      std::vector<double> column;
      for (const auto& g : to_go) {
        if (t < g.size()) column.push_back(g[t]);
      }
      to_go_baseline[t] = batch_mean(column);
    }
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ids = batch[i].sample.ids;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      const auto ctx = policy.context_of(std::span(ids).first(t));
      const auto logits = policy.logits(ctx);
      const double advantage = config.credit == Credit::kRewardToGo ? to_go[i][t] - to_go_baseline[t]
                                                                   : totals[i] - grad.baseline;
      if (advantage != 0.0) add_scaled(grad.policy_term, ctx, log_prob_gradient(logits, ids[t]), advantage * inv_batch);
      const double beta_t = entropy_schedule(config.beta, config.alpha, t + 1);
      if (beta_t > 0.0) add_scaled(grad.entropy_term, ctx, entropy_gradient(logits), beta_t * inv_batch);
    }
  }
  return grad;
}

StepStats reinforce_step(TabularPolicy& policy, std::span<const ScoredSample> batch, const TrainConfig& config) {
  auto grad = reinforce_gradient(policy, batch, config);
  for (const auto* term : {&grad.policy_term, &grad.entropy_term}) {
    for (const auto& [ctx, g] : *term) {
      auto& logits = policy.mutable_logits(ctx);
      for (std::size_t v = 0; v < g.size(); ++v) logits[v] += config.learning_rate * g[v];
    }
  }
  return {grad.baseline, table_norm(grad.policy_term), table_norm(grad.entropy_term)};
}

namespace {

TrainRecord summarize(std::size_t step, std::span<const ScoredSample> batch) {
  TrainRecord rec;
  rec.step = step;
  std::vector<Sequence> seqs;
  seqs.reserve(batch.size());
  double steps = 0.0;
  for (const auto& s : batch) {
    rec.reward += s.reward.total;
    rec.bert_reward += s.bert_reward;
    rec.ngram_reward += s.ngram_reward;
    for (double h : s.sample.entropies) rec.entropy += h;
    steps += static_cast<double>(s.sample.ids.size());
    seqs.push_back({s.sample.ids});
  }
  const double n = static_cast<double>(batch.size());
  rec.reward /= n;
  rec.bert_reward /= n;
  rec.ngram_reward /= n;
  rec.entropy = steps > 0 ? rec.entropy / steps : 0.0;
  const auto div = diversity_metrics(seqs);
  rec.mean_length = div.mean_length;
  rec.rho = div.rho;
  rec.rho_2 = div.rho_2;
  rec.rho_4 = div.rho_4;
  return rec;
}

}  // namespace

TrainResult train(const TrainConfig& config, const RewardModel& model, const Corpus& corpus) {
  config.validate();
  if (corpus.sequences.empty()) throw DataError("training corpus is empty");
  if (!model.table || !model.index || !model.embed) throw InvalidArgument("reward model is incomplete");

  TrainResult result{{}, TabularPolicy(corpus.vocabulary.size(), config.context_order)};
  auto& policy = result.policy;
  pretrain_ml(policy, corpus.sequences, config.pretrain_steps, config.pretrain_learning_rate);

  const auto lengths = length_distribution(corpus);
  std::mt19937_64 rng(config.seed);
  std::vector<ScoredSample> batch(config.batch_size);
  std::vector<SampledSequence> samples(config.batch_size);
  for (std::size_t step = 0; step <= config.steps; ++step) {
    for (auto& s : samples) s = sample_sequence(policy, lengths, rng);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      batch[i] = score_sample(std::move(samples[i]), model, config.gamma, config.mix_weight);
    }
    if (step % config.log_interval == 0 || step == config.steps) result.trace.records.push_back(summarize(step, batch));
    if (step < config.steps) reinforce_step(policy, batch, config);
  }
  return result;
}

void write_trace(const TrainTrace& trace, std::ostream& out) {
  out << "step\treward\tbert_reward\tngram_reward\tentropy\tmean_len\trho\trho2\trho4\n";
  char buf[256];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", r.step, r.reward,
                  r.bert_reward, r.ngram_reward, r.entropy, r.mean_length, r.rho, r.rho_2, r.rho_4);
    out << buf;
  }
}

}  // namespace bertgram
