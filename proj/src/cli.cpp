#include "bertgram/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "bertgram/analysis.hpp"
#include "bertgram/bertgram_index.hpp"
#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"
#include "bertgram/error.hpp"
#include "bertgram/ngram_reward.hpp"
#include "bertgram/parallel.hpp"
#include "bertgram/reward.hpp"
#include "bertgram/rl.hpp"
#include "binary_io.hpp"

namespace bertgram::cli {
namespace {

constexpr const char* kFormats =
    "\nFormats:\n"
    "  corpus text   one sequence per line, tokens separated by spaces\n"
    "  vocabulary    one token per line; line number (from 0) is the id\n"
    "  EMBD          'EMBD', u32 version=1, u32 d, u64 num_sequences; per sequence u64 seq_id,\n"
    "                u32 T, T x u32 ids, T*d x f32 (little-endian)\n"
    "  BGIX          'BGIX', u32 version=1, u32 d, u32 K_max, u32 num_types; per type u32 token,\n"
    "                u32 k_w, k_w x (d x f32 centroid, u64 exemplar seq_id, u32 exemplar position)\n"
    "  NGTB          'NGTB', u32 version=1, u32 n_max; per order u64 entries, entries of\n"
    "                (n x u32 ids, u32 max count)\n";

std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string general(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Writes to -o when given, otherwise to the result stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw DataError("cannot open " + path + " for writing");
    }
    out_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *out_; }
  void finish(const std::string& path) {
    out_->flush();
    if (!*out_) throw DataError("write error on " + (path.empty() ? std::string("output stream") : path));
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

TokenId resolve_token(const std::string& spec, const Vocabulary* vocab) {
  if (vocab && vocab->contains(spec)) return vocab->id_of(spec);
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(spec, &used);
    if (used == spec.size() && v < kPadId) return static_cast<TokenId>(v);
  } catch (const std::exception&) {
  }
  throw DataError("unknown token \"" + spec + "\"" + (vocab ? "" : " (pass --vocab to use token strings)"));
}

std::string render(std::span<const TokenId> ids, const Vocabulary& vocab, std::optional<std::size_t> mark) {
  std::string text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) text += ' ';
    const auto& tok = vocab.token(ids[i]);
    text += (mark && *mark == i) ? "[" + tok + "]" : tok;
  }
  return fuse_word_pieces(text);
}

const EmbeddedSequence& find_sequence(const EmbeddedCorpus& corpus, std::uint64_t seq_id) {
  for (const auto& s : corpus.sequences) {
    if (s.seq_id == seq_id) return s;
  }
  throw DataError("no sequence with seq_id " + std::to_string(seq_id));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(where + ": bad number \"" + s + "\"");
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] != '-') {
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw DataError(where + ": bad integer \"" + s + "\"");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Per-token score lines: seq_id <TAB> total <TAB> r_1,r_2,...
std::map<std::uint64_t, std::vector<double>> read_scores(const std::string& path) {
  std::map<std::uint64_t, std::vector<double>> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    const std::string where = path + ":" + std::to_string(++n);
    const auto fields = split(line, '\t');
    if (fields.size() != 3) throw DataError(where + ": expected seq_id, total and per-token rewards");
    std::vector<double> rewards;
    for (const auto& r : split(fields[2], ',')) rewards.push_back(parse_double(r, where));
    out[parse_u64(fields[0], where)] = std::move(rewards);
  }
  return out;
}

std::vector<AnchoredRewards> join_anchors(const std::string& scores_path, const std::string& anchors_path) {
  const auto scores = read_scores(scores_path);
  std::vector<AnchoredRewards> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(anchors_path)) {
    const std::string where = anchors_path + ":" + std::to_string(++n);
    const auto fields = split(line, '\t');
    if (fields.size() != 3) throw DataError(where + ": expected seq_id, anchor_begin and anchor_length");
    const auto id = parse_u64(fields[0], where);
    auto it = scores.find(id);
    if (it == scores.end()) throw DataError(where + ": seq_id " + fields[0] + " missing from " + scores_path);
    out.push_back({it->second, parse_u64(fields[1], where), parse_u64(fields[2], where)});
  }
  return out;
}

// Subcommand implementations ------------------------------------------------

struct CompileNgrams {
  std::string corpus, vocab, output;
  std::size_t n_max = 4;

  void run(std::ostream& log) const {
    const auto voc = Vocabulary::load(vocab);
    const auto refs = load_corpus(corpus, voc);
    const auto table = build_max_count_table(refs, n_max);
    write_table(table, output);
    log << "wrote " << table.entry_count() << " n-grams (n <= " << n_max << ") from " << refs.size()
        << " references to " << output << "\n";
  }
};

struct CompileIndex {
  std::string embeddings, output;
  IndexOptions options;

  void run(std::ostream& log) const {
    const auto corpus = read_dump(embeddings);
    const auto index = build_index(corpus, options);
    write_index(index, output);
    std::size_t centroids = 0;
    for (const auto& [tok, entry] : index.types()) centroids += entry.k();
    log << "wrote " << index.type_count() << " types, " << centroids << " centroids (K=" << options.k << ", d="
        << index.dim() << ") to " << output << "\n";
  }
};

struct EmbedSynthetic {
  std::string corpus, vocab, output;
  SyntheticEmbedder embedder;

  void run(std::ostream& log) const {
    const auto voc = Vocabulary::load(vocab);
    const auto text = load_corpus(corpus, voc);
    write_dump(embedder.embed(text.sequences), output);
    log << "embedded " << text.size() << " sequences (d=" << embedder.dim << ", window=" << embedder.window
        << ") to " << output << "\n";
  }
};

struct Score {
  std::string index_path, ngrams_path, candidates, output;
  double gamma = kDefaultGamma;
  double mix = kDefaultMixWeight;
  bool mix_given = false;
  bool per_token = false;
  std::size_t threads = default_thread_count();

  void run(std::ostream& out) const {
    const auto index = read_index(index_path);
    std::optional<MaxCountTable> table;
    if (!ngrams_path.empty()) table = read_table(ngrams_path);
    if (!table && mix_given && mix != 1.0) {
      throw InvalidArgument("--mix below 1 needs an n-gram table (--ngrams)");
    }
    const double weight = table ? mix : 1.0;
    const auto cands = read_dump(candidates);
    const BleuParams bleu_params = table ? BleuParams::uniform(table->n_max()) : BleuParams{};

    std::vector<RewardBreakdown> results(cands.sequences.size());
    parallel_for(results.size(), threads, [&](std::size_t i) {
      const auto& c = cands.sequences[i];
      auto bert = indexed_reward(c, index, gamma);
      if (table && !c.ids.empty()) {
        results[i] = mixed_reward(bert, shaped_increments(c.ids, *table, bleu_params), weight);
      } else {
        results[i] = std::move(bert);
      }
    });

    Output sink(output, out);
    for (std::size_t i = 0; i < results.size(); ++i) {
      *sink << cands.sequences[i].seq_id << '\t' << fixed6(results[i].total);
      if (per_token) {
        *sink << '\t';
        for (std::size_t t = 0; t < results[i].per_position.size(); ++t) {
          if (t) *sink << ',';
          *sink << fixed6(results[i].per_position[t]);
        }
      }
      *sink << '\n';
    }
    sink.finish(output);
  }
};

struct Neighbors {
  std::string embeddings, query, vocab, only_token, exclude_token, output;
  std::uint64_t query_seq = 0;
  std::size_t query_pos = 0;
  std::size_t k = 6;

  void run(std::ostream& out) const {
    const auto corpus = read_dump(embeddings);
    const auto queries = read_dump(query);
    std::optional<Vocabulary> voc;
    if (!vocab.empty()) voc = Vocabulary::load(vocab);
    const auto& q = find_sequence(queries, query_seq);
    if (query_pos >= q.length()) throw DataError("--query-pos outside query sequence " + std::to_string(query_seq));

    NeighborFilter filter;
    if (!only_token.empty()) filter = NeighborFilter::only(resolve_token(only_token, voc ? &*voc : nullptr));
    if (!exclude_token.empty()) filter = NeighborFilter::exclude(resolve_token(exclude_token, voc ? &*voc : nullptr));
    const auto hits = nearest_neighbors(corpus, q.row(query_pos), k, filter);

    Output sink(output, out);
    if (voc) *sink << "# query: " << render(q.ids, *voc, query_pos) << '\n';
    *sink << "rank\tsq_distance\tseq_id\tposition\ttoken" << (voc ? "\tsentence" : "") << '\n';
    for (std::size_t i = 0; i < hits.size(); ++i) {
      const auto& h = hits[i];
      *sink << i + 1 << '\t' << fixed6(h.squared_distance) << '\t' << h.seq_id << '\t' << h.position << '\t';
      if (voc) {
        const auto& s = find_sequence(corpus, h.seq_id);
        *sink << voc->token(h.token) << '\t' << render(s.ids, *voc, h.position);
      } else {
        *sink << h.token;
      }
      *sink << '\n';
    }
    sink.finish(output);
  }
};

struct Perturb {
  std::string corpus, vocab, output, perturbed_out;
  std::uint64_t seed = 0;

  void run(std::ostream& out) const {
    const auto voc = Vocabulary::load(vocab);
    const auto text = load_corpus(corpus, voc);
    const auto plan = perturb_plan(text, seed);
    Output sink(output, out);
    *sink << "sequence\tposition\treplacement\n";
    for (const auto& e : plan) *sink << e.sequence << '\t' << e.position << '\t' << e.replacement << '\n';
    sink.finish(output);
    if (!perturbed_out.empty()) write_corpus(Corpus{voc, apply_plan(text, plan)}, perturbed_out);
  }
};

std::vector<PerturbEntry> read_plan(const std::string& path) {
  std::vector<PerturbEntry> plan;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i].rfind("sequence", 0) == 0) continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    const auto f = split(lines[i], '\t');
    if (f.size() != 3) throw DataError(where + ": expected sequence, position and replacement");
    plan.push_back({parse_u64(f[0], where), static_cast<std::uint32_t>(parse_u64(f[1], where)),
                    static_cast<TokenId>(parse_u64(f[2], where))});
  }
  return plan;
}

struct Sensitivity {
  std::string original, perturbed, plan_path, output;
  double gamma = kDefaultGamma;

  void run(std::ostream& out) const {
    const auto orig = read_dump(original);
    const auto pert = read_dump(perturbed);
    const auto plan = read_plan(plan_path);
    if (plan.size() != pert.sequences.size()) {
      throw DataError("plan has " + std::to_string(plan.size()) + " entries but " + perturbed + " has " +
                      std::to_string(pert.sequences.size()) + " sequences");
    }
    std::vector<PerturbedPair> pairs;
    pairs.reserve(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (plan[i].sequence >= orig.sequences.size()) throw DataError("plan refers to missing sequence " + std::to_string(plan[i].sequence));
      pairs.push_back({&orig.sequences[plan[i].sequence], &pert.sequences[i], plan[i].position});
    }
    const auto m = sensitivity_matrix(pairs, gamma);
    Output sink(output, out);
    *sink << m.length << '\n';
    for (std::size_t j = 0; j < m.length; ++j) {
      for (std::size_t t = 0; t < m.length; ++t) *sink << (t ? "\t" : "") << fixed6(m.at(j, t));
      *sink << '\n';
    }
    sink.finish(output);
  }
};

struct Align {
  std::string real_scores, real_anchors, fake_scores, fake_anchors, output;

  void run(std::ostream& out) const {
    const auto real = join_anchors(real_scores, real_anchors);
    const auto fake = join_anchors(fake_scores, fake_anchors);
    const auto cmp = aligned_comparison(real, fake);
    Output sink(output, out);
    *sink << "offset\tmean_real\tmean_fake\tn_real\tn_fake\tt\tp\n";
    for (const auto& row : cmp.rows) {
      *sink << row.offset << '\t' << fixed6(row.mean_real) << '\t' << fixed6(row.mean_fake) << '\t' << row.n_real
            << '\t' << row.n_fake << '\t';
      if (row.test) {
        *sink << fixed6(row.test->t) << '\t' << general(row.test->p);
      } else {
        *sink << "nan\tnan";
      }
      *sink << '\n';
    }
    sink.finish(output);
  }
};

struct Diversity {
  std::string corpus, vocab, output;
  bool per_sequence = false;

  void run(std::ostream& out) const {
    const auto voc = Vocabulary::load(vocab);
    const auto text = load_corpus(corpus, voc);
    const auto m = diversity_metrics(text.sequences,
                                     per_sequence ? NGramDiversity::kPerSequence : NGramDiversity::kBatchWide);
    Output sink(output, out);
    *sink << "rho\trho2\trho4\tmean_len\n"
          << fixed6(m.rho) << '\t' << fixed6(m.rho_2) << '\t' << fixed6(m.rho_4) << '\t' << fixed6(m.mean_length)
          << '\n';
    sink.finish(output);
  }
};

struct Train {
  std::string corpus, vocab, ngrams, index_path, config_path, output;
  std::uint64_t seed = 0;

  void run(std::ostream& out) const {
    TrainConfig config;
    if (!config_path.empty()) config = load_train_config(config_path);
    config.seed = seed;
    config.validate();
    const auto voc = Vocabulary::load(vocab);
    const auto text = load_corpus(corpus, voc);
    const auto table = read_table(ngrams);
    const auto index = read_index(index_path);
    if (index.dim() != config.embed_dim) {
      throw DataError("index has d=" + std::to_string(index.dim()) + " but embed_dim=" + std::to_string(config.embed_dim));
    }
    RewardModel model{&table, &index, BleuParams::uniform(table.n_max()),
                      [emb = config.embedder()](std::span<const TokenId> ids) { return emb(ids); }};
    const auto result = train(config, model, text);
    Output sink(output, out);
    write_trace(result.trace, *sink);
    sink.finish(output);
  }
};

struct InspectCentroid {
  std::string index_path, embeddings, vocab, token, candidates, output;
  std::optional<std::size_t> centroid;
  std::optional<std::uint64_t> seq_id;
  double gamma = kDefaultGamma;

  void run(std::ostream& out) const {
    const auto index = read_index(index_path);
    const auto corpus = read_dump(embeddings);
    const auto voc = Vocabulary::load(vocab);
    Output sink(output, out);

    auto exemplar_text = [&](const Occurrence& ex) {
      const auto& s = find_sequence(corpus, ex.seq_id);
      return render(s.ids, voc, ex.position);
    };

    if (!token.empty()) {
      const TokenId tok = resolve_token(token, &voc);
      const auto* entry = index.find(tok);
      if (!entry) throw DataError("token \"" + token + "\" is not in the index");
      *sink << "centroid\tseq_id\tposition\texemplar\n";
      for (std::size_t k = 0; k < entry->k(); ++k) {
        if (centroid && *centroid != k) continue;
        const auto& ex = entry->exemplars[k];
        *sink << k << '\t' << ex.seq_id << '\t' << ex.position << '\t' << exemplar_text(ex) << '\n';
      }
      if (centroid && *centroid >= entry->k()) throw DataError("centroid " + std::to_string(*centroid) + " out of range");
    } else {
      const auto cands = read_dump(candidates);
      const auto& c = find_sequence(cands, *seq_id);
      *sink << "# candidate: " << render(c.ids, voc, std::nullopt) << '\n';
      *sink << "position\ttoken\tcentroid\treward\tseq_id\texemplar_position\texemplar\n";
      for (std::size_t t = 0; t < c.length(); ++t) {
        *sink << t << '\t' << voc.token(c.ids[t]) << '\t';
        const auto hit = index.nearest_centroid(c.ids[t], c.row(t));
        if (!hit) {
          *sink << "-\t" << fixed6(0.0) << "\t-\t-\t-\n";
          continue;
        }
        const auto& ex = index.find(c.ids[t])->exemplars[hit->centroid];
        *sink << hit->centroid << '\t' << fixed6(std::exp(-gamma * hit->squared_distance)) << '\t' << ex.seq_id
              << '\t' << ex.position << '\t' << exemplar_text(ex) << '\n';
      }
    }
    sink.finish(output);
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Condensed n-gram and BERT-gram reward indices: compile, score, analyze, train."};
  app.footer(kFormats);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::function<void()> action;
  auto bind = [&](CLI::App* sub, auto& job, auto& stream) {
    sub->footer(kFormats);
    sub->callback([&action, &job, &stream] { action = [&job, &stream] { job.run(stream); }; });
  };
  const auto positive = CLI::PositiveNumber;
  const auto gamma_range = CLI::Range(1e-4, 0.5);
  const auto existing = CLI::ExistingFile;

  CompileNgrams compile_ngrams;
  auto* cn = app.add_subcommand("compile-ngrams", "Build the max-count n-gram table (NGTB) of a corpus");
  cn->add_option("--corpus", compile_ngrams.corpus, "Reference corpus text")->required()->check(existing);
  cn->add_option("--vocab", compile_ngrams.vocab, "Vocabulary file")->required()->check(existing);
  cn->add_option("--n-max", compile_ngrams.n_max, "Largest n-gram order")->capture_default_str()->check(CLI::Range(1, 16));
  cn->add_option("-o,--output", compile_ngrams.output, "Output NGTB file")->required();
  bind(cn, compile_ngrams, err);

  CompileIndex compile_index;
  auto* ci = app.add_subcommand("compile-index", "Cluster an embedding dump into a BERT-gram index (BGIX)");
  ci->add_option("--embeddings", compile_index.embeddings, "EMBD dump of the reference corpus")->required()->check(existing);
  ci->add_option("--k", compile_index.options.k, "Centroids per word type (K)")->capture_default_str()->check(CLI::Range(1, 1 << 20));
  ci->add_option("--seed", compile_index.options.seed, "Clustering seed")->required();
  ci->add_option("--max-iters", compile_index.options.max_iters, "Lloyd iteration cap")->capture_default_str();
  ci->add_option("--tol", compile_index.options.tol, "Stop when no centroid moves further than this")->capture_default_str()->check(CLI::NonNegativeNumber);
  compile_index.options.threads = default_thread_count();
  ci->add_option("--threads", compile_index.options.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  ci->add_option("-o,--output", compile_index.output, "Output BGIX file")->required();
  bind(ci, compile_index, err);

  EmbedSynthetic embed;
  auto* es = app.add_subcommand("embed-synthetic", "Embed a corpus with the deterministic window embedder (EMBD)");
  es->add_option("--corpus", embed.corpus, "Corpus text; seq_id = line index")->required()->check(existing);
  es->add_option("--vocab", embed.vocab, "Vocabulary file")->required()->check(existing);
  es->add_option("--window", embed.embedder.window, "Context half-width c")->capture_default_str();
  es->add_option("--dim", embed.embedder.dim, "Vector dimension")->capture_default_str()->check(CLI::Range(2, 1 << 16));
  es->add_option("--scale", embed.embedder.scale, "Vector norm")->capture_default_str()->check(positive);
  es->add_option("--seed", embed.embedder.seed, "Embedding seed")->required();
  es->add_option("-o,--output", embed.output, "Output EMBD file")->required();
  bind(es, embed, err);

  Score score;
  auto* sc = app.add_subcommand("score", "Score candidate embeddings against compiled indices");
  sc->add_option("--index", score.index_path, "BGIX index")->required()->check(existing);
  sc->add_option("--ngrams", score.ngrams_path, "NGTB table; enables the mixed reward")->check(existing);
  sc->add_option("--candidates", score.candidates, "EMBD dump of candidates")->required()->check(existing);
  sc->add_option("--gamma", score.gamma, "RBF bandwidth, in [1e-4, 0.5]")->capture_default_str()->check(gamma_range);
  auto* mix_opt = sc->add_option("--mix", score.mix, "Weight on the BERT-gram reward, in [0,1]")
                      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sc->add_flag("--per-token", score.per_token, "Append per-position rewards");
  score.threads = default_thread_count();
  sc->add_option("--threads", score.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  sc->add_option("-o,--output", score.output, "Output file (default: stdout)");
  sc->footer(std::string("\nOutput: seq_id<TAB>total[<TAB>r_1,...,r_T], six decimals.\n") + kFormats);
  sc->callback([&] {
    score.mix_given = mix_opt->count() > 0;
    action = [&] { score.run(out); };
  });

  auto* analyze = app.add_subcommand("analyze", "Embedding-space and reward analyses");
  analyze->require_subcommand(1);

  Neighbors neighbors;
  auto* nb = analyze->add_subcommand("neighbors", "k nearest corpus positions to a query position");
  nb->add_option("--embeddings", neighbors.embeddings, "EMBD dump to search")->required()->check(existing);
  nb->add_option("--query", neighbors.query, "EMBD dump holding the query sequence")->required()->check(existing);
  nb->add_option("--query-seq", neighbors.query_seq, "seq_id of the query sequence")->required();
  nb->add_option("--query-pos", neighbors.query_pos, "Query position (0-based)")->required();
  nb->add_option("--k", neighbors.k, "Number of neighbours")->capture_default_str()->check(CLI::Range(1, 1 << 30));
  nb->add_option("--vocab", neighbors.vocab, "Vocabulary for readable output")->check(existing);
  auto* only = nb->add_option("--only-token", neighbors.only_token, "Restrict to one token type");
  nb->add_option("--exclude-token", neighbors.exclude_token, "Skip one token type")->excludes(only);
  nb->add_option("-o,--output", neighbors.output, "Output file (default: stdout)");
  bind(nb, neighbors, out);

  Perturb perturb;
  auto* pp = analyze->add_subcommand("perturb", "Emit a one-token-per-sequence perturbation plan");
  pp->add_option("--corpus", perturb.corpus, "Corpus text")->required()->check(existing);
  pp->add_option("--vocab", perturb.vocab, "Vocabulary file")->required()->check(existing);
  pp->add_option("--seed", perturb.seed, "Sampling seed")->required();
  pp->add_option("--perturbed-out", perturb.perturbed_out, "Also write the perturbed corpus text");
  pp->add_option("-o,--output", perturb.output, "Plan TSV (default: stdout)");
  bind(pp, perturb, out);

  Sensitivity sensitivity;
  auto* sn = analyze->add_subcommand("sensitivity", "Aggregate a perturbation run into a T x T matrix");
  sn->add_option("--original", sensitivity.original, "EMBD of the original corpus")->required()->check(existing);
  sn->add_option("--perturbed", sensitivity.perturbed, "EMBD of the perturbed corpus, in plan order")->required()->check(existing);
  sn->add_option("--plan", sensitivity.plan_path, "Plan TSV from 'analyze perturb'")->required()->check(existing);
  sn->add_option("--gamma", sensitivity.gamma, "RBF bandwidth, in [1e-4, 0.5]")->capture_default_str()->check(gamma_range);
  sn->add_option("-o,--output", sensitivity.output, "Output file (default: stdout)");
  bind(sn, sensitivity, out);

  Align align;
  auto* al = analyze->add_subcommand("align", "Anchor-aligned real vs fake reward comparison with t-tests");
  al->add_option("--real-scores", align.real_scores, "'score --per-token' output for real sequences")->required()->check(existing);
  al->add_option("--real-anchors", align.real_anchors, "seq_id<TAB>anchor_begin<TAB>anchor_length")->required()->check(existing);
  al->add_option("--fake-scores", align.fake_scores, "'score --per-token' output for fake sequences")->required()->check(existing);
  al->add_option("--fake-anchors", align.fake_anchors, "Anchors of the fake sequences")->required()->check(existing);
  al->add_option("-o,--output", align.output, "Output file (default: stdout)");
  bind(al, align, out);

  Diversity diversity;
  auto* dv = analyze->add_subcommand("diversity", "Unique-sequence and distinct n-gram ratios of a batch");
  dv->add_option("--corpus", diversity.corpus, "Batch as corpus text")->required()->check(existing);
  dv->add_option("--vocab", diversity.vocab, "Vocabulary file")->required()->check(existing);
  dv->add_flag("--per-sequence", diversity.per_sequence, "Average n-gram ratios per sequence instead of batch-wide");
  dv->add_option("-o,--output", diversity.output, "Output file (default: stdout)");
  bind(dv, diversity, out);

  Train train_cmd;
  auto* tr = app.add_subcommand("train", "ML pre-training then REINFORCE of a tabular policy");
  tr->add_option("--corpus", train_cmd.corpus, "Training corpus text")->required()->check(existing);
  tr->add_option("--vocab", train_cmd.vocab, "Vocabulary file")->required()->check(existing);
  tr->add_option("--ngrams", train_cmd.ngrams, "NGTB table of the corpus")->required()->check(existing);
  tr->add_option("--index", train_cmd.index_path, "BGIX index built from embed-synthetic output")->required()->check(existing);
  tr->add_option("--config", train_cmd.config_path, "key = value file (beta, alpha, gamma, mix_weight, batch_size, ...)")->check(existing);
  tr->add_option("--seed", train_cmd.seed, "Training seed")->required();
  tr->add_option("-o,--output", train_cmd.output, "Trace TSV (default: stdout)");
  tr->footer(std::string("\nTrace columns: step reward bert_reward ngram_reward entropy mean_len rho rho2 rho4\n") + kFormats);
  bind(tr, train_cmd, out);

  InspectCentroid inspect;
  auto* ic = app.add_subcommand("inspect-centroid", "Show the corpus sentence nearest each centroid");
  ic->add_option("--index", inspect.index_path, "BGIX index")->required()->check(existing);
  ic->add_option("--embeddings", inspect.embeddings, "EMBD dump the index was built from")->required()->check(existing);
  ic->add_option("--vocab", inspect.vocab, "Vocabulary file")->required()->check(existing);
  auto* tok_opt = ic->add_option("--token", inspect.token, "List the centroids of this token");
  ic->add_option("--centroid", inspect.centroid, "Only this centroid of --token");
  auto* cand_opt = ic->add_option("--candidates", inspect.candidates, "EMBD dump of candidates")->check(existing)->excludes(tok_opt);
  auto* seq_opt = ic->add_option("--seq-id", inspect.seq_id, "Candidate to explain position by position")->needs(cand_opt);
  cand_opt->needs(seq_opt);
  ic->add_option("--gamma", inspect.gamma, "RBF bandwidth, in [1e-4, 0.5]")->capture_default_str()->check(gamma_range);
  ic->add_option("-o,--output", inspect.output, "Output file (default: stdout)");
  ic->callback([&] {
    if (tok_opt->count() == 0 && cand_opt->count() == 0) throw CLI::ValidationError("one of --token or --candidates is required");
    action = [&] { inspect.run(out); };
  });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace bertgram::cli
