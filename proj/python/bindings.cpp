#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bertgram/analysis.hpp"
#include "bertgram/bertgram_index.hpp"
#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"
#include "bertgram/error.hpp"
#include "bertgram/kmeans.hpp"
#include "bertgram/ngram_reward.hpp"
#include "bertgram/reward.hpp"
#include "bertgram/rl.hpp"

namespace py = pybind11;
using namespace bertgram;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IdArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

std::vector<Sequence> to_sequences(const std::vector<std::vector<TokenId>>& seqs) {
  std::vector<Sequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back({s});
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<float> rows_view(const std::vector<float>& data, std::size_t dim) {
  const py::ssize_t n = dim ? static_cast<py::ssize_t>(data.size() / dim) : 0;
  py::array_t<float> out({n, static_cast<py::ssize_t>(dim)});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

EmbeddedSequence make_sequence(std::uint64_t seq_id, IdArray ids, FloatArray vectors) {
  if (vectors.ndim() != 2) throw InvalidArgument("vectors must be a 2-D array");
  if (static_cast<py::ssize_t>(ids.size()) != vectors.shape(0)) throw DataError("ids and vector rows differ in length");
  EmbeddedSequence s;
  s.seq_id = seq_id;
  s.dim = static_cast<std::uint32_t>(vectors.shape(1));
  s.ids.assign(ids.data(), ids.data() + ids.size());
  s.vectors.assign(vectors.data(), vectors.data() + vectors.size());
  s.validate();
  return s;
}

py::dict breakdown(const RewardBreakdown& r) {
  py::dict d;
  d["per_position"] = to_array(r.per_position);
  d["total"] = r.total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "n-gram and BERT-gram reward indices";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<DataError> data_error(m, "DataError", error.ptr());
  static py::exception<FormatError> format_error(m, "FormatError", data_error.ptr());
  static py::exception<InvalidArgument> invalid(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FormatError& e) {
      py::set_error(format_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const InvalidArgument& e) {
      py::set_error(invalid, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("PAD_ID") = kPadId;
  m.attr("DEFAULT_GAMMA") = kDefaultGamma;
  m.attr("DEFAULT_MIX_WEIGHT") = kDefaultMixWeight;

  // corpus
  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>>())
      .def_static("load", &Vocabulary::load)
      .def("save", &Vocabulary::save)
      .def("__len__", &Vocabulary::size)
      .def("__contains__", [](const Vocabulary& v, const std::string& t) { return v.contains(t); })
      .def("id_of", [](const Vocabulary& v, const std::string& t) { return v.id_of(t); })
      .def("token", &Vocabulary::token)
      .def_property_readonly("tokens", &Vocabulary::tokens);

  m.def("load_corpus", [](const std::filesystem::path& path, const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> out;
    for (auto& s : load_corpus(path, vocab).sequences) out.push_back(std::move(s.ids));
    return out;
  });
  m.def("parse_corpus", [](const std::string& text, const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> out;
    for (auto& s : parse_corpus(text, vocab).sequences) out.push_back(std::move(s.ids));
    return out;
  });
  m.def("ngrams", [](const std::vector<TokenId>& ids, std::size_t n) { return ngrams(ids, n); });
  m.def("fuse_word_pieces", &fuse_word_pieces);

  // n-gram reward
  py::class_<MaxCountTable>(m, "MaxCountTable")
      .def_property_readonly("n_max", &MaxCountTable::n_max)
      .def("count", [](const MaxCountTable& t, const std::vector<TokenId>& g) { return t.count(g); })
      .def("entry_count", &MaxCountTable::entry_count)
      .def("to_bytes", [](const MaxCountTable& t) { return py::bytes(serialize_table(t)); })
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize_table(std::string(b)); })
      .def("save", [](const MaxCountTable& t, const std::filesystem::path& p) { write_table(t, p); })
      .def_static("load", &read_table)
      .def("__eq__", &MaxCountTable::operator==);

  m.def("build_max_count_table",
        [](const std::vector<std::vector<TokenId>>& refs, std::size_t n_max) {
          return build_max_count_table(to_sequences(refs), n_max);
        },
        py::arg("references"), py::arg("n_max") = 4);
  m.def("modified_precision",
        [](const std::vector<TokenId>& cand, const MaxCountTable& t, std::size_t n) {
          const auto c = modified_precision(cand, t, n);
          return py::make_tuple(c.matched, c.total);
        });

  auto params_of = [](const MaxCountTable& t, std::optional<std::vector<double>> weights, bool smoothing) {
    BleuParams p = weights ? BleuParams{*weights, smoothing} : BleuParams::uniform(t.n_max(), smoothing);
    return p;
  };
  m.def("bleu",
        [params_of](const std::vector<TokenId>& cand, const MaxCountTable& t, std::optional<std::vector<double>> w,
                    bool smoothing) { return bleu(cand, t, params_of(t, w, smoothing)); },
        py::arg("candidate"), py::arg("table"), py::arg("weights") = py::none(), py::arg("smoothing") = true);
  m.def("shaped_increments",
        [params_of](const std::vector<TokenId>& cand, const MaxCountTable& t, std::optional<std::vector<double>> w,
                    bool smoothing) { return to_array(shaped_increments(cand, t, params_of(t, w, smoothing))); },
        py::arg("candidate"), py::arg("table"), py::arg("weights") = py::none(), py::arg("smoothing") = true);

  // embeddings
  py::class_<EmbeddedSequence>(m, "EmbeddedSequence")
      .def(py::init(&make_sequence), py::arg("seq_id"), py::arg("ids"), py::arg("vectors"))
      .def_readonly("seq_id", &EmbeddedSequence::seq_id)
      .def_readonly("dim", &EmbeddedSequence::dim)
      .def_property_readonly("ids", [](const EmbeddedSequence& s) { return IdArray(s.ids.size(), s.ids.data()); })
      .def_property_readonly("vectors", [](const EmbeddedSequence& s) { return rows_view(s.vectors, s.dim); })
      .def("__len__", &EmbeddedSequence::length);

  py::class_<EmbeddedCorpus>(m, "EmbeddedCorpus")
      .def(py::init([](std::uint32_t dim, std::vector<EmbeddedSequence> seqs) {
             EmbeddedCorpus c{dim, std::move(seqs)};
             c.validate();
             return c;
           }),
           py::arg("dim"), py::arg("sequences"))
      .def_readonly("dim", &EmbeddedCorpus::dim)
      .def_readonly("sequences", &EmbeddedCorpus::sequences)
      .def("token_count", &EmbeddedCorpus::token_count)
      .def("__len__", [](const EmbeddedCorpus& c) { return c.sequences.size(); })
      .def("__eq__", &EmbeddedCorpus::operator==)
      .def("to_bytes", [](const EmbeddedCorpus& c) { return py::bytes(serialize_dump(c)); })
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize_dump(std::string(b)); });

  m.def("read_dump", &read_dump);
  m.def("write_dump", &write_dump);

  py::class_<SyntheticEmbedder>(m, "SyntheticEmbedder")
      .def(py::init([](std::size_t window, std::uint32_t dim, std::uint64_t seed, double scale) {
             return SyntheticEmbedder{window, dim, seed, scale};
           }),
           py::arg("window") = 1, py::arg("dim") = 16, py::arg("seed") = 0, py::arg("scale") = 1.0)
      .def("__call__", [](const SyntheticEmbedder& e, const std::vector<TokenId>& ids, std::uint64_t id) { return e(ids, id); },
           py::arg("ids"), py::arg("seq_id") = 0)
      .def("embed", [](const SyntheticEmbedder& e, const std::vector<std::vector<TokenId>>& seqs) {
        return e.embed(to_sequences(seqs));
      });

  // clustering and index
  m.def("kmeans",
        [](FloatArray rows, std::size_t k, std::uint64_t seed, std::size_t max_iters, double tol) {
          if (rows.ndim() != 2) throw InvalidArgument("rows must be a 2-D array");
          const auto dim = static_cast<std::size_t>(rows.shape(1));
          const auto r = kmeans(std::span<const float>(rows.data(), rows.size()), dim, {k, seed, max_iters, tol});
          return py::make_tuple(rows_view(r.centroids, dim),
                                py::array_t<std::uint32_t>(r.assignment.size(), r.assignment.data()),
                                r.wcss_history);
        },
        py::arg("rows"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iters") = 25, py::arg("tol") = 1e-4);

  py::class_<BertGramIndex>(m, "BertGramIndex")
      .def_property_readonly("dim", &BertGramIndex::dim)
      .def_property_readonly("k_max", &BertGramIndex::k_max)
      .def("type_count", &BertGramIndex::type_count)
      .def("tokens",
           [](const BertGramIndex& i) {
             std::vector<TokenId> out;
             for (const auto& [t, e] : i.types()) out.push_back(t);
             return out;
           })
      .def("centroids",
           [](const BertGramIndex& i, TokenId t) -> py::object {
             const auto* e = i.find(t);
             if (!e) return py::none();
             return rows_view(e->centroids, i.dim());
           })
      .def("exemplars",
           [](const BertGramIndex& i, TokenId t) {
             std::vector<std::pair<std::uint64_t, std::uint32_t>> out;
             if (const auto* e = i.find(t)) {
               for (const auto& x : e->exemplars) out.emplace_back(x.seq_id, x.position);
             }
             return out;
           })
      .def("nearest_centroid",
           [](const BertGramIndex& i, TokenId t, FloatArray v) -> py::object {
             const auto hit = i.nearest_centroid(t, std::span<const float>(v.data(), v.size()));
             if (!hit) return py::none();
             return py::make_tuple(hit->centroid, hit->squared_distance);
           })
      .def("to_bytes", [](const BertGramIndex& i) { return py::bytes(serialize_index(i)); })
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize_index(std::string(b)); })
      .def("save", [](const BertGramIndex& i, const std::filesystem::path& p) { write_index(i, p); })
      .def_static("load", &read_index)
      .def("__eq__", &BertGramIndex::operator==);

  m.def("build_index",
        [](const EmbeddedCorpus& c, std::size_t k, std::uint64_t seed, std::size_t max_iters, double tol,
           std::size_t threads) {
          py::gil_scoped_release release;
          return build_index(c, {k, seed, max_iters, tol, threads});
        },
        py::arg("corpus"), py::arg("k") = 100, py::arg("seed") = 0, py::arg("max_iters") = 25, py::arg("tol") = 1e-4,
        py::arg("threads") = 1);

  // rewards
  m.def("rbf", [](FloatArray u, FloatArray v, double gamma) {
    return rbf(std::span<const float>(u.data(), u.size()), std::span<const float>(v.data(), v.size()), gamma);
  }, py::arg("u"), py::arg("v"), py::arg("gamma") = kDefaultGamma);
  m.def("pairwise_reward", [](const EmbeddedSequence& a, const EmbeddedSequence& b, double g) {
    return breakdown(pairwise_reward(a, b, g));
  }, py::arg("a"), py::arg("b"), py::arg("gamma") = kDefaultGamma);
  m.def("exact_set_reward", [](const EmbeddedSequence& c, const EmbeddedCorpus& refs, double g) {
    const auto r = exact_set_reward(c, refs.sequences, g);
    auto d = breakdown(r.breakdown);
    d["ref_seq_id"] = r.ref_seq_id;
    return d;
  }, py::arg("candidate"), py::arg("references"), py::arg("gamma") = kDefaultGamma);
  m.def("indexed_reward", [](const EmbeddedSequence& s, const BertGramIndex& i, double g) {
    return breakdown(indexed_reward(s, i, g));
  }, py::arg("candidate"), py::arg("index"), py::arg("gamma") = kDefaultGamma);
  m.def("mixed_reward",
        [](const EmbeddedSequence& s, const BertGramIndex& i, const MaxCountTable& t, double g, double w) {
          return breakdown(mixed_reward(indexed_reward(s, i, g), shaped_increments(s.ids, t, BleuParams::uniform(t.n_max())), w));
        },
        py::arg("candidate"), py::arg("index"), py::arg("table"), py::arg("gamma") = kDefaultGamma,
        py::arg("mix_weight") = kDefaultMixWeight);

  // analysis
  m.def("pooled_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = pooled_t_test(a, b);
    return py::make_tuple(r.t, r.df, r.p);
  });
  m.def("diversity_metrics",
        [](const std::vector<std::vector<TokenId>>& batch, bool per_sequence) {
          const auto seqs = to_sequences(batch);
          const auto d = diversity_metrics(seqs, per_sequence ? NGramDiversity::kPerSequence : NGramDiversity::kBatchWide);
          py::dict out;
          out["rho"] = d.rho;
          out["rho2"] = d.rho_2;
          out["rho4"] = d.rho_4;
          out["mean_len"] = d.mean_length;
          return out;
        },
        py::arg("batch"), py::arg("per_sequence") = false);

  // training
  m.def("parse_train_config", [](const std::string& text) {
    const auto c = parse_train_config(text);
    py::dict d;
    d["beta"] = c.beta;
    d["alpha"] = c.alpha;
    d["gamma"] = c.gamma;
    d["mix_weight"] = c.mix_weight;
    d["batch_size"] = c.batch_size;
    d["steps"] = c.steps;
    d["pretrain_steps"] = c.pretrain_steps;
    d["learning_rate"] = c.learning_rate;
    d["seed"] = c.seed;
    return d;
  });
  m.def("train",
        [](const std::string& config_text, const std::vector<std::vector<TokenId>>& corpus, std::size_t vocab_size,
           const MaxCountTable& table, const BertGramIndex& index, std::uint64_t seed) {
          auto cfg = parse_train_config(config_text);
          cfg.seed = seed;
          std::vector<std::string> toks;
          for (std::size_t i = 0; i < vocab_size; ++i) toks.push_back(std::to_string(i));
          const Corpus c{Vocabulary(std::move(toks)), to_sequences(corpus)};
          const RewardModel model{&table, &index, BleuParams::uniform(table.n_max()),
                                  [emb = cfg.embedder()](std::span<const TokenId> ids) { return emb(ids); }};
          TrainResult result = [&] {
            py::gil_scoped_release release;
            return train(cfg, model, c);
          }();
          py::list records;
          for (const auto& r : result.trace.records) {
            py::dict d;
            d["step"] = r.step;
            d["reward"] = r.reward;
            d["bert_reward"] = r.bert_reward;
            d["ngram_reward"] = r.ngram_reward;
            d["entropy"] = r.entropy;
            d["mean_len"] = r.mean_length;
            d["rho"] = r.rho;
            d["rho2"] = r.rho_2;
            d["rho4"] = r.rho_4;
            records.append(d);
          }
          return records;
        },
        py::arg("config"), py::arg("corpus"), py::arg("vocab_size"), py::arg("table"), py::arg("index"), py::arg("seed"));
}
