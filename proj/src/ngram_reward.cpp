#include "bertgram/ngram_reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bertgram/error.hpp"
#include "binary_io.hpp"

namespace bertgram {
namespace {

constexpr char kMagic[] = "NGTB";
constexpr std::uint32_t kVersion = 1;

double snap_to_grid(double v) { return std::ldexp(std::round(std::ldexp(v, 52)), -52); }

}  // namespace

MaxCountTable::MaxCountTable(std::size_t n_max) : orders_(n_max) {
  if (n_max == 0) throw InvalidArgument("n_max must be >= 1");
}

std::uint32_t MaxCountTable::count(std::span<const TokenId> ngram) const {
  const std::size_t n = ngram.size();
  if (n == 0 || n > orders_.size()) return 0;
  const auto& map = orders_[n - 1];
  auto it = map.find(NGram(ngram.begin(), ngram.end()));
  return it == map.end() ? 0 : it->second;
}

const MaxCountTable::Map& MaxCountTable::order(std::size_t n) const {
  if (n == 0 || n > orders_.size()) {
    throw InvalidArgument("order " + std::to_string(n) + " outside 1.." + std::to_string(orders_.size()));
  }
  return orders_[n - 1];
}

void MaxCountTable::raise(const NGram& ngram, std::uint32_t count) {
  if (ngram.empty() || ngram.size() > orders_.size()) {
    throw InvalidArgument("n-gram order " + std::to_string(ngram.size()) + " outside table");
  }
  if (count == 0) return;
  auto& slot = orders_[ngram.size() - 1][ngram];
  slot = std::max(slot, count);
}

std::size_t MaxCountTable::entry_count() const {
  std::size_t n = 0;
  for (const auto& m : orders_) n += m.size();
  return n;
}

BleuParams BleuParams::uniform(std::size_t n_max, bool smoothing) {
  if (n_max == 0) throw InvalidArgument("n_max must be >= 1");
  return {std::vector<double>(n_max, 1.0 / static_cast<double>(n_max)), smoothing};
}

void BleuParams::validate() const {
  if (weights.empty()) throw InvalidArgument("BLEU weights are empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("BLEU weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("BLEU weights must sum to 1");
}

MaxCountTable build_max_count_table(std::span<const Sequence> references, std::size_t n_max) {
  if (references.empty()) throw DataError("cannot build an n-gram table from no references");
  MaxCountTable table(n_max);
  for (const auto& ref : references) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (const auto& [gram, c] : ngrams(ref.ids, n)) table.raise(gram, c);
    }
  }
  return table;
}

MaxCountTable build_max_count_table(const Corpus& references, std::size_t n_max) {
  return build_max_count_table(references.sequences, n_max);
}

PrecisionCounts modified_precision(std::span<const TokenId> candidate, const MaxCountTable& table,
                                   std::size_t n) {
  if (n == 0 || n > table.n_max()) {
    throw InvalidArgument("order " + std::to_string(n) + " outside 1.." + std::to_string(table.n_max()));
  }
  PrecisionCounts out;
  if (candidate.size() < n) return out;
  out.total = candidate.size() - n + 1;
  for (const auto& [gram, c] : ngrams(candidate, n)) out.matched += std::min(c, table.count(gram));
  return out;
}

double bleu_from_counts(std::span<const PrecisionCounts> counts, const BleuParams& params) {
  if (counts.size() != params.weights.size()) {
    throw InvalidArgument("BLEU: " + std::to_string(counts.size()) + " orders but " +
                          std::to_string(params.weights.size()) + " weights");
  }
  std::size_t active = 0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].total > 0) {
      ++active;
      weight_sum += params.weights[i];
    }
  }
  if (active == 0) throw InvalidArgument("BLEU: candidate shorter than every order");
  const bool uniform = weight_sum <= 0.0;

  double log_score = 0.0;
  int smoothing_step = 1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto [matched, total] = counts[i];
    if (total == 0) continue;
    const double w = uniform ? 1.0 / static_cast<double>(active) : params.weights[i] / weight_sum;
    double p;
    if (matched == 0) {
      if (!params.smoothing) {
        if (w > 0.0) return 0.0;
        continue;
      }
      p = 1.0 / (std::ldexp(1.0, smoothing_step) * static_cast<double>(total));
      ++smoothing_step;
    } else {
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    if (w > 0.0) log_score += w * std::log(p);
  }
  return snap_to_grid(std::exp(log_score));
}

double bleu(std::span<const TokenId> candidate, const MaxCountTable& table, const BleuParams& params) {
  if (candidate.empty()) return 0.0;  // same value as the empty prefix
  std::vector<PrecisionCounts> counts;
  counts.reserve(table.n_max());
  for (std::size_t n = 1; n <= table.n_max(); ++n) counts.push_back(modified_precision(candidate, table, n));
  return bleu_from_counts(counts, params);
}

std::vector<double> shaped_increments(std::span<const TokenId> candidate, const MaxCountTable& table,
                                      const BleuParams& params) {
  if (candidate.empty()) return {};
  const std::size_t n_max = table.n_max();
  std::vector<PrecisionCounts> counts(n_max);
  std::vector<std::unordered_map<NGram, std::uint32_t, NGramHash>> seen(n_max);

  // Extending the prefix by one token adds exactly one n-gram per order; its
  // clipped contribution grows iff its running count stays within the max count.
  std::vector<double> increments;
  increments.reserve(candidate.size());
  double previous = 0.0;
  for (std::size_t t = 1; t <= candidate.size(); ++t) {
    for (std::size_t n = 1; n <= std::min(n_max, t); ++n) {
      auto gram = candidate.subspan(t - n, n);
      const std::uint32_t c = ++seen[n - 1][NGram(gram.begin(), gram.end())];
      if (c <= table.count(gram)) ++counts[n - 1].matched;
      ++counts[n - 1].total;
    }
    const double score = bleu_from_counts(counts, params);
    increments.push_back(score - previous);
    previous = score;
  }
  return increments;
}

std::string serialize_table(const MaxCountTable& table) {
  detail::ByteWriter w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(table.n_max()));
  for (std::size_t n = 1; n <= table.n_max(); ++n) {
    const auto& map = table.order(n);
    std::vector<const MaxCountTable::Map::value_type*> entries;
    entries.reserve(map.size());
    for (const auto& kv : map) entries.push_back(&kv);
    std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });
    w.u64(entries.size());
    for (const auto* e : entries) {
      for (TokenId id : e->first) w.u32(id);
      w.u32(e->second);
    }
  }
  return std::move(w.bytes());
}

MaxCountTable deserialize_table(std::string_view bytes) {
  detail::ByteReader r(bytes, "NGTB");
  r.expect_magic(kMagic);
  const auto version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const auto n_max = r.u32("n_max");
  if (n_max == 0) r.fail("n_max = 0");
  MaxCountTable table(n_max);
  for (std::uint32_t n = 1; n <= n_max; ++n) {
    const auto entries = r.u64("entry count");
    if (entries > r.remaining() / (4ULL * (n + 1))) r.fail("entry count exceeds file size");
    for (std::uint64_t e = 0; e < entries; ++e) {
      NGram gram(n);
      for (auto& id : gram) id = r.u32("n-gram id");
      const auto count = r.u32("count");
      if (count == 0) r.fail("zero count");
      if (table.count(gram) != 0) r.fail("duplicate n-gram");
      table.raise(gram, count);
    }
  }
  r.expect_end();
  return table;
}

void write_table(const MaxCountTable& table, const std::filesystem::path& path) {
  detail::write_file(path, serialize_table(table));
}

MaxCountTable read_table(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return deserialize_table(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace bertgram
