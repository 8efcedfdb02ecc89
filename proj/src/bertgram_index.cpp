#include "bertgram/bertgram_index.hpp"

#include <cmath>
#include <limits>

#include "bertgram/error.hpp"
#include "bertgram/parallel.hpp"
#include "binary_io.hpp"

namespace bertgram {
namespace {

constexpr char kMagic[] = "BGIX";
constexpr std::uint32_t kVersion = 1;

std::uint64_t type_seed(std::uint64_t seed, TokenId token) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(token) + 1));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TypeCentroids cluster_partition(const TypePartition& part, std::size_t dim, const IndexOptions& options) {
  KMeansOptions km{options.k, type_seed(options.seed, part.token), options.max_iters, options.tol};
  auto result = kmeans(part.rows, dim, km);
  const std::size_t k = result.k();

  TypeCentroids out;
  out.centroids = std::move(result.centroids);
  out.exemplars.resize(k);
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < part.size(); ++i) {
    const auto c = result.assignment[i];
    std::span<const float> row(part.rows.data() + i * dim, dim);
    const double d = squared_distance(row, std::span<const float>(out.centroids.data() + c * dim, dim));
    if (d < best[c]) {
      best[c] = d;
      out.exemplars[c] = part.occurrences[i];
    }
  }
  return out;
}

}  // namespace

const TypeCentroids* BertGramIndex::find(TokenId token) const {
  auto it = types_.find(token);
  return it == types_.end() ? nullptr : &it->second;
}

std::span<const float> BertGramIndex::centroid(TokenId token, std::size_t k) const {
  const auto* entry = find(token);
  if (!entry || k >= entry->k()) throw InvalidArgument("no centroid " + std::to_string(k) + " for token " + std::to_string(token));
  return {entry->centroids.data() + k * dim_, dim_};
}

void BertGramIndex::insert(TokenId token, TypeCentroids centroids) {
  if (centroids.k() == 0) throw InvalidArgument("token " + std::to_string(token) + " has no centroids");
  if (centroids.centroids.size() != centroids.k() * dim_) {
    throw InvalidArgument("token " + std::to_string(token) + ": centroid block does not match d=" + std::to_string(dim_));
  }
  if (centroids.k() > k_max_) throw InvalidArgument("token " + std::to_string(token) + " exceeds K_max");
  types_[token] = std::move(centroids);
}

std::optional<CentroidHit> BertGramIndex::nearest_centroid(TokenId token, std::span<const float> v) const {
  if (v.size() != dim_) {
    throw DataError("query has dimension " + std::to_string(v.size()) + ", index has " + std::to_string(dim_));
  }
  const auto* entry = find(token);
  if (!entry) return std::nullopt;
  CentroidHit hit{0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < entry->k(); ++k) {
    const double d = squared_distance(v, std::span<const float>(entry->centroids.data() + k * dim_, dim_));
    if (d < hit.squared_distance) hit = {k, d};
  }
  return hit;
}

std::map<TokenId, TypePartition> partition_by_type(const EmbeddedCorpus& corpus) {
  std::map<TokenId, TypePartition> parts;
  for (const auto& seq : corpus.sequences) {
    if (seq.dim != corpus.dim) throw DataError("sequence " + std::to_string(seq.seq_id) + " has the wrong dimension");
    for (std::size_t t = 0; t < seq.length(); ++t) {
      auto& part = parts[seq.ids[t]];
      part.token = seq.ids[t];
      auto row = seq.row(t);
      part.rows.insert(part.rows.end(), row.begin(), row.end());
      part.occurrences.push_back({seq.seq_id, static_cast<std::uint32_t>(t)});
    }
  }
  return parts;
}

BertGramIndex build_index(const EmbeddedCorpus& corpus, const IndexOptions& options) {
  if (options.k == 0) throw InvalidArgument("K must be >= 1");
  if (options.k > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("K too large");
  auto parts = partition_by_type(corpus);

  std::vector<const TypePartition*> jobs;
  jobs.reserve(parts.size());
  for (const auto& [token, part] : parts) jobs.push_back(&part);

  std::vector<TypeCentroids> results(jobs.size());
  parallel_for(jobs.size(), options.threads,
               [&](std::size_t i) { results[i] = cluster_partition(*jobs[i], corpus.dim, options); });

  BertGramIndex index(corpus.dim, static_cast<std::uint32_t>(options.k));
  for (std::size_t i = 0; i < jobs.size(); ++i) index.insert(jobs[i]->token, std::move(results[i]));
  return index;
}

std::string serialize_index(const BertGramIndex& index) {
  detail::ByteWriter w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(index.dim());
  w.u32(index.k_max());
  w.u32(static_cast<std::uint32_t>(index.type_count()));
  for (const auto& [token, entry] : index.types()) {
    w.u32(token);
    w.u32(static_cast<std::uint32_t>(entry.k()));
    for (std::size_t k = 0; k < entry.k(); ++k) {
      for (std::size_t j = 0; j < index.dim(); ++j) w.f32(entry.centroids[k * index.dim() + j]);
      w.u64(entry.exemplars[k].seq_id);
      w.u32(entry.exemplars[k].position);
    }
  }
  return std::move(w.bytes());
}

BertGramIndex deserialize_index(std::string_view bytes) {
  detail::ByteReader r(bytes, "BGIX");
  r.expect_magic(kMagic);
  const auto version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const auto dim = r.u32("dimension");
  const auto k_max = r.u32("K_max");
  const auto num_types = r.u32("type count");
  BertGramIndex index(dim, k_max);
  std::optional<TokenId> previous;
  for (std::uint32_t i = 0; i < num_types; ++i) {
    const auto token = r.u32("token id");
    if (previous && token <= *previous) r.fail("token ids not strictly ascending");
    previous = token;
    const auto k = r.u32("k_w");
    if (k == 0) r.fail("type with no centroids");
    if (k > k_max) r.fail("k_w exceeds K_max");
    const std::uint64_t record = 4ULL * dim + 12;
    if (k > r.remaining() / record) r.fail("truncated file reading centroids");
    TypeCentroids entry;
    entry.centroids.resize(static_cast<std::size_t>(k) * dim);
    entry.exemplars.resize(k);
    for (std::uint32_t c = 0; c < k; ++c) {
      for (std::uint32_t j = 0; j < dim; ++j) {
        const float v = r.f32("centroid");
        if (!std::isfinite(v)) r.fail("non-finite centroid value");
        entry.centroids[static_cast<std::size_t>(c) * dim + j] = v;
      }
      entry.exemplars[c].seq_id = r.u64("exemplar seq_id");
      entry.exemplars[c].position = r.u32("exemplar position");
    }
    index.insert(token, std::move(entry));
  }
  r.expect_end();
  return index;
}

void write_index(const BertGramIndex& index, const std::filesystem::path& path) {
  detail::write_file(path, serialize_index(index));
}

BertGramIndex read_index(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return deserialize_index(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace bertgram
