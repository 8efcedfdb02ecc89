#include "bertgram/embedding_store.hpp"

#include <cmath>
#include <random>
#include <unordered_set>

#include "bertgram/error.hpp"
#include "binary_io.hpp"

namespace bertgram {
namespace {

constexpr char kMagic[] = "EMBD";
constexpr std::uint32_t kVersion = 1;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void EmbeddedSequence::validate() const {
  if (vectors.size() != ids.size() * dim) {
    throw DataError("sequence " + std::to_string(seq_id) + ": " + std::to_string(vectors.size()) +
                    " floats for T=" + std::to_string(ids.size()) + ", d=" + std::to_string(dim));
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!std::isfinite(vectors[i])) {
      throw DataError("sequence " + std::to_string(seq_id) + ": non-finite value at position " +
                      std::to_string(i / dim));
    }
  }
}

std::size_t EmbeddedCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

void EmbeddedCorpus::validate() const {
  std::unordered_set<std::uint64_t> ids;
  for (const auto& s : sequences) {
    if (s.dim != dim) {
      throw DataError("sequence " + std::to_string(s.seq_id) + " has d=" + std::to_string(s.dim) +
                      ", corpus has d=" + std::to_string(dim));
    }
    if (!ids.insert(s.seq_id).second) throw DataError("duplicate seq_id " + std::to_string(s.seq_id));
    s.validate();
  }
}

std::string serialize_dump(const EmbeddedCorpus& corpus) {
  corpus.validate();
  detail::ByteWriter w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(corpus.dim);
  w.u64(corpus.sequences.size());
  for (const auto& s : corpus.sequences) {
    w.u64(s.seq_id);
    w.u32(static_cast<std::uint32_t>(s.ids.size()));
    for (TokenId id : s.ids) w.u32(id);
    for (float v : s.vectors) w.f32(v);
  }
  return std::move(w.bytes());
}

EmbeddedCorpus deserialize_dump(std::string_view bytes) {
  detail::ByteReader r(bytes, "EMBD");
  r.expect_magic(kMagic);
  const auto version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  EmbeddedCorpus corpus;
  corpus.dim = r.u32("dimension");
  const auto count = r.u64("sequence count");
  // Every sequence needs at least its 12-byte header.
  if (count > r.remaining() / 12) r.fail("sequence count exceeds file size");
  corpus.sequences.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddedSequence s;
    s.dim = corpus.dim;
    s.seq_id = r.u64("seq_id");
    const auto length = r.u32("sequence length");
    if (length > r.remaining() / 4) r.fail("truncated file reading token ids");
    s.ids.resize(length);
    for (auto& id : s.ids) id = r.u32("token id");
    const std::uint64_t floats = static_cast<std::uint64_t>(length) * corpus.dim;
    if (floats > r.remaining() / 4) r.fail("truncated file reading vectors");
    s.vectors.resize(floats);
    for (auto& v : s.vectors) {
      const std::size_t at = r.offset();
      v = r.f32("vector");
      if (!std::isfinite(v)) {
        throw FormatError("EMBD: non-finite float in sequence " + std::to_string(s.seq_id) +
                          " at offset " + std::to_string(at));
      }
    }
    if (!seen.insert(s.seq_id).second) r.fail("duplicate seq_id " + std::to_string(s.seq_id));
    corpus.sequences.push_back(std::move(s));
  }
  r.expect_end();
  return corpus;
}

void write_dump(const EmbeddedCorpus& corpus, const std::filesystem::path& path) {
  detail::write_file(path, serialize_dump(corpus));
}

EmbeddedCorpus read_dump(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return deserialize_dump(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

EmbeddedSequence SyntheticEmbedder::operator()(std::span<const TokenId> ids, std::uint64_t seq_id) const {
  if (dim < 2) throw InvalidArgument("synthetic embedding dimension must be >= 2");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("synthetic embedding scale must be > 0");
  EmbeddedSequence out;
  out.seq_id = seq_id;
  out.dim = dim;
  out.ids.assign(ids.begin(), ids.end());
  out.vectors.resize(ids.size() * dim);

  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  const auto c = static_cast<std::ptrdiff_t>(window);
  std::vector<double> draw(dim);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(window)));
    for (std::ptrdiff_t j = t - c; j <= t + c; ++j) {
      const std::uint64_t slot = (j < 0 || j >= n) ? 0 : ((1ULL << 32) | ids[static_cast<std::size_t>(j)]);
      h = mix64(h ^ slot);
    }
    std::mt19937_64 gen(h);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& x : draw) {
        x = 2.0 * std::ldexp(static_cast<double>(gen() >> 11), -53) - 1.0;
        norm2 += x * x;
      }
    } while (norm2 == 0.0);
    const double f = scale / std::sqrt(norm2);
    auto row = out.row(static_cast<std::size_t>(t));
    for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<float>(draw[k] * f);
  }
  return out;
}

EmbeddedCorpus SyntheticEmbedder::embed(std::span<const Sequence> sequences) const {
  EmbeddedCorpus corpus;
  corpus.dim = dim;
  corpus.sequences.reserve(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) corpus.sequences.push_back((*this)(sequences[i].ids, i));
  return corpus;
}

EmbeddedSequence synthetic_embed(std::span<const TokenId> ids, std::size_t window, std::uint32_t dim,
                                 std::uint64_t seed, double scale) {
  return SyntheticEmbedder{window, dim, seed, scale}(ids);
}

}  // namespace bertgram
