#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bertgram {

using TokenId = std::uint32_t;

/// Reserved padding id. Never produced by vocabulary or corpus loading.
inline constexpr TokenId kPadId = std::numeric_limits<TokenId>::max();

using NGram = std::vector<TokenId>;

struct NGramHash {
  std::size_t operator()(std::span<const TokenId> ids) const noexcept;
  std::size_t operator()(const NGram& ids) const noexcept {
    return (*this)(std::span<const TokenId>(ids));
  }
};

/// Dense token <-> id mapping. Ids are line numbers of the vocabulary file.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// Throws DataError for unknown tokens.
  TokenId id_of(std::string_view token) const;
  /// Returns "<pad>" for kPadId; throws DataError for other out-of-range ids.
  const std::string& token(TokenId id) const;
  TokenId pad_id() const { return kPadId; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct Sequence {
  std::vector<TokenId> ids;

  std::size_t length() const { return ids.size(); }
  bool operator==(const Sequence&) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Sequence> sequences;

  std::size_t size() const { return sequences.size(); }
  std::size_t token_count() const;
};

struct LengthDistribution {
  std::map<std::size_t, double> probs;

  std::size_t max_length() const { return probs.empty() ? 0 : probs.rbegin()->first; }
  double prob(std::size_t length) const;
};

/// One whitespace-separated sequence per line. Unknown tokens, blank lines and
/// empty files are errors.
Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocabulary);
Corpus parse_corpus(std::string_view text, const Vocabulary& vocabulary);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string format_sequence(const Sequence& seq, const Vocabulary& vocabulary);

/// Joins word pieces for display: "##" continuation pieces lose the marker and
/// the preceding space.
std::string fuse_word_pieces(std::string_view text);

/// Counts of every contiguous n-gram. n > T gives an empty map.
std::map<NGram, std::uint32_t> ngrams(std::span<const TokenId> ids, std::size_t n);

LengthDistribution length_distribution(const Corpus& corpus);

}  // namespace bertgram
