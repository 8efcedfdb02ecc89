#include "bertgram/corpus.hpp"

#include <fstream>
#include <sstream>

#include "bertgram/error.hpp"
#include "binary_io.hpp"

namespace bertgram {

std::size_t NGramHash::operator()(std::span<const TokenId> ids) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ ids.size();
  for (TokenId id : ids) {
    h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
  }
  return static_cast<std::size_t>(h ^ (h >> 33));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() >= kPadId - 1) throw DataError("vocabulary too large");
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& tok = tokens_[i];
    if (tok.empty()) throw DataError("vocabulary: empty token at line " + std::to_string(i + 1));
    if (tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("vocabulary: token at line " + std::to_string(i + 1) + " contains whitespace");
    }
    if (!ids_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw DataError("vocabulary: duplicate token \"" + tok + "\" at line " + std::to_string(i + 1));
    }
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  if (tokens.empty()) throw DataError("vocabulary " + path.string() + " is empty");
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& tok : tokens_) text += tok + '\n';
  detail::write_file(path, text);
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) throw DataError("unknown token \"" + std::string(token) + "\"");
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  static const std::string pad = "<pad>";
  if (id == kPadId) return pad;
  if (id >= tokens_.size()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

double LengthDistribution::prob(std::size_t length) const {
  auto it = probs.find(length);
  return it == probs.end() ? 0.0 : it->second;
}

Corpus parse_corpus(std::string_view text, const Vocabulary& vocabulary) {
  Corpus corpus{vocabulary, {}};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    Sequence seq;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) {
        auto tok = line.substr(i, j - i);
        if (!vocabulary.contains(tok)) {
          throw DataError("line " + std::to_string(line_no) + ": unknown token \"" + std::string(tok) + "\"");
        }
        seq.ids.push_back(vocabulary.id_of(tok));
      }
      i = j;
    }
    if (seq.ids.empty()) throw DataError("line " + std::to_string(line_no) + ": empty sequence");
    corpus.sequences.push_back(std::move(seq));
  }
  if (corpus.sequences.empty()) throw DataError("empty corpus");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocabulary) {
  const std::string text = detail::read_file(path);
  try {
    return parse_corpus(text, vocabulary);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_sequence(const Sequence& seq, const Vocabulary& vocabulary) {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i) out += ' ';
    out += vocabulary.token(seq.ids[i]);
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string text;
  for (const auto& seq : corpus.sequences) text += format_sequence(seq, corpus.vocabulary) + '\n';
  detail::write_file(path, text);
}

std::string fuse_word_pieces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ' && text.substr(i + 1, 2) == "##") {
      i += 3;
      continue;
    }
    out += text[i++];
  }
  return out;
}

std::map<NGram, std::uint32_t> ngrams(std::span<const TokenId> ids, std::size_t n) {
  std::map<NGram, std::uint32_t> counts;
  if (n == 0 || n > ids.size()) return counts;
  for (std::size_t i = 0; i + n <= ids.size(); ++i) {
    ++counts[NGram(ids.begin() + i, ids.begin() + i + n)];
  }
  return counts;
}

LengthDistribution length_distribution(const Corpus& corpus) {
  if (corpus.sequences.empty()) throw DataError("length distribution of an empty corpus");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& s : corpus.sequences) ++counts[s.length()];
  LengthDistribution dist;
  const double n = static_cast<double>(corpus.sequences.size());
  for (auto [len, c] : counts) dist.probs[len] = static_cast<double>(c) / n;
  return dist;
}

}  // namespace bertgram
