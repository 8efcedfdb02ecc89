#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>
#include <fstream>
#include <unistd.h>

#include "bertgram/corpus.hpp"
#include "bertgram/embedding_store.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bertgram_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<bertgram::Sequence> random_sequences(std::mt19937_64& rng, std::size_t count, std::size_t vocab,
                                                        std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<bertgram::TokenId> tok(0, static_cast<bertgram::TokenId>(vocab - 1));
  std::vector<bertgram::Sequence> out(count);
  for (auto& s : out) {
    s.ids.resize(len(rng));
    for (auto& id : s.ids) id = tok(rng);
  }
  return out;
}

inline bertgram::Vocabulary numbered_vocab(std::size_t n) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(i));
  return bertgram::Vocabulary(std::move(toks));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace testing

