#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xltk {

inline constexpr std::size_t kNumLabels = 6;

// Fixed category order used by every label vector, file and report.
inline constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "toxic", "severe_toxic", "obscene", "threat", "insult", "identity_hate"};

using LabelVector = std::array<std::uint8_t, kNumLabels>;

bool any_positive(const LabelVector& labels);

struct RawComment {
  std::string id;
  std::string text;
  LabelVector labels{};
};

// RFC-4180 reader. The header must name id, comment_text and the six label
// columns (any order, extra columns ignored).
std::vector<RawComment> read_comments(std::istream& in);
std::vector<RawComment> load_csv(const std::filesystem::path& path);
void write_comments(std::ostream& out, std::span<const RawComment> rows);
void save_csv(const std::filesystem::path& path, std::span<const RawComment> rows);

// Lowercases, drops URLs and email addresses, replaces digit runs with
// <NUM>, and collapses whitespace.
std::string normalize(std::string_view text);

inline constexpr std::string_view kNumToken = "<NUM>";

// Whitespace and punctuation word split of normalized text. Each ASCII
// punctuation character becomes its own token; <NUM> stays whole.
std::vector<std::string> split_words(std::string_view normalized);

// UTF-8 decode; malformed bytes map to U+FFFD.
std::vector<char32_t> split_chars(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;
  static constexpr std::uint32_t kNum = 2;
  static constexpr std::uint32_t kReserved = 3;

  Vocabulary();

  // Tokens with count >= min_frequency, ordered by descending count and then
  // bytewise. The reserved spellings are never assigned a corpus index.
  static Vocabulary build(std::span<const std::vector<std::string>> documents,
                          std::size_t min_frequency);

  std::uint32_t id(std::string_view token) const;
  std::optional<std::uint32_t> find(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  // One token per line, line number = index.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void insert(std::string token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class CharVocabulary {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;
  static constexpr std::uint32_t kReserved = 2;

  CharVocabulary() = default;
  static CharVocabulary build(std::span<const std::string> texts, std::size_t min_frequency);

  std::uint32_t id(char32_t c) const;
  std::size_t size() const { return kReserved + chars_.size(); }

  // One decimal code point per line, starting at index kReserved.
  void save(const std::filesystem::path& path) const;
  static CharVocabulary load(const std::filesystem::path& path);

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, std::uint32_t> index_;
};

struct TokenizerLimits {
  std::size_t max_tokens = 300;
  std::size_t max_chars = 800;
};

struct TokenizedSample {
  std::vector<std::uint32_t> word_ids;  // length max_tokens, post-padded
  std::vector<std::uint32_t> char_ids;  // length max_chars, post-padded
  std::size_t word_len = 0;
  std::size_t char_len = 0;
  LabelVector labels{};

  bool operator==(const TokenizedSample&) const = default;
};

TokenizedSample tokenize(std::string_view normalized, const Vocabulary& vocab,
                         const CharVocabulary& chars, const TokenizerLimits& limits = {});

struct SplitSpec {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 42;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Label combinations seen fewer than this many times are pooled into a
// single any-toxic stratum.
inline constexpr std::size_t kMinStratumSize = 10;
inline constexpr std::size_t kMinSplitCorpus = 10;

// Stratified partition on the exact 6-bit label combination.
SplitIndices stratified_split(std::span<const LabelVector> labels, const SplitSpec& spec);

// Versioned little-endian cache of tokenized samples (magic "XLTK").
inline constexpr std::uint16_t kTokenCacheVersion = 1;
void save_token_cache(const std::filesystem::path& path, std::span<const TokenizedSample> samples,
                      const TokenizerLimits& limits);
std::vector<TokenizedSample> load_token_cache(const std::filesystem::path& path,
                                              TokenizerLimits* limits = nullptr);

}  // namespace xltk
