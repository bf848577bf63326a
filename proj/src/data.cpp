#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace xltk {

bool any_positive(const LabelVector& labels) {
  return std::any_of(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; });
}

// --- CSV ---------------------------------------------------------------------

namespace {

// Splits RFC-4180 content into records of fields. Quoted fields may hold
// commas, doubled quotes and line breaks.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF handled on the '\n'
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quoted field at end of input");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<RawComment> read_comments(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto records = parse_records(buf.str());
  if (records.empty()) throw SchemaError("csv: missing header row");

  const auto& header = records.front();
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("csv: missing column '" + std::string(name) + "'");
  };
  const std::size_t id_col = column("id");
  const std::size_t text_col = column("comment_text");
  std::array<std::size_t, kNumLabels> label_cols{};
  for (std::size_t k = 0; k < kNumLabels; ++k) label_cols[k] = column(kLabelNames[k]);

  std::vector<RawComment> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw ParseError("csv row " + std::to_string(r) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(rec.size()));
    }
    RawComment row;
    row.id = rec[id_col];
    row.text = rec[text_col];
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const std::string& v = rec[label_cols[k]];
      if (v == "0") {
        row.labels[k] = 0;
      } else if (v == "1") {
        row.labels[k] = 1;
      } else {
        throw ParseError("csv row " + std::to_string(r) + ": label '" +
                         std::string(kLabelNames[k]) + "' has unparseable value '" + v + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RawComment> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open data file: " + path.string());
  return read_comments(in);
}

void write_comments(std::ostream& out, std::span<const RawComment> rows) {
  out << "id,comment_text";
  for (auto name : kLabelNames) out << ',' << name;
  out << '\n';
  for (const auto& r : rows) {
    out << quote_field(r.id) << ',' << quote_field(r.text);
    for (auto v : r.labels) out << ',' << static_cast<int>(v);
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, std::span<const RawComment> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write csv: " + path.string());
  write_comments(out, rows);
}

// --- normalization --------------------------------------------------------------

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (lower(s[i]) != prefix[i]) return false;
  return true;
}

bool looks_like_url(std::string_view tok) {
  // Leading punctuation such as "(" may precede the scheme.
  while (!tok.empty() && (tok.front() == '(' || tok.front() == '<' || tok.front() == '[' ||
                          tok.front() == '"' || tok.front() == '\'')) {
    tok.remove_prefix(1);
  }
  return starts_with_ci(tok, "http://") || starts_with_ci(tok, "https://") ||
         starts_with_ci(tok, "ftp://") || starts_with_ci(tok, "www.");
}

bool looks_like_email(std::string_view tok) {
  const auto at = tok.find('@');
  if (at == std::string_view::npos || at == 0) return false;
  const auto dot = tok.find('.', at + 1);
  return dot != std::string_view::npos && dot > at + 1 && dot + 1 < tok.size();
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    const std::string_view tok = text.substr(start, i - start);
    if (looks_like_url(tok) || looks_like_email(tok)) continue;

    std::string word;
    for (std::size_t j = 0; j < tok.size();) {
      if (tok.compare(j, kNumToken.size(), kNumToken) == 0) {
        word += kNumToken;
        j += kNumToken.size();
      } else if (is_digit(tok[j])) {
        while (j < tok.size() && is_digit(tok[j])) ++j;
        word += kNumToken;
      } else {
        word.push_back(lower(tok[j]));
        ++j;
      }
    }
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, kNumToken.size(), kNumToken) == 0) {
      flush();
      words.emplace_back(kNumToken);
      i += kNumToken.size();
    } else if (is_space(s[i])) {
      flush();
      ++i;
    } else if (is_ascii_punct(s[i])) {
      flush();
      words.emplace_back(1, s[i]);
      ++i;
    } else {
      cur.push_back(s[i]);
      ++i;
    }
  }
  flush();
  return words;
}

std::vector<char32_t> split_chars(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = i + len <= s.size();
    for (std::size_t j = 1; ok && j < len; ++j) {
      const auto b = static_cast<unsigned char>(s[i + j]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// --- vocabularies -------------------------------------------------------------

Vocabulary::Vocabulary() {
  insert("<PAD>");
  insert("<UNK>");
  insert(std::string(kNumToken));
}

void Vocabulary::insert(std::string token) {
  index_.emplace(token, static_cast<std::uint32_t>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> documents,
                             std::size_t min_frequency) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : documents)
    for (const auto& tok : doc) ++counts[tok];
  Vocabulary vocab;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_frequency && !vocab.find(tok)) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [tok, n] : kept) vocab.insert(std::move(tok));
  return vocab;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::id(std::string_view token) const {
  if (token == kNumToken) return kNum;
  auto it = index_.find(std::string(token));
  if (it == index_.end() || it->second < kReserved) return kUnk;
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary: " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < kReserved) continue;
    if (line.empty()) throw ParseError("vocabulary line " + std::to_string(n) + " is empty");
    if (vocab.find(line)) throw ParseError("vocabulary line " + std::to_string(n) + ": duplicate token");
    vocab.insert(line);
  }
  if (n < kReserved) throw ParseError("vocabulary file is missing reserved entries: " + path.string());
  return vocab;
}

CharVocabulary CharVocabulary::build(std::span<const std::string> texts, std::size_t min_frequency) {
  std::map<char32_t, std::size_t> counts;
  for (const auto& t : texts)
    for (char32_t c : split_chars(t)) ++counts[c];
  std::vector<std::pair<char32_t, std::size_t>> kept;
  for (auto [c, n] : counts)
    if (n >= min_frequency) kept.emplace_back(c, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  CharVocabulary v;
  for (auto [c, n] : kept) {
    v.index_.emplace(c, static_cast<std::uint32_t>(kReserved + v.chars_.size()));
    v.chars_.push_back(c);
  }
  return v;
}

std::uint32_t CharVocabulary::id(char32_t c) const {
  auto it = index_.find(c);
  return it == index_.end() ? kUnk : it->second;
}

void CharVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write char vocabulary: " + path.string());
  for (char32_t c : chars_) out << static_cast<std::uint32_t>(c) << '\n';
}

CharVocabulary CharVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open char vocabulary: " + path.string());
  CharVocabulary v;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    try {
      std::size_t used = 0;
      const auto cp = static_cast<char32_t>(std::stoul(line, &used));
      if (used != line.size()) throw std::invalid_argument("trailing");
      v.index_.emplace(cp, static_cast<std::uint32_t>(kReserved + v.chars_.size()));
      v.chars_.push_back(cp);
    } catch (const std::logic_error&) {
      throw ParseError("char vocabulary line " + std::to_string(n) + ": not a code point");
    }
  }
  return v;
}

// --- tokenization ---------------------------------------------------------------

TokenizedSample tokenize(std::string_view normalized, const Vocabulary& vocab,
                         const CharVocabulary& chars, const TokenizerLimits& limits) {
  TokenizedSample s;
  s.word_ids.assign(limits.max_tokens, Vocabulary::kPad);
  s.char_ids.assign(limits.max_chars, CharVocabulary::kPad);
  const auto words = split_words(normalized);
  s.word_len = std::min(words.size(), limits.max_tokens);
  for (std::size_t i = 0; i < s.word_len; ++i) s.word_ids[i] = vocab.id(words[i]);
  const auto cps = split_chars(normalized);
  s.char_len = std::min(cps.size(), limits.max_chars);
  for (std::size_t i = 0; i < s.char_len; ++i) s.char_ids[i] = chars.id(cps[i]);
  return s;
}

// --- stratified split -----------------------------------------------------------

SplitIndices stratified_split(std::span<const LabelVector> labels, const SplitSpec& spec) {
  if (labels.size() < kMinSplitCorpus) {
    throw SizeError("stratified split needs at least " + std::to_string(kMinSplitCorpus) +
                    " samples, got " + std::to_string(labels.size()));
  }
  double total = 0.0;
  for (double f : spec.fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  auto combo = [](const LabelVector& l) {
    int key = 0;
    for (std::size_t k = 0; k < kNumLabels; ++k) key |= (l[k] ? 1 : 0) << k;
    return key;
  };
  constexpr int kPooledKey = 1 << kNumLabels;
  std::map<int, std::size_t> counts;
  for (const auto& l : labels) ++counts[combo(l)];
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int key = combo(labels[i]);
    if (key != 0 && counts[key] < kMinStratumSize) key = kPooledKey;
    strata[key].push_back(i);
  }

  // Walk the strata in key order and hand each position to the split that is
  // furthest behind its target share. Per-stratum shares then track the
  // fractions to within one sample.
  Rng rng(spec.seed);
  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> dest{&out.train, &out.valid, &out.test};
  std::array<double, 3> assigned{0, 0, 0};
  double position = 0.0;
  for (auto& [key, members] : strata) {
    rng.shuffle(members);
    for (std::size_t idx : members) {
      position += 1.0;
      std::size_t pick = 0;
      double best = -1e300;
      for (std::size_t s = 0; s < 3; ++s) {
        const double deficit = spec.fractions[s] * position - assigned[s];
        if (deficit > best + 1e-12) {
          best = deficit;
          pick = s;
        }
      }
      assigned[pick] += 1.0;
      dest[pick]->push_back(idx);
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

// --- token cache ----------------------------------------------------------------

void save_token_cache(const std::filesystem::path& path, std::span<const TokenizedSample> samples,
                      const TokenizerLimits& limits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write token cache: " + path.string());
  binio::put_magic(out, "XLTK");
  binio::put<std::uint16_t>(out, kTokenCacheVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(limits.max_tokens));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(limits.max_chars));
  binio::put<std::uint64_t>(out, samples.size());
  for (const auto& s : samples) {
    if (s.word_ids.size() != limits.max_tokens || s.char_ids.size() != limits.max_chars) {
      throw DimensionError("token cache: sample padding does not match limits");
    }
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.word_len));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.char_len));
    for (auto l : s.labels) binio::put<std::uint8_t>(out, l);
    for (auto id : s.word_ids) binio::put<std::uint32_t>(out, id);
    for (auto id : s.char_ids) binio::put<std::uint32_t>(out, id);
  }
  if (!out) throw IoError("failed writing token cache: " + path.string());
}

std::vector<TokenizedSample> load_token_cache(const std::filesystem::path& path,
                                              TokenizerLimits* limits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open token cache: " + path.string());
  binio::expect_magic(in, "XLTK", "token cache");
  const auto version = binio::get<std::uint16_t>(in);
  if (version != kTokenCacheVersion) {
    throw ParseError("token cache: unsupported version " + std::to_string(version));
  }
  TokenizerLimits lim;
  lim.max_tokens = binio::get<std::uint32_t>(in);
  lim.max_chars = binio::get<std::uint32_t>(in);
  const auto count = binio::get<std::uint64_t>(in);
  std::vector<TokenizedSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    TokenizedSample s;
    s.word_len = binio::get<std::uint32_t>(in);
    s.char_len = binio::get<std::uint32_t>(in);
    if (s.word_len > lim.max_tokens || s.char_len > lim.max_chars) {
      throw ParseError("token cache: sample " + std::to_string(i) + " length exceeds padding");
    }
    for (auto& l : s.labels) l = binio::get<std::uint8_t>(in);
    s.word_ids.resize(lim.max_tokens);
    s.char_ids.resize(lim.max_chars);
    for (auto& id : s.word_ids) id = binio::get<std::uint32_t>(in);
    for (auto& id : s.char_ids) id = binio::get<std::uint32_t>(in);
    samples.push_back(std::move(s));
  }
  if (limits) *limits = lim;
  return samples;
}

}  // namespace xltk
