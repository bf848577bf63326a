#include "synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "errors.hpp"
#include "rng.hpp"

namespace xltk {

namespace {

struct Lexicon {
  std::vector<std::string> noise;
  std::array<std::vector<std::string>, kNumLabels> indicators;
};

std::string random_word(Rng& rng, std::size_t lo, std::size_t hi) {
  const std::size_t len = lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  std::string w(len, 'a');
  for (auto& c : w) c = static_cast<char>('a' + rng.below(26));
  return w;
}

Lexicon make_lexicon(const SyntheticSpec& spec) {
  Rng rng(Rng::derive(spec.seed, 0x1e));
  Lexicon lex;
  std::unordered_set<std::string> used;
  auto fresh = [&](std::size_t lo, std::size_t hi) {
    for (;;) {
      std::string w = random_word(rng, lo, hi);
      if (used.insert(w).second) return w;
    }
  };
  for (std::size_t k = 0; k < kNumLabels; ++k)
    for (std::size_t i = 0; i < spec.indicators_per_label; ++i) lex.indicators[k].push_back(fresh(5, 8));
  for (std::size_t i = 0; i < spec.noise_words; ++i) lex.noise.push_back(fresh(3, 8));
  return lex;
}

}  // namespace

std::vector<std::string> indicator_words(const SyntheticSpec& spec, std::size_t category) {
  if (category >= kNumLabels) throw IndexError("category out of range");
  return make_lexicon(spec).indicators[category];
}

std::vector<RawComment> synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.samples == 0) throw ConfigError("synthetic corpus needs at least one sample");
  if (spec.noise_words == 0 || spec.indicators_per_label == 0) {
    throw ConfigError("synthetic lexicon sizes must be positive");
  }
  if (spec.min_words == 0 || spec.max_words < spec.min_words) {
    throw ConfigError("synthetic comment length range is empty");
  }
  const Lexicon lex = make_lexicon(spec);
  Rng rng(Rng::derive(spec.seed, 0x2f));

  std::vector<RawComment> rows(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%06zu", i);
    rows[i].id = id;
  }
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double p = spec.prevalence[k];
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("prevalence must be in [0, 1]");
    std::size_t count = static_cast<std::size_t>(std::llround(p * static_cast<double>(spec.samples)));
    if (p > 0.0) count = std::max<std::size_t>(count, 1);
    std::vector<std::size_t> order(spec.samples);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t j = 0; j < count; ++j) rows[order[j]].labels[k] = 1;
  }

  static constexpr const char* kEndings[] = {".", "!", "?", "", ""};
  for (auto& row : rows) {
    const std::size_t n_words =
        spec.min_words + static_cast<std::size_t>(rng.below(spec.max_words - spec.min_words + 1));
    std::vector<std::string> words;
    for (std::size_t w = 0; w < n_words; ++w) words.push_back(lex.noise[rng.below(lex.noise.size())]);
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      if (!row.labels[k]) continue;
      const std::size_t plant = 1 + static_cast<std::size_t>(rng.below(2));
      for (std::size_t j = 0; j < plant; ++j) {
        const auto& pool = lex.indicators[k];
        const std::size_t pos = static_cast<std::size_t>(rng.below(words.size() + 1));
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), pool[rng.below(pool.size())]);
      }
    }
    if (rng.bernoulli(0.3)) {
      const std::size_t pos = static_cast<std::size_t>(rng.below(words.size() + 1));
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), std::to_string(rng.below(1000)));
    }
    std::string text;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w) text += ' ';
      text += words[w];
    }
    text += kEndings[rng.below(std::size(kEndings))];
    if (rng.bernoulli(0.5) && !text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    row.text = std::move(text);
  }
  return rows;
}

}  // namespace xltk
