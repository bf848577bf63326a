#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"

namespace xltk {

// Corpus prevalence per category in label order (toxic, severe_toxic,
// obscene, threat, insult, identity_hate).
inline constexpr std::array<double, kNumLabels> kCorpusPrevalence = {0.046, 0.003, 0.053,
                                                                     0.002, 0.050, 0.009};

struct SyntheticSpec {
  std::size_t samples = 5000;
  std::uint64_t seed = 42;
  std::array<double, kNumLabels> prevalence = kCorpusPrevalence;
  std::size_t noise_words = 400;
  std::size_t indicators_per_label = 3;
  std::size_t min_words = 8;
  std::size_t max_words = 24;
};

// Category k has exactly round(prevalence[k] · samples) positives (at least
// one when the prevalence is nonzero), chosen independently per category.
// Each positive comment carries one or two of its category's indicator
// words at random positions; all other words are noise.
std::vector<RawComment> synthetic_corpus(const SyntheticSpec& spec);

// Planted indicator words of category k for a given spec.
std::vector<std::string> indicator_words(const SyntheticSpec& spec, std::size_t category);

}  // namespace xltk
