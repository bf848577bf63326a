#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "encoder.hpp"
#include "gradcheck.hpp"
#include "training.hpp"

namespace xltk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// Ablation names accepted by `variant` and `variants`.
const std::vector<std::string>& known_variants();
// Applies a variant to both configs; "full" changes nothing.
void apply_variant(const std::string& variant, ModelConfig& model, TrainConfig& train);

// Architecture fields from the config; vocabulary sizes are left at zero.
ModelConfig model_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg);

struct PreparedData {
  std::vector<RawComment> rows;
  SplitIndices split;
  Vocabulary vocab;
  CharVocabulary chars;
  TokenizerLimits limits;
  std::vector<TokenizedSample> train, valid, test;
};

// Loads `data`, splits with `seed`, builds vocabularies from the training
// split and tokenizes all three splits.
PreparedData prepare_data(const Config& cfg);

std::vector<TokenizedSample> tokenize_rows(const std::vector<RawComment>& rows,
                                           const std::vector<std::size_t>& indices,
                                           const Vocabulary& vocab, const CharVocabulary& chars,
                                           const TokenizerLimits& limits);

// Seeded model with tables loaded from the configured paths where given.
XlstmModel build_model(const Config& cfg, ModelConfig mc, const Vocabulary& vocab,
                       const CharVocabulary& chars);

struct SavedModel {
  Config config;
  Vocabulary vocab;
  CharVocabulary chars;
  XlstmModel model;
};

void save_model_dir(const std::filesystem::path& dir, const Config& cfg, const Vocabulary& vocab,
                    const CharVocabulary& chars, const XlstmModel& model);
SavedModel load_model_dir(const std::filesystem::path& dir);

// Subcommands. Each throws xltk::Error on configuration, IO or data
// problems and otherwise returns an exit code.
int run_train(const Config& cfg, std::ostream& out);
int run_eval(const Config& cfg, std::ostream& out);
int run_gradcheck(const Config& cfg, std::ostream& out);
int run_ablate(const Config& cfg, std::ostream& out);
int run_gate_report(const Config& cfg, std::ostream& out);
int run_embed_stats(const Config& cfg, std::ostream& out);
// synthetic > 0 generates a corpus of that size instead of reading `data`.
int run_split(const Config& cfg, std::size_t synthetic, std::ostream& out);

struct GradcheckSummary {
  std::vector<GradcheckResult> results;
  bool passed() const;
};
// Every registered op followed by every parameter of a small full model.
GradcheckSummary gradcheck_suite(std::uint64_t seed);

}  // namespace xltk
