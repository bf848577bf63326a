// Command-line front end over the C interface.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xltk/xltk.h"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  bool no_bias_correction = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "config file of key = value lines");
  sub->add_option("--set", c.sets, "override one config key (key=value), repeatable");
  sub->add_option("--seed", c.seed, "shorthand for --set seed=N");
  sub->add_flag("--no-bias-correction", c.no_bias_correction,
                "Adam without moment bias correction (shorthand for --set bias_correction=false)");
}

int report(xltk_status s) {
  if (s != XLTK_OK && s != XLTK_CHECK_FAILED) {
    std::fprintf(stderr, "xltk: %s: %s\n", xltk_status_name(s), xltk_last_error());
  }
  return xltk_exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xltk: cosine-gated BiLSTM toxicity classifier"};
  app.footer(xltk_config_help());
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"train", "train a model and score the test split"},
      {"eval", "score a saved model on a data split"},
      {"gradcheck", "finite-difference check of every op and a small full model"},
      {"ablate", "train the full model and each listed variant; write ablation.csv"},
      {"gate-report", "per-token cosine similarity and gate value for a text"},
      {"embed-stats", "correlation matrix of the three embedding sources"},
      {"split", "stratified train/valid/test split, optionally of a synthetic corpus"},
  };
  std::vector<Common> opts(std::size(commands));
  std::vector<CLI::App*> subs;
  std::size_t synthetic = 0;
  std::string corrupt;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].name, commands[i].help);
    sub->footer(xltk_config_help());
    add_common(sub, opts[i]);
    subs.push_back(sub);
  }
  subs[2]->add_option("--corrupt-adjoint", corrupt)->group("");
  subs[6]->add_option("--synthetic", synthetic, "generate a seeded corpus of N comments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::size_t which = 0;
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) which = i;
  const Common& c = opts[which];

  xltk_config* cfg = nullptr;
  if (xltk_config_create(&cfg) != XLTK_OK) return report(XLTK_ERR_INTERNAL);
  xltk_status s = XLTK_OK;
  if (!c.config_path.empty()) s = xltk_config_load(cfg, c.config_path.c_str());
  for (const auto& kv : c.sets)
    if (s == XLTK_OK) s = xltk_config_assign(cfg, kv.c_str());
  if (s == XLTK_OK && !c.seed.empty()) s = xltk_config_set(cfg, "seed", c.seed.c_str());
  if (s == XLTK_OK && c.no_bias_correction) s = xltk_config_set(cfg, "bias_correction", "false");
  if (s == XLTK_OK && !corrupt.empty()) s = xltk_debug_corrupt_adjoint(corrupt.c_str());
  if (s == XLTK_OK) {
    s = which == 6 ? xltk_run_split(cfg, synthetic) : xltk_run(cfg, commands[which].name);
  }
  xltk_config_destroy(cfg);
  return report(s);
}
