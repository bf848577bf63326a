#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace xltk {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"data", "", "input CSV (id, comment_text and the six label columns)"},
      {"out_dir", "out", "directory for every artifact a command writes"},
      {"model_dir", "", "directory holding a trained model"},
      {"output", "", "output file for gate-report and embed-stats; empty means stdout"},
      {"seed", "42", "master random seed"},
      {"epochs", "60", "maximum training epochs"},
      {"batch_size", "64", "training and inference batch size"},
      {"patience", "7", "epochs without validation improvement before stopping"},
      {"clip_norm", "1.0", "global gradient norm threshold"},
      {"lr", "1e-4", "learning rate for the fixed schedule"},
      {"adam_beta1", "0.9", "Adam first-moment decay"},
      {"adam_beta2", "0.999", "Adam second-moment decay"},
      {"adam_eps", "1e-8", "Adam denominator epsilon"},
      {"bias_correction", "true", "Adam moment bias correction"},
      {"schedule", "fixed", "learning-rate schedule: fixed or cosine"},
      {"lr_min", "1e-6", "cosine schedule floor"},
      {"lr_max", "1e-4", "cosine schedule peak"},
      {"restart_period", "15", "cosine warm-restart period in epochs"},
      {"gamma", "2.0", "focal loss focusing parameter"},
      {"class_weight_basis", "prevalence", "imbalance ratio denominator: prevalence (N) or max_count (N_max)"},
      {"smote", "true", "embedding-level SMOTE per batch"},
      {"smote_ratio", "1:2", "target minority:majority ratio"},
      {"smote_k", "5", "SMOTE nearest neighbours"},
      {"smote_max", "64", "most synthetic rows added to one batch"},
      {"min_freq", "2", "minimum token count for the vocabulary"},
      {"max_tokens", "300", "word sequence length"},
      {"max_chars", "800", "character sequence length"},
      {"dim_glove", "300", "width of embedding source A"},
      {"dim_fasttext", "300", "width of embedding source B"},
      {"dim_bert", "768", "width of embedding source C"},
      {"proj_dim", "512", "projected embedding width"},
      {"word_hidden", "256", "word BiLSTM hidden size per direction"},
      {"attn_heads", "8", "self-attention heads"},
      {"char_dim", "200", "character embedding width"},
      {"char_hidden", "128", "character BiLSTM hidden size per direction"},
      {"dense_dim", "256", "classifier hidden width"},
      {"dropout", "0.3", "dropout on recurrent layer outputs"},
      {"recurrent_dropout", "0.2", "variational dropout on hidden-state recurrences"},
      {"beta_init", "1.0", "initial gate temperature"},
      {"glove_path", "", "text table for source A; empty means seeded random"},
      {"fasttext_path", "", "text table for source B; empty means seeded random"},
      {"bert_path", "", "text table for source C; empty means seeded random"},
      {"unfreeze_tables", "false", "train the embedding tables"},
      {"variant", "full", "model variant for train: full or one ablation name"},
      {"variants", "no_gating,no_char,no_multisource,bce_loss,no_smote,no_residual,no_attention",
       "ablations run by ablate, comma separated"},
      {"record_wall_time", "false", "write real seconds to the training log"},
      {"compare_model_dir", "", "second model for the paired t-test in eval"},
      {"bootstrap_iters", "1000", "bootstrap replicates for confidence intervals"},
      {"eval_split", "test", "split scored by eval: train, valid, test or all"},
      {"text", "", "input text for gate-report"},
  };
  return schema;
}

namespace {

const ConfigKey* find_key(std::string_view key) {
  for (const auto& k : config_schema())
    if (k.name == key) return &k;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config::Config() {
  for (const auto& k : config_schema()) values_.emplace(std::string(k.name), std::string(k.default_value));
}

Config Config::load(const std::filesystem::path& path) {
  Config c;
  c.merge_file(path);
  return c;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void Config::set(std::string_view key, std::string_view value) {
  if (!find_key(key)) throw ConfigError("unknown config key '" + std::string(key) + "'");
  values_[std::string(key)] = std::string(value);
}

void Config::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t Config::get_int(std::string_view key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::size_t Config::get_size(std::string_view key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError(std::string(key) + ": must not be negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::get_u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double Config::get_double(std::string_view key) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError(std::string(key) + ": expected a number");
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool Config::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::get_list(std::string_view key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& k : config_schema()) {
    out += k.name;
    out += " = ";
    out += get(k.name);
    out += '\n';
  }
  return out;
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path.string());
  out << serialize();
  if (!out) throw IoError("failed writing config: " + path.string());
}

std::string config_help() {
  std::string out = "Config keys (set with --set key=value or a config file):\n";
  for (const auto& k : config_schema()) {
    out += "  ";
    out += k.name;
    out += " (default: ";
    out += k.default_value.empty() ? std::string_view("\"\"") : k.default_value;
    out += ")\n      ";
    out += k.help;
    out += '\n';
  }
  return out;
}

}  // namespace xltk
