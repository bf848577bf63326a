#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "imbalance.hpp"
#include "metrics.hpp"
#include "synthetic.hpp"

namespace xltk {

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v = {"no_gating", "no_char",  "no_multisource", "bce_loss",
                                             "no_smote",  "no_residual", "no_attention"};
  return v;
}

void apply_variant(const std::string& variant, ModelConfig& model, TrainConfig& train) {
  if (variant == "full") return;
  if (variant == "no_gating") model.use_gating = false;
  else if (variant == "no_char") model.use_char = false;
  else if (variant == "no_multisource") model.multisource = false;
  else if (variant == "bce_loss") {
    train.gamma = 0.0;
    train.weight_mode = WeightMode::uniform;
  } else if (variant == "no_smote") train.use_smote = false;
  else if (variant == "no_residual") model.use_residual = false;
  else if (variant == "no_attention") model.use_attention = false;
  else throw ConfigError("unknown variant '" + variant + "'");
}

ModelConfig model_config_from(const Config& cfg) {
  ModelConfig mc;
  mc.dim_a = cfg.get_size("dim_glove");
  mc.dim_b = cfg.get_size("dim_fasttext");
  mc.dim_c = cfg.get_size("dim_bert");
  mc.proj_dim = cfg.get_size("proj_dim");
  mc.word_hidden = cfg.get_size("word_hidden");
  mc.attn_heads = cfg.get_size("attn_heads");
  mc.char_dim = cfg.get_size("char_dim");
  mc.char_hidden = cfg.get_size("char_hidden");
  mc.dense_dim = cfg.get_size("dense_dim");
  mc.dropout = cfg.get_double("dropout");
  mc.recurrent_dropout = cfg.get_double("recurrent_dropout");
  mc.beta_init = cfg.get_double("beta_init");
  mc.train_tables = cfg.get_bool("unfreeze_tables");
  return mc;
}

namespace {

std::pair<std::size_t, std::size_t> parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("smote_ratio: expected a:b, got '" + s + "'");
  try {
    std::size_t used = 0;
    const auto a = std::stoull(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("a");
    const auto rest = s.substr(colon + 1);
    const auto b = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("b");
    if (a == 0 || b == 0) throw std::invalid_argument("zero");
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError("smote_ratio: expected positive integers a:b, got '" + s + "'");
  }
}

}  // namespace

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_size("epochs");
  tc.batch_size = cfg.get_size("batch_size");
  tc.patience = cfg.get_size("patience");
  tc.clip_norm = cfg.get_double("clip_norm");
  tc.adam.lr = cfg.get_double("lr");
  tc.adam.beta1 = cfg.get_double("adam_beta1");
  tc.adam.beta2 = cfg.get_double("adam_beta2");
  tc.adam.eps = cfg.get_double("adam_eps");
  tc.adam.bias_correction = cfg.get_bool("bias_correction");
  const std::string sched = cfg.get("schedule");
  if (sched == "fixed") tc.schedule.kind = Schedule::fixed;
  else if (sched == "cosine") tc.schedule.kind = Schedule::cosine;
  else throw ConfigError("schedule: expected fixed or cosine, got '" + sched + "'");
  tc.schedule.lr = tc.adam.lr;
  tc.schedule.lr_min = cfg.get_double("lr_min");
  tc.schedule.lr_max = cfg.get_double("lr_max");
  tc.schedule.period = cfg.get_double("restart_period");
  tc.gamma = cfg.get_double("gamma");
  const std::string basis = cfg.get("class_weight_basis");
  if (basis == "prevalence") tc.weight_basis = WeightBasis::prevalence;
  else if (basis == "max_count") tc.weight_basis = WeightBasis::max_count;
  else throw ConfigError("class_weight_basis: expected prevalence or max_count, got '" + basis + "'");
  tc.use_smote = cfg.get_bool("smote");
  const auto [rmin, rmaj] = parse_ratio(cfg.get("smote_ratio"));
  tc.smote.ratio_minority = rmin;
  tc.smote.ratio_majority = rmaj;
  tc.smote.k_neighbors = cfg.get_size("smote_k");
  tc.smote.max_synthetic = cfg.get_size("smote_max");
  tc.seed = cfg.get_u64("seed");
  tc.record_wall_time = cfg.get_bool("record_wall_time");
  tc.validate();
  return tc;
}

std::vector<TokenizedSample> tokenize_rows(const std::vector<RawComment>& rows,
                                           const std::vector<std::size_t>& indices,
                                           const Vocabulary& vocab, const CharVocabulary& chars,
                                           const TokenizerLimits& limits) {
  std::vector<TokenizedSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    TokenizedSample s = tokenize(normalize(rows[i].text), vocab, chars, limits);
    s.labels = rows[i].labels;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::vector<RawComment> load_data(const Config& cfg) {
  const std::string path = cfg.get("data");
  if (path.empty()) throw ConfigError("data is not set (use --set data=PATH)");
  return load_csv(path);
}

TokenizerLimits limits_from(const Config& cfg) {
  TokenizerLimits l{cfg.get_size("max_tokens"), cfg.get_size("max_chars")};
  if (l.max_tokens == 0 || l.max_chars == 0) throw ConfigError("max_tokens and max_chars must be positive");
  return l;
}

SplitIndices split_rows(const std::vector<RawComment>& rows, std::uint64_t seed) {
  std::vector<LabelVector> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) labels.push_back(r.labels);
  SplitSpec spec;
  spec.seed = seed;
  return stratified_split(labels, spec);
}

}  // namespace

PreparedData prepare_data(const Config& cfg) {
  PreparedData d;
  d.rows = load_data(cfg);
  d.split = split_rows(d.rows, cfg.get_u64("seed"));
  d.limits = limits_from(cfg);
  const std::size_t min_freq = cfg.get_size("min_freq");
  std::vector<std::vector<std::string>> docs;
  std::vector<std::string> texts;
  for (std::size_t i : d.split.train) {
    texts.push_back(normalize(d.rows[i].text));
    docs.push_back(split_words(texts.back()));
  }
  d.vocab = Vocabulary::build(docs, min_freq);
  d.chars = CharVocabulary::build(texts, min_freq);
  d.train = tokenize_rows(d.rows, d.split.train, d.vocab, d.chars, d.limits);
  d.valid = tokenize_rows(d.rows, d.split.valid, d.vocab, d.chars, d.limits);
  d.test = tokenize_rows(d.rows, d.split.test, d.vocab, d.chars, d.limits);
  return d;
}

XlstmModel build_model(const Config& cfg, ModelConfig mc, const Vocabulary& vocab,
                       const CharVocabulary& chars) {
  mc.vocab_size = vocab.size();
  mc.char_vocab_size = chars.size();
  Rng rng(Rng::derive(cfg.get_u64("seed"), 0x30de1));
  XlstmModel model = XlstmModel::create(mc, rng);
  auto& e = model.embeddings();
  auto load = [&](const char* key, Tensor& table, std::size_t dim) {
    const std::string path = cfg.get(key);
    if (path.empty() || !table.defined()) return;
    Tensor loaded = load_table(path, dim, vocab, rng);
    loaded.set_requires_grad(mc.train_tables);
    table = loaded;
  };
  load("glove_path", e.source_a, mc.dim_a);
  load("fasttext_path", e.source_b, mc.dim_b);
  load("bert_path", e.source_c, mc.dim_c);
  return model;
}

namespace {

std::filesystem::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("output directory is not set");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<LabelVector> gold_of(std::span<const TokenizedSample> samples) {
  std::vector<LabelVector> gold;
  gold.reserve(samples.size());
  for (const auto& s : samples) gold.push_back(s.labels);
  return gold;
}

std::string model_variant(const Config& cfg) {
  const std::string v = cfg.get("variant");
  if (v != "full" &&
      std::find(known_variants().begin(), known_variants().end(), v) == known_variants().end()) {
    throw ConfigError("unknown variant '" + v + "'");
  }
  return v;
}

}  // namespace

void save_model_dir(const std::filesystem::path& dir, const Config& cfg, const Vocabulary& vocab,
                    const CharVocabulary& chars, const XlstmModel& model) {
  ensure_dir(dir.string());
  cfg.save(dir / "config.txt");
  vocab.save(dir / "vocab.txt");
  chars.save(dir / "chars.txt");
  save_checkpoint(dir / "checkpoint.bin", model.named_parameters());
}

SavedModel load_model_dir(const std::filesystem::path& dir) {
  if (dir.empty()) throw ConfigError("model_dir is not set");
  SavedModel m;
  m.config = Config::load(dir / "config.txt");
  m.vocab = Vocabulary::load(dir / "vocab.txt");
  m.chars = CharVocabulary::load(dir / "chars.txt");
  ModelConfig mc = model_config_from(m.config);
  TrainConfig tc;
  apply_variant(model_variant(m.config), mc, tc);
  mc.vocab_size = m.vocab.size();
  mc.char_vocab_size = m.chars.size();
  Rng rng(0);
  m.model = XlstmModel::create(mc, rng);
  load_checkpoint(dir / "checkpoint.bin", m.model.named_parameters());
  return m;
}

// --- train / eval -----------------------------------------------------------

int run_train(const Config& cfg, std::ostream& out) {
  const std::string variant = model_variant(cfg);
  ModelConfig mc = model_config_from(cfg);
  TrainConfig tc = train_config_from(cfg);
  apply_variant(variant, mc, tc);
  const auto dir = ensure_dir(cfg.get("out_dir"));
  const PreparedData data = prepare_data(cfg);
  XlstmModel model = build_model(cfg, mc, data.vocab, data.chars);

  out << "train: " << data.train.size() << " train / " << data.valid.size() << " valid / "
      << data.test.size() << " test samples, vocabulary " << data.vocab.size() << ", "
      << model.trainable_count() << " trainable parameters\n";
  const TrainReport report = train(model, data.train, data.valid, tc);
  for (const auto& e : report.epochs) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  loss %.6f  val macro F1 %.4f  lr %.3g\n",
                  e.epoch, e.loss, e.val_macro_f1, e.lr);
    out << line;
  }
  out << "stopped: " << report.stop_reason << ", best epoch " << report.best_epoch << '\n';

  save_model_dir(dir / "model", cfg, data.vocab, data.chars, model);
  save_training_log(dir / "train_log.csv", report);

  const auto probs = predict(model, data.test, tc.batch_size);
  const MetricsReport metrics = build_report(decide(probs), gold_of(data.test),
                                             cfg.get_size("bootstrap_iters"), tc.seed);
  {
    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw IoError("cannot write " + (dir / "metrics.csv").string());
    write_report_csv(csv, metrics);
  }
  std::ostringstream table;
  write_report_table(table, metrics);
  write_text(dir / "metrics.txt", table.str());
  out << "test split\n" << table.str();
  return report.stop_reason == "nan" ? kExitCheckFailed : kExitOk;
}

int run_eval(const Config& cfg, std::ostream& out) {
  const SavedModel saved = load_model_dir(cfg.get("model_dir"));
  const auto rows = load_data(cfg);
  // Split with the training seed so "test" names the same rows.
  const SplitIndices split = split_rows(rows, saved.config.get_u64("seed"));
  const std::string which = cfg.get("eval_split");
  std::vector<std::size_t> idx;
  if (which == "train") idx = split.train;
  else if (which == "valid") idx = split.valid;
  else if (which == "test") idx = split.test;
  else if (which == "all") {
    idx.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) idx[i] = i;
  } else {
    throw ConfigError("eval_split: expected train, valid, test or all, got '" + which + "'");
  }
  const TokenizerLimits limits = limits_from(saved.config);
  const auto samples = tokenize_rows(rows, idx, saved.vocab, saved.chars, limits);
  const std::size_t batch = cfg.get_size("batch_size");
  if (batch == 0) throw ConfigError("batch_size must be positive");
  const auto gold = gold_of(samples);
  const auto pred = decide(predict(saved.model, samples, batch));
  const std::uint64_t seed = cfg.get_u64("seed");
  const std::size_t iters = cfg.get_size("bootstrap_iters");
  MetricsReport report = build_report(pred, gold, iters, seed);

  const std::string other_dir = cfg.get("compare_model_dir");
  if (!other_dir.empty()) {
    const SavedModel other = load_model_dir(other_dir);
    const auto other_samples =
        tokenize_rows(rows, idx, other.vocab, other.chars, limits_from(other.config));
    const auto other_pred = decide(predict(other.model, other_samples, batch));
    add_comparison(report, pred, other_pred, gold, iters, seed);
  }
  const auto dir = ensure_dir(cfg.get("out_dir"));
  {
    std::ofstream csv(dir / "eval_metrics.csv");
    if (!csv) throw IoError("cannot write " + (dir / "eval_metrics.csv").string());
    write_report_csv(csv, report);
  }
  write_report_table(out, report);
  return kExitOk;
}

// --- gradcheck --------------------------------------------------------------

bool GradcheckSummary::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed(); });
}

GradcheckSummary gradcheck_suite(std::uint64_t seed) {
  GradcheckSummary summary;
  Rng rng(Rng::derive(seed, 0x9c));
  for (const auto& c : op_cases()) summary.results.push_back(c.run(rng));

  // Small full model: 2 samples, T = 8, vocabulary 50.
  ModelConfig mc;
  mc.vocab_size = 50;
  mc.char_vocab_size = 20;
  mc.dim_a = 4;
  mc.dim_b = 3;
  mc.dim_c = 5;
  mc.proj_dim = 6;
  mc.word_hidden = 3;
  mc.attn_heads = 2;
  mc.char_dim = 4;
  mc.char_hidden = 2;
  mc.dense_dim = 5;
  mc.train_tables = true;
  XlstmModel model = XlstmModel::create(mc, rng);
  model.gate().log_beta.data()[0] = std::log(2.0);

  std::vector<TokenizedSample> samples(2);
  const std::size_t word_lens[] = {8, 5}, char_lens[] = {10, 6};
  for (std::size_t b = 0; b < 2; ++b) {
    auto& s = samples[b];
    s.word_ids.assign(8, Vocabulary::kPad);
    s.char_ids.assign(12, CharVocabulary::kPad);
    s.word_len = word_lens[b];
    s.char_len = char_lens[b];
    for (std::size_t t = 0; t < s.word_len; ++t) s.word_ids[t] = 1 + static_cast<std::uint32_t>(rng.below(49));
    for (std::size_t t = 0; t < s.char_len; ++t) s.char_ids[t] = 1 + static_cast<std::uint32_t>(rng.below(19));
    for (auto& l : s.labels) l = rng.bernoulli(0.5) ? 1 : 0;
  }
  const std::vector<const TokenizedSample*> ptrs = {&samples[0], &samples[1]};
  Tensor synthetic({1, mc.proj_dim});
  for (auto& v : synthetic.data()) v = rng.uniform(-0.5, 0.5);
  std::vector<std::uint8_t> labels;
  for (const auto& s : samples) labels.insert(labels.end(), s.labels.begin(), s.labels.end());
  labels.insert(labels.end(), samples[0].labels.begin(), samples[0].labels.end());
  ClassWeights weights = class_weights_from_counts({3, 1, 2, 1, 2, 1}, 4, WeightBasis::prevalence);
  const std::uint64_t dropout_seed = rng.next_u64();

  auto loss_fn = [&](Tape& tape) {
    Rng drop(dropout_seed);  // same masks on every evaluation
    const auto out = model.forward(tape, ptrs, synthetic, true, &drop);
    return focal_loss(tape, out.probs, labels, weights, kDefaultGamma);
  };
  for (auto& [name, param] : model.named_parameters()) {
    summary.results.push_back(
        check_scalar_gradient("model/" + name, loss_fn, {param}, kNonlinearTolerance));
  }
  return summary;
}

int run_gradcheck(const Config& cfg, std::ostream& out) {
  const GradcheckSummary summary = gradcheck_suite(cfg.get_u64("seed"));
  std::ostringstream csv;
  csv << "name,max_rel_error,tolerance,checked,passed\n";
  std::vector<std::string> failed;
  for (const auto& r : summary.results) {
    char line[200];
    std::snprintf(line, sizeof line, "%-28s max rel err %.3e  tol %.0e  %s\n", r.name.c_str(),
                  r.max_rel_error, r.tolerance, r.passed() ? "ok" : "FAIL");
    out << line;
    csv << r.name << ',' << fmt_double(r.max_rel_error) << ',' << fmt_double(r.tolerance) << ','
        << r.checked << ',' << (r.passed() ? 1 : 0) << '\n';
    if (!r.passed()) failed.push_back(r.name);
  }
  write_text(ensure_dir(cfg.get("out_dir")) / "gradcheck.csv", csv.str());
  if (!failed.empty()) {
    out << "gradcheck FAILED:";
    for (const auto& f : failed) out << ' ' << f;
    out << '\n';
    return kExitCheckFailed;
  }
  out << "gradcheck passed (" << summary.results.size() << " checks)\n";
  return kExitOk;
}

// --- ablate -----------------------------------------------------------------

int run_ablate(const Config& cfg, std::ostream& out) {
  std::vector<std::string> variants = {"full"};
  for (const auto& v : cfg.get_list("variants")) {
    if (std::find(known_variants().begin(), known_variants().end(), v) == known_variants().end()) {
      throw ConfigError("unknown variant '" + v + "'");
    }
    if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
  }
  const auto dir = ensure_dir(cfg.get("out_dir"));
  const PreparedData data = prepare_data(cfg);

  struct Result {
    double f1 = 0.0;
    std::size_t params = 0;
    std::exception_ptr error;
  };
  std::vector<Result> results(variants.size());
  auto run_one = [&](std::size_t i) {
    try {
      ModelConfig mc = model_config_from(cfg);
      TrainConfig tc = train_config_from(cfg);
      apply_variant(variants[i], mc, tc);
      XlstmModel model = build_model(cfg, mc, data.vocab, data.chars);
      train(model, data.train, data.valid, tc);
      results[i].f1 = validation_macro_f1(model, data.test, tc.batch_size);
      results[i].params = model.trainable_count();
    } catch (...) {
      results[i].error = std::current_exception();
    }
  };
  const std::size_t workers = std::min(worker_count(), variants.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < variants.size(); i += workers) run_one(i);
    });
  for (auto& t : pool) t.join();
  for (const auto& r : results)
    if (r.error) std::rethrow_exception(r.error);

  std::ostringstream csv;
  csv << "variant,macro_f1,delta_f1,rel_delta,params\n";
  const double base = results[0].f1;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const double delta = results[i].f1 - base;
    const double rel = base != 0.0 ? delta / base : 0.0;
    csv << variants[i] << ',' << fmt_double(results[i].f1) << ',' << fmt_double(delta) << ','
        << fmt_double(rel) << ',' << results[i].params << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "%-16s macro F1 %.4f  delta %+.4f  params %zu\n",
                  variants[i].c_str(), results[i].f1, delta, results[i].params);
    out << line;
  }
  write_text(dir / "ablation.csv", csv.str());
  return kExitOk;
}

// --- gate-report / embed-stats / split -------------------------------------

namespace {

void emit(const Config& cfg, const std::string& text, std::ostream& out) {
  const std::string path = cfg.get("output");
  if (path.empty()) {
    out << text;
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) ensure_dir(p.parent_path().string());
  write_text(p, text);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

int run_gate_report(const Config& cfg, std::ostream& out) {
  const SavedModel saved = load_model_dir(cfg.get("model_dir"));
  const std::string text = cfg.get("text");
  if (text.empty()) throw ConfigError("text is not set (use --set text=...)");
  const TokenizerLimits limits = limits_from(saved.config);
  const std::string norm = normalize(text);
  const auto words = split_words(norm);
  const TokenizedSample s = tokenize(norm, saved.vocab, saved.chars, limits);
  const GateTrace trace = saved.model.gate_trace(s);
  std::ostringstream csv;
  csv << "position,token,sim,gate\n";
  for (std::size_t t = 0; t < trace.word_ids.size(); ++t) {
    csv << t << ',' << csv_field(words[t]) << ',' << fmt_double(trace.sims[t]) << ','
        << fmt_double(trace.gates[t]) << '\n';
  }
  emit(cfg, csv.str(), out);
  return kExitOk;
}

int run_embed_stats(const Config& cfg, std::ostream& out) {
  std::vector<TokenizedSample> samples;
  EmbeddingBundle bundle;
  const std::string model_dir = cfg.get("model_dir");
  if (!model_dir.empty()) {
    const SavedModel saved = load_model_dir(model_dir);
    const auto rows = load_data(cfg);
    std::vector<std::size_t> all(rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    samples = tokenize_rows(rows, all, saved.vocab, saved.chars, limits_from(saved.config));
    bundle = saved.model.embeddings();
  } else {
    const PreparedData data = prepare_data(cfg);
    samples = data.train;
    samples.insert(samples.end(), data.valid.begin(), data.valid.end());
    samples.insert(samples.end(), data.test.begin(), data.test.end());
    bundle = build_model(cfg, model_config_from(cfg), data.vocab, data.chars).embeddings();
  }
  if (!bundle.multisource) throw ConfigError("embed-stats needs all three embedding sources");
  const SourceCorrelation corr = source_correlation(bundle, samples);
  static const char* names[] = {"glove", "fasttext", "bert"};
  std::ostringstream csv;
  csv << "source,glove,fasttext,bert\n";
  for (std::size_t i = 0; i < 3; ++i) {
    csv << names[i];
    for (std::size_t j = 0; j < 3; ++j) csv << ',' << fmt_double(corr.rho[i][j]);
    csv << '\n';
  }
  emit(cfg, csv.str(), out);
  if (corr.degenerate) std::cerr << "warning: a source has zero variance; its entries are NaN\n";
  return kExitOk;
}

int run_split(const Config& cfg, std::size_t synthetic, std::ostream& out) {
  const auto dir = ensure_dir(cfg.get("out_dir"));
  std::vector<RawComment> rows;
  const std::uint64_t seed = cfg.get_u64("seed");
  if (synthetic > 0) {
    SyntheticSpec spec;
    spec.samples = synthetic;
    spec.seed = seed;
    rows = synthetic_corpus(spec);
    save_csv(dir / "corpus.csv", rows);
  } else {
    rows = load_data(cfg);
  }
  const SplitIndices split = split_rows(rows, seed);
  auto write_part = [&](const char* name, const std::vector<std::size_t>& idx) {
    std::vector<RawComment> part;
    part.reserve(idx.size());
    for (std::size_t i : idx) part.push_back(rows[i]);
    save_csv(dir / name, part);
  };
  write_part("train.csv", split.train);
  write_part("valid.csv", split.valid);
  write_part("test.csv", split.test);
  out << "split: " << split.train.size() << " train / " << split.valid.size() << " valid / "
      << split.test.size() << " test";
  if (synthetic > 0) out << " (synthetic corpus of " << synthetic << ")";
  out << '\n';
  return kExitOk;
}

}  // namespace xltk
