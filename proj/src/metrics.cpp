#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "errors.hpp"
#include "rng.hpp"

namespace xltk {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ConfusionCounts confusion(std::span<const LabelVector> pred, std::span<const LabelVector> gold) {
  if (pred.size() != gold.size()) {
    throw DimensionError("metrics: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gold.size()) + " gold rows");
  }
  ConfusionCounts c{};
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const bool p = pred[i][k] != 0, g = gold[i][k] != 0;
      if (p && g) ++c[k].tp;
      else if (p) ++c[k].fp;
      else if (g) ++c[k].fn;
      else ++c[k].tn;
    }
  return c;
}

double precision(const Confusion& c) {
  const std::size_t d = c.tp + c.fp;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double recall(const Confusion& c) {
  const std::size_t d = c.tp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double f1_score(const Confusion& c) {
  const std::size_t d = 2 * c.tp + c.fp + c.fn;
  if (d == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(d);
}

double macro_f1(std::span<const LabelVector> pred, std::span<const LabelVector> gold) {
  const auto c = confusion(pred, gold);
  double s = 0.0;
  for (const auto& k : c) s += f1_score(k);
  return s / static_cast<double>(kNumLabels);
}

double micro_f1(std::span<const LabelVector> pred, std::span<const LabelVector> gold) {
  Confusion pooled;
  for (const auto& k : confusion(pred, gold)) {
    pooled.tp += k.tp;
    pooled.fp += k.fp;
    pooled.fn += k.fn;
  }
  return f1_score(pooled);
}

double exact_match_accuracy(std::span<const LabelVector> pred, std::span<const LabelVector> gold) {
  confusion(pred, gold);
  if (pred.empty()) throw ContractError("metrics: empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool same = true;
    for (std::size_t k = 0; k < kNumLabels; ++k) same = same && ((pred[i][k] != 0) == (gold[i][k] != 0));
    hits += same;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double hamming_loss(std::span<const LabelVector> pred, std::span<const LabelVector> gold) {
  const auto c = confusion(pred, gold);
  if (pred.empty()) throw ContractError("metrics: empty prediction set");
  std::size_t wrong = 0;
  for (const auto& k : c) wrong += k.fp + k.fn;
  return static_cast<double>(wrong) / static_cast<double>(pred.size() * kNumLabels);
}

std::vector<LabelVector> decide(std::span<const double> probs) {
  if (probs.size() % kNumLabels != 0) throw DimensionError("decide: size is not a multiple of 6");
  std::vector<LabelVector> out(probs.size() / kNumLabels);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t k = 0; k < kNumLabels; ++k)
      out[i][k] = probs[i * kNumLabels + k] >= kDecisionThreshold ? 1 : 0;
  return out;
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::macro_f1: return "macro_f1";
    case Metric::micro_f1: return "micro_f1";
    case Metric::accuracy: return "exact_match_accuracy";
    case Metric::hamming: return "hamming_loss";
  }
  return "?";
}

double evaluate_metric(Metric m, std::span<const LabelVector> pred,
                       std::span<const LabelVector> gold) {
  switch (m) {
    case Metric::macro_f1: return macro_f1(pred, gold);
    case Metric::micro_f1: return micro_f1(pred, gold);
    case Metric::accuracy: return exact_match_accuracy(pred, gold);
    case Metric::hamming: return hamming_loss(pred, gold);
  }
  throw ContractError("unknown metric");
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed,
                                           std::size_t replicate) {
  Rng rng(Rng::derive(seed, replicate));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

namespace {

std::vector<LabelVector> take(std::span<const LabelVector> rows, const std::vector<std::size_t>& idx) {
  std::vector<LabelVector> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = rows[idx[i]];
  return out;
}

}  // namespace

std::vector<double> bootstrap_replicates(Metric m, std::span<const LabelVector> pred,
                                         std::span<const LabelVector> gold, std::size_t iters,
                                         std::uint64_t seed) {
  confusion(pred, gold);
  if (pred.size() < 2) throw ContractError("bootstrap needs at least 2 samples");
  std::vector<double> out(iters);
  for (std::size_t r = 0; r < iters; ++r) {
    const auto idx = bootstrap_indices(pred.size(), seed, r);
    out[r] = evaluate_metric(m, take(pred, idx), take(gold, idx));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Interval bootstrap_ci(Metric m, std::span<const LabelVector> pred,
                      std::span<const LabelVector> gold, std::size_t iters, double level,
                      std::uint64_t seed) {
  if (iters == 0) throw ConfigError("bootstrap_iters must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0, 1)");
  auto reps = bootstrap_replicates(m, pred, gold, iters, seed);
  std::sort(reps.begin(), reps.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(reps, tail), quantile_sorted(reps, 1.0 - tail)};
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 − I_{1−x}(b,a) elsewhere.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front) / a;

  // Modified Lentz evaluation.
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  double f = 1.0, c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double md = m;
    double num = md * (b - md) * x / ((a + 2.0 * md - 1.0) * (a + 2.0 * md));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + md) * (a + b + md) * x / ((a + 2.0 * md) * (a + 2.0 * md + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return front * f;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ContractError("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("paired_t_test: series lengths differ");
  const std::size_t n = a.size();
  if (n < 2) throw ContractError("paired_t_test needs at least 2 pairs");
  TTestResult r;
  r.df = n - 1;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (a[i] - b[i]) - mean;
    ss += e * e;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var == 0.0) {
    r.degenerate = true;
    if (mean != 0.0) {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p = 0.0;
    } else {
      r.t = 0.0;
      r.p = 1.0;
    }
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const double df = static_cast<double>(r.df);
  r.p = incomplete_beta(df / 2.0, 0.5, df / (df + r.t * r.t));
  return r;
}

MetricsReport build_report(std::span<const LabelVector> pred, std::span<const LabelVector> gold,
                           std::size_t bootstrap_iters, std::uint64_t seed) {
  MetricsReport r;
  r.samples = pred.size();
  const auto c = confusion(pred, gold);
  for (std::size_t k = 0; k < kNumLabels; ++k)
    r.categories[k] = {c[k], precision(c[k]), recall(c[k]), f1_score(c[k])};
  r.macro_f1 = macro_f1(pred, gold);
  r.micro_f1 = micro_f1(pred, gold);
  r.accuracy = exact_match_accuracy(pred, gold);
  r.hamming = hamming_loss(pred, gold);
  if (pred.size() >= 2) {
    r.macro_ci = bootstrap_ci(Metric::macro_f1, pred, gold, bootstrap_iters, 0.95, seed);
    r.micro_ci = bootstrap_ci(Metric::micro_f1, pred, gold, bootstrap_iters, 0.95, seed);
    r.accuracy_ci = bootstrap_ci(Metric::accuracy, pred, gold, bootstrap_iters, 0.95, seed);
  } else {
    r.macro_ci = {r.macro_f1, r.macro_f1};
    r.micro_ci = {r.micro_f1, r.micro_f1};
    r.accuracy_ci = {r.accuracy, r.accuracy};
  }
  return r;
}

void add_comparison(MetricsReport& report, std::span<const LabelVector> pred,
                    std::span<const LabelVector> other, std::span<const LabelVector> gold,
                    std::size_t bootstrap_iters, std::uint64_t seed) {
  Comparison cmp;
  cmp.other_value = macro_f1(other, gold);
  const auto a = bootstrap_replicates(Metric::macro_f1, pred, gold, bootstrap_iters, seed);
  const auto b = bootstrap_replicates(Metric::macro_f1, other, gold, bootstrap_iters, seed);
  cmp.test = paired_t_test(a, b);
  report.comparison = cmp;
}

void write_report_csv(std::ostream& out, const MetricsReport& r) {
  out << "metric,category,value,ci_lo,ci_hi\n";
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto& c = r.categories[k];
    out << "precision," << kLabelNames[k] << ',' << fmt_double(c.precision) << ",,\n";
    out << "recall," << kLabelNames[k] << ',' << fmt_double(c.recall) << ",,\n";
    out << "f1," << kLabelNames[k] << ',' << fmt_double(c.f1) << ",,\n";
  }
  auto row = [&](const char* name, double v, const Interval* ci) {
    out << name << ",all," << fmt_double(v) << ',';
    if (ci) out << fmt_double(ci->lo) << ',' << fmt_double(ci->hi);
    else out << ',';
    out << '\n';
  };
  row("macro_f1", r.macro_f1, &r.macro_ci);
  row("micro_f1", r.micro_f1, &r.micro_ci);
  row("exact_match_accuracy", r.accuracy, &r.accuracy_ci);
  row("hamming_loss", r.hamming, nullptr);
  if (r.comparison) {
    row("compare_macro_f1", r.comparison->other_value, nullptr);
    row("paired_t", r.comparison->test.t, nullptr);
    row("paired_p", r.comparison->test.p, nullptr);
  }
}

void write_report_table(std::ostream& out, const MetricsReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %6s %6s %6s\n", "category", "precision",
                "recall", "f1", "tp", "fp", "fn");
  out << line;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto& c = r.categories[k];
    std::snprintf(line, sizeof line, "%-16s %9.4f %9.4f %9.4f %6zu %6zu %6zu\n",
                  std::string(kLabelNames[k]).c_str(), c.precision, c.recall, c.f1, c.counts.tp,
                  c.counts.fp, c.counts.fn);
    out << line;
  }
  std::snprintf(line, sizeof line, "macro F1   %.4f  95%% CI [%.4f, %.4f]\n", r.macro_f1,
                r.macro_ci.lo, r.macro_ci.hi);
  out << line;
  std::snprintf(line, sizeof line, "micro F1   %.4f  95%% CI [%.4f, %.4f]\n", r.micro_f1,
                r.micro_ci.lo, r.micro_ci.hi);
  out << line;
  std::snprintf(line, sizeof line, "accuracy   %.4f  95%% CI [%.4f, %.4f]\n", r.accuracy,
                r.accuracy_ci.lo, r.accuracy_ci.hi);
  out << line;
  std::snprintf(line, sizeof line, "hamming    %.4f\nsamples    %zu\n", r.hamming, r.samples);
  out << line;
  if (r.comparison) {
    std::snprintf(line, sizeof line, "compared macro F1 %.4f  paired t %.4g  p %.4g\n",
                  r.comparison->other_value, r.comparison->test.t, r.comparison->test.p);
    out << line;
  }
}

}  // namespace xltk
