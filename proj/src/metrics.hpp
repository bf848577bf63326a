#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"

namespace xltk {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

using ConfusionCounts = std::array<Confusion, kNumLabels>;

// Throws DimensionError when the row counts differ.
ConfusionCounts confusion(std::span<const LabelVector> pred, std::span<const LabelVector> gold);

// Zero denominators give 0, except that a category with TP = FP = FN = 0
// (absent from both sides) scores F1 = 1.
double precision(const Confusion& c);
double recall(const Confusion& c);
double f1_score(const Confusion& c);

double macro_f1(std::span<const LabelVector> pred, std::span<const LabelVector> gold);
// 2ΣTP / (2ΣTP + ΣFP + ΣFN); 1 when nothing is positive on either side.
double micro_f1(std::span<const LabelVector> pred, std::span<const LabelVector> gold);
double exact_match_accuracy(std::span<const LabelVector> pred, std::span<const LabelVector> gold);
double hamming_loss(std::span<const LabelVector> pred, std::span<const LabelVector> gold);

inline constexpr double kDecisionThreshold = 0.5;
// Row-major N×6 probabilities → decisions p ≥ 0.5.
std::vector<LabelVector> decide(std::span<const double> probs);

enum class Metric { macro_f1, micro_f1, accuracy, hamming };
const char* metric_name(Metric m);
double evaluate_metric(Metric m, std::span<const LabelVector> pred,
                       std::span<const LabelVector> gold);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Replicate r resamples N row indices with replacement from a stream derived
// from (seed, r), so values do not depend on evaluation order.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t replicate);
std::vector<double> bootstrap_replicates(Metric m, std::span<const LabelVector> pred,
                                         std::span<const LabelVector> gold, std::size_t iters,
                                         std::uint64_t seed);

// Type-7 (linear interpolation) sample quantile; `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double q);

// Percentile interval over the replicates. Requires N ≥ 2.
Interval bootstrap_ci(Metric m, std::span<const LabelVector> pred,
                      std::span<const LabelVector> gold, std::size_t iters = 1000,
                      double level = 0.95, std::uint64_t seed = 42);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  bool degenerate = false;  // zero variance of the differences
};

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

// Paired t-test over the differences a_i − b_i. Zero variance reports
// t = ±∞ and p = 0 for a nonzero mean, t = 0 and p = 1 otherwise.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct CategoryReport {
  Confusion counts;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct Comparison {
  Metric metric = Metric::macro_f1;
  double other_value = 0.0;
  TTestResult test;
};

struct MetricsReport {
  std::size_t samples = 0;
  std::array<CategoryReport, kNumLabels> categories{};
  double macro_f1 = 0.0, micro_f1 = 0.0, accuracy = 0.0, hamming = 0.0;
  Interval macro_ci, micro_ci, accuracy_ci;
  std::optional<Comparison> comparison;
};

MetricsReport build_report(std::span<const LabelVector> pred, std::span<const LabelVector> gold,
                           std::size_t bootstrap_iters, std::uint64_t seed);
// Adds a paired t-test of macro F1 replicates against a second prediction set
// evaluated on the same resamples.
void add_comparison(MetricsReport& report, std::span<const LabelVector> pred,
                    std::span<const LabelVector> other, std::span<const LabelVector> gold,
                    std::size_t bootstrap_iters, std::uint64_t seed);

void write_report_csv(std::ostream& out, const MetricsReport& r);
void write_report_table(std::ostream& out, const MetricsReport& r);

// printf("%.17g") formatting used by every machine-readable output.
std::string fmt_double(double v);

}  // namespace xltk
