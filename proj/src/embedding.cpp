#include "embedding.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace xltk {

Tensor random_table(std::size_t rows, std::size_t dim, Rng& rng) {
  Tensor t({rows, dim});
  auto v = t.data();
  for (std::size_t i = dim; i < v.size(); ++i) v[i] = rng.uniform(-kTableInitRange, kTableInitRange);
  return t;
}

Tensor load_table(const std::filesystem::path& path, std::size_t dim, const Vocabulary& vocab,
                  Rng& rng, TableLoadStats* stats) {
  Tensor table = random_table(vocab.size(), dim, rng);
  std::vector<bool> covered(vocab.size(), false);
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path.string());
    auto data = table.data();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::istringstream fields(line);
      std::string token;
      fields >> token;
      std::vector<double> values;
      values.reserve(dim);
      std::string field;
      while (fields >> field) {
        char* end = nullptr;
        const double x = std::strtod(field.c_str(), &end);
        if (end != field.c_str() + field.size()) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad float '" +
                           field + "'");
        }
        values.push_back(x);
      }
      if (values.size() != dim) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(dim) + " floats, got " + std::to_string(values.size()));
      }
      const auto id = vocab.find(token);
      if (!id || *id == Vocabulary::kPad) continue;
      std::copy(values.begin(), values.end(), data.begin() + *id * dim);
      covered[*id] = true;
    }
  }
  if (stats) {
    stats->covered_rows = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
    stats->random_rows = vocab.size() - 1 - stats->covered_rows;
  }
  return table;
}

std::size_t EmbeddingBundle::fused_width() const {
  return multisource ? source_a.cols() + source_b.cols() + source_c.cols() : source_a.cols();
}

Tensor fuse(Tape& tape, const EmbeddingBundle& bundle, std::span<const std::size_t> word_ids) {
  Tensor a = gather_rows(tape, bundle.source_a, word_ids, Vocabulary::kPad);
  if (!bundle.multisource) return a;
  Tensor b = gather_rows(tape, bundle.source_b, word_ids, Vocabulary::kPad);
  Tensor c = gather_rows(tape, bundle.source_c, word_ids, Vocabulary::kPad);
  return concat(tape, {a, b, c}, 1);
}

Tensor project(Tape& tape, const EmbeddingBundle& bundle, const Tensor& fused) {
  if (fused.rank() != 2 || fused.cols() != bundle.w_proj.cols()) {
    throw DimensionError("project: input " + shape_str(fused.shape()) + " does not match width " +
                         std::to_string(bundle.w_proj.cols()));
  }
  return linear(tape, fused, bundle.w_proj, bundle.b_proj);
}

namespace {

// Mean-pooled rows of `table` over each sample's true word length.
Eigen::MatrixXd pooled_source(const Tensor& table, std::span<const TokenizedSample> samples) {
  const std::size_t d = table.cols();
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples.size()),
                                                 static_cast<Eigen::Index>(d));
  auto tv = table.data();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.word_len == 0) continue;
    for (std::size_t t = 0; t < s.word_len; ++t) {
      const std::size_t id = s.word_ids[t];
      if (id >= table.rows()) throw IndexError("source_correlation: word id out of range");
      for (std::size_t j = 0; j < d; ++j) pooled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += tv[id * d + j];
    }
    pooled.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(s.word_len);
  }
  return pooled;
}

// Projection of centered rows onto the leading principal axis. The axis sign
// is fixed so that its largest-magnitude component is positive.
Eigen::VectorXd first_principal_scores(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd axis = solver.eigenvectors().col(cov.cols() - 1);
  Eigen::Index arg = 0;
  axis.cwiseAbs().maxCoeff(&arg);
  if (axis(arg) < 0) axis = -axis;
  return centered * axis;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return ca.dot(cb) / den;
}

}  // namespace

SourceCorrelation source_correlation(const EmbeddingBundle& bundle,
                                     std::span<const TokenizedSample> samples) {
  if (samples.size() < 2) throw SizeError("source_correlation needs at least 2 samples");
  const std::array<const Tensor*, 3> tables{&bundle.source_a, &bundle.source_b, &bundle.source_c};
  std::array<Eigen::VectorXd, 3> scores;
  std::array<bool, 3> flat{};
  for (std::size_t s = 0; s < 3; ++s) {
    const Eigen::MatrixXd pooled = pooled_source(*tables[s], samples);
    scores[s] = first_principal_scores(pooled);
    const Eigen::VectorXd c = scores[s].array() - scores[s].mean();
    flat[s] = c.squaredNorm() <= 1e-24 * std::max<double>(1.0, static_cast<double>(samples.size()));
  }
  SourceCorrelation out;
  for (std::size_t i = 0; i < 3; ++i) {
    out.rho[i][i] = 1.0;
    for (std::size_t j = i + 1; j < 3; ++j) {
      double r = std::numeric_limits<double>::quiet_NaN();
      if (!flat[i] && !flat[j]) r = pearson(scores[i], scores[j]);
      out.rho[i][j] = out.rho[j][i] = r;
    }
  }
  out.degenerate = flat[0] || flat[1] || flat[2];
  return out;
}

}  // namespace xltk
