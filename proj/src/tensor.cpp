#include "tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "errors.hpp"

namespace xltk {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->values.assign(shape_size(shape), 0.0);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->values.size() : 0; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("rows() needs a rank-2 tensor, got " + shape_str(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("cols() needs a rank-2 tensor, got " + shape_str(s));
  return s[1];
}

std::span<double> Tensor::data() const { return node_->values; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const { return node_ && !node_->gradient.empty(); }

std::span<double> Tensor::grad() const {
  if (node_->gradient.empty()) node_->gradient.assign(node_->values.size(), 0.0);
  return node_->gradient;
}

void Tensor::zero_grad() const {
  if (node_) std::fill(node_->gradient.begin(), node_->gradient.end(), 0.0);
}

void Tensor::drop_grad() const {
  if (node_) {
    node_->gradient.clear();
    node_->gradient.shrink_to_fit();
  }
}

Tensor Tensor::clone() const {
  Tensor t(shape(), node_->values, node_->requires_grad);
  t.node_->gradient = node_->gradient;
  return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->values, false); }

// --- Tape -------------------------------------------------------------------

void Tape::record(const Tensor& out, std::function<void()> adjoint) {
  if (recording_) entries_.push_back({out, std::move(adjoint)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  for (auto& e : entries_) e.out.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out.has_grad()) it->adjoint();
  }
}

bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// --- adjoint fault hook ----------------------------------------------------

namespace {

constexpr std::string_view kFaultableOps[] = {
    "matmul",      "matmul_nt",       "linear",         "add",
    "sub",         "mul",             "add_row",        "scale",
    "scale_by",    "scale_rows",      "sigmoid",        "tanh",
    "relu",        "exp",             "log",            "sum",
    "mean",        "l2_norm",         "concat",         "slice",
    "gather_rows", "softmax_rows",    "layer_norm_rows", "max_pool_segments",
    "row_cosine",  "focal_loss"};

std::atomic<int> g_fault{-1};

}  // namespace

void set_adjoint_fault(std::string_view op_name) {
  if (op_name.empty()) {
    g_fault.store(-1);
    return;
  }
  for (int i = 0; i < static_cast<int>(std::size(kFaultableOps)); ++i) {
    if (kFaultableOps[i] == op_name) {
      g_fault.store(i);
      return;
    }
  }
  throw ContractError("unknown op for adjoint fault: " + std::string(op_name));
}

double adjoint_fault_scale(std::string_view op_name) {
  const int f = g_fault.load(std::memory_order_relaxed);
  if (f < 0) return 1.0;
  return kFaultableOps[f] == op_name ? 1.5 : 1.0;
}

// --- kernels ----------------------------------------------------------------

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// C[m×n] += A[m×k]·B[k×n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  const Eigen::Index M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
                     K = static_cast<Eigen::Index>(k);
  MutMap(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
}

// C[m×n] += A[m×k]·B[n×k]ᵀ
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  const Eigen::Index M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
                     K = static_cast<Eigen::Index>(k);
  MutMap(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
}

// C[k×n] += A[m×k]ᵀ·B[m×n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  const Eigen::Index M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
                     K = static_cast<Eigen::Index>(k);
  MutMap(c, K, N).noalias() += ConstMap(a, M, K).transpose() * ConstMap(b, M, N);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  const bool track = tracks(tape, {&x});
  Tensor out(x.shape(), track);
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fwd(xv[i]);
  if (track) {
    tape.record(out, [x, out, name, deriv]() mutable {
      const double s = adjoint_fault_scale(name);
      auto g = out.grad();
      auto xd = x.data();
      auto od = out.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i] * deriv(xd[i], od[i]);
    });
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- linear algebra ---------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const bool track = tracks(tape, {&a, &b});
  Tensor out({m, n}, track);
  gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data().data());
  if (track) {
    tape.record(out, [a, b, out, m, n, k]() mutable {
      const double s = adjoint_fault_scale("matmul");
      std::vector<double> g(out.grad().begin(), out.grad().end());
      if (s != 1.0) for (auto& v : g) v *= s;
      if (a.requires_grad()) gemm_nt(m, k, n, g.data(), b.data().data(), a.grad().data());
      if (b.requires_grad()) gemm_tn(m, n, k, a.data().data(), g.data(), b.grad().data());
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                         " · " + shape_str(b.shape()) + "ᵀ");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  const bool track = tracks(tape, {&a, &b});
  Tensor out({m, n}, track);
  gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data().data());
  if (track) {
    tape.record(out, [a, b, out, m, n, k]() mutable {
      const double s = adjoint_fault_scale("matmul_nt");
      std::vector<double> g(out.grad().begin(), out.grad().end());
      if (s != 1.0) for (auto& v : g) v *= s;
      if (a.requires_grad()) gemm_nn(m, k, n, g.data(), b.data().data(), a.grad().data());
      if (b.requires_grad()) gemm_tn(m, k, n, g.data(), a.data().data(), b.grad().data());
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  if (x.cols() != weight.cols()) {
    throw DimensionError("linear: input width " + std::to_string(x.cols()) +
                         " does not match weight " + shape_str(weight.shape()));
  }
  const std::size_t m = x.rows(), k = x.cols(), n = weight.rows();
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.size() != n)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(n) + " outputs");
  }
  const bool track = has_bias ? tracks(tape, {&x, &weight, &bias}) : tracks(tape, {&x, &weight});
  Tensor out({m, n}, track);
  double* o = out.data().data();
  if (has_bias) {
    auto bv = bias.data();
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), o + i * n);
  }
  gemm_nt(m, n, k, x.data().data(), weight.data().data(), o);
  if (track) {
    tape.record(out, [x, weight, bias, out, m, n, k, has_bias]() mutable {
      const double s = adjoint_fault_scale("linear");
      std::vector<double> g(out.grad().begin(), out.grad().end());
      if (s != 1.0) for (auto& v : g) v *= s;
      if (x.requires_grad()) gemm_nn(m, k, n, g.data(), weight.data().data(), x.grad().data());
      if (weight.requires_grad()) gemm_tn(m, k, n, g.data(), x.data().data(), weight.grad().data());
      if (has_bias && bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    });
  }
  return out;
}

// --- elementwise ------------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool track = tracks(tape, {&a, &b});
  Tensor out(a.shape(), track);
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (track) {
    tape.record(out, [a, b, out]() mutable {
      const double s = adjoint_fault_scale("add");
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += s * g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const bool track = tracks(tape, {&a, &b});
  Tensor out(a.shape(), track);
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (track) {
    tape.record(out, [a, b, out]() mutable {
      const double s = adjoint_fault_scale("sub");
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= s * g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool track = tracks(tape, {&a, &b});
  Tensor out(a.shape(), track);
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (track) {
    tape.record(out, [a, b, out]() mutable {
      const double s = adjoint_fault_scale("mul");
      auto g = out.grad();
      auto av = a.data(), bv = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += s * g[i] * av[i];
      }
    });
  }
  return out;
}

Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row) {
  require_rank(x, 2, "add_row");
  if (row.rank() != 1 || row.size() != x.cols()) {
    throw DimensionError("add_row: row " + shape_str(row.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  const bool track = tracks(tape, {&x, &row});
  Tensor out(x.shape(), track);
  auto xv = x.data(), rv = row.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] + rv[j];
  if (track) {
    tape.record(out, [x, row, out, m, n]() mutable {
      const double s = adjoint_fault_scale("add_row");
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
      }
      if (row.requires_grad()) {
        auto gr = row.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gr[j] += s * g[i * n + j];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary(
      tape, x, "scale", [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor) {
  if (factor.size() != 1) {
    throw DimensionError("scale_by: factor must hold one value, got " + shape_str(factor.shape()));
  }
  const bool track = tracks(tape, {&x, &factor});
  Tensor out(x.shape(), track);
  const double f = factor.data()[0];
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f * xv[i];
  if (track) {
    tape.record(out, [x, factor, out]() mutable {
      const double s = adjoint_fault_scale("scale_by");
      auto g = out.grad();
      auto xv = x.data();
      const double f = factor.data()[0];
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i] * f;
      }
      if (factor.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
        factor.grad()[0] += s * acc;
      }
    });
  }
  return out;
}

Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& g) {
  require_rank(x, 2, "scale_rows");
  if (g.size() != x.rows()) {
    throw DimensionError("scale_rows: " + shape_str(g.shape()) + " factors for " +
                         shape_str(x.shape()));
  }
  const std::size_t n = x.rows(), d = x.cols();
  const bool track = tracks(tape, {&x, &g});
  Tensor out(x.shape(), track);
  auto xv = x.data(), gv = g.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = gv[i] * xv[i * d + j];
  if (track) {
    tape.record(out, [x, g, out, n, d]() mutable {
      const double s = adjoint_fault_scale("scale_rows");
      auto go = out.grad();
      auto xv = x.data(), gv = g.data();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += s * go[i * d + j] * gv[i];
      }
      if (g.requires_grad()) {
        auto gg = g.grad();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += go[i * d + j] * xv[i * d + j];
          gg[i] += s * acc;
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(tape, x, "sigmoid", stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

// --- reductions -------------------------------------------------------------

Tensor sum(Tape& tape, const Tensor& x) {
  const bool track = tracks(tape, {&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out({1}, {acc}, track);
  if (track) {
    tape.record(out, [x, out]() mutable {
      const double g = adjoint_fault_scale("sum") * out.grad()[0];
      for (auto& gx : x.grad()) gx += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  if (x.size() == 0) throw ContractError("mean of empty tensor");
  const bool track = tracks(tape, {&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double n = static_cast<double>(x.size());
  Tensor out({1}, {acc / n}, track);
  if (track) {
    tape.record(out, [x, out, n]() mutable {
      const double g = adjoint_fault_scale("mean") * out.grad()[0] / n;
      for (auto& gx : x.grad()) gx += g;
    });
  }
  return out;
}

Tensor l2_norm(Tape& tape, const Tensor& x) {
  const bool track = tracks(tape, {&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  const double norm = std::sqrt(acc);
  Tensor out({1}, {norm}, track);
  if (track) {
    tape.record(out, [x, out, norm]() mutable {
      if (norm == 0.0) return;
      const double g = adjoint_fault_scale("l2_norm") * out.grad()[0] / norm;
      auto xv = x.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * xv[i];
    });
  }
  return out;
}

// --- structure --------------------------------------------------------------

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool track = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " +
                           shape_str(s) + " on axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
    track = track || tracks(tape, {&p});
  }
  Tensor out(out_shape, track);
  const std::size_t out_chunk = out_shape[axis] * inner;
  auto ov = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + o * chunk, chunk, ov.begin() + o * out_chunk + offset);
    offset += chunk;
  }
  if (track) {
    tape.record(out, [parts, out, axis, outer, inner, out_chunk]() mutable {
      const double s = adjoint_fault_scale("concat");
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t chunk = p.shape()[axis] * inner;
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < chunk; ++i)
              gp[o * chunk + i] += s * g[o * out_chunk + offset + i];
        }
        offset += chunk;
      }
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t count) {
  const Shape& xs = x.shape();
  if (axis >= xs.size() || start + count > xs[axis]) {
    throw DimensionError("slice: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") on axis " + std::to_string(axis) +
                         " out of range for " + shape_str(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  Shape out_shape = xs;
  out_shape[axis] = count;
  const bool track = tracks(tape, {&x});
  Tensor out(out_shape, track);
  const std::size_t in_chunk = xs[axis] * inner, out_chunk = count * inner;
  const std::size_t off = start * inner;
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.begin() + o * in_chunk + off, out_chunk, ov.begin() + o * out_chunk);
  if (track) {
    tape.record(out, [x, out, outer, in_chunk, out_chunk, off]() mutable {
      const double s = adjoint_fault_scale("slice");
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < out_chunk; ++i)
          gx[o * in_chunk + off + i] += s * g[o * out_chunk + i];
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                   std::optional<std::size_t> frozen_row) {
  require_rank(table, 2, "gather_rows");
  const std::size_t rows = table.rows(), d = table.cols();
  for (std::size_t id : ids) {
    if (id >= rows) {
      throw IndexError("gather_rows: index " + std::to_string(id) + " out of range for table " +
                       shape_str(table.shape()));
    }
  }
  const bool track = tracks(tape, {&table});
  Tensor out({ids.size(), d}, track);
  auto tv = table.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tv.begin() + ids[i] * d, d, ov.begin() + i * d);
  if (track) {
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    tape.record(out, [table, out, idx = std::move(idx), d, frozen_row]() mutable {
      const double s = adjoint_fault_scale("gather_rows");
      auto g = out.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (frozen_row && idx[i] == *frozen_row) continue;
        for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += s * g[i * d + j];
      }
    });
  }
  return out;
}

// --- normalization / attention / pooling -----------------------------------

Tensor softmax_rows(Tape& tape, const Tensor& x, std::span<const std::uint8_t> column_mask) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (!column_mask.empty() && column_mask.size() != n) {
    throw DimensionError("softmax_rows: mask of length " + std::to_string(column_mask.size()) +
                         " for " + std::to_string(n) + " columns");
  }
  auto live = [&](std::size_t j) { return column_mask.empty() || column_mask[j] != 0; };
  bool any = false;
  for (std::size_t j = 0; j < n; ++j) any = any || live(j);
  if (!any) throw ContractError("softmax_rows: every column is masked");

  const bool track = tracks(tape, {&x});
  Tensor out(x.shape(), track);
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (live(j)) mx = std::max(mx, xv[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = live(j) ? std::exp(xv[i * n + j] - mx) : 0.0;
      ov[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) ov[i * n + j] /= z;
  }
  if (track) {
    tape.record(out, [x, out, m, n]() mutable {
      const double s = adjoint_fault_scale("softmax_rows");
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          gx[i * n + j] += s * y[i * n + j] * (g[i * n + j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm_rows(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& shift) {
  require_rank(x, 2, "layer_norm_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.size() != d || shift.size() != d) {
    throw DimensionError("layer_norm_rows: gain/shift " + shape_str(gain.shape()) + "/" +
                         shape_str(shift.shape()) + " for width " + std::to_string(d));
  }
  const bool track = tracks(tape, {&x, &gain, &shift});
  Tensor out(x.shape(), track);
  std::vector<double> xhat(n * d), rstd(n);
  auto xv = x.data(), gv = gain.data(), sv = shift.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[i * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[i * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xv[i * d + j] - mu) * rstd[i];
      ov[i * d + j] = gv[j] * xhat[i * d + j] + sv[j];
    }
  }
  if (track) {
    tape.record(out, [x, gain, shift, out, n, d, xhat = std::move(xhat),
                      rstd = std::move(rstd)]() mutable {
      const double s = adjoint_fault_scale("layer_norm_rows");
      auto g = out.grad();
      auto gv = gain.data();
      if (gain.requires_grad()) {
        auto gg = gain.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gg[j] += s * g[i * d + j] * xhat[i * d + j];
      }
      if (shift.requires_grad()) {
        auto gs = shift.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gs[j] += s * g[i * d + j];
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < n; ++i) {
          double mean_dh = 0.0, mean_dh_xh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = g[i * d + j] * gv[j];
            mean_dh += dh;
            mean_dh_xh += dh * xhat[i * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_xh *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = g[i * d + j] * gv[j];
            gx[i * d + j] +=
                s * rstd[i] * (dh - mean_dh - xhat[i * d + j] * mean_dh_xh);
          }
        }
      }
    });
  }
  return out;
}

Tensor max_pool_segments(Tape& tape, const Tensor& x, std::size_t segments,
                         std::size_t segment_rows, std::span<const std::size_t> lengths) {
  require_rank(x, 2, "max_pool_segments");
  if (x.rows() != segments * segment_rows || lengths.size() != segments) {
    throw DimensionError("max_pool_segments: " + shape_str(x.shape()) + " is not " +
                         std::to_string(segments) + " segments of " +
                         std::to_string(segment_rows) + " rows");
  }
  const std::size_t d = x.cols();
  for (std::size_t len : lengths) {
    if (len > segment_rows) throw DimensionError("max_pool_segments: length exceeds segment");
  }
  const bool track = tracks(tape, {&x});
  Tensor out({segments, d}, track);
  std::vector<std::size_t> argmax(segments * d, 0);
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t s = 0; s < segments; ++s) {
    if (lengths[s] == 0) continue;
    const std::size_t base = s * segment_rows;
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = base;
      for (std::size_t t = 1; t < lengths[s]; ++t)
        if (xv[(base + t) * d + j] > xv[best * d + j]) best = base + t;
      argmax[s * d + j] = best;
      ov[s * d + j] = xv[best * d + j];
    }
  }
  if (track) {
    std::vector<std::size_t> lens(lengths.begin(), lengths.end());
    tape.record(out, [x, out, d, segments, argmax = std::move(argmax),
                      lens = std::move(lens)]() mutable {
      const double sc = adjoint_fault_scale("max_pool_segments");
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t s = 0; s < segments; ++s) {
        if (lens[s] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) gx[argmax[s * d + j] * d + j] += sc * g[s * d + j];
      }
    });
  }
  return out;
}

Tensor row_cosine(Tape& tape, const Tensor& e, const Tensor& v) {
  require_rank(e, 2, "row_cosine");
  const std::size_t n = e.rows(), d = e.cols();
  if (v.size() != d) {
    throw DimensionError("row_cosine: reference " + shape_str(v.shape()) + " for rows of " +
                         shape_str(e.shape()));
  }
  const bool track = tracks(tape, {&e, &v});
  Tensor out({n}, track);
  auto ev = e.data(), vv = v.data();
  double vn = 0.0;
  for (double a : vv) vn += a * a;
  vn = std::sqrt(vn);
  std::vector<double> en(n, 0.0);
  auto ov = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += ev[i * d + j] * vv[j];
      sq += ev[i * d + j] * ev[i * d + j];
    }
    en[i] = std::sqrt(sq);
    ov[i] = (en[i] > 0.0 && vn > 0.0) ? dot / (en[i] * vn) : 0.0;
  }
  if (track) {
    tape.record(out, [e, v, out, n, d, vn, en = std::move(en)]() mutable {
      const double s = adjoint_fault_scale("row_cosine");
      if (vn == 0.0) return;
      auto g = out.grad();
      auto ev = e.data(), vv = v.data();
      auto sim = out.data();
      for (std::size_t i = 0; i < n; ++i) {
        if (en[i] == 0.0 || g[i] == 0.0) continue;
        const double gi = s * g[i];
        const double inv = 1.0 / (en[i] * vn);
        if (e.requires_grad()) {
          auto ge = e.grad();
          const double c = sim[i] / (en[i] * en[i]);
          for (std::size_t j = 0; j < d; ++j)
            ge[i * d + j] += gi * (vv[j] * inv - c * ev[i * d + j]);
        }
        if (v.requires_grad()) {
          auto gv = v.grad();
          const double c = sim[i] / (vn * vn);
          for (std::size_t j = 0; j < d; ++j) gv[j] += gi * (ev[i * d + j] * inv - c * vv[j]);
        }
      }
    });
  }
  return out;
}

}  // namespace xltk
