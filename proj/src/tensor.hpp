#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xltk {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/**
 * Dense row-major array of doubles with an optional gradient buffer.
 *
 * Tensor is a handle: copies alias the same storage, and const applies to the
 * handle rather than the values. Use clone() for a deep copy and detach() for
 * a deep copy that drops gradient tracking.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading dimension of a rank-2 tensor.
  std::size_t rows() const;
  // Trailing dimension of a rank-2 tensor.
  std::size_t cols() const;

  std::span<double> data() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  // Gradient buffer; allocated as zeros on first mutable access.
  std::span<double> grad() const;
  void zero_grad() const;
  void drop_grad() const;

  Tensor clone() const;
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> gradient;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

/**
 * Ordered record of differentiable operations.
 *
 * Ops append one adjoint closure per output. backward() replays the closures
 * in reverse registration order. A tape constructed with recording == false
 * registers nothing, which is how inference runs.
 *
 * Leaf gradients accumulate across backward() calls; intermediate gradients
 * are reset at the start of every call so repeated calls add exactly one
 * copy of the gradient each time.
 */
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  void record(const Tensor& out, std::function<void()> adjoint);
  void backward(const Tensor& loss);
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    Tensor out;
    std::function<void()> adjoint;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

// True when an op on `inputs` must be recorded on `tape`.
bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs);

// Test hook for the gradient checker's negative control: scales the adjoint of
// the named op by 1.5. An empty name clears the fault. Unknown names throw.
void set_adjoint_fault(std::string_view op_name);
double adjoint_fault_scale(std::string_view op_name);

// --- linear algebra -------------------------------------------------------

// [m×k]·[k×n] → [m×n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// [m×k]·[n×k]ᵀ → [m×n]
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);
// x·Wᵀ + b with W stored [out×in]; bias may be undefined.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// --- elementwise ----------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
// Adds a length-n vector to every row of an [m×n] tensor.
Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row);
Tensor scale(Tape& tape, const Tensor& x, double factor);
// Multiplies every element by a single-element tensor.
Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor);
// Multiplies row i of [n×d] by g[i].
Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& g);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);

// --- reductions -----------------------------------------------------------

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
// Euclidean norm of the whole tensor, shape [1].
Tensor l2_norm(Tape& tape, const Tensor& x);

// --- structure ------------------------------------------------------------

// All inputs must agree on every dimension except `axis`.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t count);
// Rows of a rank-2 table selected by index. Rows equal to `frozen_row` receive
// no gradient (used to keep PAD embeddings at zero).
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                   std::optional<std::size_t> frozen_row = std::nullopt);

// --- normalization / attention / pooling ---------------------------------

// Row-wise softmax of [m×n]. Columns with column_mask[j] == 0 get weight 0.
Tensor softmax_rows(Tape& tape, const Tensor& x,
                    std::span<const std::uint8_t> column_mask = {});

inline constexpr double kLayerNormEps = 1e-5;

// Per-row layer normalization with learned gain and shift, both length d.
Tensor layer_norm_rows(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& shift);

// x holds `segments` blocks of `segment_rows` rows each. Returns
// [segments×d] where row s is the column-wise max over the first lengths[s]
// rows of block s. Gradient goes to the first argmax on ties; a block with
// length 0 yields zeros.
Tensor max_pool_segments(Tape& tape, const Tensor& x, std::size_t segments,
                         std::size_t segment_rows, std::span<const std::size_t> lengths);

// Cosine similarity of each row of e [n×d] with v [d]; zero-norm rows give 0.
Tensor row_cosine(Tape& tape, const Tensor& e, const Tensor& v);

}  // namespace xltk
