#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "data.hpp"
#include "imbalance.hpp"

namespace xltk {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckResult check_scalar_gradient(const std::string& name,
                                      const std::function<Tensor(Tape&)>& scalar_fn,
                                      std::vector<Tensor> wrt, double tolerance, double step) {
  GradcheckResult res;
  res.name = name;
  res.tolerance = tolerance;

  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.drop_grad();
  }
  {
    Tape tape;
    Tensor loss = scalar_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape quiet(false);
    return scalar_fn(quiet).item();
  };
  for (auto& t : wrt) {
    auto values = t.data();
    auto grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = eval();
      values[i] = orig - step;
      const double down = eval();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        res.finite = false;
      } else {
        res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
      }
      ++res.checked;
    }
  }
  return res;
}

GradcheckResult check_op_gradient(const std::string& name,
                                  const std::function<Tensor(Tape&)>& fn,
                                  std::vector<Tensor> wrt, double tolerance, Rng& rng) {
  Tensor probe;
  auto projected = [&](Tape& tape) {
    Tensor y = fn(tape);
    if (!probe.defined()) {
      probe = Tensor(y.shape());
      for (auto& v : probe.data()) v = rng.uniform(-1.0, 1.0);
    }
    return sum(tape, mul(tape, y, probe));
  };
  return check_scalar_gradient(name, projected, std::move(wrt), tolerance);
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape), true);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values whose magnitudes stay well clear of zero, for kinked ops.
Tensor spread_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = 0.2 + 0.1 * static_cast<double>(i) + rng.uniform(0.0, 0.05);
    v[i] = rng.bernoulli(0.5) ? mag : -mag;
  }
  rng.shuffle(v);
  return Tensor(std::move(shape), std::move(v), true);
}

OpCase unary_case(std::string name, bool linear,
                  std::function<Tensor(Tape&, const Tensor&)> op,
                  std::function<Tensor(Rng&)> make) {
  return {name, linear, [name, linear, op, make](Rng& rng) {
            Tensor x = make(rng);
            return check_op_gradient(
                name, [&](Tape& t) { return op(t, x); }, {x},
                linear ? kLinearTolerance : kNonlinearTolerance, rng);
          }};
}

std::vector<OpCase> build_cases() {
  std::vector<OpCase> cases;
  auto r34 = [](Rng& rng) { return random_tensor({3, 4}, rng); };

  cases.push_back({"matmul", true, [](Rng& rng) {
                     Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
                     return check_op_gradient(
                         "matmul", [&](Tape& t) { return matmul(t, a, b); }, {a, b},
                         kLinearTolerance, rng);
                   }});
  cases.push_back({"matmul_nt", true, [](Rng& rng) {
                     Tensor a = random_tensor({3, 4}, rng), b = random_tensor({5, 4}, rng);
                     return check_op_gradient(
                         "matmul_nt", [&](Tape& t) { return matmul_nt(t, a, b); }, {a, b},
                         kLinearTolerance, rng);
                   }});
  cases.push_back({"linear", true, [](Rng& rng) {
                     Tensor x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng),
                            b = random_tensor({5}, rng);
                     return check_op_gradient(
                         "linear", [&](Tape& t) { return linear(t, x, w, b); }, {x, w, b},
                         kLinearTolerance, rng);
                   }});
  auto binary = [&](std::string name, Tensor (*op)(Tape&, const Tensor&, const Tensor&)) {
    cases.push_back({name, true, [name, op](Rng& rng) {
                       Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
                       return check_op_gradient(
                           name, [&](Tape& t) { return op(t, a, b); }, {a, b},
                           kLinearTolerance, rng);
                     }});
  };
  binary("add", add);
  binary("sub", sub);
  binary("mul", mul);
  cases.push_back({"add_row", true, [](Rng& rng) {
                     Tensor x = random_tensor({3, 4}, rng), r = random_tensor({4}, rng);
                     return check_op_gradient(
                         "add_row", [&](Tape& t) { return add_row(t, x, r); }, {x, r},
                         kLinearTolerance, rng);
                   }});
  cases.push_back(unary_case(
      "scale", true, [](Tape& t, const Tensor& x) { return scale(t, x, -1.7); }, r34));
  cases.push_back({"scale_by", true, [](Rng& rng) {
                     Tensor x = random_tensor({3, 4}, rng), f = random_tensor({1}, rng);
                     return check_op_gradient(
                         "scale_by", [&](Tape& t) { return scale_by(t, x, f); }, {x, f},
                         kLinearTolerance, rng);
                   }});
  cases.push_back({"scale_rows", true, [](Rng& rng) {
                     Tensor x = random_tensor({3, 4}, rng), g = random_tensor({3}, rng);
                     return check_op_gradient(
                         "scale_rows", [&](Tape& t) { return scale_rows(t, x, g); }, {x, g},
                         kLinearTolerance, rng);
                   }});
  cases.push_back(unary_case(
      "sigmoid", false, [](Tape& t, const Tensor& x) { return sigmoid(t, x); },
      [](Rng& rng) { return random_tensor({3, 4}, rng, -3.0, 3.0); }));
  cases.push_back(unary_case(
      "tanh", false, [](Tape& t, const Tensor& x) { return tanh(t, x); },
      [](Rng& rng) { return random_tensor({3, 4}, rng, -2.0, 2.0); }));
  cases.push_back(unary_case(
      "relu", false, [](Tape& t, const Tensor& x) { return relu(t, x); },
      [](Rng& rng) { return spread_tensor({3, 4}, rng); }));
  cases.push_back(unary_case(
      "exp", false, [](Tape& t, const Tensor& x) { return exp(t, x); }, r34));
  cases.push_back(unary_case(
      "log", false, [](Tape& t, const Tensor& x) { return log(t, x); },
      [](Rng& rng) { return random_tensor({3, 4}, rng, 0.3, 3.0); }));
  cases.push_back(unary_case(
      "sum", true, [](Tape& t, const Tensor& x) { return sum(t, x); }, r34));
  cases.push_back(unary_case(
      "mean", true, [](Tape& t, const Tensor& x) { return mean(t, x); }, r34));
  cases.push_back(unary_case(
      "l2_norm", false, [](Tape& t, const Tensor& x) { return l2_norm(t, x); }, r34));
  cases.push_back({"concat", true, [](Rng& rng) {
                     Tensor a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng),
                            c = random_tensor({2, 6}, rng);
                     return check_op_gradient(
                         "concat",
                         [&](Tape& t) {
                           Tensor cols = concat(t, {a, b}, 1);
                           return concat(t, {cols, c}, 0);
                         },
                         {a, b, c}, kLinearTolerance, rng);
                   }});
  cases.push_back({"slice", true, [](Rng& rng) {
                     Tensor x = random_tensor({4, 5}, rng);
                     return check_op_gradient(
                         "slice",
                         [&](Tape& t) { return slice(t, slice(t, x, 1, 1, 3), 0, 1, 2); }, {x},
                         kLinearTolerance, rng);
                   }});
  cases.push_back({"gather_rows", true, [](Rng& rng) {
                     Tensor table = random_tensor({5, 3}, rng);
                     const std::vector<std::size_t> ids = {2, 0, 4, 2, 1};  // row 2 twice
                     return check_op_gradient(
                         "gather_rows", [&](Tape& t) { return gather_rows(t, table, ids); },
                         {table}, kLinearTolerance, rng);
                   }});
  cases.push_back({"softmax_rows", false, [](Rng& rng) {
                     Tensor x = random_tensor({3, 5}, rng, -2.0, 2.0);
                     const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1};
                     return check_op_gradient(
                         "softmax_rows", [&](Tape& t) { return softmax_rows(t, x, mask); },
                         {x}, kNonlinearTolerance, rng);
                   }});
  cases.push_back({"layer_norm_rows", false, [](Rng& rng) {
                     Tensor x = random_tensor({2, 8}, rng), g = random_tensor({8}, rng, 0.5, 1.5),
                            b = random_tensor({8}, rng);
                     return check_op_gradient(
                         "layer_norm_rows",
                         [&](Tape& t) { return layer_norm_rows(t, x, g, b); }, {x, g, b},
                         kNonlinearTolerance, rng);
                   }});
  cases.push_back({"max_pool_segments", false, [](Rng& rng) {
                     Tensor x = spread_tensor({6, 3}, rng);
                     const std::vector<std::size_t> lengths = {3, 2};
                     return check_op_gradient(
                         "max_pool_segments",
                         [&](Tape& t) { return max_pool_segments(t, x, 2, 3, lengths); }, {x},
                         kNonlinearTolerance, rng);
                   }});
  cases.push_back({"row_cosine", false, [](Rng& rng) {
                     Tensor e = random_tensor({4, 5}, rng), v = random_tensor({5}, rng);
                     return check_op_gradient(
                         "row_cosine", [&](Tape& t) { return row_cosine(t, e, v); }, {e, v},
                         kNonlinearTolerance, rng);
                   }});
  cases.push_back({"focal_loss", false, [](Rng& rng) {
                     Tensor p = random_tensor({3, kNumLabels}, rng, 0.05, 0.95);
                     std::vector<std::uint8_t> y(p.size());
                     for (auto& v : y) v = rng.bernoulli(0.4) ? 1 : 0;
                     ClassWeights w;
                     for (auto& a : w.alpha) a = rng.uniform(0.05, 0.95);
                     const double gamma = rng.uniform(0.5, 3.0);
                     return check_scalar_gradient(
                         "focal_loss",
                         [&](Tape& t) { return focal_loss(t, p, y, w, gamma); }, {p},
                         kNonlinearTolerance);
                   }});
  return cases;
}

}  // namespace

const std::vector<OpCase>& op_cases() {
  static const std::vector<OpCase> cases = build_cases();
  return cases;
}

}  // namespace xltk
