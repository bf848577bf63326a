#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace xltk {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kNonlinearTolerance = 1e-4;
inline constexpr double kLinearTolerance = 1e-6;
// Denominator floor for the relative error so that exact-zero gradients do
// not turn floating-point noise into a failure.
inline constexpr double kRelativeErrorFloor = 1e-6;

double relative_error(double analytic, double numeric);

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool finite = true;
  bool passed() const { return finite && max_rel_error <= tolerance; }
};

// Compares the taped gradient of scalar_fn with respect to every element of
// every tensor in `wrt` against central finite differences. scalar_fn must
// rebuild its graph on the tape it is given and read the tensors in `wrt`.
GradcheckResult check_scalar_gradient(const std::string& name,
                                      const std::function<Tensor(Tape&)>& scalar_fn,
                                      std::vector<Tensor> wrt, double tolerance,
                                      double step = kGradcheckStep);

// Same, for a tensor-valued function: the scalar is a fixed random projection
// sum(r ⊙ f(x)).
GradcheckResult check_op_gradient(const std::string& name,
                                  const std::function<Tensor(Tape&)>& fn,
                                  std::vector<Tensor> wrt, double tolerance, Rng& rng);

struct OpCase {
  std::string name;
  bool linear = false;
  std::function<GradcheckResult(Rng&)> run;
};

// One case per differentiable op, each op listed exactly once.
const std::vector<OpCase>& op_cases();

}  // namespace xltk
