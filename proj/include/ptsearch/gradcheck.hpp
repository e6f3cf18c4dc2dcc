#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ptsearch/optim.hpp"
#include "ptsearch/tape.hpp"

namespace ptsearch {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  // smallest |leaky_relu input| seen across evaluations; callers reject
  // fixtures where this is too close to the kink for central differences
  double kink_margin = std::numeric_limits<double>::infinity();
};

// Compares backward() against central finite differences on every parameter
// element. `build` must reconstruct the forward pass from the store's current
// values and return the 1x1 loss node.
template <typename BuildLoss>
GradCheckReport grad_check(ParamStore& params, BuildLoss&& build, double h = 1e-5) {
  if (sizeof(real) != 8)
    throw std::logic_error("grad_check requires the 64-bit build");

  GradCheckReport report;

  Tape tape;
  ValueId loss = build(tape);
  params.zero_grad();
  tape.backward(loss);
  report.kink_margin = std::min(report.kink_margin, tape.kink_margin());

  std::vector<Matrix> analytic;
  analytic.reserve(params.count());
  for (const std::string& name : params.names()) analytic.push_back(params.grad(name));

  auto eval = [&]() -> double {
    Tape t;
    ValueId l = build(t);
    report.kink_margin = std::min(report.kink_margin, t.kink_margin());
    return double(t.value(l).data[0]);
  };

  for (std::size_t p = 0; p < params.names().size(); ++p) {
    const std::string& name = params.names()[p];
    Matrix& theta = params.value(name);
    for (std::size_t i = 0; i < theta.data.size(); ++i) {
      const real orig = theta.data[i];
      theta.data[i] = orig + real(h);
      const double up = eval();
      theta.data[i] = orig - real(h);
      const double down = eval();
      theta.data[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double ad = double(analytic[p].data[i]);
      const double denom = std::max({std::abs(ad), std::abs(fd), 1e-6});
      const double rel = std::abs(ad - fd) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace ptsearch
