#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrst/tape.hpp"

namespace mrst {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // input index / coordinate of the worst disagreement
  int worst_input = -1;
  int64_t worst_coord = -1;
};

// A scalar-valued tensor function under test. The same callable is used for
// the analytic pass (backward through the tape) and for the numeric
// re-evaluations, so it must be re-runnable.
using TensorFn =
    std::function<Tensor<double>(Tape<double>&, std::vector<Tensor<double>>&)>;

// Central finite differences per coordinate against the tape's gradients.
// Relative error is |a - n| / max(|a|, |n|, 1). Inputs marked requires_grad
// are the ones checked; the rest are treated as constants.
GradCheckReport grad_check(const TensorFn& f, std::vector<Tensor<double>> inputs,
                           double h, double tol);

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;
  int instances = 0;
};

// Runs every differentiable op plus a deep composite graph on random f64
// instances. Used by the `gradcheck` CLI command and the acceptance suite.
std::vector<GradSuiteEntry> run_gradient_suite(int instances_per_op,
                                               uint64_t seed);

bool gradient_suite_passed(const std::vector<GradSuiteEntry>& results);

}  // namespace mrst
