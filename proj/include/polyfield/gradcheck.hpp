#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace polyfield {

/// Central finite-difference gradient of f at x with step h.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double h = 1e-5);

/// max_k |analytic_k - numeric_k| / max(max_k |analytic_k|, max_k |numeric_k|).
/// Zero when both gradients vanish.
double gradient_rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric);

struct GradCheckResult {
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckConfig {
  std::uint64_t seed = 0;
  int instances = 50;
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// Checks mask BCE, the AFM loss in both modes, the orthogonality loss, the
/// attraction data term and the full refinement energy on random instances.
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckConfig& cfg = {});

}  // namespace polyfield
