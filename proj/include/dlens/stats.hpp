// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dlens {

struct ProportionTest {
  std::size_t k1 = 0, n1 = 0, k2 = 0, n2 = 0;
  double chi2 = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // a zero pooled margin; chi2 = 0 and p = 1 by convention
};

/// Uncorrected Pearson chi-square on the 2x2 table (k1, n1 - k1; k2, n2 - k2)
/// with a 1-df upper-tail p-value.
ProportionTest two_proportion_chisq(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);

/// Regularized upper incomplete gamma Q(a, x), by series for x < a + 1 and
/// Lentz's continued fraction otherwise.
double regularized_gamma_q(double a, double x);

/// P(X > x) for X ~ chi-square with `df` degrees of freedom.
double chi_square_upper_tail(double x, double df);

struct LogitOptions {
  int max_iter = 100;
  double tol = 1e-8;
  /// Names used in error messages and output; defaults to "x0", "x1", ...
  std::vector<std::string> column_names;
};

struct LogitFit {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> z_values;
  std::vector<double> p_values;  // two-sided Wald
  bool converged = false;
  int n_iter = 0;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;  // one entry per iteration, starting at beta = 0
};

/// Maximum-likelihood logistic regression by IRLS with step halving.
/// Converged when the largest coefficient update is below tol. Throws
/// InvalidArgument on malformed input or a rank-deficient design (naming the
/// first dependent column) and NumericalError on separation or
/// non-convergence; no coefficients are returned in those cases.
LogitFit logistic_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcomes,
                      const LogitOptions& options = {});

}  // namespace dlens
