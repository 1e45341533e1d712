// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/stats.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "dlens/error.hpp"

namespace dlens {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  // y * eta - log(1 + e^eta), written to avoid overflow.
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[i] * e - softplus;
  }
  return ll;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    mu[i] = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
  }
  return mu;
}

std::string column_name(const LogitOptions& options, Eigen::Index j) {
  if (static_cast<std::size_t>(j) < options.column_names.size()) return options.column_names[j];
  return "x" + std::to_string(j);
}

void check_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LogitOptions& options) {
  if (x.rows() != y.size()) throw InvalidArgument("logistic_fit: design has " + std::to_string(x.rows()) +
                                                  " rows but " + std::to_string(y.size()) + " outcomes");
  if (x.cols() == 0) throw InvalidArgument("logistic_fit: empty design");
  if (x.rows() <= x.cols()) throw InvalidArgument("logistic_fit: need more observations than columns");
  if (!x.allFinite()) throw InvalidArgument("logistic_fit: design has non-finite entries");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw InvalidArgument("logistic_fit: outcomes must be 0 or 1");
  }
  for (Eigen::Index j = 1; j <= x.cols(); ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.leftCols(j));
    if (qr.rank() < j) {
      throw InvalidArgument("logistic_fit: design is rank deficient at column '" + column_name(options, j - 1) + "'");
    }
  }
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw InvalidArgument("regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_upper_tail(double x, double df) {
  if (!(df > 0.0)) throw InvalidArgument("chi_square_upper_tail: df must be positive");
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(df / 2.0, x / 2.0);
}

ProportionTest two_proportion_chisq(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw InvalidArgument("two_proportion_chisq: group sizes must be positive");
  if (k1 > n1 || k2 > n2) throw InvalidArgument("two_proportion_chisq: successes exceed group size");
  ProportionTest t{k1, n1, k2, n2};
  const double a = static_cast<double>(k1), b = static_cast<double>(n1 - k1);
  const double c = static_cast<double>(k2), d = static_cast<double>(n2 - k2);
  const double n = a + b + c + d;
  const double successes = a + c, failures = b + d;
  if (successes == 0.0 || failures == 0.0) {
    t.degenerate = true;
    return t;
  }
  // Closed form of sum (O - E)^2 / E for a 2x2 table.
  const double cross = a * d - b * c;
  t.chi2 = n * cross * cross / (static_cast<double>(n1) * static_cast<double>(n2) * successes * failures);
  t.p_value = chi_square_upper_tail(t.chi2, 1.0);
  return t;
}

LogitFit logistic_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcomes, const LogitOptions& options) {
  check_design(design, outcomes, options);
  const double positives = outcomes.sum();
  if (positives == 0.0 || positives == static_cast<double>(outcomes.size())) {
    throw NumericalError("logistic_fit: complete separation (all outcomes equal); no finite estimate");
  }

  const Eigen::Index p = design.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = design * beta;
  double ll = log_likelihood(eta, outcomes);

  LogitFit fit;
  fit.log_likelihood_trace.push_back(ll);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd mu = sigmoid(eta);
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    if (w.maxCoeff() < 1e-12) throw NumericalError("logistic_fit: IRLS weights collapsed (separation)");
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd score = design.transpose() * (outcomes - mu);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) throw NumericalError("logistic_fit: singular Fisher information");
    const Eigen::VectorXd step = ldlt.solve(score);

    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    Eigen::VectorXd next_eta = design * next;
    double next_ll = log_likelihood(next_eta, outcomes);
    int halvings = 0;
    while (!(next_ll >= ll) && halvings < 40) {
      scale /= 2.0;
      next = beta + scale * step;
      next_eta = design * next;
      next_ll = log_likelihood(next_eta, outcomes);
      ++halvings;
    }
    if (!(next_ll >= ll)) {
      // Step halving found no ascent: the fit is already at numerical optimum.
      next = beta;
      next_eta = eta;
      next_ll = ll;
    }
    if (next_ll < fit.log_likelihood_trace.back()) {
      throw InvariantViolation("logistic_fit: log-likelihood decreased");
    }
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    eta = next_eta;
    ll = next_ll;
    fit.log_likelihood_trace.push_back(ll);
    fit.n_iter = iter;
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e3) {
      throw NumericalError("logistic_fit: coefficients diverge (separation)");
    }
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw NumericalError("logistic_fit: no convergence after " + std::to_string(options.max_iter) +
                         " iterations (possible separation)");
  }

  const Eigen::VectorXd mu = sigmoid(eta);
  const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
  const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  fit.log_likelihood = ll;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(cov(j, j));
    if (!std::isfinite(se)) throw NumericalError("logistic_fit: non-finite standard error for '" +
                                                 column_name(options, j) + "'");
    const double z = beta[j] / se;
    fit.names.push_back(column_name(options, j));
    fit.coefficients.push_back(beta[j]);
    fit.standard_errors.push_back(se);
    fit.z_values.push_back(z);
    fit.p_values.push_back(std::erfc(std::abs(z) / std::sqrt(2.0)));
  }
  return fit;
}

}  // namespace dlens
