#pragma once

#include <optional>

#include "wmcm/types.hpp"

namespace wmcm {

struct MetricsReport {
  double mse = 0.0;
  double bias = 0.0;
  double spearman = 0.0;
  std::optional<double> auc;  // undefined when the truth has a single class
  Eigen::Index n_test = 0;
  Eigen::Index q = 0;
};

// (1 / (n q)) ||X Gamma_hat - X Gamma||_F^2
double mse(const Matrix& x_test, const Matrix& gamma_hat, const Matrix& gamma_true);

// (1 / (n q)) |sum_ij (x_i^T gamma_hat_j - x_i^T gamma_j)|
double bias(const Matrix& x_test, const Matrix& gamma_hat, const Matrix& gamma_true);

/// Rank correlation 1 - 6 sum (r_hat - r)^2 / (m (m^2 - 1)) with ranks taken
/// in descending order and ties given their average rank. Returns 0 when
/// every estimated score is exactly zero (an all-zero coefficient estimate).
double spearman(const Vector& score_hat, const Vector& score_true);

/// ROC area of `score_hat` for the label 1{score_true > 0}, via the
/// Mann-Whitney statistic with half credit for ties. std::nullopt when all
/// labels agree.
std::optional<double> auc(const Vector& score_hat, const Vector& score_true);

// Descending-order ranks (1 = largest) with ties averaged.
Vector descending_ranks(const Vector& values);

MetricsReport evaluate(const Matrix& x_test, const Matrix& gamma_hat,
                       const Matrix& gamma_true);

}  // namespace wmcm
