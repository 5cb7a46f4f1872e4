#pragma once

#include <random>

#include "wmcm/types.hpp"
#include "wmcm/weights.hpp"

namespace testing_support {

using wmcm::Dataset;
using wmcm::IntVector;
using wmcm::Matrix;
using wmcm::Vector;

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

// Random two-arm data with an intercept column; `columns` counts it.
inline Dataset random_dataset(Eigen::Index n, Eigen::Index columns, Eigen::Index q,
                              std::uint64_t seed, double noise = 1.0) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.x = normal_matrix(n, columns, rng);
  d.x.col(0).setOnes();
  d.treatment.resize(n);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < n; ++i) d.treatment(i) = coin(rng) ? 1 : -1;
  d.treatment(0) = 1;
  d.treatment(1) = -1;
  const Matrix gamma = normal_matrix(columns, q, rng);
  const Matrix z = d.treatment.cast<double>().asDiagonal() * d.x / 2.0;
  d.y = z * gamma + normal_matrix(n, q, rng, noise);
  return d;
}

// Weights from random propensities in (0.2, 0.8).
inline wmcm::WeightVector random_weights(const IntVector& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  Vector pi(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) pi(i) = u(rng);
  return wmcm::compute_weights(t, pi);
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
  const double denom = b.norm();
  return denom > 0.0 ? (a - b).norm() / denom : (a - b).norm();
}

// Tight settings for oracle comparisons.
inline wmcm::FitConfig tight_config(int rank, double lambda = 0.0, double phi = 0.0) {
  wmcm::FitConfig cfg;
  cfg.rank = rank;
  cfg.lambda_w = lambda;
  cfg.phi_c = phi;
  cfg.outer_tol = 1e-15;
  cfg.inner_tol = 1e-13;
  cfg.max_outer = 5000;
  cfg.max_inner = 1000;
  return cfg;
}

}  // namespace testing_support
