#pragma once

#include <cstdint>

#include "wmcm/types.hpp"

namespace wmcm::linalg {

struct ThinSvd {
  Matrix u;  // m x k
  Vector d;  // k, non-increasing
  Matrix v;  // n x k
};

// Thin SVD with a deterministic sign convention: in each left singular
// vector the entry of largest magnitude is positive (first index wins ties).
ThinSvd thin_svd(const Matrix& m);

// Solves (A + jitter I) X = B for symmetric positive semi-definite A.
// `jitter` is only added when the plain Cholesky factorization fails or is
// numerically singular; `jittered` reports whether that happened.
Matrix solve_psd(const Matrix& a, const Matrix& b, double jitter,
                 bool* jittered = nullptr);

// Argmin of ||F - G B||_F^2 + ridge ||B||_F^2.
Matrix ridge_least_squares(const Matrix& g, const Matrix& f, double ridge);

// q x r matrix with orthonormal columns drawn from a Gaussian matrix.
Matrix random_orthonormal(Eigen::Index q, Eigen::Index r, std::uint64_t seed);

// max |V^T V - I|.
double orthonormality_error(const Matrix& v);

// Euclidean norms of the rows of m.
Vector row_norms(const Matrix& m);

}  // namespace wmcm::linalg
