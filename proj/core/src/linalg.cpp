#include "wmcm/linalg.hpp"

#include <cmath>
#include <random>

namespace wmcm::linalg {

ThinSvd thin_svd(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  for (Eigen::Index k = 0; k < out.u.cols(); ++k) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.u.rows(); ++i) {
      const double mag = std::abs(out.u(i, k));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (out.u(arg, k) < 0.0) {
      out.u.col(k) *= -1.0;
      out.v.col(k) *= -1.0;
    }
  }
  return out;
}

Matrix solve_psd(const Matrix& a, const Matrix& b, double jitter, bool* jittered) {
  if (jittered) *jittered = false;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) {
    // Cholesky succeeds on some near-singular matrices; guard on the
    // conditioning of the factor's diagonal.
    const Vector diag = llt.matrixL().toDenseMatrix().diagonal().cwiseAbs();
    const double lo = diag.minCoeff();
    const double hi = diag.maxCoeff();
    if (hi > 0.0 && lo / hi > 1e-7) return llt.solve(b);
  }
  if (jittered) *jittered = true;
  const Matrix reg = a + jitter * Matrix::Identity(a.rows(), a.cols());
  Eigen::LDLT<Matrix> ldlt(reg);
  return ldlt.solve(b);
}

Matrix ridge_least_squares(const Matrix& g, const Matrix& f, double ridge) {
  Matrix gram = g.transpose() * g;
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(g.transpose() * f);
}

Matrix random_orthonormal(Eigen::Index q, Eigen::Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix raw(q, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < q; ++i) raw(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(raw);
  Matrix qm = qr.householderQ() * Matrix::Identity(q, r);
  return qm;
}

double orthonormality_error(const Matrix& v) {
  const Matrix gram = v.transpose() * v;
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

Vector row_norms(const Matrix& m) { return m.rowwise().norm(); }

}  // namespace wmcm::linalg
