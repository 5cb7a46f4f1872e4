#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace wmcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Observed data for one study.
///
/// `x` carries the intercept as column 0. `treatment` is coded -1 (control)
/// / +1 (treated). `propensity`, when present, holds P(T = +1 | x) per row.
struct Dataset {
  Matrix x;
  Matrix y;
  IntVector treatment;
  std::optional<Vector> propensity;

  Eigen::Index n() const { return x.rows(); }
  // Number of covariate columns including the intercept (p + 1).
  Eigen::Index columns() const { return x.cols(); }
  Eigen::Index outcomes() const { return y.cols(); }

  // Rows selected by `rows`, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Low-rank factorization of the treatment-effect coefficients,
/// Gamma = W V^T, together with the per-subject outlier offsets C.
struct FactorModel {
  Matrix w;  // (p+1) x r loadings
  Matrix v;  // q x r, orthonormal columns
  Matrix c;  // n x q outlier offsets (training rows)

  Eigen::Index rank() const { return w.cols(); }
  Matrix gamma() const { return w * v.transpose(); }
};

enum class Initialization {
  // Ridge-stabilised weighted least squares followed by a rank-r truncation.
  weighted_ls,
  // Random orthonormal V drawn from `seed`, W = 0.
  random,
};

struct FitConfig {
  int rank = 1;
  double lambda_w = 0.0;  // group penalty on rows of W
  // Group penalty on rows of C. +infinity freezes C at zero.
  double phi_c = 0.0;
  double outer_tol = 1e-6;  // relative to the initial objective
  double inner_tol = 1e-8;
  int max_outer = 500;
  int max_inner = 100;
  std::uint64_t seed = 0;
  Initialization init = Initialization::weighted_ls;
};

/// Per-subject conditional treatment effects Gamma^T x_i and their row sums.
struct CateEstimate {
  Matrix values;
  Vector score;
};

enum class TreatmentCoding {
  plus_minus_one,  // already -1 / +1
  zero_one,        // 0 -> -1, 1 -> +1
};

struct ValidateOptions {
  bool add_intercept = false;
  TreatmentCoding coding = TreatmentCoding::plus_minus_one;
};

// Checks shapes, codes the treatment as -1/+1, optionally prepends an
// intercept column and rejects single-arm data, non-finite entries and
// propensities outside (0, 1). Throws DataError.
Dataset validate_dataset(const Matrix& raw_x, const Matrix& raw_y,
                         const IntVector& raw_t,
                         const std::optional<Vector>& propensity,
                         const ValidateOptions& options = {});

// Overload revalidating an existing dataset as-is.
Dataset validate_dataset(const Dataset& d);

// Z = diag(T) X / 2.
Matrix assemble_design(const Dataset& d);

}  // namespace wmcm
