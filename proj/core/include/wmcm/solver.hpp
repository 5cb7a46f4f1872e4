#pragma once

#include <vector>

#include "wmcm/types.hpp"
#include "wmcm/weights.hpp"

namespace wmcm {

/// Progress record of one alternating fit.
///
/// `objective[0]` is the objective at the initial point; entry t is the
/// objective after outer iteration t. `c_sweeps[t-1]` / `w_sweeps[t-1]` are
/// the inner sweep counts used in that iteration.
struct FitTrace {
  std::vector<double> objective;
  std::vector<int> c_sweeps;
  std::vector<int> w_sweeps;
  bool converged = false;
  int outer_iters = 0;
};

struct FitResult {
  FactorModel model;
  FitTrace trace;
};

// Tolerance on max|V^T V - I| accepted by objective().
inline constexpr double kOrthonormalTolerance = 1e-8;

/// sum_i a_i^2 ||y_i - T_i V W^T x_i / 2 - c_i||^2
///   + phi_c sum_i ||c_i|| + lambda_w sum_k ||w_k||.
/// With phi_c = +inf the C penalty counts as 0 when C is zero.
double objective(const FactorModel& model, const Dataset& d, const WeightVector& a,
                 const FitConfig& cfg);

// (1 - t / ||v||)_+ v. Returns the zero vector when ||v|| <= t.
Vector group_soft_threshold(const Eigen::Ref<const Vector>& v, double t);

/// Row-wise group-lasso coordinate descent for
///   min_B ||target - G B||_F^2 + lambda sum_k ||b_k||_2
/// starting from `coef`. Sweeps rows cyclically until the largest row change
/// of a sweep is below `tol` or `max_sweeps` is reached. Rows whose design
/// column has zero norm are set to zero. Returns the number of sweeps.
int group_lasso_rows(const Matrix& g, const Matrix& target, Matrix& coef,
                     double lambda, double tol, int max_sweeps);

// Cyclic closed-form updates of the outlier rows for fixed (W, V).
Matrix update_outlier_rows(const Matrix& c, const Dataset& d, const WeightVector& a,
                           const Matrix& w, const Matrix& v, double phi_c,
                           double inner_tol, int max_inner, int* sweeps = nullptr);

// Group-lasso row updates of W for fixed (C, V); V must be orthonormal.
Matrix update_loading_rows(const Matrix& w, const Dataset& d, const WeightVector& a,
                           const Matrix& c, const Matrix& v, double lambda_w,
                           double inner_tol, int max_inner, int* sweeps = nullptr);

/// Orthogonal Procrustes step for V given (W, C): with G = A Z and
/// F = A (Y - C), M = W^T G^T F = U D S^T and V = S U^T. If M is exactly
/// zero `v_prev` is returned unchanged.
Matrix update_orthogonal_factor(const Matrix& w, const Dataset& d,
                                const WeightVector& a, const Matrix& c,
                                const Matrix& v_prev);

/// Alternating C -> W -> V minimization of the weighted robust reduced-rank
/// objective. Throws InvalidArgument when the rank is out of range and
/// NumericalError on a non-finite objective.
FitResult fit(const Dataset& d, const WeightVector& a, const FitConfig& cfg);

// Deterministic fit plus `restarts` random-initialization fits with seeds
// derived from cfg.seed; keeps the lowest final objective.
FitResult fit_with_restarts(const Dataset& d, const WeightVector& a,
                            const FitConfig& cfg, int restarts);

CateEstimate predict_cate(const FactorModel& model, const Matrix& x_new);

}  // namespace wmcm
