#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmcm/solver.hpp"
#include "wmcm/types.hpp"
#include "wmcm/weights.hpp"

namespace wmcm {

// The proposed estimator and the four comparators, under one fit signature.
enum class Method { wmcmr4, wmcmrrr, wmcm_l1, wmcm, wfull };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

// Label used in result tables. Under an RCT design the comparators are
// reported without the leading "W" (MCMRRR, MCMl1, MCM, Full).
std::string display_name(Method method, bool rct);

bool uses_rank(Method method);
bool uses_phi(Method method);

/// Treatment-effect coefficients Gamma ((p+1) x q) from any estimator.
struct BaselineModel {
  Method method = Method::wmcm;
  Matrix gamma;
  // Main-effect coefficients B, wfull only.
  std::optional<Matrix> main_effects;
  // Factorization, for the reduced-rank methods.
  std::optional<FactorModel> factors;
  // Objective per iteration; the smoothed surrogate for wmcm_l1.
  std::vector<double> trace;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct MethodParams {
  int rank = 1;
  double lambda = 0.0;
  double phi = 0.0;
};

// Huber smoothing width of the l1 loss and its iteration cap.
struct L1Options {
  double delta = 1e-4;
  int max_iter = 50000;
};

// ||A (Y - Z W V^T)||_F^2 + lambda ||W||_{2,1}, V^T V = I: the robust solver
// with the outlier block frozen at zero.
BaselineModel fit_wmcmrrr(const Dataset& d, const WeightVector& a, int rank,
                          double lambda_w, const FitConfig& cfg);

// sum_ij huber_delta((A (Y - Z Gamma))_ij) + lambda ||Gamma||_{2,1} by
// proximal gradient with Barzilai-Borwein steps and backtracking. Throws
// ConvergenceError at the iteration cap.
BaselineModel fit_wmcm_l1(const Dataset& d, const WeightVector& a, double lambda_w,
                          const FitConfig& cfg, const L1Options& options = {});

// ||A (Y - Z Gamma)||_F^2 + lambda ||Gamma||_{2,1} by cyclic group descent.
BaselineModel fit_wmcm(const Dataset& d, const WeightVector& a, double lambda_w,
                       const FitConfig& cfg);

// ||A (Y - X B - Z Gamma)||_F^2 + lambda ||Gamma||_{2,1}, alternating an
// exact solve for B with group descent on Gamma.
BaselineModel fit_wfull(const Dataset& d, const WeightVector& a, double lambda_w,
                        const FitConfig& cfg);

// Dispatch on `method`; tolerances and caps come from `cfg`, the tuning
// parameters from `params` (ignored where a method has no such parameter).
BaselineModel fit_method(Method method, const Dataset& d, const WeightVector& a,
                         const MethodParams& params, const FitConfig& cfg);

// Sum of Huber(delta) over the entries of `residual`.
double smoothed_l1(const Matrix& residual, double delta);
// sum_i a_i sum_m Huber(r_im): the smoothed loss of fit_wmcm_l1, applied to
// unweighted residuals so that a uniform rescaling of `a` rescales the loss.
double smoothed_l1(const Matrix& residual, const Vector& a, double delta);

// Penalized objective of `model` as minimized by its method (the smoothed
// surrogate for wmcm_l1; the robust objective with C for wmcmr4).
double method_objective(const BaselineModel& model, const Dataset& d,
                        const WeightVector& a, const MethodParams& params,
                        const L1Options& options = {});

}  // namespace wmcm
