#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "wmcm/baselines.hpp"
#include "wmcm/model_selection.hpp"
#include "wmcm/types.hpp"

namespace wmcm {

enum class Design { rct, observational };

std::string_view to_string(Design design);
Design design_from_string(std::string_view name);

/// One cell of the simulation design. Defaults reproduce the standard
/// setting (n = 300 training, 1000 test subjects, q = 10 outcomes).
struct ScenarioSpec {
  std::string scenario_id;  // derived from the knobs when empty
  int p = 10;
  double g = 0.0;        // covariate equicorrelation
  double tau_pct = 0.0;  // percentage of outlying subjects
  double b = 0.40824829046386296;  // 6^{-1/2}
  int gamma_scenario = 1;
  double z = 0.0;  // error equicorrelation
  Design design = Design::rct;
  int n = 300;
  int n_test = 1000;
  int q = 10;
  int replications = 100;
  std::uint64_t seed = 0;
  // Interval of the uniform factor entries in scenarios 1 and 2.
  double factor_low = 0.0;
  double factor_high = 1.0;
  // Allows knob values outside the standard design grid.
  bool custom_design = false;
};

// Throws InvalidArgument for inconsistent specs, or for values outside the
// standard design unless `custom_design` is set.
void validate(const ScenarioSpec& spec);
std::string scenario_label(const ScenarioSpec& spec);

struct SimulatedTruth {
  Matrix gamma_true;  // (p+1) x q, first row zero
  Matrix b_true;      // (p+1) x q main-effect coefficients
  std::vector<Eigen::Index> outlier_rows;
  Dataset dataset;    // carries the true propensities
  Matrix test_x;
  Matrix true_cate_test;
};

// n x (p+1): an intercept column, then rows i.i.d. N(0, Sigma) with unit
// diagonal and off-diagonal g.
Matrix generate_covariates(int n, int p, double g, std::mt19937_64& rng);

// (p+1) x q treatment-effect matrix for scenarios 1-4 with a zero intercept
// row. Scenarios 1-2 draw factor entries from U(low, high).
Matrix generate_gamma(int scenario, int p, int q, std::mt19937_64& rng,
                      double low = 0.0, double high = 1.0);

// (p+1) x q main-effect matrix with value b on covariates 3..10 (1-based,
// intercept excluded) and zero elsewhere.
Matrix main_effect_matrix(int p, int q, double b);

// y_i = (B^T x_i) .* (B^T x_i) + T_i Gamma^T x_i / 2 + e_i, where e_i ~ N(0,
// Sigma_e) with diagonal `error_variance` and off-diagonal z.
Matrix generate_outcomes(const Matrix& x, const Matrix& gamma_true, const Matrix& b_true,
                         const IntVector& treatment, double z, std::mt19937_64& rng,
                         double error_variance = 2.0);

// Replaces every entry of round(n tau / 100) uniformly chosen rows with
// U(15, 20) draws. Returns the sorted row indices.
std::vector<Eigen::Index> inject_outliers(Matrix& y, double tau_pct, std::mt19937_64& rng);

// Draws T in {-1, +1}. Under the observational design
// P(T = +1) = 1 / (1 + exp(x_1 + ... + x_5)). The assignment probabilities
// are written to `propensity` when non-null.
IntVector assign_treatment(const Matrix& x, Design design, std::mt19937_64& rng,
                           Vector* propensity = nullptr);

// One replication's truth and data, a pure function of (spec, seed).
SimulatedTruth simulate(const ScenarioSpec& spec, std::uint64_t seed);

struct ReplicationRow {
  std::string scenario_id;
  int replication = 0;
  std::string method;
  std::string metric;  // mse, bias, spearman, auc; "error" for a failed fit
  double value = 0.0;  // NaN when undefined
  std::string message;  // failure reason for error rows
};

struct SweepOptions {
  bool cross_validate = true;
  // Empty axes are filled per replication from default_grid().
  CvGrid grid;
  // Tuning values used when cross_validate is false.
  MethodParams fixed;
  FitConfig fit;
  // Weight source for observational designs (RCTs always use pi = 0.5).
  PropensitySource observational_propensity = PropensitySource::logistic_fit;
  unsigned threads = 1;
};

inline constexpr const char* kMetricNames[] = {"mse", "bias", "spearman", "auc"};

/// Runs every replication of `spec` for each method: fresh seed per
/// replication, shared test design across methods, one row per
/// (replication, method, metric). Failures become "error" rows.
std::vector<ReplicationRow> run_scenario(const ScenarioSpec& spec,
                                         const std::vector<Method>& methods,
                                         const SweepOptions& options = {});

// Fits `method` on one replication the way run_scenario does (CV then
// refit, or fixed tuning values) and returns the coefficient estimate.
BaselineModel fit_replication(const SimulatedTruth& truth, const ScenarioSpec& spec,
                              Method method, const SweepOptions& options,
                              std::uint64_t replication_seed);

}  // namespace wmcm
