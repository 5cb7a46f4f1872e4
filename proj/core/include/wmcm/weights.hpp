#pragma once

#include <string_view>

#include "wmcm/types.hpp"

namespace wmcm {

enum class PropensitySource { known, rct_half, logistic_fit };

std::string_view to_string(PropensitySource source);
PropensitySource propensity_source_from_string(std::string_view name);

/// Subject weights a_i = 1 / sqrt(T_i pi_i + (1 - T_i) / 2), i.e.
/// 1/sqrt(pi_i) for treated and 1/sqrt(1 - pi_i) for control subjects.
struct WeightVector {
  Vector a;
  Vector pi;
  PropensitySource source = PropensitySource::known;
};

WeightVector compute_weights(const IntVector& treatment, const Vector& pi,
                             PropensitySource source = PropensitySource::known);

// pi = 0.5 and a = sqrt(2) everywhere. Constant weights do not move the
// minimizer of any objective here, so this is equivalent to A = I.
WeightVector rct_weights(Eigen::Index n);

struct LogisticOptions {
  int max_iter = 100;
  double tol = 1e-10;    // relative change in deviance
  double ridge = 1e-8;   // added to the IRLS normal equations
  double clip = 1e-6;    // probabilities are clipped to [clip, 1 - clip]
};

/// Maximum-likelihood logistic model for P(T = +1 | x), fitted by IRLS.
/// `x` must already contain whatever intercept column is wanted.
struct LogisticFit {
  Vector coef;
  double deviance = 0.0;
  int iterations = 0;
  double clip = 1e-6;

  Vector predict(const Matrix& x) const;
};

LogisticFit fit_logistic(const Matrix& x, const IntVector& treatment,
                         const LogisticOptions& options = {});

// Fitted, clipped probabilities on the training rows.
Vector fit_propensity_logistic(const Matrix& x, const IntVector& treatment,
                               const LogisticOptions& options = {});

// Weights for `d` from the requested source. `known` requires
// d.propensity.
WeightVector weights_for(const Dataset& d, PropensitySource source);

}  // namespace wmcm
