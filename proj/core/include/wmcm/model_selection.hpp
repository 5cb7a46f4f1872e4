#pragma once

#include <cstdint>
#include <vector>

#include "wmcm/baselines.hpp"
#include "wmcm/types.hpp"
#include "wmcm/weights.hpp"

namespace wmcm {

struct CvGrid {
  std::vector<double> lambdas;
  std::vector<double> phis;
  std::vector<int> ranks;
  int folds = 5;
  std::uint64_t seed = 0;
};

struct CvPoint {
  double lambda = 0.0;
  double phi = 0.0;
  int rank = 1;
};

/// Loss surface of a cross-validation run. Losses are stored flat, indexed
/// (lambda, phi, rank[, fold]) with the last index varying fastest.
struct CvResult {
  Method method = Method::wmcmr4;
  // Grid actually searched: axes a method ignores are collapsed to their
  // first value.
  CvGrid grid;
  std::vector<double> mean_loss;
  std::vector<double> per_fold_loss;
  CvPoint best;
  std::vector<int> fold_assignment;

  std::size_t index(std::size_t il, std::size_t ip, std::size_t ir) const {
    return (il * grid.phis.size() + ip) * grid.ranks.size() + ir;
  }
  double mean_at(std::size_t il, std::size_t ip, std::size_t ir) const {
    return mean_loss[index(il, ip, ir)];
  }
  double fold_at(std::size_t il, std::size_t ip, std::size_t ir, std::size_t f) const {
    return per_fold_loss[index(il, ip, ir) * static_cast<std::size_t>(grid.folds) + f];
  }
};

/// Seeded fold labels in [0, folds), stratified by arm: each arm is shuffled
/// and dealt round-robin, continuing across arms, so overall fold sizes and
/// per-arm fold counts each differ by at most one. Throws DataError when an
/// arm has fewer subjects than folds.
std::vector<int> kfold_split(const IntVector& treatment, int folds, std::uint64_t seed);

// sum over held-out rows of a_i^2 ||y_i - T_i V W^T x_i / 2||^2. C and the
// penalties are not part of the held-out loss.
double cv_loss(const FactorModel& model, const Dataset& heldout,
               const WeightVector& a_heldout);

// Same fidelity term for any method, including X B for wfull.
double cv_loss(const BaselineModel& model, const Dataset& heldout,
               const WeightVector& a_heldout);

// Smallest lambda that zeroes every row of Gamma at C = 0:
// 2 max_k ||g_k^T A Y||.
double lambda_scale(const Dataset& d, const WeightVector& a);

// Smallest phi that zeroes every row of C at the unpenalized weighted
// least-squares fit: 2 max_i a_i^2 ||r_i||.
double phi_scale(const Dataset& d, const WeightVector& a);

// `points` log-spaced values over [lo, hi] * scale.
std::vector<double> log_grid(double lo, double hi, int points, double scale);

// Eight log-spaced values over [1e-3, 1e1] times the scales above and ranks
// 1..min(p+1, q, 5).
CvGrid default_grid(const Dataset& d, const WeightVector& a, int folds = 5,
                    std::uint64_t seed = 0);

struct CvOptions {
  // Estimated propensities are refitted on each training fold.
  PropensitySource propensity = PropensitySource::rct_half;
  FitConfig fit;  // tolerances and caps; tuning values come from the grid
  unsigned threads = 1;
};

CvResult cross_validate(const Dataset& d, const CvGrid& grid, Method method,
                        const CvOptions& options = {});

}  // namespace wmcm
