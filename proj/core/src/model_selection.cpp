#include "wmcm/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "wmcm/error.hpp"
#include "wmcm/linalg.hpp"
#include "wmcm/parallel.hpp"

namespace wmcm {

std::vector<int> kfold_split(const IntVector& treatment, int folds, std::uint64_t seed) {
  const auto n = treatment.size();
  if (folds < 2) throw InvalidArgument("folds must be at least 2");
  if (folds > n) throw InvalidArgument("more folds than subjects");

  std::vector<Eigen::Index> treated, control;
  for (Eigen::Index i = 0; i < n; ++i)
    (treatment(i) > 0 ? treated : control).push_back(i);
  if (static_cast<int>(treated.size()) < folds || static_cast<int>(control.size()) < folds) {
    throw DataError("an arm has fewer subjects than folds (" + std::to_string(treated.size()) +
                    " treated, " + std::to_string(control.size()) + " control, " +
                    std::to_string(folds) + " folds)");
  }

  std::mt19937_64 rng(seed);
  std::shuffle(treated.begin(), treated.end(), rng);
  std::shuffle(control.begin(), control.end(), rng);

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  std::size_t position = 0;
  for (const auto* arm : {&treated, &control})
    for (auto i : *arm) assignment[static_cast<std::size_t>(i)] = static_cast<int>(position++ % folds);
  return assignment;
}

double cv_loss(const FactorModel& model, const Dataset& heldout,
               const WeightVector& a_heldout) {
  if (model.w.rows() != heldout.columns() || model.v.rows() != heldout.outcomes() ||
      a_heldout.a.size() != heldout.n()) {
    throw InvalidArgument("cv_loss: shape mismatch");
  }
  const Matrix resid = heldout.y - assemble_design(heldout) * (model.w * model.v.transpose());
  return a_heldout.a.array().square().matrix().dot(resid.rowwise().squaredNorm());
}

double cv_loss(const BaselineModel& model, const Dataset& heldout,
               const WeightVector& a_heldout) {
  if (model.gamma.rows() != heldout.columns() || model.gamma.cols() != heldout.outcomes() ||
      a_heldout.a.size() != heldout.n()) {
    throw InvalidArgument("cv_loss: shape mismatch");
  }
  Matrix resid = heldout.y - assemble_design(heldout) * model.gamma;
  if (model.main_effects) resid -= heldout.x * *model.main_effects;
  return a_heldout.a.array().square().matrix().dot(resid.rowwise().squaredNorm());
}

double lambda_scale(const Dataset& d, const WeightVector& a) {
  const Matrix g = a.a.asDiagonal() * assemble_design(d);
  const Matrix ay = a.a.asDiagonal() * d.y;
  return 2.0 * (g.transpose() * ay).rowwise().norm().maxCoeff();
}

double phi_scale(const Dataset& d, const WeightVector& a) {
  const Matrix z = assemble_design(d);
  const Matrix g = a.a.asDiagonal() * z;
  const Matrix gamma = linalg::ridge_least_squares(g, a.a.asDiagonal() * d.y, 1e-8);
  const Matrix resid = d.y - z * gamma;
  const Vector scaled = a.a.array().square() * resid.rowwise().norm().array();
  return 2.0 * scaled.maxCoeff();
}

std::vector<double> log_grid(double lo, double hi, int points, double scale) {
  if (points < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw InvalidArgument("log_grid: need points >= 1 and 0 < lo <= hi");
  }
  std::vector<double> out(static_cast<std::size_t>(points));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int k = 0; k < points; ++k) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    out[static_cast<std::size_t>(k)] = scale * std::exp(llo + frac * (lhi - llo));
  }
  return out;
}

CvGrid default_grid(const Dataset& d, const WeightVector& a, int folds, std::uint64_t seed) {
  CvGrid grid;
  double ls = lambda_scale(d, a);
  double ps = phi_scale(d, a);
  if (!(ls > 0.0)) ls = 1.0;
  if (!(ps > 0.0)) ps = 1.0;
  grid.lambdas = log_grid(1e-3, 1e1, 8, ls);
  grid.phis = log_grid(1e-3, 1e1, 8, ps);
  const auto max_rank = std::min<Eigen::Index>({d.columns(), d.outcomes(), 5});
  for (int r = 1; r <= max_rank; ++r) grid.ranks.push_back(r);
  grid.folds = folds;
  grid.seed = seed;
  return grid;
}

namespace {

void validate_grid(const Dataset& d, const CvGrid& grid, Method method) {
  if (grid.lambdas.empty() || grid.phis.empty() || grid.ranks.empty()) {
    throw InvalidArgument("cv grid axes must be non-empty");
  }
  for (double l : grid.lambdas)
    if (!(l >= 0.0) || std::isinf(l)) throw InvalidArgument("cv grid lambda must be finite and >= 0");
  for (double p : grid.phis)
    if (!(p >= 0.0)) throw InvalidArgument("cv grid phi must be >= 0");
  if (uses_rank(method)) {
    const auto max_rank = std::min(d.columns(), d.outcomes());
    for (int r : grid.ranks)
      if (r < 1 || r > max_rank) {
        throw InvalidArgument("cv grid rank " + std::to_string(r) + " outside [1, " +
                              std::to_string(max_rank) + "]");
      }
  }
  if (grid.folds < 2 || grid.folds > d.n() / 2) {
    throw InvalidArgument("folds must lie in [2, n/2]");
  }
}

struct FoldData {
  Dataset train, heldout;
  WeightVector a_train, a_heldout;
};

FoldData make_fold(const Dataset& d, const std::vector<int>& assignment, int fold,
                   PropensitySource source) {
  std::vector<Eigen::Index> tr, ho;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    (assignment[i] == fold ? ho : tr).push_back(static_cast<Eigen::Index>(i));
  FoldData f{d.subset(tr), d.subset(ho), {}, {}};
  switch (source) {
    case PropensitySource::rct_half:
      f.a_train = rct_weights(f.train.n());
      f.a_heldout = rct_weights(f.heldout.n());
      break;
    case PropensitySource::known:
      f.a_train = weights_for(f.train, source);
      f.a_heldout = weights_for(f.heldout, source);
      break;
    case PropensitySource::logistic_fit: {
      const LogisticFit lf = fit_logistic(f.train.x, f.train.treatment);
      f.a_train = compute_weights(f.train.treatment, lf.predict(f.train.x), source);
      f.a_heldout = compute_weights(f.heldout.treatment, lf.predict(f.heldout.x), source);
      break;
    }
  }
  return f;
}

std::string describe(const CvPoint& p, int fold) {
  std::ostringstream os;
  os << "cv grid point (lambda=" << p.lambda << ", phi=" << p.phi << ", rank=" << p.rank
     << "), fold " << fold << ": ";
  return os.str();
}

}  // namespace

CvResult cross_validate(const Dataset& d, const CvGrid& grid, Method method,
                        const CvOptions& options) {
  validate_grid(d, grid, method);
  CvResult res;
  res.method = method;
  res.grid = grid;
  if (!uses_phi(method)) res.grid.phis = {grid.phis.front()};
  if (!uses_rank(method)) res.grid.ranks = {grid.ranks.front()};
  res.fold_assignment = kfold_split(d.treatment, grid.folds, grid.seed);

  std::vector<FoldData> folds;
  folds.reserve(static_cast<std::size_t>(grid.folds));
  for (int f = 0; f < grid.folds; ++f)
    folds.push_back(make_fold(d, res.fold_assignment, f, options.propensity));

  const CvGrid& g = res.grid;
  std::vector<CvPoint> points;
  for (double l : g.lambdas)
    for (double p : g.phis)
      for (int r : g.ranks) points.push_back({l, p, r});

  const auto nf = static_cast<std::size_t>(grid.folds);
  res.per_fold_loss.assign(points.size() * nf, 0.0);
  parallel_for(points.size() * nf, options.threads, [&](std::size_t task) {
    const CvPoint& pt = points[task / nf];
    const auto f = static_cast<int>(task % nf);
    const FoldData& fd = folds[static_cast<std::size_t>(f)];
    try {
      const MethodParams params{pt.rank, pt.lambda, pt.phi};
      const BaselineModel model = fit_method(method, fd.train, fd.a_train, params, options.fit);
      res.per_fold_loss[task] = cv_loss(model, fd.heldout, fd.a_heldout);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(describe(pt, f) + e.what(), e.last_value());
    } catch (const NumericalError& e) {
      throw NumericalError(describe(pt, f) + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(describe(pt, f) + e.what());
    } catch (const DataError& e) {
      throw DataError(describe(pt, f) + e.what());
    }
  });

  res.mean_loss.resize(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    double total = 0.0;
    for (std::size_t f = 0; f < nf; ++f) total += res.per_fold_loss[k * nf + f];
    res.mean_loss[k] = total / static_cast<double>(nf);
  }

  // Ties go to the smaller rank, then the larger lambda, then the larger phi.
  std::size_t best = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double lk = res.mean_loss[k], lb = res.mean_loss[best];
    if (std::isnan(lk)) continue;
    bool better = std::isnan(lb) || lk < lb;
    if (!better && lk == lb) {
      const CvPoint &a = points[k], &b = points[best];
      if (a.rank != b.rank) better = a.rank < b.rank;
      else if (a.lambda != b.lambda) better = a.lambda > b.lambda;
      else better = a.phi > b.phi;
    }
    if (better) best = k;
  }
  res.best = points[best];
  return res;
}

}  // namespace wmcm
