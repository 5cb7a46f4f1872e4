#include "wmcm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wmcm/error.hpp"
#include "wmcm/linalg.hpp"
#include "wmcm/seed.hpp"

namespace wmcm {

namespace {

// Quantities of one (dataset, weights) pair reused across sweeps.
struct Problem {
  const Dataset& d;
  Vector a;
  Vector a2;
  Matrix z;   // T X / 2
  Matrix g;   // A Z
  Matrix ay;  // A Y

  Problem(const Dataset& data, const WeightVector& weights)
      : d(data), a(weights.a), a2(weights.a.array().square()),
        z(assemble_design(data)), g(a.asDiagonal() * z), ay(a.asDiagonal() * data.y) {
    if (a.size() != d.n()) {
      throw InvalidArgument("weight vector length " + std::to_string(a.size()) +
                            " does not match n = " + std::to_string(d.n()));
    }
    if (!a.allFinite() || (a.array() <= 0.0).any()) {
      throw InvalidArgument("weights must be finite and positive");
    }
  }

  // A (Y - C)
  Matrix weighted_target(const Matrix& c) const { return ay - a.asDiagonal() * c; }
};

double penalty(const Matrix& m, double weight) {
  if (weight == 0.0) return 0.0;
  const double norms = linalg::row_norms(m).sum();
  if (std::isinf(weight)) return norms == 0.0 ? 0.0 : weight;
  return weight * norms;
}

double objective_impl(const Problem& pb, const Matrix& w, const Matrix& v,
                      const Matrix& c, double lambda_w, double phi_c) {
  const Matrix resid = pb.d.y - pb.z * (w * v.transpose()) - c;
  const double loss = pb.a2.dot(resid.rowwise().squaredNorm());
  return loss + penalty(c, phi_c) + penalty(w, lambda_w);
}

Matrix outlier_sweeps(const Problem& pb, Matrix c, const Matrix& w, const Matrix& v,
                      double phi_c, double inner_tol, int max_inner, int* sweeps) {
  int done = 0;
  if (std::isinf(phi_c)) {
    c.setZero();
  } else {
    // Rows decouple because A is diagonal, so each sweep is exact given the
    // fitted values; the loop stops on the first sweep that changes nothing.
    const Matrix resid = pb.d.y - pb.z * (w * v.transpose());
    for (done = 1; done <= max_inner; ++done) {
      double max_change = 0.0;
      for (Eigen::Index i = 0; i < c.rows(); ++i) {
        const Vector r = resid.row(i).transpose();
        const Vector next = group_soft_threshold(r, phi_c / (2.0 * pb.a2(i)));
        max_change = std::max(max_change, (next - c.row(i).transpose()).norm());
        c.row(i) = next.transpose();
      }
      if (max_change < inner_tol) break;
    }
    done = std::min(done, max_inner);
  }
  if (sweeps) *sweeps = done;
  return c;
}

Matrix loading_sweeps(const Problem& pb, Matrix w, const Matrix& c, const Matrix& v,
                      double lambda_w, double inner_tol, int max_inner, int* sweeps) {
  const Matrix target = pb.weighted_target(c) * v;
  const int done = group_lasso_rows(pb.g, target, w, lambda_w, inner_tol, max_inner);
  if (sweeps) *sweeps = done;
  return w;
}

Matrix procrustes(const Problem& pb, const Matrix& w, const Matrix& c,
                  const Matrix& v_prev) {
  const Matrix m = (pb.g * w).transpose() * pb.weighted_target(c);  // r x q
  if ((m.array() == 0.0).all()) return v_prev;
  const auto svd = linalg::thin_svd(m);
  return svd.v * svd.u.transpose();
}

void validate_config(const Dataset& d, const FitConfig& cfg) {
  const auto max_rank = std::min(d.columns(), d.outcomes());
  if (cfg.rank < 1 || cfg.rank > max_rank) {
    throw InvalidArgument("rank " + std::to_string(cfg.rank) +
                          " outside [1, min(p+1, q)] = [1, " +
                          std::to_string(max_rank) + "]");
  }
  if (!(cfg.lambda_w >= 0.0) || std::isinf(cfg.lambda_w)) {
    throw InvalidArgument("lambda_w must be finite and nonnegative");
  }
  if (!(cfg.phi_c >= 0.0)) throw InvalidArgument("phi_c must be nonnegative");
  if (!(cfg.outer_tol > 0.0) || !(cfg.inner_tol > 0.0)) {
    throw InvalidArgument("tolerances must be positive");
  }
  if (cfg.max_outer < 1 || cfg.max_inner < 1) {
    throw InvalidArgument("iteration caps must be positive");
  }
}

void check_shapes(const FactorModel& m, const Dataset& d) {
  if (m.w.rows() != d.columns() || m.v.rows() != d.outcomes() ||
      m.w.cols() != m.v.cols() || m.c.rows() != d.n() || m.c.cols() != d.outcomes()) {
    throw InvalidArgument("factor model shape does not match the dataset");
  }
}

}  // namespace

Vector group_soft_threshold(const Eigen::Ref<const Vector>& v, double t) {
  const double norm = v.norm();
  if (norm == 0.0 || norm <= t) return Vector::Zero(v.size());
  return (1.0 - t / norm) * v;
}

int group_lasso_rows(const Matrix& g, const Matrix& target, Matrix& coef,
                     double lambda, double tol, int max_sweeps) {
  const Vector col_sq = g.colwise().squaredNorm().transpose();
  Matrix resid = target - g * coef;
  int sweep = 0;
  for (sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      const Vector old = coef.row(k).transpose();
      Vector next;
      if (col_sq(k) == 0.0) {
        next = Vector::Zero(old.size());
      } else {
        const Vector s = resid.transpose() * g.col(k) + col_sq(k) * old;
        next = group_soft_threshold(s, 0.5 * lambda) / col_sq(k);
      }
      const Vector delta = next - old;
      const double change = delta.norm();
      if (change > 0.0) {
        resid.noalias() -= g.col(k) * delta.transpose();
        coef.row(k) = next.transpose();
      }
      max_change = std::max(max_change, change);
    }
    if (max_change < tol) return sweep;
  }
  return max_sweeps;
}

double objective(const FactorModel& model, const Dataset& d, const WeightVector& a,
                 const FitConfig& cfg) {
  check_shapes(model, d);
  if (linalg::orthonormality_error(model.v) > kOrthonormalTolerance) {
    throw InvalidArgument("V does not have orthonormal columns");
  }
  const Problem pb(d, a);
  return objective_impl(pb, model.w, model.v, model.c, cfg.lambda_w, cfg.phi_c);
}

Matrix update_outlier_rows(const Matrix& c, const Dataset& d, const WeightVector& a,
                           const Matrix& w, const Matrix& v, double phi_c,
                           double inner_tol, int max_inner, int* sweeps) {
  const Problem pb(d, a);
  return outlier_sweeps(pb, c, w, v, phi_c, inner_tol, max_inner, sweeps);
}

Matrix update_loading_rows(const Matrix& w, const Dataset& d, const WeightVector& a,
                           const Matrix& c, const Matrix& v, double lambda_w,
                           double inner_tol, int max_inner, int* sweeps) {
  const Problem pb(d, a);
  return loading_sweeps(pb, w, c, v, lambda_w, inner_tol, max_inner, sweeps);
}

Matrix update_orthogonal_factor(const Matrix& w, const Dataset& d,
                                const WeightVector& a, const Matrix& c,
                                const Matrix& v_prev) {
  const Problem pb(d, a);
  return procrustes(pb, w, c, v_prev);
}

FitResult fit(const Dataset& d, const WeightVector& a, const FitConfig& cfg) {
  validate_config(d, cfg);
  const Problem pb(d, a);
  const Eigen::Index r = cfg.rank;

  FitResult out;
  FactorModel& m = out.model;
  m.c = Matrix::Zero(d.n(), d.outcomes());
  if (cfg.init == Initialization::random) {
    m.v = linalg::random_orthonormal(d.outcomes(), r, cfg.seed);
    m.w = Matrix::Zero(d.columns(), r);
  } else {
    const Matrix gamma0 = linalg::ridge_least_squares(pb.g, pb.ay, 1e-8);
    const Matrix fitted0 = pb.g * gamma0;
    Eigen::JacobiSVD<Matrix> svd(fitted0, Eigen::ComputeFullV);
    m.v = svd.matrixV().leftCols(r);
    m.w = gamma0 * m.v;
  }

  FitTrace& trace = out.trace;
  const double initial = objective_impl(pb, m.w, m.v, m.c, cfg.lambda_w, cfg.phi_c);
  if (!std::isfinite(initial)) {
    throw NumericalError("non-finite objective at iteration 0");
  }
  trace.objective.push_back(initial);
  const double threshold = cfg.outer_tol * initial;

  for (int t = 1; t <= cfg.max_outer; ++t) {
    int c_sweeps = 0, w_sweeps = 0;
    m.c = outlier_sweeps(pb, std::move(m.c), m.w, m.v, cfg.phi_c, cfg.inner_tol,
                         cfg.max_inner, &c_sweeps);
    m.w = loading_sweeps(pb, std::move(m.w), m.c, m.v, cfg.lambda_w, cfg.inner_tol,
                         cfg.max_inner, &w_sweeps);
    m.v = procrustes(pb, m.w, m.c, m.v);

    const double value = objective_impl(pb, m.w, m.v, m.c, cfg.lambda_w, cfg.phi_c);
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite objective at iteration " + std::to_string(t));
    }
    const double previous = trace.objective.back();
    trace.objective.push_back(value);
    trace.c_sweeps.push_back(c_sweeps);
    trace.w_sweeps.push_back(w_sweeps);
    trace.outer_iters = t;
    if (previous - value <= threshold) {
      trace.converged = true;
      break;
    }
  }
  return out;
}

FitResult fit_with_restarts(const Dataset& d, const WeightVector& a,
                            const FitConfig& cfg, int restarts) {
  FitResult best = fit(d, a, cfg);
  for (int k = 0; k < restarts; ++k) {
    FitConfig alt = cfg;
    alt.init = Initialization::random;
    alt.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    FitResult cand = fit(d, a, alt);
    if (cand.trace.objective.back() < best.trace.objective.back()) best = std::move(cand);
  }
  return best;
}

CateEstimate predict_cate(const FactorModel& model, const Matrix& x_new) {
  if (x_new.cols() != model.w.rows()) {
    throw InvalidArgument("column mismatch: X has " + std::to_string(x_new.cols()) +
                          " columns, model expects " + std::to_string(model.w.rows()));
  }
  CateEstimate est;
  est.values = (x_new * model.w) * model.v.transpose();
  est.score = est.values.rowwise().sum();
  return est;
}

}  // namespace wmcm
