#include "wmcm/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "wmcm/error.hpp"
#include "wmcm/linalg.hpp"

namespace wmcm {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::wmcmr4: return "wmcmr4";
    case Method::wmcmrrr: return "wmcmrrr";
    case Method::wmcm_l1: return "wmcm_l1";
    case Method::wmcm: return "wmcm";
    case Method::wfull: return "wfull";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  // display names are accepted too
  if (key == "wmcmr4") return Method::wmcmr4;
  if (key == "wmcmrrr" || key == "mcmrrr") return Method::wmcmrrr;
  if (key == "wmcm_l1" || key == "wmcml1" || key == "mcml1") return Method::wmcm_l1;
  if (key == "wmcm" || key == "mcm") return Method::wmcm;
  if (key == "wfull" || key == "full") return Method::wfull;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::string display_name(Method method, bool rct) {
  switch (method) {
    case Method::wmcmr4: return "WMCMR4";
    case Method::wmcmrrr: return rct ? "MCMRRR" : "WMCMRRR";
    case Method::wmcm_l1: return rct ? "MCMl1" : "WMCMl1";
    case Method::wmcm: return rct ? "MCM" : "WMCM";
    case Method::wfull: return rct ? "Full" : "WFull";
  }
  return "unknown";
}

bool uses_rank(Method method) {
  return method == Method::wmcmr4 || method == Method::wmcmrrr;
}

bool uses_phi(Method method) { return method == Method::wmcmr4; }

namespace {

double group_penalty(const Matrix& m, double lambda) {
  return lambda == 0.0 ? 0.0 : lambda * linalg::row_norms(m).sum();
}

Matrix prox_rows(const Matrix& m, double t) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    out.row(k) = group_soft_threshold(m.row(k).transpose(), t).transpose();
  return out;
}

Matrix huber_score(const Matrix& residual, double delta) {
  return (residual.array() / delta).max(-1.0).min(1.0).matrix();
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || std::isinf(lambda)) {
    throw InvalidArgument("lambda must be finite and nonnegative");
  }
}

}  // namespace

double smoothed_l1(const Matrix& residual, double delta) {
  return smoothed_l1(residual, Vector::Ones(residual.rows()), delta);
}

double smoothed_l1(const Matrix& residual, const Vector& a, double delta) {
  if (a.size() != residual.rows()) throw InvalidArgument("smoothed_l1: weight length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < residual.cols(); ++j) {
      const double u = std::abs(residual(i, j));
      row += u <= delta ? 0.5 * u * u / delta : u - 0.5 * delta;
    }
    total += a(i) * row;
  }
  return total;
}

BaselineModel fit_wmcmrrr(const Dataset& d, const WeightVector& a, int rank,
                          double lambda_w, const FitConfig& cfg) {
  FitConfig frozen = cfg;
  frozen.rank = rank;
  frozen.lambda_w = lambda_w;
  frozen.phi_c = std::numeric_limits<double>::infinity();
  FitResult res = fit(d, a, frozen);

  BaselineModel out;
  out.method = Method::wmcmrrr;
  out.gamma = res.model.gamma();
  out.trace = std::move(res.trace.objective);
  out.converged = res.trace.converged;
  out.factors = std::move(res.model);
  return out;
}

BaselineModel fit_wmcm(const Dataset& d, const WeightVector& a, double lambda_w,
                       const FitConfig& cfg) {
  check_lambda(lambda_w);
  const Matrix g = a.a.asDiagonal() * assemble_design(d);
  const Matrix ay = a.a.asDiagonal() * d.y;

  BaselineModel out;
  out.method = Method::wmcm;
  out.gamma = Matrix::Zero(d.columns(), d.outcomes());
  auto value = [&](const Matrix& gamma) {
    return (ay - g * gamma).squaredNorm() + group_penalty(gamma, lambda_w);
  };
  out.trace.push_back(value(out.gamma));
  const int cap = std::max(1, cfg.max_outer) * std::max(1, cfg.max_inner);
  for (int sweep = 1; sweep <= cap; ++sweep) {
    const Matrix before = out.gamma;
    group_lasso_rows(g, ay, out.gamma, lambda_w, 0.0, 1);
    out.trace.push_back(value(out.gamma));
    const double change = linalg::row_norms(out.gamma - before).maxCoeff();
    if (change < cfg.inner_tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.gamma.allFinite()) throw NumericalError("wmcm produced non-finite coefficients");
  return out;
}

BaselineModel fit_wfull(const Dataset& d, const WeightVector& a, double lambda_w,
                        const FitConfig& cfg) {
  check_lambda(lambda_w);
  const Matrix g = a.a.asDiagonal() * assemble_design(d);
  const Matrix ax = a.a.asDiagonal() * d.x;
  const Matrix ay = a.a.asDiagonal() * d.y;
  const Matrix gram = ax.transpose() * ax;

  BaselineModel out;
  out.method = Method::wfull;
  out.gamma = Matrix::Zero(d.columns(), d.outcomes());
  Matrix b = Matrix::Zero(d.columns(), d.outcomes());
  bool warned = false;
  auto value = [&]() {
    return (ay - ax * b - g * out.gamma).squaredNorm() + group_penalty(out.gamma, lambda_w);
  };
  out.trace.push_back(value());
  const double threshold = cfg.outer_tol * out.trace.front();
  for (int t = 1; t <= cfg.max_outer; ++t) {
    bool jittered = false;
    b = linalg::solve_psd(gram, ax.transpose() * (ay - g * out.gamma), 1e-8, &jittered);
    if (jittered && !warned) {
      out.warnings.emplace_back("singular X^T A^2 X: ridge jitter 1e-8 applied");
      warned = true;
    }
    group_lasso_rows(g, ay - ax * b, out.gamma, lambda_w, cfg.inner_tol, cfg.max_inner);
    const double previous = out.trace.back();
    out.trace.push_back(value());
    if (!std::isfinite(out.trace.back())) {
      throw NumericalError("non-finite objective at iteration " + std::to_string(t));
    }
    if (previous - out.trace.back() <= threshold) {
      out.converged = true;
      break;
    }
  }
  out.main_effects = std::move(b);
  return out;
}

BaselineModel fit_wmcm_l1(const Dataset& d, const WeightVector& a, double lambda_w,
                          const FitConfig& cfg, const L1Options& options) {
  check_lambda(lambda_w);
  if (!(options.delta > 0.0)) throw InvalidArgument("smoothing width must be positive");
  const Matrix z = assemble_design(d);
  const Matrix& y = d.y;
  // Work with a / max(a) and lambda / max(a): same minimizer, and a uniform
  // rescaling of the weights leaves the iterates untouched.
  const double a_max = a.a.size() > 0 ? a.a.maxCoeff() : 1.0;
  const Vector aw = a.a / a_max;
  const double lam = lambda_w / a_max;
  // Hessian of the smoothed loss is bounded by Z^T diag(a) Z / delta
  const Matrix sz = aw.cwiseSqrt().asDiagonal() * z;
  const double spectral = z.rows() > 0 ? linalg::thin_svd(sz).d.maxCoeff() : 0.0;

  BaselineModel out;
  out.method = Method::wmcm_l1;
  Matrix gamma = linalg::ridge_least_squares(aw.asDiagonal() * z, aw.asDiagonal() * y, 1e-8);
  int budget = options.max_iter;

  // Proximal gradient with BB steps and a monotone backtracking search on the
  // delta-smoothed objective. Returns true on convergence.
  auto solve = [&](double delta, double tol, std::vector<double>* trace) {
    auto smooth = [&](const Matrix& gm) { return smoothed_l1(y - z * gm, aw, delta); };
    auto gradient = [&](const Matrix& gm) -> Matrix {
      return -(z.transpose() * (aw.asDiagonal() * huber_score(y - z * gm, delta)));
    };
    double f = smooth(gamma);
    double total = f + group_penalty(gamma, lam);
    if (trace) trace->push_back(a_max * total);
    // 1/L for the smoothed loss
    double step = spectral > 0.0 ? delta / (spectral * spectral) : 1.0;
    Matrix grad = gradient(gamma);
    Matrix prev_gamma, prev_grad;
    for (int it = 1; budget > 0; ++it, --budget) {
      if (it > 1) {
        const Matrix sg = gamma - prev_gamma;
        const Matrix sd = grad - prev_grad;
        const double curv = (sg.array() * sd.array()).sum();
        if (curv > 0.0) step = std::min(sg.squaredNorm() / curv, 1e8);
      }
      Matrix next;
      double f_next = 0.0, total_next = 0.0;
      bool accepted = false;
      while (step > 1e-30) {
        next = prox_rows(gamma - step * grad, step * lam);
        const Matrix diff = next - gamma;
        f_next = smooth(next);
        total_next = f_next + group_penalty(next, lam);
        const double bound = f + (grad.array() * diff.array()).sum() +
                             diff.squaredNorm() / (2.0 * step);
        if (f_next <= bound && total_next <= total) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      // no descent step at working precision
      if (!accepted) return true;
      const double move = (next - gamma).norm();
      prev_gamma = std::move(gamma);
      prev_grad = std::move(grad);
      gamma = std::move(next);
      grad = gradient(gamma);
      f = f_next;
      total = total_next;
      if (trace) trace->push_back(a_max * total);
      if (move <= tol * std::max(1.0, gamma.norm())) return true;
    }
    return false;
  };

  // Continuation: warm starts from wider smoothing down to the target width.
  const double scale = (y - z * gamma).cwiseAbs().mean();
  std::vector<double> widths;
  for (double w = options.delta * 10.0; w < scale; w *= 10.0) widths.push_back(w);
  std::reverse(widths.begin(), widths.end());
  for (double w : widths) solve(w, std::sqrt(cfg.inner_tol), nullptr);

  out.converged = solve(options.delta, cfg.inner_tol, &out.trace);
  if (!gamma.allFinite()) throw NumericalError("wmcm_l1 produced non-finite coefficients");
  if (!out.converged) {
    throw ConvergenceError("wmcm_l1 did not converge in " +
                               std::to_string(options.max_iter) + " iterations",
                           out.trace.back());
  }
  out.gamma = std::move(gamma);
  return out;
}

BaselineModel fit_method(Method method, const Dataset& d, const WeightVector& a,
                         const MethodParams& params, const FitConfig& cfg) {
  switch (method) {
    case Method::wmcmr4: {
      FitConfig c = cfg;
      c.rank = params.rank;
      c.lambda_w = params.lambda;
      c.phi_c = params.phi;
      FitResult res = fit(d, a, c);
      BaselineModel out;
      out.method = Method::wmcmr4;
      out.gamma = res.model.gamma();
      out.trace = std::move(res.trace.objective);
      out.converged = res.trace.converged;
      out.factors = std::move(res.model);
      return out;
    }
    case Method::wmcmrrr: return fit_wmcmrrr(d, a, params.rank, params.lambda, cfg);
    case Method::wmcm_l1: return fit_wmcm_l1(d, a, params.lambda, cfg);
    case Method::wmcm: return fit_wmcm(d, a, params.lambda, cfg);
    case Method::wfull: return fit_wfull(d, a, params.lambda, cfg);
  }
  throw InvalidArgument("unknown method");
}

double method_objective(const BaselineModel& model, const Dataset& d,
                        const WeightVector& a, const MethodParams& params,
                        const L1Options& options) {
  const Matrix g = a.a.asDiagonal() * assemble_design(d);
  const Matrix ay = a.a.asDiagonal() * d.y;
  switch (model.method) {
    case Method::wmcmr4:
    case Method::wmcmrrr: {
      if (!model.factors) throw InvalidArgument("reduced-rank model without factors");
      FitConfig c;
      c.rank = static_cast<int>(model.factors->rank());
      c.lambda_w = params.lambda;
      c.phi_c = model.method == Method::wmcmrrr ? std::numeric_limits<double>::infinity()
                                                : params.phi;
      return objective(*model.factors, d, a, c);
    }
    case Method::wmcm_l1:
      return smoothed_l1(d.y - assemble_design(d) * model.gamma, a.a, options.delta) +
             group_penalty(model.gamma, params.lambda);
    case Method::wmcm:
      return (ay - g * model.gamma).squaredNorm() + group_penalty(model.gamma, params.lambda);
    case Method::wfull: {
      const Matrix ax = a.a.asDiagonal() * d.x;
      const Matrix b = model.main_effects.value_or(Matrix::Zero(d.columns(), d.outcomes()));
      return (ay - ax * b - g * model.gamma).squaredNorm() +
             group_penalty(model.gamma, params.lambda);
    }
  }
  throw InvalidArgument("unknown method");
}

}  // namespace wmcm
