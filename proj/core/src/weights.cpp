#include "wmcm/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wmcm/error.hpp"
#include "wmcm/linalg.hpp"

namespace wmcm {

std::string_view to_string(PropensitySource source) {
  switch (source) {
    case PropensitySource::known: return "known";
    case PropensitySource::rct_half: return "rct";
    case PropensitySource::logistic_fit: return "logistic";
  }
  return "unknown";
}

PropensitySource propensity_source_from_string(std::string_view name) {
  if (name == "known") return PropensitySource::known;
  if (name == "rct" || name == "rct_half") return PropensitySource::rct_half;
  if (name == "logistic" || name == "logistic_fit") return PropensitySource::logistic_fit;
  throw InvalidArgument("unknown propensity source '" + std::string(name) + "'");
}

WeightVector compute_weights(const IntVector& treatment, const Vector& pi,
                             PropensitySource source) {
  if (treatment.size() != pi.size()) {
    throw InvalidArgument("compute_weights: treatment and propensity lengths differ");
  }
  WeightVector w;
  w.a.resize(pi.size());
  w.pi = pi;
  w.source = source;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    const double p = pi(i);
    if (!(p > 0.0 && p < 1.0)) {
      throw DataError("positivity violated: propensity at row " + std::to_string(i) +
                      " is outside (0, 1)");
    }
    const int t = treatment(i);
    if (t == 1) {
      w.a(i) = std::sqrt(1.0 / p);
    } else if (t == -1) {
      w.a(i) = std::sqrt(1.0 / (1.0 - p));
    } else {
      throw DataError("treatment entry outside coding set at row " + std::to_string(i));
    }
  }
  return w;
}

WeightVector rct_weights(Eigen::Index n) {
  WeightVector w;
  w.pi = Vector::Constant(n, 0.5);
  w.a = Vector::Constant(n, std::sqrt(2.0));
  w.source = PropensitySource::rct_half;
  return w;
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double deviance_of(const Vector& mu, const Vector& y) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = std::clamp(mu(i), 1e-300, 1.0 - 1e-16);
    dev -= 2.0 * (y(i) > 0.5 ? std::log(m) : std::log1p(-m));
  }
  return dev;
}

}  // namespace

Vector LogisticFit::predict(const Matrix& x) const {
  Vector eta = x * coef;
  Vector p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    p(i) = std::clamp(sigmoid(eta(i)), clip, 1.0 - clip);
  return p;
}

LogisticFit fit_logistic(const Matrix& x, const IntVector& treatment,
                         const LogisticOptions& options) {
  if (x.rows() != treatment.size()) {
    throw InvalidArgument("fit_logistic: X and T lengths differ");
  }
  const Eigen::Index n = x.rows();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = treatment(i) == 1 ? 1.0 : 0.0;

  LogisticFit fit;
  fit.clip = options.clip;
  fit.coef = Vector::Zero(x.cols());
  Vector mu = Vector::Constant(n, 0.5);
  double dev = deviance_of(mu, y);

  for (int it = 1; it <= options.max_iter; ++it) {
    // Working weights are floored so separable data keeps the system
    // well-posed; the clip on the returned probabilities bounds the weights.
    Vector wts = (mu.array() * (1.0 - mu.array())).max(1e-10).matrix();
    Vector eta = x * fit.coef;
    Vector z = eta.array() + (y - mu).array() / wts.array();
    Matrix gram = x.transpose() * wts.asDiagonal() * x;
    gram.diagonal().array() += options.ridge;
    Vector next = gram.ldlt().solve(x.transpose() * (wts.array() * z.array()).matrix());
    if (!next.allFinite()) {
      throw ConvergenceError("logistic IRLS produced non-finite coefficients", dev);
    }
    // Step halving keeps the deviance from increasing.
    Vector step = next - fit.coef;
    Vector cand = next;
    Vector cand_mu(n);
    double cand_dev = 0.0;
    for (int half = 0; half < 30; ++half) {
      Vector ceta = x * cand;
      for (Eigen::Index i = 0; i < n; ++i) cand_mu(i) = sigmoid(ceta(i));
      cand_dev = deviance_of(cand_mu, y);
      if (cand_dev <= dev + 1e-12 * std::abs(dev)) break;
      step *= 0.5;
      cand = fit.coef + step;
    }
    const double change = std::abs(dev - cand_dev) / (std::abs(cand_dev) + 0.1);
    fit.coef = cand;
    mu = cand_mu;
    dev = cand_dev;
    fit.iterations = it;
    if (change < options.tol) {
      fit.deviance = dev;
      return fit;
    }
    // Quasi-separation: the deviance is already at the clipping floor.
    if (dev < 1e-8) {
      fit.deviance = dev;
      return fit;
    }
  }
  throw ConvergenceError("logistic IRLS did not converge in " +
                             std::to_string(options.max_iter) +
                             " iterations (deviance " + std::to_string(dev) + ")",
                         dev);
}

Vector fit_propensity_logistic(const Matrix& x, const IntVector& treatment,
                               const LogisticOptions& options) {
  return fit_logistic(x, treatment, options).predict(x);
}

WeightVector weights_for(const Dataset& d, PropensitySource source) {
  switch (source) {
    case PropensitySource::rct_half:
      return rct_weights(d.n());
    case PropensitySource::known:
      if (!d.propensity) {
        throw InvalidArgument("propensity source 'known' requires propensity values");
      }
      return compute_weights(d.treatment, *d.propensity, source);
    case PropensitySource::logistic_fit:
      return compute_weights(d.treatment, fit_propensity_logistic(d.x, d.treatment),
                             source);
  }
  throw InvalidArgument("unknown propensity source");
}

}  // namespace wmcm
