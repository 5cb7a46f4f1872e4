#include "wmcm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wmcm/error.hpp"
#include "wmcm/metrics.hpp"
#include "wmcm/parallel.hpp"
#include "wmcm/seed.hpp"
#include "wmcm/weights.hpp"

namespace wmcm {

std::string_view to_string(Design design) {
  return design == Design::rct ? "rct" : "observational";
}

Design design_from_string(std::string_view name) {
  if (name == "rct") return Design::rct;
  if (name == "observational") return Design::observational;
  throw InvalidArgument("unknown design '" + std::string(name) + "'");
}

namespace {

bool near_any(double value, std::initializer_list<double> allowed) {
  return std::any_of(allowed.begin(), allowed.end(),
                     [&](double a) { return std::abs(value - a) <= 1e-6; });
}

// Symmetric square root of the equicorrelation-type matrix
// diag = var, off-diagonal = cov.
Matrix equicorrelation_sqrt(int dim, double var, double cov) {
  Matrix sigma = Matrix::Constant(dim, dim, cov);
  sigma.diagonal().setConstant(var);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw InvalidArgument("covariance matrix is not positive definite");
  }
  return eig.operatorSqrt();
}

Matrix standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

std::string compact(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

void validate(const ScenarioSpec& s) {
  if (s.p < 1 || s.q < 1) throw InvalidArgument("p and q must be positive");
  if (s.n < 2 || s.n_test < 1) throw InvalidArgument("need n >= 2 and n_test >= 1");
  if (s.replications < 1) throw InvalidArgument("replications must be positive");
  if (!(s.g >= 0.0 && s.g < 1.0)) throw InvalidArgument("g must lie in [0, 1)");
  if (!(s.tau_pct >= 0.0 && s.tau_pct <= 100.0)) {
    throw InvalidArgument("tau_pct must lie in [0, 100]");
  }
  if (s.gamma_scenario < 1 || s.gamma_scenario > 4) {
    throw InvalidArgument("gamma_scenario must be 1, 2, 3 or 4");
  }
  if (!(s.factor_low <= s.factor_high)) throw InvalidArgument("factor_low > factor_high");
  if (s.design == Design::observational && s.p < 5) {
    throw InvalidArgument("observational design needs p >= 5");
  }
  if (s.custom_design) return;
  if (!near_any(s.p, {10, 50})) throw InvalidArgument("p outside {10, 50}; set custom_design");
  if (!near_any(s.g, {0.0, 1.0 / 3.0})) throw InvalidArgument("g outside {0, 1/3}; set custom_design");
  if (!near_any(s.tau_pct, {0, 5, 10})) {
    throw InvalidArgument("tau_pct outside {0, 5, 10}; set custom_design");
  }
  if (!near_any(s.b, {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(3.0)})) {
    throw InvalidArgument("b outside {6^-1/2, 3^-1/2}; set custom_design");
  }
  if (!near_any(s.z, {0.0, 1.0 / 3.0})) throw InvalidArgument("z outside {0, 1/3}; set custom_design");
}

std::string scenario_label(const ScenarioSpec& s) {
  if (!s.scenario_id.empty()) return s.scenario_id;
  std::ostringstream os;
  os << "p" << s.p << "_g" << compact(s.g) << "_tau" << compact(s.tau_pct) << "_b"
     << compact(s.b) << "_s" << s.gamma_scenario << "_z" << compact(s.z) << "_"
     << to_string(s.design);
  return os.str();
}

Matrix generate_covariates(int n, int p, double g, std::mt19937_64& rng) {
  const Matrix root = equicorrelation_sqrt(p, 1.0, g);
  Matrix x(n, p + 1);
  x.col(0).setOnes();
  x.rightCols(p) = standard_normal(n, p, rng) * root;
  return x;
}

Matrix generate_gamma(int scenario, int p, int q, std::mt19937_64& rng, double low,
                      double high) {
  Matrix core = Matrix::Zero(p, q);
  auto block = [&](int start, int len, int dim) {
    if (dim < start + len) {
      throw InvalidArgument("p and q too small for the sparse pattern of scenario " +
                            std::to_string(scenario));
    }
    Vector v = Vector::Zero(dim);
    v.segment(start, len).setOnes();
    return v;
  };
  switch (scenario) {
    case 1:
    case 2: {
      std::uniform_real_distribution<double> unif(low, high);
      const int rank = scenario;
      for (int k = 0; k < rank; ++k) {
        Vector u(p), v(q);
        for (int i = 0; i < p; ++i) u(i) = unif(rng);
        for (int j = 0; j < q; ++j) v(j) = unif(rng);
        core += u * v.transpose();
      }
      break;
    }
    case 3:
      core = block(0, 4, p) * block(0, 4, q).transpose();
      break;
    case 4:
      core = block(0, 4, p) * block(0, 4, q).transpose() +
             block(2, 4, p) * block(2, 4, q).transpose();
      break;
    default:
      throw InvalidArgument("gamma_scenario must be 1, 2, 3 or 4");
  }
  Matrix gamma = Matrix::Zero(p + 1, q);
  gamma.bottomRows(p) = core;
  return gamma;
}

Matrix main_effect_matrix(int p, int q, double b) {
  Matrix m = Matrix::Zero(p + 1, q);
  for (int j = 3; j <= std::min(10, p); ++j) m.row(j).setConstant(b);
  return m;
}

Matrix generate_outcomes(const Matrix& x, const Matrix& gamma_true, const Matrix& b_true,
                         const IntVector& treatment, double z, std::mt19937_64& rng,
                         double error_variance) {
  if (x.cols() != gamma_true.rows() || x.cols() != b_true.rows() ||
      gamma_true.cols() != b_true.cols() || treatment.size() != x.rows()) {
    throw InvalidArgument("generate_outcomes: shape mismatch");
  }
  const auto n = static_cast<int>(x.rows());
  const auto q = static_cast<int>(gamma_true.cols());
  const Matrix main = (x * b_true).array().square().matrix();
  const Matrix effect = (0.5 * treatment.cast<double>()).asDiagonal() * (x * gamma_true);
  Matrix y = main + effect;
  if (error_variance > 0.0) y += standard_normal(n, q, rng) * equicorrelation_sqrt(q, error_variance, z);
  return y;
}

std::vector<Eigen::Index> inject_outliers(Matrix& y, double tau_pct, std::mt19937_64& rng) {
  if (!(tau_pct >= 0.0 && tau_pct <= 100.0)) throw InvalidArgument("tau_pct outside [0, 100]");
  const auto n = y.rows();
  const auto count = static_cast<Eigen::Index>(
      std::llround(static_cast<double>(n) * tau_pct / 100.0));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (Eigen::Index k = 0; k < count; ++k) {
    std::uniform_int_distribution<Eigen::Index> pick(k, n - 1);
    std::swap(rows[static_cast<std::size_t>(k)], rows[static_cast<std::size_t>(pick(rng))]);
  }
  rows.resize(static_cast<std::size_t>(count));
  std::sort(rows.begin(), rows.end());
  std::uniform_real_distribution<double> unif(15.0, 20.0);
  for (auto i : rows)
    for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = unif(rng);
  return rows;
}

IntVector assign_treatment(const Matrix& x, Design design, std::mt19937_64& rng,
                           Vector* propensity) {
  const auto n = x.rows();
  Vector prob(n);
  if (design == Design::rct) {
    prob.setConstant(0.5);
  } else {
    if (x.cols() < 6) throw InvalidArgument("observational design needs p >= 5");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double index = x.row(i).segment(1, 5).sum();
      prob(i) = 1.0 / (1.0 + std::exp(index));
    }
  }
  IntVector t(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = unif(rng) < prob(i) ? 1 : -1;
  if (propensity) *propensity = prob;
  return t;
}

SimulatedTruth simulate(const ScenarioSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  SimulatedTruth truth;
  const Matrix x = generate_covariates(spec.n, spec.p, spec.g, rng);
  truth.gamma_true = generate_gamma(spec.gamma_scenario, spec.p, spec.q, rng,
                                    spec.factor_low, spec.factor_high);
  truth.b_true = main_effect_matrix(spec.p, spec.q, spec.b);
  Vector prob;
  const IntVector t = assign_treatment(x, spec.design, rng, &prob);
  Matrix y = generate_outcomes(x, truth.gamma_true, truth.b_true, t, spec.z, rng);
  truth.outlier_rows = inject_outliers(y, spec.tau_pct, rng);
  // Extreme logistic indices can round the assignment probability to 0 or 1.
  prob = prob.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
  truth.dataset = validate_dataset(x, y, t, prob, {});
  truth.test_x = generate_covariates(spec.n_test, spec.p, spec.g, rng);
  truth.true_cate_test = truth.test_x * truth.gamma_true;
  return truth;
}

BaselineModel fit_replication(const SimulatedTruth& truth, const ScenarioSpec& spec,
                              Method method, const SweepOptions& options,
                              std::uint64_t replication_seed) {
  const Dataset& d = truth.dataset;
  const PropensitySource source = spec.design == Design::rct
                                      ? PropensitySource::rct_half
                                      : options.observational_propensity;
  const WeightVector a = weights_for(d, source);
  MethodParams params = options.fixed;
  if (options.cross_validate) {
    CvGrid grid = options.grid;
    if (grid.lambdas.empty() || grid.phis.empty() || grid.ranks.empty()) {
      const CvGrid def = default_grid(d, a, grid.folds);
      if (grid.lambdas.empty()) grid.lambdas = def.lambdas;
      if (grid.phis.empty()) grid.phis = def.phis;
      if (grid.ranks.empty()) grid.ranks = def.ranks;
    }
    // Same folds for every method within a replication.
    grid.seed = derive_seed(replication_seed, 0xC5);
    CvOptions cv;
    cv.propensity = source;
    cv.fit = options.fit;
    const CvResult res = cross_validate(d, grid, method, cv);
    params = {res.best.rank, res.best.lambda, res.best.phi};
  }
  return fit_method(method, d, a, params, options.fit);
}

std::vector<ReplicationRow> run_scenario(const ScenarioSpec& spec,
                                         const std::vector<Method>& methods,
                                         const SweepOptions& options) {
  validate(spec);
  const std::string id = scenario_label(spec);
  const bool rct = spec.design == Design::rct;
  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<std::vector<ReplicationRow>> per_rep(reps);

  parallel_for(reps, options.threads, [&](std::size_t rep) {
    auto& rows = per_rep[rep];
    const int rep_index = static_cast<int>(rep);
    const std::uint64_t seed = derive_seed(spec.seed, rep);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SimulatedTruth truth;
    try {
      truth = simulate(spec, seed);
    } catch (const std::exception& e) {
      for (Method m : methods)
        rows.push_back({id, rep_index, display_name(m, rct), "error", nan, e.what()});
      return;
    }
    for (Method m : methods) {
      const std::string name = display_name(m, rct);
      try {
        const BaselineModel fitted = fit_replication(truth, spec, m, options, seed);
        const MetricsReport r = evaluate(truth.test_x, fitted.gamma, truth.gamma_true);
        rows.push_back({id, rep_index, name, "mse", r.mse, {}});
        rows.push_back({id, rep_index, name, "bias", r.bias, {}});
        rows.push_back({id, rep_index, name, "spearman", r.spearman, {}});
        rows.push_back({id, rep_index, name, "auc", r.auc.value_or(nan), {}});
      } catch (const std::exception& e) {
        rows.push_back({id, rep_index, name, "error", nan, e.what()});
      }
    }
  });

  std::vector<ReplicationRow> out;
  for (auto& rows : per_rep)
    for (auto& row : rows) out.push_back(std::move(row));
  return out;
}

}  // namespace wmcm
