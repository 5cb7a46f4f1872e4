#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "wmcm/baselines.hpp"
#include "wmcm/linalg.hpp"
#include "wmcm/solver.hpp"

using namespace wmcm;
using testing_support::random_dataset;
using testing_support::random_weights;
using testing_support::tight_config;

namespace {

struct Instance {
  Dataset d;
  WeightVector a;
  FitConfig cfg;
};

Instance draw(std::mt19937_64& rng, int k) {
  std::uniform_int_distribution<int> cols(2, 5), outs(2, 4), rows(25, 60);
  std::uniform_real_distribution<double> pen(0.0, 3.0);
  Instance in;
  const int c = cols(rng), q = outs(rng);
  in.d = random_dataset(rows(rng), c, q, 1000 + static_cast<std::uint64_t>(k));
  in.a = random_weights(in.d.treatment, 2000 + static_cast<std::uint64_t>(k));
  in.cfg = tight_config(1 + k % std::min(c, q), pen(rng), 1.0 + pen(rng));
  return in;
}

}  // namespace

TEST(Property, ObjectiveMonotoneAndFactorOrthonormal) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 30; ++k) {
    const Instance in = draw(rng, k);
    const FitResult r = fit(in.d, in.a, in.cfg);
    const auto& obj = r.trace.objective;
    for (std::size_t t = 1; t < obj.size(); ++t)
      ASSERT_LE(obj[t], obj[t - 1] * (1.0 + 1e-12) + 1e-12) << "instance " << k << " step " << t;
    EXPECT_LE(linalg::orthonormality_error(r.model.v), 1e-10);
    EXPECT_NEAR(obj.back(), objective(r.model, in.d, in.a, in.cfg), 1e-9 * obj.back());
  }
}

TEST(Property, ZeroLoadingRowsSatisfyOptimality) {
  // At a stationary point a zero row k of W needs 2 ||g_k^T R V|| <= lambda.
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    Instance in = draw(rng, k);
    in.cfg.lambda_w *= 10.0;
    const FitResult r = fit(in.d, in.a, in.cfg);
    if (!r.trace.converged) continue;
    const Matrix g = in.a.a.asDiagonal() * assemble_design(in.d);
    const Matrix resid =
        in.a.a.asDiagonal() * (in.d.y - r.model.c - assemble_design(in.d) * r.model.gamma());
    const Matrix grad = 2.0 * g.transpose() * resid * r.model.v;
    for (Eigen::Index j = 0; j < r.model.w.rows(); ++j) {
      if (r.model.w.row(j).isZero(0.0)) {
        EXPECT_LE(grad.row(j).norm(), in.cfg.lambda_w * (1.0 + 1e-4) + 1e-6);
      } else {
        const Vector expect = in.cfg.lambda_w * r.model.w.row(j).transpose() / r.model.w.row(j).norm();
        EXPECT_LE((grad.row(j).transpose() - expect).norm(), 1e-4 * std::max(1.0, expect.norm()));
      }
    }
  }
}

TEST(Property, RowPermutationInvariance) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 15; ++k) {
    const Instance in = draw(rng, k);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(in.d.n()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Dataset pd = in.d.subset(perm);
    Vector pa(in.d.n()), ppi(in.d.n());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pa(static_cast<Eigen::Index>(i)) = in.a.a(perm[i]);
      ppi(static_cast<Eigen::Index>(i)) = in.a.pi(perm[i]);
    }
    const WeightVector aw{pa, ppi, in.a.source};
    const FitResult r1 = fit(in.d, in.a, in.cfg);
    const FitResult r2 = fit(pd, aw, in.cfg);
    EXPECT_NEAR(r1.trace.objective.back(), r2.trace.objective.back(),
                1e-6 * r1.trace.objective.back());
    EXPECT_LE(testing_support::rel_frobenius(r1.model.gamma(), r2.model.gamma()), 1e-4);
  }
}

TEST(Property, OutcomeScaleEquivariance) {
  // Scaling Y by s and both penalties by s scales the objective by s^2 and Gamma by s.
  std::mt19937_64 rng(4);
  for (int k = 0; k < 15; ++k) {
    Instance in = draw(rng, k);
    const double s = std::uniform_real_distribution<double>(0.2, 5.0)(rng);
    Dataset scaled = in.d;
    scaled.y *= s;
    FitConfig cs = in.cfg;
    cs.lambda_w *= s;
    cs.phi_c *= s;
    const FitResult r1 = fit(in.d, in.a, in.cfg);
    const FitResult r2 = fit(scaled, in.a, cs);
    EXPECT_NEAR(r2.trace.objective.back(), s * s * r1.trace.objective.back(),
                1e-6 * r2.trace.objective.back());
    EXPECT_LE(testing_support::rel_frobenius(r2.model.gamma(), s * r1.model.gamma()), 1e-4);
  }
}

TEST(Property, WeightRescalingLeavesMinimizer) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 15; ++k) {
    Instance in = draw(rng, k);
    const double c = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
    WeightVector scaled = in.a;
    scaled.a *= c;
    FitConfig cs = in.cfg;
    cs.lambda_w *= c * c;
    cs.phi_c *= c * c;
    const FitResult r1 = fit(in.d, in.a, in.cfg);
    const FitResult r2 = fit(in.d, scaled, cs);
    EXPECT_LE(testing_support::rel_frobenius(r2.model.gamma(), r1.model.gamma()), 1e-4);
    EXPECT_LE(testing_support::rel_frobenius(r2.model.c, r1.model.c), 1e-4);
  }
}

TEST(Property, GroupSoftThresholdIsNonexpansive) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> t(0.0, 3.0);
  for (int k = 0; k < 500; ++k) {
    const Matrix m = testing_support::normal_matrix(4, 2, rng);
    const double th = t(rng);
    const Vector u = group_soft_threshold(m.col(0), th);
    const Vector v = group_soft_threshold(m.col(1), th);
    EXPECT_LE((u - v).norm(), (m.col(0) - m.col(1)).norm() + 1e-14);
    EXPECT_NEAR(u.norm(), std::max(0.0, m.col(0).norm() - th), 1e-13);
  }
}

TEST(Property, BaselinesAgreeWithWeightedOlsWhenUnpenalized) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) {
    const Instance in = draw(rng, k);
    const Matrix z = assemble_design(in.d);
    const Matrix ols = oracle::weighted_ols(z, in.a.a, in.d.y);
    const FitConfig cfg = tight_config(1);
    const BaselineModel m = fit_wmcm(in.d, in.a, 0.0, cfg);
    EXPECT_LE(testing_support::rel_frobenius(m.gamma, ols), 1e-6);
    const int full = static_cast<int>(std::min(in.d.columns(), in.d.outcomes()));
    const BaselineModel rrr = fit_wmcmrrr(in.d, in.a, full, 0.0, tight_config(full));
    EXPECT_LE(testing_support::rel_frobenius(rrr.gamma, ols), 1e-6);
  }
}

TEST(Property, CateIsLinearInCovariates) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    FactorModel m;
    m.w = testing_support::normal_matrix(4, 2, rng);
    m.v = linalg::random_orthonormal(3, 2, static_cast<std::uint64_t>(k));
    const Matrix x1 = testing_support::normal_matrix(5, 4, rng);
    const Matrix x2 = testing_support::normal_matrix(5, 4, rng);
    const CateEstimate a = predict_cate(m, x1), b = predict_cate(m, x2),
                       c = predict_cate(m, 2.0 * x1 - x2);
    EXPECT_LE((c.values - (2.0 * a.values - b.values)).norm(), 1e-12 * (1.0 + c.values.norm()));
    EXPECT_LE((a.score - a.values.rowwise().sum()).norm(), 1e-12 * (1.0 + a.score.norm()));
  }
}
