#include "wmcm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wmcm/error.hpp"

namespace wmcm {

namespace {

void check_shapes(const Matrix& x, const Matrix& gamma_hat, const Matrix& gamma_true) {
  if (gamma_hat.rows() != gamma_true.rows() || gamma_hat.cols() != gamma_true.cols() ||
      x.cols() != gamma_hat.rows()) {
    throw InvalidArgument("shape mismatch between X_test and coefficient matrices");
  }
  if (x.rows() == 0 || gamma_hat.cols() == 0) {
    throw InvalidArgument("empty test design");
  }
}

}  // namespace

double mse(const Matrix& x_test, const Matrix& gamma_hat, const Matrix& gamma_true) {
  check_shapes(x_test, gamma_hat, gamma_true);
  const Matrix diff = x_test * (gamma_hat - gamma_true);
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

double bias(const Matrix& x_test, const Matrix& gamma_hat, const Matrix& gamma_true) {
  check_shapes(x_test, gamma_hat, gamma_true);
  const Matrix diff = x_test * (gamma_hat - gamma_true);
  return std::abs(diff.sum()) / static_cast<double>(diff.size());
}

Vector descending_ranks(const Vector& values) {
  const auto m = static_cast<std::size_t>(values.size());
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
    return values(l) > values(r);
  });
  Vector ranks(values.size());
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && values(order[j + 1]) == values(order[i])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const Vector& score_hat, const Vector& score_true) {
  if (score_hat.size() != score_true.size()) {
    throw InvalidArgument("spearman: length mismatch");
  }
  const auto m = static_cast<double>(score_hat.size());
  if (score_hat.size() < 2) throw InvalidArgument("spearman: need at least 2 scores");
  if ((score_hat.array() == 0.0).all()) return 0.0;
  const Vector diff = descending_ranks(score_hat) - descending_ranks(score_true);
  return 1.0 - 6.0 * diff.squaredNorm() / (m * (m * m - 1.0));
}

std::optional<double> auc(const Vector& score_hat, const Vector& score_true) {
  if (score_hat.size() != score_true.size()) throw InvalidArgument("auc: length mismatch");
  std::vector<double> pos, neg;
  for (Eigen::Index i = 0; i < score_true.size(); ++i)
    (score_true(i) > 0.0 ? pos : neg).push_back(score_hat(i));
  if (pos.empty() || neg.empty()) return std::nullopt;

  // Rank-sum form: sort the negatives once, then count per positive.
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

MetricsReport evaluate(const Matrix& x_test, const Matrix& gamma_hat,
                       const Matrix& gamma_true) {
  MetricsReport r;
  r.mse = mse(x_test, gamma_hat, gamma_true);
  r.bias = bias(x_test, gamma_hat, gamma_true);
  const Vector score_hat = (x_test * gamma_hat).rowwise().sum();
  const Vector score_true = (x_test * gamma_true).rowwise().sum();
  r.spearman = (gamma_hat.array() == 0.0).all() ? 0.0 : spearman(score_hat, score_true);
  r.auc = auc(score_hat, score_true);
  r.n_test = x_test.rows();
  r.q = gamma_hat.cols();
  return r;
}

}  // namespace wmcm
