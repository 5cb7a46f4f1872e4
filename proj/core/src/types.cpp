#include "wmcm/types.hpp"

#include <cmath>
#include <string>

#include "wmcm/error.hpp"

namespace wmcm {

namespace {

void require_finite(const Matrix& m, const char* name) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw DataError(std::string("non-finite value in ") + name + " at row " +
                        std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
}

}  // namespace

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.x.resize(m, x.cols());
  out.y.resize(m, y.cols());
  out.treatment.resize(m);
  if (propensity) out.propensity = Vector(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = rows[static_cast<std::size_t>(k)];
    out.x.row(k) = x.row(i);
    out.y.row(k) = y.row(i);
    out.treatment(k) = treatment(i);
    if (propensity) (*out.propensity)(k) = (*propensity)(i);
  }
  return out;
}

Dataset validate_dataset(const Matrix& raw_x, const Matrix& raw_y,
                         const IntVector& raw_t,
                         const std::optional<Vector>& propensity,
                         const ValidateOptions& options) {
  const Eigen::Index n = raw_x.rows();
  if (raw_y.rows() != n || raw_t.size() != n) {
    throw DataError("dimension mismatch: X has " + std::to_string(n) +
                    " rows, Y has " + std::to_string(raw_y.rows()) +
                    ", T has " + std::to_string(raw_t.size()));
  }
  if (n == 0) throw DataError("dimension mismatch: no rows");
  if (raw_x.cols() < 1 && !options.add_intercept) {
    throw DataError("dimension mismatch: X has no columns");
  }
  if (raw_y.cols() < 1) throw DataError("dimension mismatch: Y has no columns");
  if (propensity && propensity->size() != n) {
    throw DataError("dimension mismatch: propensity has " +
                    std::to_string(propensity->size()) + " entries, expected " +
                    std::to_string(n));
  }
  require_finite(raw_x, "X");
  require_finite(raw_y, "Y");

  Dataset d;
  d.treatment.resize(n);
  bool treated = false, control = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = raw_t(i);
    int coded = 0;
    if (options.coding == TreatmentCoding::zero_one) {
      if (t == 0) coded = -1;
      if (t == 1) coded = 1;
    } else if (t == -1 || t == 1) {
      coded = t;
    }
    if (coded == 0) {
      throw DataError("treatment entry outside coding set at row " +
                      std::to_string(i) + ": " + std::to_string(t));
    }
    d.treatment(i) = coded;
    (coded > 0 ? treated : control) = true;
  }
  if (!(treated && control)) throw DataError("single-arm data");

  if (propensity) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = (*propensity)(i);
      if (!std::isfinite(p)) {
        throw DataError("non-finite value in propensity at row " + std::to_string(i));
      }
      if (!(p > 0.0 && p < 1.0)) {
        throw DataError("positivity violated: propensity at row " +
                        std::to_string(i) + " is outside (0, 1)");
      }
    }
    d.propensity = *propensity;
  }

  if (options.add_intercept) {
    d.x.resize(n, raw_x.cols() + 1);
    d.x.col(0).setOnes();
    d.x.rightCols(raw_x.cols()) = raw_x;
  } else {
    d.x = raw_x;
  }
  d.y = raw_y;
  return d;
}

Dataset validate_dataset(const Dataset& d) {
  return validate_dataset(d.x, d.y, d.treatment, d.propensity, {});
}

Matrix assemble_design(const Dataset& d) {
  return (0.5 * d.treatment.cast<double>()).asDiagonal() * d.x;
}

}  // namespace wmcm
