#include "dimal/jacobi.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dimal::mds {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

}  // namespace

SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, double tol, int max_sweeps) {
  const Eigen::Index n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("jacobi_eigen: matrix not square");

  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  const double target = tol * scale;

  SymmetricEigen result;
  if (scale > 0.0 && n > 1) {
    // Rotations below this magnitude cannot keep the off-diagonal norm above
    // the target even if every element sits at the threshold.
    const double skip = target / (2.0 * static_cast<double>(n));
    Eigen::VectorXd tp(n), tq(n);
    int sweep = 0;
    while (sweep < max_sweeps && off_diagonal_norm(a) > target) {
      ++sweep;
      for (Eigen::Index p = 0; p < n - 1; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (std::abs(apq) <= skip) continue;
          const double app = a(p, p);
          const double aqq = a(q, q);
          const double theta = (aqq - app) / (2.0 * apq);
          const double t =
              (theta >= 0.0 ? 1.0 : -1.0) /
              (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;

          // Columns first (contiguous), then the four crossing entries in
          // closed form, then mirror rows from columns by symmetry.
          tp = a.col(p);
          tq = a.col(q);
          a.col(p) = c * tp - s * tq;
          a.col(q) = s * tp + c * tq;
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          a.row(p).head(p) = a.col(p).head(p).transpose();
          a.row(p).segment(p + 1, q - p - 1) =
              a.col(p).segment(p + 1, q - p - 1).transpose();
          a.row(p).tail(n - q - 1) = a.col(p).tail(n - q - 1).transpose();
          a.row(q).head(p) = a.col(q).head(p).transpose();
          a.row(q).segment(p + 1, q - p - 1) =
              a.col(q).segment(p + 1, q - p - 1).transpose();
          a.row(q).tail(n - q - 1) = a.col(q).tail(n - q - 1).transpose();

          tp = v.col(p);
          tq = v.col(q);
          v.col(p) = c * tp - s * tq;
          v.col(q) = s * tp + c * tq;
        }
      }
    }
    result.sweeps = sweep;
  }

  // Sort eigenpairs descending.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index l, Eigen::Index r) { return a(l, l) > a(r, r); });
  result.values.resize(n);
  result.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    result.values(j) = a(order[static_cast<std::size_t>(j)],
                         order[static_cast<std::size_t>(j)]);
    result.vectors.col(j) = v.col(order[static_cast<std::size_t>(j)]);
  }
  return result;
}

}  // namespace dimal::mds
