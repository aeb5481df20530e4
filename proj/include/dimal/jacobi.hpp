#pragma once

#include <Eigen/Core>

namespace dimal::mds {

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// values are sorted descending; vectors holds the matching orthonormal
/// eigenvectors as columns.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};

/// Sweeps until the off-diagonal Frobenius norm drops below
/// tol * ||A||_F (of the input matrix). The input must be symmetric.
SymmetricEigen jacobi_eigen(Eigen::MatrixXd a, double tol = 1e-11,
                            int max_sweeps = 60);

}  // namespace dimal::mds
