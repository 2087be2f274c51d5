#pragma once

#include <Eigen/Dense>

#include "stirap/chain_model.hpp"

namespace stirap {

struct EigenSystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns are orthonormal eigenvectors
};

/// Implicit-shift QL iteration (tql2 variant) with eigenvector accumulation.
/// Eigenvalues are returned ascending and each eigenvector is signed so that
/// its first component with magnitude above 1e-9 is positive. Throws
/// EigenSolverError after 50 sweeps on a single eigenvalue.
EigenSystem eigen_frame(const SymTridiagonal& h);

}  // namespace stirap
