#pragma once

#include <vector>

namespace supercorr {

struct SymmetricEigen {
    std::vector<double> values;   // descending
    std::vector<double> vectors;  // row k = eigenvector of values[k], n x n row-major
};

// Cyclic Jacobi diagonalization of a symmetric matrix (row-major n x n).
// Converges to off(A) < 1e-12 * ||A||_F. Rows of the result are orthonormal;
// the sign convention makes the largest-magnitude component of each vector
// positive. Throws std::domain_error when the input is not symmetric.
SymmetricEigen eigen_symmetric(const std::vector<double>& a, int n);

}  // namespace supercorr
