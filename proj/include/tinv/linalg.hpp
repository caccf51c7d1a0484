#pragma once

#include <Eigen/Dense>

namespace tinv::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Top-k eigenpairs of a symmetric matrix, eigenvalues descending.
// residual_bound is the achieved max_i ||S x_i - l_i x_i||_2 / ||S||_F.
struct EigenDecomposition {
  Vector values;
  Matrix vectors;
  double residual_bound = 0.0;
  bool multiplicity_warning = false;
};

struct EigOptions {
  double tol = 1e-10;        // relative residual target
  int max_sweeps = 100;      // Jacobi sweep cap
  int max_block_iters = 500; // subspace iteration cap
};

bool is_symmetric(const Matrix& m, double tol = 1e-12);

// Rejects asymmetric, negative, or nonzero-diagonal distance matrices.
void validate_distance_matrix(const Matrix& distances);

// Doubly centered -1/2 D(.)D matrix: subtract row means, column means, add
// the grand mean. Rows of the result sum to zero; for Euclidean D the result
// is positive semidefinite up to roundoff.
Matrix double_center(const Matrix& distances);

// Deterministic top-k symmetric eigendecomposition. Small matrices get a
// full cyclic Jacobi sweep set; larger ones a block subspace iteration with
// Rayleigh-Ritz extraction, seeded from a fixed polynomial block so repeated
// runs are identical. Near-degenerate leading eigenvalues set
// multiplicity_warning. Throws ConvergenceError past the iteration cap.
EigenDecomposition sym_eig_topk(const Matrix& s, int k, const EigOptions& opts = {});

// Full-spectrum cyclic Jacobi, exposed for small problems and tests.
// Eigenvalues land unsorted in `values` with matching columns of `vectors`.
void jacobi_eigen(const Matrix& s, Vector& values, Matrix& vectors, double tol, int max_sweeps);

}  // namespace tinv::linalg
