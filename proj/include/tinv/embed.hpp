#pragma once

#include <string>
#include <vector>

#include "tinv/geometry.hpp"
#include "tinv/linalg.hpp"

namespace tinv::embed {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class SignMode { Raw, Canonical, Variant };

std::string to_string(SignMode mode);

// Normalized distance-preserving point representation: the top-k
// eigenvectors of the doubly centered similarity matrix scaled by
// sqrt(lambda_i / lambda_1). Dimensionless; column signs handled separately.
struct InvariantEmbedding {
  Matrix h;                            // N x k
  double top_eigenvalue = 0.0;
  SignMode sign_mode = SignMode::Raw;
  int variant_index = 0;               // meaningful when sign_mode == Variant
  int effective_rank = 0;              // nonzero columns
  bool multiplicity_warning = false;
  std::vector<int> ambiguous_columns;  // set by canonical_sign

  int size() const { return static_cast<int>(h.rows()); }
  int width() const { return static_cast<int>(h.cols()); }
};

// Classical multidimensional scaling coordinates, in the input's length
// units: X sqrt(lambda).
struct MdsEmbedding {
  Matrix h_tilde;  // N x k
  int effective_rank = 0;
};

// Entrywise -1/2 D^2.
Matrix similarity_matrix(const geom::DistanceMatrix& distances);

MdsEmbedding classical_mds(const geom::PointCloud& cloud, int k,
                           const linalg::EigOptions& opts = {});

InvariantEmbedding tinv_embed(const geom::PointCloud& cloud, int k,
                              const linalg::EigOptions& opts = {});

// Flips each column whose entry sum is negative. Columns whose sum is
// negligible against their norm are left untouched and recorded in
// ambiguous_columns. Idempotent.
InvariantEmbedding canonical_sign(const InvariantEmbedding& e);

// All 2^k column-sign combinations, indexed by bitmask (bit i flips column
// i). Variant 0 is the input. Guarded to k <= 8.
std::vector<InvariantEmbedding> sign_variants(const InvariantEmbedding& e);

double mean_frobenius_norm(const std::vector<InvariantEmbedding>& batch);

// Divides every embedding by the training-split constant so downstream
// network inputs share scale.
void frobenius_normalize(std::vector<InvariantEmbedding>& batch, double training_mean_fro);

struct DistanceCheck {
  double max_relative_error = 0.0;
  double scale_constant = 0.0;  // 1 / sqrt(top eigenvalue)
};

// Max over pairs of |dist(H_i,H_j) - c' dist(F_i,F_j)| / max(dist(F_i,F_j), eps).
DistanceCheck verify_distance_preservation(const geom::PointCloud& cloud,
                                           const InvariantEmbedding& e);

}  // namespace tinv::embed
