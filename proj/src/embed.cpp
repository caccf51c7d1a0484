#include "tinv/embed.hpp"

#include <cmath>

#include "tinv/errors.hpp"

namespace tinv::embed {

namespace {

// Eigenvalues at or below this fraction of the leading one are treated as
// zero: their columns are exact zeros and they do not count toward the
// effective rank. Subsumes the clamp for the tiny negatives that roundoff
// introduces on Euclidean input.
constexpr double kRankFloor = 1e-9;

struct Decomposition {
  linalg::EigenDecomposition eig;
  int effective_rank = 0;
};

Decomposition decompose(const geom::PointCloud& cloud, int k, const linalg::EigOptions& opts) {
  geom::validate(cloud);
  if (k < 1 || k > cloud.dim())
    throw InputError("embedding width must satisfy 1 <= k <= d");

  const geom::DistanceMatrix d = geom::pairwise_distances(cloud);
  const Matrix centered = linalg::double_center(d);
  const int pairs = std::min(k, cloud.size());
  Decomposition out;
  out.eig = linalg::sym_eig_topk(centered, pairs, opts);

  const double lead = out.eig.values(0);
  if (lead <= 0.0)
    throw DegenerateInputError("all points coincide; embedding undefined");
  for (int i = 0; i < pairs; ++i)
    if (out.eig.values(i) > kRankFloor * lead) ++out.effective_rank;
  return out;
}

}  // namespace

std::string to_string(SignMode mode) {
  switch (mode) {
    case SignMode::Raw: return "raw";
    case SignMode::Canonical: return "canonical";
    case SignMode::Variant: return "variant";
  }
  return "raw";
}

Matrix similarity_matrix(const geom::DistanceMatrix& distances) {
  linalg::validate_distance_matrix(distances);
  return -0.5 * distances.cwiseProduct(distances);
}

MdsEmbedding classical_mds(const geom::PointCloud& cloud, int k, const linalg::EigOptions& opts) {
  const Decomposition dec = decompose(cloud, k, opts);
  const int n = cloud.size();
  const int pairs = static_cast<int>(dec.eig.values.size());
  const double lead = dec.eig.values(0);

  MdsEmbedding out;
  out.h_tilde = Matrix::Zero(n, k);
  out.effective_rank = dec.effective_rank;
  for (int i = 0; i < pairs; ++i) {
    if (dec.eig.values(i) <= kRankFloor * lead) continue;
    out.h_tilde.col(i) = dec.eig.vectors.col(i) * std::sqrt(dec.eig.values(i));
  }
  return out;
}

InvariantEmbedding tinv_embed(const geom::PointCloud& cloud, int k, const linalg::EigOptions& opts) {
  const Decomposition dec = decompose(cloud, k, opts);
  const int n = cloud.size();
  const int pairs = static_cast<int>(dec.eig.values.size());
  const double lead = dec.eig.values(0);

  InvariantEmbedding out;
  out.h = Matrix::Zero(n, k);
  out.top_eigenvalue = lead;
  out.effective_rank = dec.effective_rank;
  out.multiplicity_warning = dec.eig.multiplicity_warning;
  for (int i = 0; i < pairs; ++i) {
    if (dec.eig.values(i) <= kRankFloor * lead) continue;
    out.h.col(i) = dec.eig.vectors.col(i) * std::sqrt(dec.eig.values(i) / lead);
  }
  return out;
}

InvariantEmbedding canonical_sign(const InvariantEmbedding& e) {
  if (e.sign_mode == SignMode::Variant)
    throw InputError("canonical_sign expects a raw or canonical embedding");

  InvariantEmbedding out = e;
  out.sign_mode = SignMode::Canonical;
  out.ambiguous_columns.clear();
  for (int j = 0; j < out.width(); ++j) {
    const double sum = out.h.col(j).sum();
    const double norm = out.h.col(j).norm();
    if (std::abs(sum) < 1e-9 * norm) {
      out.ambiguous_columns.push_back(j);
      continue;  // zero-sum failure case: leave unflipped, mark
    }
    if (sum < 0.0) out.h.col(j) = -out.h.col(j);
  }
  return out;
}

std::vector<InvariantEmbedding> sign_variants(const InvariantEmbedding& e) {
  const int k = e.width();
  if (k > 8) throw InputError("sign enumeration is guarded to k <= 8");
  const int count = 1 << k;
  std::vector<InvariantEmbedding> variants;
  variants.reserve(static_cast<std::size_t>(count));
  for (int mask = 0; mask < count; ++mask) {
    InvariantEmbedding v = e;
    v.sign_mode = SignMode::Variant;
    v.variant_index = mask;
    for (int j = 0; j < k; ++j)
      if (mask & (1 << j)) v.h.col(j) = -v.h.col(j);
    variants.push_back(std::move(v));
  }
  return variants;
}

double mean_frobenius_norm(const std::vector<InvariantEmbedding>& batch) {
  if (batch.empty()) throw ConfigError("mean_frobenius_norm of an empty batch");
  double sum = 0.0;
  for (const auto& e : batch) sum += e.h.norm();
  return sum / static_cast<double>(batch.size());
}

void frobenius_normalize(std::vector<InvariantEmbedding>& batch, double training_mean_fro) {
  if (!(training_mean_fro > 0.0) || !std::isfinite(training_mean_fro))
    throw ConfigError("Frobenius normalization constant must be positive");
  for (auto& e : batch) e.h /= training_mean_fro;
}

DistanceCheck verify_distance_preservation(const geom::PointCloud& cloud,
                                           const InvariantEmbedding& e) {
  geom::validate(cloud);
  if (cloud.size() != e.size())
    throw InputError("embedding and cloud point counts differ");
  if (e.top_eigenvalue <= 0.0)
    throw InputError("embedding carries no positive top eigenvalue");

  DistanceCheck check;
  check.scale_constant = 1.0 / std::sqrt(e.top_eigenvalue);
  const int n = cloud.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double df = (cloud.coords.row(i) - cloud.coords.row(j)).norm();
      const double dh = (e.h.row(i) - e.h.row(j)).norm();
      const double err = std::abs(dh - check.scale_constant * df) / std::max(df, 1e-12);
      check.max_relative_error = std::max(check.max_relative_error, err);
    }
  }
  return check;
}

}  // namespace tinv::embed
