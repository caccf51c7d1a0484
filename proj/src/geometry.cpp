#include "tinv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tinv/errors.hpp"

namespace tinv::geom {

namespace {

constexpr double kOrthoTol = 1e-12;

bool is_rotation_matrix(const Matrix& r) {
  if (r.rows() != r.cols() || r.rows() < 1) return false;
  const Matrix gram = r.transpose() * r;
  const Matrix eye = Matrix::Identity(r.rows(), r.cols());
  if ((gram - eye).cwiseAbs().maxCoeff() > kOrthoTol) return false;
  return std::abs(r.determinant() - 1.0) <= kOrthoTol;
}

}  // namespace

void validate(const PointCloud& cloud) {
  if (cloud.coords.rows() < 1 || cloud.coords.cols() < 1)
    throw InputError("point cloud must have N >= 1 and d >= 1");
  if (!cloud.coords.allFinite())
    throw InputError("point cloud has non-finite coordinates");
  if (cloud.point_labels &&
      static_cast<Eigen::Index>(cloud.point_labels->size()) != cloud.coords.rows())
    throw InputError("point_labels length does not match point count");
}

SimilarityTransform SimilarityTransform::identity() {
  return SimilarityTransform(Compose{});
}

SimilarityTransform SimilarityTransform::translation(Vector offset) {
  if (offset.size() < 1) throw InputError("translation offset is empty");
  if (!offset.allFinite()) throw InputError("translation offset is not finite");
  return SimilarityTransform(Translation{std::move(offset)});
}

SimilarityTransform SimilarityTransform::rotation(Matrix rotation_matrix, bool about_centroid) {
  if (!rotation_matrix.allFinite() || !is_rotation_matrix(rotation_matrix))
    throw InputError("rotation matrix is not orthogonal with determinant +1");
  return SimilarityTransform(Rotation{std::move(rotation_matrix), about_centroid});
}

SimilarityTransform SimilarityTransform::reflection(std::vector<bool> axis_flips) {
  if (std::none_of(axis_flips.begin(), axis_flips.end(), [](bool b) { return b; }))
    throw InputError("reflection must flip at least one axis");
  return SimilarityTransform(Reflection{std::move(axis_flips)});
}

SimilarityTransform SimilarityTransform::scaling(double factor) {
  if (factor == 0.0 || !std::isfinite(factor))
    throw InputError("scaling factor must be nonzero and finite");
  return SimilarityTransform(Scaling{factor});
}

SimilarityTransform SimilarityTransform::compose(std::vector<SimilarityTransform> parts) {
  return SimilarityTransform(Compose{std::move(parts)});
}

double SimilarityTransform::scale_factor() const {
  struct Visitor {
    double operator()(const Translation&) const { return 1.0; }
    double operator()(const Rotation&) const { return 1.0; }
    double operator()(const Reflection&) const { return 1.0; }
    double operator()(const Scaling& s) const { return std::abs(s.factor); }
    double operator()(const SimilarityTransform::Compose& c) const {
      double f = 1.0;
      for (const auto& part : c.parts) f *= part.scale_factor();
      return f;
    }
  };
  return std::visit(Visitor{}, kind_);
}

namespace {

Matrix apply_to_coords(const Matrix& coords, const SimilarityTransform& transform);

struct ApplyVisitor {
  const Matrix& coords;

  Matrix operator()(const Translation& t) const {
    if (t.offset.size() != coords.cols())
      throw InputError("translation dimension does not match point cloud");
    return coords.rowwise() + t.offset.transpose();
  }

  Matrix operator()(const Rotation& r) const {
    if (r.matrix.rows() != coords.cols())
      throw InputError("rotation dimension does not match point cloud");
    if (!r.about_centroid) return coords * r.matrix;
    const Eigen::RowVectorXd center = coords.colwise().mean();
    return ((coords.rowwise() - center) * r.matrix).rowwise() + center;
  }

  Matrix operator()(const Reflection& f) const {
    if (static_cast<Eigen::Index>(f.axis_flips.size()) != coords.cols())
      throw InputError("reflection dimension does not match point cloud");
    Matrix out = coords;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      if (f.axis_flips[static_cast<std::size_t>(j)]) out.col(j) = -out.col(j);
    return out;
  }

  Matrix operator()(const Scaling& s) const { return s.factor * coords; }

  Matrix operator()(const SimilarityTransform::Compose& c) const {
    Matrix out = coords;
    for (const auto& part : c.parts) out = apply_to_coords(out, part);
    return out;
  }
};

Matrix apply_to_coords(const Matrix& coords, const SimilarityTransform& transform) {
  return std::visit(ApplyVisitor{coords}, transform.kind());
}

}  // namespace

PointCloud apply_transform(const PointCloud& cloud, const SimilarityTransform& transform) {
  validate(cloud);
  PointCloud out = cloud;  // labels pass through
  out.coords = apply_to_coords(cloud.coords, transform);
  return out;
}

Matrix rotation_matrix_2d(double angle) {
  Matrix r(2, 2);
  const double c = std::cos(angle), s = std::sin(angle);
  r << c, s, -s, c;
  return r;
}

Matrix rotation_matrix_z(double angle) {
  Matrix r = Matrix::Identity(3, 3);
  const double c = std::cos(angle), s = std::sin(angle);
  r(0, 0) = c;
  r(0, 1) = s;
  r(1, 0) = -s;
  r(1, 1) = c;
  return r;
}

Matrix random_rotation(Rng& rng, int dim) {
  if (dim == 2) return rotation_matrix_2d(rng.uniform(0.0, 2.0 * M_PI));
  if (dim != 3) throw InputError("random rotations are defined for d in {2,3}");
  // Shoemake's uniform quaternion construction.
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qx = a * std::sin(2.0 * M_PI * u2);
  const double qy = a * std::cos(2.0 * M_PI * u2);
  const double qz = b * std::sin(2.0 * M_PI * u3);
  const double qw = b * std::cos(2.0 * M_PI * u3);
  Matrix r(3, 3);
  r << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw),
      2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw),
      2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy);
  return r;
}

namespace {

SimilarityTransform random_basic(Rng& rng, TransformSetting setting, int dim) {
  switch (setting) {
    case TransformSetting::None:
      return SimilarityTransform::identity();
    case TransformSetting::Translation: {
      Vector offset(dim);
      for (int j = 0; j < dim; ++j) offset(j) = rng.uniform(-100.0, 100.0);
      return SimilarityTransform::translation(std::move(offset));
    }
    case TransformSetting::Rotation:
      return SimilarityTransform::rotation(random_rotation(rng, dim), /*about_centroid=*/true);
    case TransformSetting::Reflection: {
      // Flip axis 2, matching the planar x-axis reflection.
      std::vector<bool> flips(static_cast<std::size_t>(dim), false);
      if (dim < 2) throw InputError("reflection setting needs d >= 2");
      flips[1] = true;
      return SimilarityTransform::reflection(std::move(flips));
    }
    case TransformSetting::Scaling:
      return SimilarityTransform::scaling(rng.uniform_positive(100.0));
    case TransformSetting::ComposedAll:
      break;
  }
  throw InputError("unknown transform setting");
}

}  // namespace

SimilarityTransform random_transform(Rng& rng, TransformSetting setting, int dim) {
  if (dim < 1) throw InputError("transform dimension must be >= 1");
  if (setting != TransformSetting::ComposedAll) return random_basic(rng, setting, dim);
  std::vector<TransformSetting> order = {TransformSetting::Translation, TransformSetting::Rotation,
                                         TransformSetting::Reflection, TransformSetting::Scaling};
  // Fisher-Yates with the caller's stream.
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  std::vector<SimilarityTransform> parts;
  parts.reserve(order.size());
  for (TransformSetting s : order) parts.push_back(random_basic(rng, s, dim));
  return SimilarityTransform::compose(std::move(parts));
}

SimilarityTransform random_transform(std::uint64_t rng_seed, TransformSetting setting, int dim) {
  Rng rng(rng_seed);
  return random_transform(rng, setting, dim);
}

Vector centroid(const PointCloud& cloud) {
  validate(cloud);
  return cloud.coords.colwise().mean().transpose();
}

DistanceMatrix pairwise_distances(const PointCloud& cloud) {
  validate(cloud);
  const int n = cloud.size();
  const int dim = cloud.dim();
  // row-major copy keeps the inner loop streaming over both operands
  std::vector<double> pts(static_cast<std::size_t>(n) * dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) pts[static_cast<std::size_t>(i) * dim + j] = cloud.coords(i, j);

  DistanceMatrix d(n, n);
  for (int j = 0; j < n; ++j) {
    const double* pj = &pts[static_cast<std::size_t>(j) * dim];
    double* col = d.col(j).data();
    col[j] = 0.0;
    for (int i = j + 1; i < n; ++i) {
      const double* pi = &pts[static_cast<std::size_t>(i) * dim];
      double acc = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double diff = pi[c] - pj[c];
        acc += diff * diff;
      }
      col[i] = std::sqrt(acc);
    }
  }
  // mirror the lower triangle in cache-sized tiles
  constexpr int kTile = 64;
  for (int jb = 0; jb < n; jb += kTile)
    for (int ib = jb; ib < n; ib += kTile)
      for (int j = jb; j < std::min(jb + kTile, n); ++j)
        for (int i = std::max(ib, j + 1); i < std::min(ib + kTile, n); ++i) d(j, i) = d(i, j);
  return d;
}

bool Graph::has_edge(int i, int j) const {
  const auto& list = neighbors[static_cast<std::size_t>(i)];
  return std::binary_search(list.begin(), list.end(), j);
}

Graph knn_graph(const DistanceMatrix& distances, int k) {
  const int n = static_cast<int>(distances.rows());
  if (distances.cols() != n) throw InputError("distance matrix must be square");
  if (k < 1 || k >= n) throw InputError("knn_graph requires 1 <= k < N");

  std::vector<std::vector<int>> nearest(static_cast<std::size_t>(n));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    idx.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) idx.push_back(j);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
      if (distances(i, a) != distances(i, b)) return distances(i, a) < distances(i, b);
      return a < b;  // ties by smaller index
    });
    nearest[static_cast<std::size_t>(i)].assign(idx.begin(), idx.begin() + k);
  }

  Graph g;
  g.n = n;
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    for (int j : nearest[static_cast<std::size_t>(i)]) {
      g.neighbors[static_cast<std::size_t>(i)].push_back(j);
      g.neighbors[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  for (auto& list : g.neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

PointCloud generate_shape(ShapeKind kind, int n, double noise_sigma, std::uint64_t rng_seed) {
  if (n < 4) throw InputError("generate_shape requires n >= 4");
  Rng rng(rng_seed);
  Matrix coords(n, 3);
  switch (kind) {
    case ShapeKind::Sphere:
      for (int i = 0; i < n; ++i) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        while (v.norm() < 1e-12) v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        coords.row(i) = v.normalized().transpose();
      }
      break;
    case ShapeKind::CubeSurface:
      for (int i = 0; i < n; ++i) {
        const int face = rng.uniform_int(0, 5);
        const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
        const int axis = face / 2;
        const double side = (face % 2 == 0) ? -1.0 : 1.0;
        Eigen::Vector3d p;
        p(axis) = side;
        p((axis + 1) % 3) = u;
        p((axis + 2) % 3) = v;
        coords.row(i) = p.transpose();
      }
      break;
    case ShapeKind::LineSegment:
      for (int i = 0; i < n; ++i) {
        const double t = rng.uniform(-1.0, 1.0);
        coords.row(i) << 0.0, 0.0, t;
      }
      break;
    case ShapeKind::Torus:
      for (int i = 0; i < n; ++i) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double ring = 1.0 + 0.4 * std::cos(phi);
        coords.row(i) << ring * std::cos(theta), ring * std::sin(theta), 0.4 * std::sin(phi);
      }
      break;
  }
  if (noise_sigma > 0.0)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) coords(i, j) += noise_sigma * rng.normal();

  PointCloud cloud;
  cloud.coords = std::move(coords);
  cloud.cloud_label = static_cast<int>(kind);
  return cloud;
}

PointCloud generate_tsp_instance(int n, std::uint64_t rng_seed) {
  if (n < 2) throw InputError("generate_tsp_instance requires n >= 2");
  Rng rng(rng_seed);
  Matrix coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  PointCloud cloud;
  cloud.coords = std::move(coords);
  return cloud;
}

CvrpInstance generate_cvrp_instance(int n, std::uint64_t rng_seed) {
  if (n < 1) throw InputError("generate_cvrp_instance requires n >= 1");
  Rng rng(rng_seed);
  CvrpInstance inst;
  Matrix coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  inst.points.coords = std::move(coords);
  inst.depot = Eigen::Vector2d(rng.uniform(), rng.uniform());
  double denom = 50.0;  // default for sizes the reference setup does not name
  if (n == 20) denom = 30.0;
  else if (n == 50) denom = 40.0;
  else if (n == 100) denom = 50.0;
  inst.demands.resize(n);
  for (int i = 0; i < n; ++i) inst.demands(i) = rng.uniform_int(1, 9) / denom;
  inst.capacity = 1.0;
  return inst;
}

}  // namespace tinv::geom
