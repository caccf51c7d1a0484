#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "tinv/rng.hpp"

namespace tinv::geom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// N x d coordinate matrix plus optional labels. Immutable value type.
struct PointCloud {
  Matrix coords;
  std::optional<std::vector<int>> point_labels;
  std::optional<int> cloud_label;

  int size() const { return static_cast<int>(coords.rows()); }
  int dim() const { return static_cast<int>(coords.cols()); }
};

// Throws InputError unless N >= 1, d >= 1, all entries finite, and
// point_labels (when present) has length N.
void validate(const PointCloud& cloud);

struct Translation {
  Vector offset;
};

struct Rotation {
  Matrix matrix;             // d x d, orthogonal with det +1
  bool about_centroid = false;  // rotate about the cloud centroid, recomputed at apply time
};

struct Reflection {
  std::vector<bool> axis_flips;  // at least one true
};

struct Scaling {
  double factor = 1.0;  // nonzero
};

// A similarity transformation: translation, rotation, reflection, uniform
// scaling, or an ordered composition of these. Construct through the
// factories, which validate the pieces.
class SimilarityTransform {
public:
  struct Compose {
    std::vector<SimilarityTransform> parts;  // applied left to right
  };
  using Kind = std::variant<Translation, Rotation, Reflection, Scaling, Compose>;

  static SimilarityTransform identity();
  static SimilarityTransform translation(Vector offset);
  static SimilarityTransform rotation(Matrix rotation_matrix, bool about_centroid = false);
  static SimilarityTransform reflection(std::vector<bool> axis_flips);
  static SimilarityTransform scaling(double factor);
  static SimilarityTransform compose(std::vector<SimilarityTransform> parts);

  const Kind& kind() const { return kind_; }

  // Product of scaling factors over all components; 1 for isometries.
  double scale_factor() const;

private:
  explicit SimilarityTransform(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

// Transformation settings used by the routing experiments.
enum class TransformSetting { None, Translation, Rotation, Reflection, Scaling, ComposedAll };

PointCloud apply_transform(const PointCloud& cloud, const SimilarityTransform& transform);

// Draws one transform of the given setting for d-dimensional data.
// Translation offsets are uniform on [-100,100] per axis, scale factors
// uniform on (0,100], rotations act about the centroid, reflections flip
// axis 2. ComposedAll chains one of each in random order.
SimilarityTransform random_transform(std::uint64_t rng_seed, TransformSetting setting, int dim);
SimilarityTransform random_transform(Rng& rng, TransformSetting setting, int dim);

Vector centroid(const PointCloud& cloud);

using DistanceMatrix = Matrix;

// Euclidean distances; symmetric with zero diagonal.
DistanceMatrix pairwise_distances(const PointCloud& cloud);

struct Graph {
  int n = 0;
  std::vector<std::vector<int>> neighbors;  // per node, ascending, no self loops

  bool has_edge(int i, int j) const;
  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};

// Union-symmetrized k-nearest-neighbor graph; ties broken by smaller index.
// Requires 1 <= k < N.
Graph knn_graph(const DistanceMatrix& distances, int k);

enum class ShapeKind { Sphere, CubeSurface, LineSegment, Torus };

// n points on the ideal surface plus isotropic Gaussian jitter of standard
// deviation noise_sigma; cloud_label is the shape kind. d = 3.
PointCloud generate_shape(ShapeKind kind, int n, double noise_sigma, std::uint64_t rng_seed);

// n points with coordinates i.i.d. uniform on [0,1]^2.
PointCloud generate_tsp_instance(int n, std::uint64_t rng_seed);

struct CvrpInstance {
  PointCloud points;       // d = 2, unit square
  Eigen::Vector2d depot;
  Vector demands;          // normalized; each in (0, 1]
  double capacity = 1.0;
};

CvrpInstance generate_cvrp_instance(int n, std::uint64_t rng_seed);

// Rotation helpers shared by the experiment drivers.
Matrix rotation_matrix_2d(double angle);
Matrix rotation_matrix_z(double angle);   // 3 x 3, about the z axis
Matrix random_rotation(Rng& rng, int dim);  // uniform on SO(2) / SO(3)

}  // namespace tinv::geom
