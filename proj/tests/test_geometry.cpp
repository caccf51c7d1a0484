#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "tinv/errors.hpp"
#include "tinv/geometry.hpp"
#include "tinv/rng.hpp"

using namespace tinv;
using geom::PointCloud;
using geom::SimilarityTransform;
using geom::TransformSetting;

namespace {

PointCloud make_cloud(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.begin()->size());
  PointCloud cloud;
  cloud.coords.resize(n, d);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) cloud.coords(i, j++) = v;
    ++i;
  }
  return cloud;
}

PointCloud random_cloud(Rng& rng, int n, int d, double lo = -10.0, double hi = 10.0) {
  PointCloud cloud;
  cloud.coords.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) cloud.coords(i, j) = rng.uniform(lo, hi);
  return cloud;
}

}  // namespace

TEST_CASE("apply_transform: identity composition leaves the cloud unchanged") {
  const PointCloud f = make_cloud({{1.5, -2.0}, {0.25, 3.0}, {4.0, 4.0}});
  const PointCloud g = geom::apply_transform(f, SimilarityTransform::identity());
  CHECK(g.coords == f.coords);
}

TEST_CASE("apply_transform: uniform scaling doubles coordinates") {
  const PointCloud f = make_cloud({{0, 0}, {1, 0}});
  const PointCloud g = geom::apply_transform(f, SimilarityTransform::scaling(2.0));
  CHECK(g.coords(0, 0) == 0.0);
  CHECK(g.coords(1, 0) == 2.0);
  CHECK(g.coords(1, 1) == 0.0);
}

TEST_CASE("apply_transform: 90 degree rotation maps (1,0) to (0,1)") {
  const PointCloud f = make_cloud({{1, 0}});
  const auto t = SimilarityTransform::rotation(geom::rotation_matrix_2d(M_PI / 2.0));
  const PointCloud g = geom::apply_transform(f, t);
  CHECK(std::abs(g.coords(0, 0) - 0.0) < 1e-12);
  CHECK(std::abs(g.coords(0, 1) - 1.0) < 1e-12);
}

TEST_CASE("apply_transform: labels pass through and dimension mismatch rejects") {
  PointCloud f = make_cloud({{0, 0}, {1, 1}});
  f.point_labels = std::vector<int>{3, 7};
  f.cloud_label = 9;
  const auto t = SimilarityTransform::translation(Eigen::Vector2d(1.0, -1.0));
  const PointCloud g = geom::apply_transform(f, t);
  CHECK(g.point_labels == f.point_labels);
  CHECK(g.cloud_label == f.cloud_label);

  const auto t3 = SimilarityTransform::translation(Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS_AS(geom::apply_transform(f, t3), InputError);
}

TEST_CASE("transform factories validate their pieces") {
  Eigen::MatrixXd not_orthogonal(2, 2);
  not_orthogonal << 1, 1, 0, 1;
  CHECK_THROWS_AS(SimilarityTransform::rotation(not_orthogonal), InputError);

  Eigen::MatrixXd flip(2, 2);  // orthogonal but det -1
  flip << 1, 0, 0, -1;
  CHECK_THROWS_AS(SimilarityTransform::rotation(flip), InputError);

  CHECK_THROWS_AS(SimilarityTransform::scaling(0.0), InputError);
  CHECK_THROWS_AS(SimilarityTransform::reflection({false, false}), InputError);
}

TEST_CASE("random_transform: None is the identity") {
  const auto t = geom::random_transform(123u, TransformSetting::None, 2);
  const PointCloud f = make_cloud({{0.5, 0.25}, {3, -1}});
  CHECK(geom::apply_transform(f, t).coords == f.coords);
}

TEST_CASE("random_transform: scaling factors lie in (0,100]") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = geom::random_transform(seed, TransformSetting::Scaling, 2);
    const double c = t.scale_factor();
    CHECK(c > 0.0);
    CHECK(c <= 100.0);
  }
}

TEST_CASE("random_transform: 3-D rotations are orthogonal with unit determinant") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Eigen::MatrixXd r = geom::random_rotation(rng, 3);
    const Eigen::MatrixXd gram = r.transpose() * r;
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("random_transform: translation offsets stay in [-100,100]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto t = geom::random_transform(seed, TransformSetting::Translation, 3);
    const auto& tk = std::get<geom::Translation>(t.kind());
    CHECK(tk.offset.cwiseAbs().maxCoeff() <= 100.0);
  }
}

TEST_CASE("random_transform: rotation setting acts about the centroid") {
  const auto t = geom::random_transform(7u, TransformSetting::Rotation, 2);
  const PointCloud f = make_cloud({{1, 1}, {3, 1}, {2, 4}});
  const PointCloud g = geom::apply_transform(f, t);
  const Eigen::VectorXd before = geom::centroid(f);
  const Eigen::VectorXd after = geom::centroid(g);
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random_transform: determinism and composed setting") {
  const auto a = geom::random_transform(99u, TransformSetting::ComposedAll, 2);
  const auto b = geom::random_transform(99u, TransformSetting::ComposedAll, 2);
  const PointCloud f = make_cloud({{0.1, 0.9}, {0.4, 0.2}, {0.8, 0.5}});
  CHECK(geom::apply_transform(f, a).coords == geom::apply_transform(f, b).coords);
  const auto& parts = std::get<SimilarityTransform::Compose>(a.kind()).parts;
  CHECK(parts.size() == 4);
}

TEST_CASE("centroid: hand cases and naive-loop oracle") {
  CHECK(geom::centroid(make_cloud({{0, 0}, {2, 0}})) == Eigen::Vector2d(1, 0));
  CHECK(geom::centroid(make_cloud({{3, 4}})) == Eigen::Vector2d(3, 4));

  Rng rng(5);
  const PointCloud f = random_cloud(rng, 37, 3);
  Eigen::Vector3d naive = Eigen::Vector3d::Zero();
  for (int i = 0; i < f.size(); ++i) naive += f.coords.row(i).transpose();
  naive /= f.size();
  CHECK((geom::centroid(f) - naive).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pairwise_distances: hand cases") {
  const auto d = geom::pairwise_distances(make_cloud({{0, 0}, {1, 0}}));
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == 1.0);
  CHECK(d(1, 0) == 1.0);

  const auto d345 = geom::pairwise_distances(make_cloud({{0, 0}, {3, 4}}));
  CHECK(d345(0, 1) == 5.0);
}

TEST_CASE("pairwise_distances: invariant under isometries, homogeneous under scaling") {
  Rng rng(11);
  const TransformSetting isometries[] = {TransformSetting::Translation, TransformSetting::Rotation,
                                         TransformSetting::Reflection};
  for (int trial = 0; trial < 40; ++trial) {
    const PointCloud f = random_cloud(rng, 12, (trial % 2) ? 2 : 3);
    const auto d = geom::pairwise_distances(f);
    for (auto setting : isometries) {
      const auto t = geom::random_transform(rng.next_u64(), setting, f.dim());
      const auto dt = geom::pairwise_distances(geom::apply_transform(f, t));
      const double scale = d.maxCoeff();
      CHECK((dt - d).cwiseAbs().maxCoeff() <= 1e-10 * scale);
    }
    const double c = rng.uniform_positive(100.0);
    const auto dc = geom::pairwise_distances(geom::apply_transform(f, SimilarityTransform::scaling(c)));
    CHECK((dc - c * d).cwiseAbs().maxCoeff() <= 1e-10 * (c * d.maxCoeff()));
  }
}

TEST_CASE("compose of two transforms equals sequential application") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const PointCloud f = random_cloud(rng, 9, 3);
    const auto t1 = geom::random_transform(rng.next_u64(), TransformSetting::Rotation, 3);
    const auto t2 = geom::random_transform(rng.next_u64(), TransformSetting::Translation, 3);
    const auto composed = SimilarityTransform::compose({t1, t2});
    const auto sequential = geom::apply_transform(geom::apply_transform(f, t1), t2);
    const auto at_once = geom::apply_transform(f, composed);
    CHECK((sequential.coords - at_once.coords).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("knn_graph: collinear hand case and complete graph") {
  const auto d = geom::pairwise_distances(make_cloud({{0.0}, {1.0}, {2.0}}));
  const auto g = geom::knn_graph(d, 1);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(1, 0));
  CHECK(!g.has_edge(0, 2));

  const auto complete = geom::knn_graph(d, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(complete.has_edge(i, j));

  CHECK_THROWS_AS(geom::knn_graph(d, 0), InputError);
  CHECK_THROWS_AS(geom::knn_graph(d, 3), InputError);
}

TEST_CASE("knn_graph: unchanged by similarity transforms") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud f = random_cloud(rng, 15, 3);
    const auto g = geom::knn_graph(geom::pairwise_distances(f), 4);
    const auto t =
        geom::random_transform(rng.next_u64(), TransformSetting::ComposedAll, 3);
    const auto gt = geom::knn_graph(geom::pairwise_distances(geom::apply_transform(f, t)), 4);
    CHECK(g.neighbors == gt.neighbors);
  }
}

TEST_CASE("generate_shape: sphere points sit on the unit sphere") {
  const PointCloud f = geom::generate_shape(geom::ShapeKind::Sphere, 50, 0.0, 3u);
  for (int i = 0; i < f.size(); ++i) CHECK(std::abs(f.coords.row(i).norm() - 1.0) < 1e-12);
  CHECK(f.cloud_label == static_cast<int>(geom::ShapeKind::Sphere));
}

TEST_CASE("generate_shape: deterministic per seed") {
  const auto a = geom::generate_shape(geom::ShapeKind::Torus, 40, 0.05, 77u);
  const auto b = geom::generate_shape(geom::ShapeKind::Torus, 40, 0.05, 77u);
  CHECK(a.coords == b.coords);
  const auto c = geom::generate_shape(geom::ShapeKind::Torus, 40, 0.05, 78u);
  CHECK(a.coords != c.coords);
}

TEST_CASE("generate_shape: noiseless line segment has centered rank 1") {
  const PointCloud f = geom::generate_shape(geom::ShapeKind::LineSegment, 30, 0.0, 5u);
  Eigen::MatrixXd centered = f.coords.rowwise() - f.coords.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  CHECK(rank == 1);
}

TEST_CASE("generate_tsp_instance: unit square, deterministic, mean near 0.5") {
  const auto inst = geom::generate_tsp_instance(50, 1u);
  CHECK(inst.coords.minCoeff() >= 0.0);
  CHECK(inst.coords.maxCoeff() <= 1.0);
  CHECK(geom::generate_tsp_instance(50, 1u).coords == inst.coords);

  const auto big = geom::generate_tsp_instance(100000, 2u);
  CHECK(std::abs(big.coords.mean() - 0.5) < 0.01);
}

TEST_CASE("generate_cvrp_instance: demand normalization per reference sizes") {
  const auto inst = geom::generate_cvrp_instance(20, 4u);
  CHECK(inst.capacity == 1.0);
  for (int i = 0; i < 20; ++i) {
    const double raw = inst.demands(i) * 30.0;
    CHECK(raw > 0.5);
    CHECK(raw < 9.5);
    CHECK(std::abs(raw - std::round(raw)) < 1e-12);
    CHECK(inst.demands(i) <= 9.0 / 30.0);
  }

  // expectation of uniform{1..9}/30 is 5/30 per point
  double mean_sum = 0.0;
  const int trials = 400;
  for (int s = 0; s < trials; ++s)
    mean_sum += geom::generate_cvrp_instance(20, 1000u + s).demands.sum();
  mean_sum /= trials;
  CHECK(std::abs(mean_sum - 20.0 * 5.0 / 30.0) < 0.05);

  const auto inst50 = geom::generate_cvrp_instance(50, 4u);
  CHECK(inst50.demands.maxCoeff() <= 9.0 / 40.0 + 1e-15);
  const auto inst37 = geom::generate_cvrp_instance(37, 4u);  // falls back to 50
  CHECK(inst37.demands.maxCoeff() <= 9.0 / 50.0 + 1e-15);
}

TEST_CASE("point cloud validation rejects bad shapes") {
  PointCloud empty;
  empty.coords.resize(0, 2);
  CHECK_THROWS_AS(geom::validate(empty), InputError);

  PointCloud bad_labels = make_cloud({{0, 0}, {1, 1}});
  bad_labels.point_labels = std::vector<int>{1};
  CHECK_THROWS_AS(geom::validate(bad_labels), InputError);

  PointCloud nan_cloud = make_cloud({{0, 0}});
  nan_cloud.coords(0, 0) = std::nan("");
  CHECK_THROWS_AS(geom::validate(nan_cloud), InputError);
}

TEST_CASE("knn_graph: equidistant candidates resolve to the smaller index") {
  // A sits exactly between B (index 1) and C (index 2); B and C prefer their
  // outer partners, so A's pick alone decides which hub edge exists.
  const PointCloud f = make_cloud({{0.0}, {1.0}, {-1.0}, {1.4}, {-1.4}});
  const auto g = geom::knn_graph(geom::pairwise_distances(f), 1);
  CHECK(g.has_edge(0, 1));   // tie broken toward index 1
  CHECK(!g.has_edge(0, 2));
  CHECK(g.has_edge(1, 3));
  CHECK(g.has_edge(2, 4));
}

TEST_CASE("generate_shape: cube surface and torus sit on their ideal surfaces") {
  const PointCloud cube = geom::generate_shape(geom::ShapeKind::CubeSurface, 40, 0.0, 9u);
  for (int i = 0; i < cube.size(); ++i) {
    const double largest = cube.coords.row(i).cwiseAbs().maxCoeff();
    CHECK(std::abs(largest - 1.0) < 1e-12);  // one coordinate pinned to a face
  }

  const PointCloud torus = geom::generate_shape(geom::ShapeKind::Torus, 40, 0.0, 9u);
  for (int i = 0; i < torus.size(); ++i) {
    const double x = torus.coords(i, 0), y = torus.coords(i, 1), z = torus.coords(i, 2);
    const double ring = std::sqrt(x * x + y * y) - 1.0;
    CHECK(std::abs(std::sqrt(ring * ring + z * z) - 0.4) < 1e-12);
  }
}
