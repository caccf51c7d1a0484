#include "tinv/tasks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "tinv/errors.hpp"
#include "tinv/rng.hpp"

namespace tinv::tasks {

namespace {

constexpr std::uint64_t kTagTestRotation = 0x7e57ULL << 32;
constexpr std::uint64_t kTagTrainRotation = 0x7121ULL << 32;
constexpr std::uint64_t kTagInstance = 0x1257ULL << 32;
constexpr std::uint64_t kTagSetting = 0x5e77ULL << 32;
constexpr std::uint64_t kTagInvarianceCheck = 0xc43cULL << 32;

geom::Matrix draw_rotation(RotationKind kind, Rng& rng, int dim) {
  if (kind == RotationKind::AboutZ)
    return dim == 3 ? geom::rotation_matrix_z(rng.uniform(0.0, 2.0 * M_PI))
                    : geom::rotation_matrix_2d(rng.uniform(0.0, 2.0 * M_PI));
  return geom::random_rotation(rng, dim);
}

std::vector<geom::PointCloud> rotate_clouds(const std::vector<geom::PointCloud>& clouds,
                                            RotationKind kind, const Rng& root,
                                            std::uint64_t tag) {
  if (kind == RotationKind::None) return clouds;
  std::vector<geom::PointCloud> out;
  out.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    Rng stream = root.split(tag + i);
    const auto rot =
        geom::SimilarityTransform::rotation(draw_rotation(kind, stream, clouds[i].dim()));
    out.push_back(geom::apply_transform(clouds[i], rot));
  }
  return out;
}

nn::Augmentation augmentation_for(RotationKind kind) {
  switch (kind) {
    case RotationKind::None: return nn::Augmentation::None;
    case RotationKind::AboutZ: return nn::Augmentation::ZRotations;
    case RotationKind::Full: return nn::Augmentation::So3Rotations;
  }
  return nn::Augmentation::None;
}

double feature_distance(const Matrix& features, int a, int b) {
  return (features.row(a) - features.row(b)).norm();
}

// Shared decoder skeleton: repeatedly move to the unvisited candidate with
// the smallest score, ties by index.
template <typename ScoreFn>
std::vector<int> decode_sequence(int n, int start, ScoreFn&& score) {
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  int current = start;
  visited[static_cast<std::size_t>(start)] = true;
  order.push_back(start);
  for (int step = 1; step < n; ++step) {
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      const double s = score(current, j);
      if (s < best_score) {
        best_score = s;
        best = j;
      }
    }
    visited[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
    current = best;
  }
  return order;
}

// CVRP construction shared by the greedy and scored decoders. Feature row 0
// is the depot; point i sits at row i + 1.
template <typename ScoreFn>
CvrpTour decode_cvrp(const geom::CvrpInstance& instance, ScoreFn&& score) {
  const int n = instance.points.size();
  for (int i = 0; i < n; ++i)
    if (instance.demands(i) > instance.capacity + 1e-12)
      throw InputError("a single demand exceeds the vehicle capacity");

  CvrpTour tour;
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  int remaining = n;
  int current_row = 0;  // depot
  double room = instance.capacity;
  std::vector<int> route;
  while (remaining > 0) {
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (visited[static_cast<std::size_t>(j)]) continue;
      if (instance.demands(j) > room + 1e-12) continue;
      const double s = score(current_row, j + 1);
      if (s < best_score) {
        best_score = s;
        best = j;
      }
    }
    if (best < 0) {
      if (route.empty())
        throw InputError("no unvisited point fits an empty route");  // demands corrupt
      tour.routes.push_back(route);
      route.clear();
      current_row = 0;
      room = instance.capacity;
      continue;
    }
    visited[static_cast<std::size_t>(best)] = true;
    route.push_back(best);
    room -= instance.demands(best);
    current_row = best + 1;
    --remaining;
  }
  if (!route.empty()) tour.routes.push_back(route);
  return tour;
}

double slope_of_loglog(const std::vector<BenchRow>& rows) {
  const int m = static_cast<int>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& row : rows) {
    const double x = std::log(static_cast<double>(row.n));
    const double y = std::log(std::max(row.mean_seconds, 1e-12));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

Protocol parse_protocol(const std::string& name) {
  const auto slash = name.find('/');
  if (slash == std::string::npos) throw InputError("protocol must look like z/SO3");
  auto parse_side = [](const std::string& side) {
    if (side == "z") return RotationKind::AboutZ;
    if (side == "SO3" || side == "so3") return RotationKind::Full;
    if (side == "none") return RotationKind::None;
    throw InputError("unknown protocol side: " + side);
  };
  return Protocol{parse_side(name.substr(0, slash)), parse_side(name.substr(slash + 1))};
}

std::string to_string(const Protocol& protocol) {
  auto side = [](RotationKind kind) {
    switch (kind) {
      case RotationKind::None: return "none";
      case RotationKind::AboutZ: return "z";
      case RotationKind::Full: return "SO3";
    }
    return "none";
  };
  return std::string(side(protocol.train_rotation)) + "/" + side(protocol.test_rotation);
}

std::string to_string(geom::TransformSetting setting) {
  switch (setting) {
    case geom::TransformSetting::None: return "none";
    case geom::TransformSetting::Translation: return "translation";
    case geom::TransformSetting::Rotation: return "rotation";
    case geom::TransformSetting::Reflection: return "reflection";
    case geom::TransformSetting::Scaling: return "scaling";
    case geom::TransformSetting::ComposedAll: return "composed";
  }
  return "none";
}

nn::Dataset make_shape_dataset(const ShapeDatasetConfig& config) {
  if (config.train_per_class < 1 || config.test_per_class < 1)
    throw ConfigError("dataset needs at least one cloud per class and split");
  const geom::ShapeKind kinds[] = {geom::ShapeKind::Sphere, geom::ShapeKind::CubeSurface,
                                   geom::ShapeKind::LineSegment, geom::ShapeKind::Torus};
  nn::Dataset dataset;
  const Rng root(config.seed);
  std::uint64_t stream = 0;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < config.train_per_class; ++i) {
      dataset.train_clouds.push_back(generate_shape(kinds[c], config.points, config.noise_sigma,
                                                    root.split(stream++).next_u64()));
      dataset.train_labels.push_back(c);
    }
  }
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < config.test_per_class; ++i) {
      dataset.test_clouds.push_back(generate_shape(kinds[c], config.points, config.noise_sigma,
                                                   root.split(stream++).next_u64()));
      dataset.test_labels.push_back(c);
    }
  }
  return dataset;
}

ProtocolRun run_classification_protocol(const nn::Dataset& dataset, const Protocol& protocol,
                                        nn::EmbedMode mode, const nn::TrainConfig& config) {
  nn::TrainConfig train_config = config;
  train_config.augmentation = augmentation_for(protocol.train_rotation);

  nn::Dataset prepared = dataset;
  const Rng root(config.rng_seed);
  prepared.test_clouds =
      rotate_clouds(dataset.test_clouds, protocol.test_rotation, root, kTagTestRotation);

  ProtocolRun run;
  run.training = nn::train_classifier(prepared, mode, train_config);
  run.accuracy = run.training.test_accuracy;
  run.predictions = run.training.test_predictions;
  return run;
}

void validate_tour(const Tour& tour, int n) {
  if (static_cast<int>(tour.order.size()) != n)
    throw InputError("tour length does not match the instance");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int idx : tour.order) {
    if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
      throw InputError("tour is not a permutation");
    seen[static_cast<std::size_t>(idx)] = true;
  }
}

void validate_cvrp_tour(const geom::CvrpInstance& instance, const CvrpTour& tour) {
  const int n = instance.points.size();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const auto& route : tour.routes) {
    double load = 0.0;
    for (int idx : route) {
      if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
        throw InputError("CVRP routes must cover each point exactly once");
      seen[static_cast<std::size_t>(idx)] = true;
      load += instance.demands(idx);
    }
    if (load > instance.capacity + 1e-12) throw InputError("route exceeds the vehicle capacity");
  }
  for (bool s : seen)
    if (!s) throw InputError("CVRP routes must cover every point");
}

double tour_length(const geom::PointCloud& cloud, const Tour& tour) {
  validate_tour(tour, cloud.size());
  const int n = cloud.size();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = tour.order[static_cast<std::size_t>(i)];
    const int b = tour.order[static_cast<std::size_t>((i + 1) % n)];
    total += (cloud.coords.row(a) - cloud.coords.row(b)).norm();
  }
  return total;
}

double cvrp_length(const geom::CvrpInstance& instance, const CvrpTour& tour) {
  validate_cvrp_tour(instance, tour);
  double total = 0.0;
  for (const auto& route : tour.routes) {
    if (route.empty()) continue;
    Eigen::RowVector2d at = instance.depot.transpose();
    for (int idx : route) {
      total += (instance.points.coords.row(idx) - at).norm();
      at = instance.points.coords.row(idx);
    }
    total += (at - instance.depot.transpose()).norm();
  }
  return total;
}

Tour greedy_tour(const Matrix& features, int start) {
  const int n = static_cast<int>(features.rows());
  if (n < 2) throw InputError("greedy_tour needs at least two points");
  if (start < 0 || start >= n) throw InputError("tour start out of range");
  Tour tour;
  tour.order = decode_sequence(
      n, start, [&](int a, int b) { return feature_distance(features, a, b); });
  validate_tour(tour, n);
  return tour;
}

Tour greedy_tour_distances(const geom::DistanceMatrix& distances, int start) {
  linalg::validate_distance_matrix(distances);
  const int n = static_cast<int>(distances.rows());
  if (n < 2) throw InputError("greedy_tour needs at least two points");
  if (start < 0 || start >= n) throw InputError("tour start out of range");
  Tour tour;
  tour.order = decode_sequence(n, start, [&](int a, int b) { return distances(a, b); });
  validate_tour(tour, n);
  return tour;
}

CvrpTour greedy_cvrp(const geom::CvrpInstance& instance, const Matrix& features_with_depot) {
  if (features_with_depot.rows() != instance.points.size() + 1)
    throw InputError("CVRP features must include a depot row");
  CvrpTour tour = decode_cvrp(instance, [&](int a, int b) {
    return feature_distance(features_with_depot, a, b);
  });
  validate_cvrp_tour(instance, tour);
  return tour;
}

EdgeScorer make_edge_scorer(int feature_width, std::uint64_t seed) {
  if (feature_width < 1) throw ConfigError("edge scorer needs a positive feature width");
  Rng rng(seed);
  EdgeScorer scorer;
  scorer.feature_width = feature_width;
  const int in = 2 * feature_width, hidden = 16;
  nn::DenseLayer first;
  first.weight.resize(in, hidden);
  const double bound = std::sqrt(6.0 / (in + hidden));
  for (int j = 0; j < hidden; ++j)
    for (int i = 0; i < in; ++i) first.weight(i, j) = rng.uniform(-bound, bound);
  first.bias.resize(hidden);
  for (int i = 0; i < hidden; ++i) first.bias(i) = rng.uniform(-0.5, 0.5);
  nn::DenseLayer second;
  second.weight.resize(hidden, 1);
  for (int i = 0; i < hidden; ++i) second.weight(i, 0) = rng.uniform(-bound, bound);
  second.bias.resize(1);
  second.bias(0) = rng.uniform(-0.5, 0.5);
  scorer.layers = {std::move(first), std::move(second)};
  return scorer;
}

double edge_score(const EdgeScorer& scorer, const Eigen::RowVectorXd& from,
                  const Eigen::RowVectorXd& to) {
  if (from.size() != scorer.feature_width || to.size() != scorer.feature_width)
    throw ConfigError("edge scorer width mismatch");
  Eigen::VectorXd a(2 * scorer.feature_width);
  a << from.transpose(), to.transpose();
  Eigen::VectorXd z = scorer.layers[0].weight.transpose() * a + scorer.layers[0].bias;
  z = z.array().tanh();
  return (scorer.layers[1].weight.transpose() * z + scorer.layers[1].bias)(0);
}

Tour scored_tour(const Matrix& features, const EdgeScorer& scorer, int start) {
  const int n = static_cast<int>(features.rows());
  if (n < 2) throw InputError("scored_tour needs at least two points");
  Tour tour;
  tour.order = decode_sequence(
      n, start, [&](int a, int b) { return edge_score(scorer, features.row(a), features.row(b)); });
  validate_tour(tour, n);
  return tour;
}

CvrpTour scored_cvrp(const geom::CvrpInstance& instance, const Matrix& features_with_depot,
                     const EdgeScorer& scorer) {
  if (features_with_depot.rows() != instance.points.size() + 1)
    throw InputError("CVRP features must include a depot row");
  CvrpTour tour = decode_cvrp(instance, [&](int a, int b) {
    return edge_score(scorer, features_with_depot.row(a), features_with_depot.row(b));
  });
  validate_cvrp_tour(instance, tour);
  return tour;
}

Matrix routing_features(const geom::PointCloud& points, nn::EmbedMode mode) {
  if (mode == nn::EmbedMode::RawCoords) return points.coords;
  return embed::canonical_sign(embed::tinv_embed(points, points.dim())).h;
}

Tour score_model_pipeline(const geom::PointCloud& instance, const EdgeScorer& scorer,
                          nn::EmbedMode mode) {
  return scored_tour(routing_features(instance, mode), scorer, 0);
}

CvrpTour score_model_pipeline(const geom::CvrpInstance& instance, const EdgeScorer& scorer,
                              nn::EmbedMode mode) {
  geom::PointCloud with_depot;
  const int n = instance.points.size();
  with_depot.coords.resize(n + 1, 2);
  with_depot.coords.row(0) = instance.depot.transpose();
  with_depot.coords.bottomRows(n) = instance.points.coords;
  return scored_cvrp(instance, routing_features(with_depot, mode), scorer);
}

namespace {

std::vector<int> canonical_closed(const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  const auto at_zero = std::find(order.begin(), order.end(), 0);
  std::vector<int> forward;
  forward.reserve(order.size());
  forward.insert(forward.end(), at_zero, order.end());
  forward.insert(forward.end(), order.begin(), at_zero);
  std::vector<int> backward(static_cast<std::size_t>(n));
  backward[0] = 0;
  for (int i = 1; i < n; ++i) backward[static_cast<std::size_t>(i)] = forward[static_cast<std::size_t>(n - i)];
  return std::min(forward, backward);
}

}  // namespace

bool same_closed_tour(const Tour& a, const Tour& b) {
  if (a.order.size() != b.order.size()) return false;
  return canonical_closed(a.order) == canonical_closed(b.order);
}

bool same_route_set(const CvrpTour& a, const CvrpTour& b) { return a.routes == b.routes; }

RoutingSuite run_routing_suite(const std::string& task, int n, int instances, nn::EmbedMode mode,
                               std::uint64_t seed) {
  if (task != "tsp" && task != "cvrp") throw InputError("task must be tsp or cvrp");
  if (instances < 1) throw InputError("need at least one instance");
  const bool is_tsp = task == "tsp";
  const Rng root(seed);
  const EdgeScorer scorer = make_edge_scorer(2, root.split(1).next_u64());

  const geom::TransformSetting settings[] = {
      geom::TransformSetting::None, geom::TransformSetting::Translation,
      geom::TransformSetting::Rotation, geom::TransformSetting::Reflection,
      geom::TransformSetting::Scaling};

  RoutingSuite suite;
  suite.task = task;
  suite.n = n;
  suite.mode = mode;
  suite.instances = instances;
  suite.rows.resize(std::size(settings));
  for (std::size_t s = 0; s < std::size(settings); ++s) suite.rows[s].setting = settings[s];

  for (int idx = 0; idx < instances; ++idx) {
    const std::uint64_t instance_seed = root.split(kTagInstance + idx).next_u64();
    geom::PointCloud tsp_instance;
    geom::CvrpInstance cvrp_instance;
    Tour base_tour;
    CvrpTour base_routes;
    if (is_tsp) {
      tsp_instance = geom::generate_tsp_instance(n, instance_seed);
      base_tour = score_model_pipeline(tsp_instance, scorer, mode);
    } else {
      cvrp_instance = geom::generate_cvrp_instance(n, instance_seed);
      base_routes = score_model_pipeline(cvrp_instance, scorer, mode);
    }

    for (std::size_t s = 0; s < std::size(settings); ++s) {
      Rng setting_rng = root.split(kTagSetting + idx * 16 + s);
      const auto transform = geom::random_transform(setting_rng, settings[s], 2);
      const double scale = transform.scale_factor();
      if (is_tsp) {
        const auto moved = geom::apply_transform(tsp_instance, transform);
        const Tour tour = score_model_pipeline(moved, scorer, mode);
        const double len = tour_length(moved, tour);
        suite.rows[s].mean_length += len;
        suite.rows[s].mean_normalized_length += len / scale;
        suite.rows[s].identity_rate += same_closed_tour(base_tour, tour) ? 1.0 : 0.0;
      } else {
        geom::CvrpInstance moved = cvrp_instance;
        geom::PointCloud together;
        together.coords.resize(n + 1, 2);
        together.coords.row(0) = cvrp_instance.depot.transpose();
        together.coords.bottomRows(n) = cvrp_instance.points.coords;
        together = geom::apply_transform(together, transform);
        moved.depot = together.coords.row(0).transpose();
        moved.points.coords = together.coords.bottomRows(n);
        const CvrpTour routes = score_model_pipeline(moved, scorer, mode);
        const double len = cvrp_length(moved, routes);
        suite.rows[s].mean_length += len;
        suite.rows[s].mean_normalized_length += len / scale;
        suite.rows[s].identity_rate += same_route_set(base_routes, routes) ? 1.0 : 0.0;
      }
    }
  }
  for (auto& row : suite.rows) {
    row.mean_length /= instances;
    row.mean_normalized_length /= instances;
    row.identity_rate /= instances;
  }
  return suite;
}

BenchResult bench_scaling(const std::vector<int>& sizes, int repeats, int dim,
                          std::uint64_t seed) {
  if (sizes.empty() || repeats < 1) throw InputError("bench needs sizes and repeats >= 1");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 64) throw InputError("bench sizes must be at least 64");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw InputError("bench sizes must ascend");
  }

  const Rng root(seed);
  BenchResult result;
  result.repeats = repeats;
  result.dim = dim;
  for (int n : sizes) {
    Rng stream = root.split(static_cast<std::uint64_t>(n));
    geom::PointCloud cloud;
    cloud.coords.resize(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) cloud.coords(i, j) = stream.uniform(-1.0, 1.0);

    (void)embed::tinv_embed(cloud, dim);  // warm caches before timing
    double total = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const auto e = embed::tinv_embed(cloud, dim);
      const auto stop = std::chrono::steady_clock::now();
      total += std::chrono::duration<double>(stop - start).count();
      if (e.effective_rank < 1) throw DegenerateInputError("bench produced an empty embedding");
    }
    result.rows.push_back({n, total / repeats});
  }
  result.loglog_slope = slope_of_loglog(result.rows);
  return result;
}

SignModeComparison compare_sign_modes(const nn::Dataset& dataset, const Protocol& protocol,
                                      const nn::TrainConfig& config) {
  const Rng root(config.rng_seed);

  // the protocol's rotations become part of the data; augmentation is
  // reserved for the sign treatment under comparison
  nn::Dataset prepared = dataset;
  prepared.train_clouds =
      rotate_clouds(dataset.train_clouds, protocol.train_rotation, root, kTagTrainRotation);
  prepared.test_clouds =
      rotate_clouds(dataset.test_clouds, protocol.test_rotation, root, kTagTestRotation);

  nn::TrainConfig canonical_config = config;
  canonical_config.augmentation = nn::Augmentation::None;
  nn::TrainConfig enumeration_config = config;
  enumeration_config.augmentation = nn::Augmentation::SignEnumeration;

  const auto canonical = nn::train_classifier(prepared, nn::EmbedMode::Tinv, canonical_config);
  const auto enumeration = nn::train_classifier(prepared, nn::EmbedMode::Tinv, enumeration_config);

  // invariance at test time: fresh composed transforms must not move the
  // predictions of either model
  std::vector<geom::PointCloud> moved_test;
  moved_test.reserve(prepared.test_clouds.size());
  for (std::size_t i = 0; i < prepared.test_clouds.size(); ++i) {
    Rng stream = root.split(kTagInvarianceCheck + i);
    const auto t = geom::random_transform(stream, geom::TransformSetting::ComposedAll,
                                          prepared.test_clouds[i].dim());
    moved_test.push_back(geom::apply_transform(prepared.test_clouds[i], t));
  }
  auto invariant_under = [&](const nn::TrainResult& run) {
    const auto moved_examples =
        nn::make_eval_examples(moved_test, prepared.test_labels, run.model);
    return nn::predictions(run.model, moved_examples) == run.test_predictions;
  };

  SignModeComparison cmp;
  cmp.canonical_accuracy = canonical.test_accuracy;
  cmp.enumeration_accuracy = enumeration.test_accuracy;
  cmp.canonical_train_size = canonical.train_example_count;
  cmp.enumeration_train_size = enumeration.train_example_count;
  cmp.canonical_invariant = invariant_under(canonical);
  cmp.enumeration_invariant = invariant_under(enumeration);
  return cmp;
}

}  // namespace tinv::tasks
