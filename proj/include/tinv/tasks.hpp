#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinv/embed.hpp"
#include "tinv/geometry.hpp"
#include "tinv/neuralnet.hpp"

namespace tinv::tasks {

using Matrix = Eigen::MatrixXd;

// Which rotations are applied to the data at train and test time.
enum class RotationKind { None, AboutZ, Full };

struct Protocol {
  RotationKind train_rotation = RotationKind::AboutZ;
  RotationKind test_rotation = RotationKind::AboutZ;
};

// Accepts "z/z", "SO3/SO3", "z/SO3" (and "none" on either side).
Protocol parse_protocol(const std::string& name);
std::string to_string(const Protocol& protocol);

struct ShapeDatasetConfig {
  int train_per_class = 75;
  int test_per_class = 25;
  int points = 64;
  double noise_sigma = 0.02;
  std::uint64_t seed = 42;
};

// Four-class synthetic dataset: sphere, cube surface, line segment, torus.
nn::Dataset make_shape_dataset(const ShapeDatasetConfig& config);

struct ProtocolRun {
  double accuracy = 0.0;
  std::vector<int> predictions;
  nn::TrainResult training;
};

// Trains with the protocol's train-time rotations as augmentation and
// evaluates on test clouds rotated per the protocol's test side.
ProtocolRun run_classification_protocol(const nn::Dataset& dataset, const Protocol& protocol,
                                        nn::EmbedMode mode, const nn::TrainConfig& config);

struct Tour {
  std::vector<int> order;  // permutation of 0..N-1, closed implicitly
};

struct CvrpTour {
  std::vector<std::vector<int>> routes;  // point indices; depot implicit at both ends
};

void validate_tour(const Tour& tour, int n);
void validate_cvrp_tour(const geom::CvrpInstance& instance, const CvrpTour& tour);

// Closed-tour length including the returning edge.
double tour_length(const geom::PointCloud& cloud, const Tour& tour);
// Total length over all routes including both depot legs.
double cvrp_length(const geom::CvrpInstance& instance, const CvrpTour& tour);

// Nearest-unvisited-neighbor decoders in feature space; ties by index.
Tour greedy_tour(const Matrix& features, int start);
Tour greedy_tour_distances(const geom::DistanceMatrix& distances, int start);

// Row 0 of features is the depot, rows 1..n the points. Starts a fresh
// route whenever no unvisited point fits the remaining capacity.
CvrpTour greedy_cvrp(const geom::CvrpInstance& instance, const Matrix& features_with_depot);

// Small edge-scoring network steering the greedy decoder: tanh hidden
// layer over [h_from, h_to], linear output.
struct EdgeScorer {
  std::vector<nn::DenseLayer> layers;
  int feature_width = 0;
};

EdgeScorer make_edge_scorer(int feature_width, std::uint64_t seed);
double edge_score(const EdgeScorer& scorer, const Eigen::RowVectorXd& from,
                  const Eigen::RowVectorXd& to);

Tour scored_tour(const Matrix& features, const EdgeScorer& scorer, int start);
CvrpTour scored_cvrp(const geom::CvrpInstance& instance, const Matrix& features_with_depot,
                     const EdgeScorer& scorer);

// Node features per embed mode: raw coordinates, or the canonical-sign
// normalized embedding.
Matrix routing_features(const geom::PointCloud& points, nn::EmbedMode mode);

Tour score_model_pipeline(const geom::PointCloud& instance, const EdgeScorer& scorer,
                          nn::EmbedMode mode);
CvrpTour score_model_pipeline(const geom::CvrpInstance& instance, const EdgeScorer& scorer,
                              nn::EmbedMode mode);

// Tour identity up to cyclic shift and direction reversal.
bool same_closed_tour(const Tour& a, const Tour& b);
// Exact route-set identity.
bool same_route_set(const CvrpTour& a, const CvrpTour& b);

struct RoutingSettingRow {
  geom::TransformSetting setting;
  double mean_length = 0.0;             // in the transformed coordinates
  double mean_normalized_length = 0.0;  // divided by the transform's scale factor
  double identity_rate = 0.0;           // tours identical to the untransformed decode
};

struct RoutingSuite {
  std::string task;  // "tsp" or "cvrp"
  int n = 0;
  nn::EmbedMode mode = nn::EmbedMode::Tinv;
  int instances = 0;
  std::vector<RoutingSettingRow> rows;
};

RoutingSuite run_routing_suite(const std::string& task, int n, int instances, nn::EmbedMode mode,
                               std::uint64_t seed);

struct BenchRow {
  int n = 0;
  double mean_seconds = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double loglog_slope = 0.0;
  int repeats = 0;
  int dim = 3;
};

// Wall-clock of tinv_embed per size, averaged over repeats, plus the
// least-squares slope of log(time) against log(N).
BenchResult bench_scaling(const std::vector<int>& sizes, int repeats, int dim = 3,
                          std::uint64_t seed = 42);

struct SignModeComparison {
  double canonical_accuracy = 0.0;
  double enumeration_accuracy = 0.0;
  std::size_t canonical_train_size = 0;
  std::size_t enumeration_train_size = 0;
  bool canonical_invariant = false;    // predictions unchanged under test transforms
  bool enumeration_invariant = false;
};

SignModeComparison compare_sign_modes(const nn::Dataset& dataset, const Protocol& protocol,
                                      const nn::TrainConfig& config);

struct ReportRow {
  std::string task;
  std::string setting;
  std::string embed_mode;
  std::string metric;
  double value = 0.0;
};

std::string to_string(geom::TransformSetting setting);

}  // namespace tinv::tasks
