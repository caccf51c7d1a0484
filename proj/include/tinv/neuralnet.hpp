#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinv/embed.hpp"
#include "tinv/geometry.hpp"

namespace tinv::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Aggregation { Sum, Mean, Max };
enum class Activation { Relu, Tanh };
enum class Pooling { Mean, Sum };
enum class OptimizerKind { Sgd, Adam };
enum class EmbedMode { RawCoords, Tinv };
enum class Augmentation { None, SignEnumeration, ZRotations, So3Rotations };

std::string to_string(EmbedMode mode);
EmbedMode parse_embed_mode(const std::string& name);

struct MpnnLayer {
  Aggregation aggregation = Aggregation::Sum;
  Activation activation = Activation::Relu;
  Matrix weight;  // (2 * width_in) x width_out, applied to [message, state]
  Vector bias;    // width_out
};

struct MpnnParams {
  std::vector<MpnnLayer> layers;
};

struct DenseLayer {
  Matrix weight;  // in x out
  Vector bias;    // out
};

struct Model {
  MpnnParams mpnn;
  Pooling pool = Pooling::Mean;
  Activation head_activation = Activation::Relu;
  std::vector<DenseLayer> head;  // last layer emits logits, no activation
  int output_dim = 0;
  EmbedMode embed_mode = EmbedMode::Tinv;
  int knn_k = 8;
  double input_norm = 1.0;  // training-split mean Frobenius norm of inputs
};

struct ModelShape {
  int input_width = 3;
  std::vector<int> mpnn_widths = {32, 32};
  std::vector<int> head_widths = {16};
  int classes = 2;
  Aggregation aggregation = Aggregation::Sum;
  Activation activation = Activation::Relu;
  Pooling pool = Pooling::Mean;
};

Model make_model(const ModelShape& shape, EmbedMode mode, std::uint64_t seed);

// Throws ConfigError unless widths chain and weights are finite.
void validate(const Model& model);

// L rounds of aggregate-then-combine; isolated nodes see a zero message.
Matrix mpnn_forward(const Matrix& h0, const geom::Graph& graph, const MpnnParams& params);

Vector pool(const Matrix& h, Pooling kind);

// Feature matrix the network consumes: raw coordinates, or the
// canonical-sign normalized embedding divided by input_norm.
Matrix input_features(const geom::PointCloud& cloud, EmbedMode mode, double input_norm);

// kNN graph on pairwise distances; k is clamped to N-1 on tiny clouds.
geom::Graph feature_graph(const geom::PointCloud& cloud, int k);

struct ForwardOutput {
  Vector logits;        // class logits from the pooled representation
  Matrix point_logits;  // head applied per point, N x output_dim
};

ForwardOutput forward_full(const geom::PointCloud& cloud, const Model& model);

struct Example {
  Matrix h0;
  geom::Graph graph;
  int label = -1;
};

Example make_example(const geom::PointCloud& cloud, int label, const Model& model);
std::vector<Example> make_eval_examples(const std::vector<geom::PointCloud>& clouds,
                                        const std::vector<int>& labels, const Model& model);

// Flat views over all trainable parameters (MPNN then head, each layer's
// weight then bias). flatten/set are exact inverses.
Vector flatten_params(const Model& model);
void set_params(Model& model, const Vector& params);

struct BatchGradient {
  double loss = 0.0;
  Vector grad;  // aligned with flatten_params
};

// Mean softmax cross-entropy over the batch and its parameter gradient via
// reverse-mode accumulation through head, pooling, and message passing.
BatchGradient batch_gradient(const Model& model, const std::vector<Example>& examples,
                             const std::vector<int>& batch);

double example_loss(const Model& model, const Example& example);

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 40;
  int batch_size = 32;
  std::uint64_t rng_seed = 42;
  OptimizerKind optimizer = OptimizerKind::Adam;
  Augmentation augmentation = Augmentation::None;
  int rotation_copies = 3;  // transformed copies per cloud for rotation augmentation
};

struct OptimizerState {
  Vector first_moment;
  Vector second_moment;
  long step = 0;
};

// One optimizer step on the batch; returns the batch loss. Throws
// ConvergenceError when the loss stops being finite.
double backward_and_step(Model& model, const std::vector<Example>& examples,
                         const std::vector<int>& batch, const TrainConfig& config,
                         OptimizerState& state);

int predict(const Model& model, const Example& example);
std::vector<int> predictions(const Model& model, const std::vector<Example>& examples);
double accuracy(const Model& model, const std::vector<Example>& examples);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct Dataset {
  std::vector<geom::PointCloud> train_clouds;
  std::vector<int> train_labels;
  std::vector<geom::PointCloud> test_clouds;
  std::vector<int> test_labels;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  double test_accuracy = 0.0;
  std::vector<int> test_predictions;
  std::size_t train_example_count = 0;  // after augmentation
};

TrainResult train_classifier(const Dataset& dataset, EmbedMode mode, const TrainConfig& config);
TrainResult train_classifier(const Dataset& dataset, EmbedMode mode, const TrainConfig& config,
                             const ModelShape& shape);

}  // namespace tinv::nn
