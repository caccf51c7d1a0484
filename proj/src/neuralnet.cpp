#include "tinv/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tinv/errors.hpp"
#include "tinv/rng.hpp"

namespace tinv::nn {

namespace {

double activate(double z, Activation act) {
  return act == Activation::Relu ? std::max(0.0, z) : std::tanh(z);
}

double activate_derivative(double z, Activation act) {
  if (act == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

Matrix activate(const Matrix& z, Activation act) {
  return z.unaryExpr([act](double v) { return activate(v, act); });
}

// Neighbor aggregation; ascending-index accumulation keeps the result
// reproducible, and empty neighborhoods yield a zero message.
Matrix aggregate(const Matrix& h, const geom::Graph& graph, Aggregation kind,
                 std::vector<std::vector<int>>* argmax) {
  const int n = static_cast<int>(h.rows());
  const int w = static_cast<int>(h.cols());
  Matrix m = Matrix::Zero(n, w);
  if (argmax) argmax->assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    const auto& nb = graph.neighbors[static_cast<std::size_t>(i)];
    if (nb.empty()) continue;
    switch (kind) {
      case Aggregation::Sum:
      case Aggregation::Mean:
        for (int j : nb) m.row(i) += h.row(j);
        if (kind == Aggregation::Mean) m.row(i) /= static_cast<double>(nb.size());
        break;
      case Aggregation::Max: {
        std::vector<int> holder(static_cast<std::size_t>(w), nb.front());
        m.row(i) = h.row(nb.front());
        for (std::size_t t = 1; t < nb.size(); ++t) {
          const int j = nb[t];
          for (int f = 0; f < w; ++f) {
            if (h(j, f) > m(i, f)) {
              m(i, f) = h(j, f);
              holder[static_cast<std::size_t>(f)] = j;
            }
          }
        }
        if (argmax) (*argmax)[static_cast<std::size_t>(i)] = std::move(holder);
        break;
      }
    }
  }
  return m;
}

struct LayerCache {
  Matrix concat;   // N x 2w_in: [message, state]
  Matrix pre_act;  // N x w_out
  std::vector<std::vector<int>> argmax;  // Max aggregation routing
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix h_out;
  Vector pooled;
  std::vector<Vector> head_inputs;  // input to each head layer
  std::vector<Vector> head_pre;
  Vector logits;
};

Matrix layer_forward(const Matrix& h, const geom::Graph& graph, const MpnnLayer& layer,
                     LayerCache* cache) {
  const int n = static_cast<int>(h.rows());
  const int w_in = static_cast<int>(h.cols());
  std::vector<std::vector<int>> argmax;
  const Matrix msg = aggregate(h, graph, layer.aggregation,
                               layer.aggregation == Aggregation::Max ? &argmax : nullptr);
  Matrix concat(n, 2 * w_in);
  concat << msg, h;
  Matrix pre = concat * layer.weight;
  pre.rowwise() += layer.bias.transpose();
  Matrix out = activate(pre, layer.activation);
  if (cache) {
    cache->concat = std::move(concat);
    cache->pre_act = std::move(pre);
    cache->argmax = std::move(argmax);
  }
  return out;
}

Vector head_layer_forward(const Vector& a, const DenseLayer& layer) {
  return layer.weight.transpose() * a + layer.bias;
}

ForwardCache forward_cached(const Matrix& h0, const geom::Graph& graph, const Model& model) {
  ForwardCache cache;
  Matrix h = h0;
  cache.layers.resize(model.mpnn.layers.size());
  for (std::size_t l = 0; l < model.mpnn.layers.size(); ++l)
    h = layer_forward(h, graph, model.mpnn.layers[l], &cache.layers[l]);
  cache.h_out = std::move(h);
  cache.pooled = pool(cache.h_out, model.pool);

  Vector a = cache.pooled;
  for (std::size_t l = 0; l < model.head.size(); ++l) {
    cache.head_inputs.push_back(a);
    Vector z = head_layer_forward(a, model.head[l]);
    cache.head_pre.push_back(z);
    if (l + 1 < model.head.size())
      a = z.unaryExpr([&](double v) { return activate(v, model.head_activation); });
    else
      cache.logits = z;
  }
  return cache;
}

double cross_entropy(const Vector& logits, int label, Vector* dlogits) {
  const double zmax = logits.maxCoeff();
  const Vector shifted = logits.array() - zmax;
  const double logsum = std::log(shifted.array().exp().sum());
  const double loss = logsum - shifted(label);
  if (dlogits) {
    *dlogits = (shifted.array() - logsum).exp();
    (*dlogits)(label) -= 1.0;
  }
  return loss;
}

Model zeroed_like(const Model& model) {
  Model g = model;
  for (auto& layer : g.mpnn.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  for (auto& layer : g.head) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return g;
}

// Reverse-mode pass for one example; gradients accumulate into `grads`
// (a zeroed model of identical shape).
double example_backward(const Model& model, const Example& ex, Model& grads) {
  const ForwardCache cache = forward_cached(ex.h0, ex.graph, model);
  Vector dz;
  const double loss = cross_entropy(cache.logits, ex.label, &dz);

  // head
  for (int l = static_cast<int>(model.head.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    grads.head[lu].weight += cache.head_inputs[lu] * dz.transpose();
    grads.head[lu].bias += dz;
    Vector da = model.head[lu].weight * dz;
    if (l > 0) {
      const Vector& pre = cache.head_pre[lu - 1];
      dz = da.binaryExpr(pre, [&](double g, double z) {
        return g * activate_derivative(z, model.head_activation);
      });
    } else {
      dz = std::move(da);  // gradient w.r.t. the pooled vector
    }
  }

  // pooling
  const int n = static_cast<int>(ex.h0.rows());
  Matrix dh(n, cache.h_out.cols());
  const double row_scale = model.pool == Pooling::Mean ? 1.0 / n : 1.0;
  for (int i = 0; i < n; ++i) dh.row(i) = row_scale * dz.transpose();

  // message-passing layers
  for (int l = static_cast<int>(model.mpnn.layers.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const MpnnLayer& layer = model.mpnn.layers[lu];
    const LayerCache& lc = cache.layers[lu];
    const Matrix dpre = dh.binaryExpr(lc.pre_act, [&](double g, double z) {
      return g * activate_derivative(z, layer.activation);
    });
    grads.mpnn.layers[lu].weight += lc.concat.transpose() * dpre;
    grads.mpnn.layers[lu].bias += dpre.colwise().sum().transpose();

    const Matrix dconcat = dpre * layer.weight.transpose();
    const int w_in = static_cast<int>(dconcat.cols()) / 2;
    const Matrix dmsg = dconcat.leftCols(w_in);
    Matrix dh_prev = dconcat.rightCols(w_in);

    for (int i = 0; i < n; ++i) {
      const auto& nb = ex.graph.neighbors[static_cast<std::size_t>(i)];
      if (nb.empty()) continue;
      switch (layer.aggregation) {
        case Aggregation::Sum:
          for (int j : nb) dh_prev.row(j) += dmsg.row(i);
          break;
        case Aggregation::Mean:
          for (int j : nb) dh_prev.row(j) += dmsg.row(i) / static_cast<double>(nb.size());
          break;
        case Aggregation::Max:
          for (int f = 0; f < w_in; ++f)
            dh_prev(lc.argmax[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)], f) +=
                dmsg(i, f);
          break;
      }
    }
    dh = std::move(dh_prev);
  }
  return loss;
}

Matrix init_weight(Rng& rng, int rows, int cols) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Matrix w(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) w(i, j) = rng.uniform(-bound, bound);
  return w;
}

Vector init_bias(Rng& rng, int size) {
  Vector b(size);
  for (int i = 0; i < size; ++i) b(i) = rng.uniform(-0.1, 0.1);
  return b;
}

}  // namespace

std::string to_string(EmbedMode mode) {
  return mode == EmbedMode::RawCoords ? "raw" : "tinv";
}

EmbedMode parse_embed_mode(const std::string& name) {
  if (name == "raw" || name == "raw_coords") return EmbedMode::RawCoords;
  if (name == "tinv") return EmbedMode::Tinv;
  throw InputError("unknown embed mode: " + name);
}

Model make_model(const ModelShape& shape, EmbedMode mode, std::uint64_t seed) {
  if (shape.input_width < 1 || shape.classes < 2)
    throw ConfigError("model needs input_width >= 1 and at least two classes");
  Rng rng(seed);
  Model model;
  model.embed_mode = mode;
  model.output_dim = shape.classes;
  model.pool = shape.pool;
  model.head_activation = shape.activation;

  int width = shape.input_width;
  for (int w_out : shape.mpnn_widths) {
    MpnnLayer layer;
    layer.aggregation = shape.aggregation;
    layer.activation = shape.activation;
    layer.weight = init_weight(rng, 2 * width, w_out);
    layer.bias = init_bias(rng, w_out);
    model.mpnn.layers.push_back(std::move(layer));
    width = w_out;
  }
  std::vector<int> chain = shape.head_widths;
  chain.push_back(shape.classes);
  for (int w_out : chain) {
    DenseLayer layer;
    layer.weight = init_weight(rng, width, w_out);
    layer.bias = init_bias(rng, w_out);
    model.head.push_back(std::move(layer));
    width = w_out;
  }
  validate(model);
  return model;
}

void validate(const Model& model) {
  if (model.head.empty()) throw ConfigError("model head is empty");
  int width = -1;
  for (const auto& layer : model.mpnn.layers) {
    if (width >= 0 && layer.weight.rows() != 2 * width)
      throw ConfigError("MPNN layer widths do not chain");
    if (layer.weight.cols() != layer.bias.size())
      throw ConfigError("MPNN bias width mismatch");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw ConfigError("MPNN weights must be finite");
    width = static_cast<int>(layer.weight.cols());
  }
  for (const auto& layer : model.head) {
    if (width >= 0 && layer.weight.rows() != width)
      throw ConfigError("head input width does not match the previous layer");
    if (layer.weight.cols() != layer.bias.size()) throw ConfigError("head bias width mismatch");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw ConfigError("head weights must be finite");
    width = static_cast<int>(layer.weight.cols());
  }
  if (width != model.output_dim) throw ConfigError("head output width != output_dim");
}

Matrix mpnn_forward(const Matrix& h0, const geom::Graph& graph, const MpnnParams& params) {
  if (static_cast<int>(h0.rows()) != graph.n)
    throw ConfigError("feature row count does not match the graph");
  Matrix h = h0;
  for (const auto& layer : params.layers) {
    if (2 * h.cols() != layer.weight.rows())
      throw ConfigError("MPNN layer width does not match its input");
    h = layer_forward(h, graph, layer, nullptr);
  }
  return h;
}

Vector pool(const Matrix& h, Pooling kind) {
  if (h.rows() < 1) throw ConfigError("pooling over an empty matrix");
  Vector sum = Vector::Zero(h.cols());
  for (int i = 0; i < h.rows(); ++i) sum += h.row(i).transpose();  // fixed order
  if (kind == Pooling::Mean) sum /= static_cast<double>(h.rows());
  return sum;
}

Matrix input_features(const geom::PointCloud& cloud, EmbedMode mode, double input_norm) {
  if (mode == EmbedMode::RawCoords) return cloud.coords;
  if (!(input_norm > 0.0)) throw ConfigError("input normalization constant must be positive");
  const auto e = embed::canonical_sign(embed::tinv_embed(cloud, cloud.dim()));
  return e.h / input_norm;
}

geom::Graph feature_graph(const geom::PointCloud& cloud, int k) {
  const int n = cloud.size();
  if (n == 1) {
    geom::Graph g;
    g.n = 1;
    g.neighbors.resize(1);
    return g;
  }
  return geom::knn_graph(geom::pairwise_distances(cloud), std::min(k, n - 1));
}

ForwardOutput forward_full(const geom::PointCloud& cloud, const Model& model) {
  validate(model);
  const Matrix h0 = input_features(cloud, model.embed_mode, model.input_norm);
  const geom::Graph graph = feature_graph(cloud, model.knn_k);
  const ForwardCache cache = forward_cached(h0, graph, model);

  ForwardOutput out;
  out.logits = cache.logits;

  // same head applied per point for segmentation-style outputs
  Matrix ph = cache.h_out;
  for (std::size_t l = 0; l < model.head.size(); ++l) {
    Matrix z = ph * model.head[l].weight;
    z.rowwise() += model.head[l].bias.transpose();
    if (l + 1 < model.head.size())
      ph = activate(z, model.head_activation);
    else
      ph = std::move(z);
  }
  out.point_logits = std::move(ph);
  return out;
}

Example make_example(const geom::PointCloud& cloud, int label, const Model& model) {
  Example ex;
  ex.h0 = input_features(cloud, model.embed_mode, model.input_norm);
  ex.graph = feature_graph(cloud, model.knn_k);
  ex.label = label;
  return ex;
}

std::vector<Example> make_eval_examples(const std::vector<geom::PointCloud>& clouds,
                                        const std::vector<int>& labels, const Model& model) {
  if (clouds.size() != labels.size())
    throw ConfigError("clouds and labels differ in length");
  std::vector<Example> out;
  out.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i)
    out.push_back(make_example(clouds[i], labels[i], model));
  return out;
}

Vector flatten_params(const Model& model) {
  std::size_t total = 0;
  for (const auto& l : model.mpnn.layers) total += l.weight.size() + l.bias.size();
  for (const auto& l : model.head) total += l.weight.size() + l.bias.size();
  Vector flat(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  auto copy_block = [&](const Matrix& w, const Vector& b) {
    flat.segment(at, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    at += w.size();
    flat.segment(at, b.size()) = b;
    at += b.size();
  };
  for (const auto& l : model.mpnn.layers) copy_block(l.weight, l.bias);
  for (const auto& l : model.head) copy_block(l.weight, l.bias);
  return flat;
}

void set_params(Model& model, const Vector& params) {
  Eigen::Index at = 0;
  auto read_block = [&](Matrix& w, Vector& b) {
    if (at + w.size() + b.size() > params.size())
      throw ConfigError("parameter vector too short for the model");
    Eigen::Map<Vector>(w.data(), w.size()) = params.segment(at, w.size());
    at += w.size();
    b = params.segment(at, b.size());
    at += b.size();
  };
  for (auto& l : model.mpnn.layers) read_block(l.weight, l.bias);
  for (auto& l : model.head) read_block(l.weight, l.bias);
  if (at != params.size()) throw ConfigError("parameter vector size does not match the model");
}

double example_loss(const Model& model, const Example& example) {
  const ForwardCache cache = forward_cached(example.h0, example.graph, model);
  return cross_entropy(cache.logits, example.label, nullptr);
}

BatchGradient batch_gradient(const Model& model, const std::vector<Example>& examples,
                             const std::vector<int>& batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  Model grads = zeroed_like(model);
  double loss = 0.0;
  for (int idx : batch) {
    if (idx < 0 || idx >= static_cast<int>(examples.size()))
      throw ConfigError("batch index out of range");
    loss += example_backward(model, examples[static_cast<std::size_t>(idx)], grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  BatchGradient out;
  out.loss = loss * inv;
  out.grad = flatten_params(grads) * inv;
  return out;
}

double backward_and_step(Model& model, const std::vector<Example>& examples,
                         const std::vector<int>& batch, const TrainConfig& config,
                         OptimizerState& state) {
  const BatchGradient bg = batch_gradient(model, examples, batch);
  if (!std::isfinite(bg.loss)) throw ConvergenceError("training diverged", bg.loss);

  Vector params = flatten_params(model);
  if (state.first_moment.size() != params.size()) {
    state.first_moment = Vector::Zero(params.size());
    state.second_moment = Vector::Zero(params.size());
    state.step = 0;
  }
  if (config.optimizer == OptimizerKind::Sgd) {
    params -= config.learning_rate * bg.grad;
  } else {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++state.step;
    state.first_moment = kBeta1 * state.first_moment + (1.0 - kBeta1) * bg.grad;
    state.second_moment =
        kBeta2 * state.second_moment + (1.0 - kBeta2) * bg.grad.cwiseProduct(bg.grad).eval();
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    const Vector mhat = state.first_moment / c1;
    const Vector vhat = state.second_moment / c2;
    params -= config.learning_rate *
              mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() + Vector::Constant(params.size(), kEps));
  }
  set_params(model, params);
  return bg.loss;
}

int predict(const Model& model, const Example& example) {
  const ForwardCache cache = forward_cached(example.h0, example.graph, model);
  Eigen::Index best = 0;
  cache.logits.maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<int> predictions(const Model& model, const std::vector<Example>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict(model, ex));
  return out;
}

double accuracy(const Model& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw ConfigError("accuracy over an empty example set");
  int correct = 0;
  for (const auto& ex : examples)
    if (predict(model, ex) == ex.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

namespace {

constexpr std::uint64_t kTagAugment = 0x100000000ULL;
constexpr std::uint64_t kTagWeights = 0x200000000ULL;
constexpr std::uint64_t kTagShuffle = 0x300000000ULL;

}  // namespace

TrainResult train_classifier(const Dataset& dataset, EmbedMode mode, const TrainConfig& config) {
  if (dataset.train_clouds.empty()) throw ConfigError("training set is empty");
  ModelShape shape;
  shape.input_width = dataset.train_clouds.front().dim();
  shape.classes = 2;
  for (int label : dataset.train_labels) shape.classes = std::max(shape.classes, label + 1);
  for (int label : dataset.test_labels) shape.classes = std::max(shape.classes, label + 1);
  return train_classifier(dataset, mode, config, shape);
}

TrainResult train_classifier(const Dataset& dataset, EmbedMode mode, const TrainConfig& config,
                             const ModelShape& shape) {
  if (dataset.train_clouds.empty() || dataset.test_clouds.empty())
    throw ConfigError("dataset must have train and test clouds");
  if (dataset.train_clouds.size() != dataset.train_labels.size() ||
      dataset.test_clouds.size() != dataset.test_labels.size())
    throw ConfigError("labels do not match clouds");
  if (config.epochs < 1 || !(config.learning_rate > 0.0) || config.batch_size < 1)
    throw ConfigError("train config requires epochs >= 1, learning_rate > 0, batch_size >= 1");
  if (mode == EmbedMode::RawCoords && config.augmentation == Augmentation::SignEnumeration)
    throw ConfigError("sign enumeration applies to tinv features only");

  const Rng root(config.rng_seed);
  const int d = dataset.train_clouds.front().dim();

  // rotation augmentation expands the clouds before feature extraction
  std::vector<geom::PointCloud> clouds;
  std::vector<int> labels;
  const bool rotate = config.augmentation == Augmentation::ZRotations ||
                      config.augmentation == Augmentation::So3Rotations;
  for (std::size_t i = 0; i < dataset.train_clouds.size(); ++i) {
    if (!rotate) {
      clouds.push_back(dataset.train_clouds[i]);
      labels.push_back(dataset.train_labels[i]);
      continue;
    }
    for (int c = 0; c < std::max(1, config.rotation_copies); ++c) {
      Rng stream = root.split(kTagAugment + i * 1024 + static_cast<std::uint64_t>(c));
      geom::Matrix rot;
      if (config.augmentation == Augmentation::ZRotations)
        rot = (d == 3) ? geom::rotation_matrix_z(stream.uniform(0.0, 2.0 * M_PI))
                       : geom::rotation_matrix_2d(stream.uniform(0.0, 2.0 * M_PI));
      else
        rot = geom::random_rotation(stream, d);
      clouds.push_back(
          geom::apply_transform(dataset.train_clouds[i], geom::SimilarityTransform::rotation(rot)));
      labels.push_back(dataset.train_labels[i]);
    }
  }

  Model model = make_model(shape, mode, root.split(kTagWeights).next_u64());

  // training features; the Frobenius constant comes from this split only
  std::vector<Example> train_examples;
  if (mode == EmbedMode::Tinv) {
    std::vector<embed::InvariantEmbedding> features;
    std::vector<geom::Graph> graphs;
    std::vector<int> feature_labels;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const auto raw = embed::tinv_embed(clouds[i], d);
      const geom::Graph g = feature_graph(clouds[i], model.knn_k);
      if (config.augmentation == Augmentation::SignEnumeration) {
        for (auto& variant : embed::sign_variants(raw)) {
          features.push_back(std::move(variant));
          graphs.push_back(g);
          feature_labels.push_back(labels[i]);
        }
      } else {
        features.push_back(embed::canonical_sign(raw));
        graphs.push_back(g);
        feature_labels.push_back(labels[i]);
      }
    }
    model.input_norm = embed::mean_frobenius_norm(features);
    embed::frobenius_normalize(features, model.input_norm);
    for (std::size_t i = 0; i < features.size(); ++i)
      train_examples.push_back({std::move(features[i].h), std::move(graphs[i]), feature_labels[i]});
  } else {
    for (std::size_t i = 0; i < clouds.size(); ++i)
      train_examples.push_back(
          {clouds[i].coords, feature_graph(clouds[i], model.knn_k), labels[i]});
  }

  const std::vector<Example> test_examples =
      make_eval_examples(dataset.test_clouds, dataset.test_labels, model);

  OptimizerState state;
  std::vector<int> perm(train_examples.size());
  std::iota(perm.begin(), perm.end(), 0);

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = root.split(kTagShuffle + static_cast<std::uint64_t>(epoch));
    for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(shuffle_rng.uniform_int(0, i))]);

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      const std::size_t stop = std::min(perm.size(), start + config.batch_size);
      const std::vector<int> batch(perm.begin() + static_cast<long>(start),
                                   perm.begin() + static_cast<long>(stop));
      epoch_loss += backward_and_step(model, train_examples, batch, config, state);
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = epoch_loss / std::max(1, batches);
    log.train_accuracy = accuracy(model, train_examples);
    log.test_accuracy = accuracy(model, test_examples);
    result.log.push_back(log);
  }

  result.test_predictions = predictions(model, test_examples);
  result.test_accuracy = result.log.back().test_accuracy;
  result.train_example_count = train_examples.size();
  result.model = std::move(model);
  return result;
}

}  // namespace tinv::nn
