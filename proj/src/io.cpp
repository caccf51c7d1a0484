#include "tinv/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tinv/errors.hpp"

namespace tinv::io {

namespace {

using nlohmann::json;

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& token, const std::string& path, int line_number) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw InputError(path + ":" + std::to_string(line_number) + ": not a number: '" + token + "'");
  return value;
}

int parse_int(const std::string& token, const std::string& path, int line_number) {
  const double value = parse_double(token, path, line_number);
  const int rounded = static_cast<int>(std::lround(value));
  if (std::abs(value - rounded) > 1e-9)
    throw InputError(path + ":" + std::to_string(line_number) + ": not an integer: '" + token + "'");
  return rounded;
}

std::string strip(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

json load_json(const std::string& path) {
  auto in = open_for_read(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  return j;
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& data, Eigen::Index rows,
                               Eigen::Index cols, const std::string& what) {
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw InputError(what + ": weight array size does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[at++];
  return m;
}

const char* aggregation_name(nn::Aggregation a) {
  switch (a) {
    case nn::Aggregation::Sum: return "sum";
    case nn::Aggregation::Mean: return "mean";
    case nn::Aggregation::Max: return "max";
  }
  return "sum";
}

nn::Aggregation parse_aggregation(const std::string& s) {
  if (s == "sum") return nn::Aggregation::Sum;
  if (s == "mean") return nn::Aggregation::Mean;
  if (s == "max") return nn::Aggregation::Max;
  throw InputError("unknown aggregation: " + s);
}

const char* activation_name(nn::Activation a) {
  return a == nn::Activation::Relu ? "relu" : "tanh";
}

nn::Activation parse_activation(const std::string& s) {
  if (s == "relu") return nn::Activation::Relu;
  if (s == "tanh") return nn::Activation::Tanh;
  throw InputError("unknown activation: " + s);
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

geom::PointCloud read_point_cloud_csv(const std::string& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");

  const auto header = split_csv_line(strip(line));
  int dims = 0;
  bool has_label = false;
  if (header.size() >= 2 && strip(header[0]) == "x" && strip(header[1]) == "y") {
    dims = 2;
    std::size_t at = 2;
    if (at < header.size() && strip(header[at]) == "z") {
      dims = 3;
      ++at;
    }
    if (at < header.size() && strip(header[at]) == "label") {
      has_label = true;
      ++at;
    }
    if (at != header.size()) dims = 0;
  }
  if (dims == 0)
    throw InputError(path + ":1: header must be x,y[,z][,label]");

  std::vector<std::array<double, 3>> rows;
  std::vector<int> labels;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto fields = split_csv_line(stripped);
    const std::size_t expected = static_cast<std::size_t>(dims) + (has_label ? 1 : 0);
    if (fields.size() != expected)
      throw InputError(path + ":" + std::to_string(line_number) + ": expected " +
                       std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
    std::array<double, 3> row{0.0, 0.0, 0.0};
    for (int j = 0; j < dims; ++j)
      row[static_cast<std::size_t>(j)] = parse_double(strip(fields[static_cast<std::size_t>(j)]), path, line_number);
    rows.push_back(row);
    if (has_label)
      labels.push_back(parse_int(strip(fields[static_cast<std::size_t>(dims)]), path, line_number));
  }
  if (rows.empty()) throw InputError(path + ": no data rows");

  geom::PointCloud cloud;
  cloud.coords.resize(static_cast<Eigen::Index>(rows.size()), dims);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dims; ++j)
      cloud.coords(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  if (has_label) cloud.point_labels = std::move(labels);
  geom::validate(cloud);
  return cloud;
}

void write_point_cloud_csv(const std::string& path, const geom::PointCloud& cloud) {
  geom::validate(cloud);
  if (cloud.dim() != 2 && cloud.dim() != 3)
    throw InputError("point cloud CSV supports d in {2,3}");
  auto out = open_for_write(path);
  out << (cloud.dim() == 2 ? "x,y" : "x,y,z");
  if (cloud.point_labels) out << ",label";
  out << "\n";
  for (int i = 0; i < cloud.size(); ++i) {
    for (int j = 0; j < cloud.dim(); ++j) {
      if (j) out << ",";
      out << format_double(cloud.coords(i, j));
    }
    if (cloud.point_labels) out << "," << (*cloud.point_labels)[static_cast<std::size_t>(i)];
    out << "\n";
  }
}

std::vector<ManifestEntry> read_dataset_manifest(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("clouds") || !j["clouds"].is_array())
    throw InputError(path + ": manifest must carry a 'clouds' array");
  std::vector<ManifestEntry> entries;
  for (const auto& item : j["clouds"])
    entries.push_back({item.at("path").get<std::string>(), item.at("cloud_label").get<int>()});
  return entries;
}

void write_dataset_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  json j;
  j["clouds"] = json::array();
  for (const auto& e : entries)
    j["clouds"].push_back({{"path", e.path}, {"cloud_label", e.cloud_label}});
  open_for_write(path) << j.dump(2) << "\n";
}

std::vector<geom::PointCloud> load_manifest_clouds(const std::string& manifest_path,
                                                   std::vector<int>* labels) {
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<geom::PointCloud> clouds;
  if (labels) labels->clear();
  for (const auto& entry : read_dataset_manifest(manifest_path)) {
    auto cloud = read_point_cloud_csv((base / entry.path).string());
    cloud.cloud_label = entry.cloud_label;
    clouds.push_back(std::move(cloud));
    if (labels) labels->push_back(entry.cloud_label);
  }
  return clouds;
}

geom::CvrpInstance read_cvrp_json(const std::string& path) {
  const json j = load_json(path);
  geom::CvrpInstance inst;
  const auto depot = j.at("depot").get<std::vector<double>>();
  if (depot.size() != 2) throw InputError(path + ": depot must have two coordinates");
  inst.depot = Eigen::Vector2d(depot[0], depot[1]);
  const auto points = j.at("points").get<std::vector<std::vector<double>>>();
  if (points.empty()) throw InputError(path + ": no points");
  inst.points.coords.resize(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != 2) throw InputError(path + ": points must be 2-D");
    inst.points.coords(static_cast<Eigen::Index>(i), 0) = points[i][0];
    inst.points.coords(static_cast<Eigen::Index>(i), 1) = points[i][1];
  }
  const auto demands = j.at("demands").get<std::vector<double>>();
  if (demands.size() != points.size())
    throw InputError(path + ": demands must match the point count");
  inst.demands.resize(static_cast<Eigen::Index>(demands.size()));
  for (std::size_t i = 0; i < demands.size(); ++i) {
    if (!(demands[i] > 0.0)) throw InputError(path + ": demands must be positive");
    inst.demands(static_cast<Eigen::Index>(i)) = demands[i];
  }
  inst.capacity = j.value("capacity", 1.0);
  if (!(inst.capacity > 0.0)) throw InputError(path + ": capacity must be positive");
  return inst;
}

void write_cvrp_json(const std::string& path, const geom::CvrpInstance& instance) {
  json j;
  j["depot"] = {instance.depot(0), instance.depot(1)};
  j["points"] = json::array();
  for (int i = 0; i < instance.points.size(); ++i)
    j["points"].push_back({instance.points.coords(i, 0), instance.points.coords(i, 1)});
  j["demands"] = json::array();
  for (int i = 0; i < instance.demands.size(); ++i) j["demands"].push_back(instance.demands(i));
  j["capacity"] = instance.capacity;
  open_for_write(path) << j.dump(2) << "\n";
}

void write_embedding_csv(const std::string& path, const embed::InvariantEmbedding& e) {
  auto out = open_for_write(path);
  for (int j = 0; j < e.width(); ++j) {
    if (j) out << ",";
    out << "h" << (j + 1);
  }
  out << "\n";
  for (int i = 0; i < e.size(); ++i) {
    for (int j = 0; j < e.width(); ++j) {
      if (j) out << ",";
      out << format_double(e.h(i, j));
    }
    out << "\n";
  }
}

void write_embedding_sidecar(const std::string& path, const embed::InvariantEmbedding& e) {
  json j;
  j["top_eigenvalue"] = e.top_eigenvalue;
  j["effective_rank"] = e.effective_rank;
  j["sign_mode"] = embed::to_string(e.sign_mode);
  j["ambiguous_columns"] = e.ambiguous_columns;
  j["multiplicity_warning"] = e.multiplicity_warning;
  if (e.sign_mode == embed::SignMode::Variant) j["variant_index"] = e.variant_index;
  open_for_write(path) << j.dump(2) << "\n";
}

embed::InvariantEmbedding read_embedding(const std::string& csv_path,
                                         const std::string& sidecar_path) {
  auto in = open_for_read(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(csv_path + ": empty file");
  const auto header = split_csv_line(strip(line));
  const int k = static_cast<int>(header.size());
  for (int j = 0; j < k; ++j)
    if (strip(header[static_cast<std::size_t>(j)]) != "h" + std::to_string(j + 1))
      throw InputError(csv_path + ":1: header must be h1,...,hk");

  std::vector<std::vector<double>> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto fields = split_csv_line(stripped);
    if (static_cast<int>(fields.size()) != k)
      throw InputError(csv_path + ":" + std::to_string(line_number) + ": wrong field count");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_double(strip(f), csv_path, line_number));
    rows.push_back(std::move(row));
  }

  embed::InvariantEmbedding e;
  e.h.resize(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < k; ++j) e.h(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];

  const json j = load_json(sidecar_path);
  e.top_eigenvalue = j.at("top_eigenvalue").get<double>();
  e.effective_rank = j.at("effective_rank").get<int>();
  const auto mode = j.at("sign_mode").get<std::string>();
  if (mode == "raw") e.sign_mode = embed::SignMode::Raw;
  else if (mode == "canonical") e.sign_mode = embed::SignMode::Canonical;
  else if (mode == "variant") e.sign_mode = embed::SignMode::Variant;
  else throw InputError(sidecar_path + ": unknown sign_mode " + mode);
  e.ambiguous_columns = j.at("ambiguous_columns").get<std::vector<int>>();
  e.multiplicity_warning = j.value("multiplicity_warning", false);
  e.variant_index = j.value("variant_index", 0);
  return e;
}

void write_model_checkpoint(const std::string& path, const nn::Model& model) {
  json j;
  j["version"] = "tinv-model-v1";
  j["embed_mode"] = nn::to_string(model.embed_mode);
  j["pool"] = model.pool == nn::Pooling::Mean ? "mean" : "sum";
  j["head_activation"] = activation_name(model.head_activation);
  j["knn_k"] = model.knn_k;
  j["input_norm"] = model.input_norm;
  j["output_dim"] = model.output_dim;
  j["mpnn_layers"] = json::array();
  for (const auto& layer : model.mpnn.layers) {
    json l;
    l["aggregation"] = aggregation_name(layer.aggregation);
    l["activation"] = activation_name(layer.activation);
    l["rows"] = layer.weight.rows();
    l["cols"] = layer.weight.cols();
    l["weight"] = row_major(layer.weight);
    l["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    j["mpnn_layers"].push_back(std::move(l));
  }
  j["head_layers"] = json::array();
  for (const auto& layer : model.head) {
    json l;
    l["rows"] = layer.weight.rows();
    l["cols"] = layer.weight.cols();
    l["weight"] = row_major(layer.weight);
    l["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    j["head_layers"].push_back(std::move(l));
  }
  open_for_write(path) << j.dump(2) << "\n";
}

nn::Model read_model_checkpoint(const std::string& path) {
  const json j = load_json(path);
  if (j.value("version", "") != std::string("tinv-model-v1"))
    throw InputError(path + ": unsupported checkpoint version");
  nn::Model model;
  model.embed_mode = nn::parse_embed_mode(j.at("embed_mode").get<std::string>());
  model.pool = j.at("pool").get<std::string>() == "mean" ? nn::Pooling::Mean : nn::Pooling::Sum;
  model.head_activation = parse_activation(j.at("head_activation").get<std::string>());
  model.knn_k = j.at("knn_k").get<int>();
  model.input_norm = j.at("input_norm").get<double>();
  model.output_dim = j.at("output_dim").get<int>();
  for (const auto& l : j.at("mpnn_layers")) {
    nn::MpnnLayer layer;
    layer.aggregation = parse_aggregation(l.at("aggregation").get<std::string>());
    layer.activation = parse_activation(l.at("activation").get<std::string>());
    layer.weight = from_row_major(l.at("weight").get<std::vector<double>>(),
                                  l.at("rows").get<Eigen::Index>(), l.at("cols").get<Eigen::Index>(), path);
    const auto bias = l.at("bias").get<std::vector<double>>();
    layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    model.mpnn.layers.push_back(std::move(layer));
  }
  for (const auto& l : j.at("head_layers")) {
    nn::DenseLayer layer;
    layer.weight = from_row_major(l.at("weight").get<std::vector<double>>(),
                                  l.at("rows").get<Eigen::Index>(), l.at("cols").get<Eigen::Index>(), path);
    const auto bias = l.at("bias").get<std::vector<double>>();
    layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    model.head.push_back(std::move(layer));
  }
  nn::validate(model);
  return model;
}

void write_training_log_csv(const std::string& path, const std::vector<nn::EpochLog>& log) {
  auto out = open_for_write(path);
  out << "epoch,loss,train_acc,test_acc\n";
  for (const auto& row : log)
    out << row.epoch << "," << format_double(row.loss) << "," << format_double(row.train_accuracy)
        << "," << format_double(row.test_accuracy) << "\n";
}

void write_report_csv(const std::string& path, const std::vector<tasks::ReportRow>& rows) {
  auto out = open_for_write(path);
  out << "task,setting,embed_mode,metric,value\n";
  for (const auto& row : rows)
    out << row.task << "," << row.setting << "," << row.embed_mode << "," << row.metric << ","
        << format_double(row.value) << "\n";
}

void write_timings_csv(const std::string& path, const tasks::BenchResult& bench) {
  auto out = open_for_write(path);
  out << "# tinv embedding wall clock, " << bench.repeats << " repeats, d = " << bench.dim << "\n";
  out << "n,mean_seconds\n";
  for (const auto& row : bench.rows)
    out << row.n << "," << format_double(row.mean_seconds) << "\n";
}

namespace {

json transform_json(const geom::SimilarityTransform& transform) {
  struct Visitor {
    json operator()(const geom::Translation& t) const {
      return {{"kind", "translation"},
              {"offset", std::vector<double>(t.offset.data(), t.offset.data() + t.offset.size())}};
    }
    json operator()(const geom::Rotation& r) const {
      json rows = json::array();
      for (Eigen::Index i = 0; i < r.matrix.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.matrix.cols(); ++j) row.push_back(r.matrix(i, j));
        rows.push_back(std::move(row));
      }
      return {{"kind", "rotation"}, {"matrix", rows}, {"about_centroid", r.about_centroid}};
    }
    json operator()(const geom::Reflection& f) const {
      return {{"kind", "reflection"}, {"axis_flips", f.axis_flips}};
    }
    json operator()(const geom::Scaling& s) const {
      return {{"kind", "scaling"}, {"factor", s.factor}};
    }
    json operator()(const geom::SimilarityTransform::Compose& c) const {
      json parts = json::array();
      for (const auto& part : c.parts) parts.push_back(transform_json(part));
      return {{"kind", "compose"}, {"parts", parts}};
    }
  };
  return std::visit(Visitor{}, transform.kind());
}

}  // namespace

std::string transform_to_json(const geom::SimilarityTransform& transform) {
  return transform_json(transform).dump();
}

}  // namespace tinv::io
