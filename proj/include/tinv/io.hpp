#pragma once

#include <string>
#include <vector>

#include "tinv/embed.hpp"
#include "tinv/geometry.hpp"
#include "tinv/neuralnet.hpp"
#include "tinv/tasks.hpp"

namespace tinv::io {

// 17 significant digits, '.' decimal; round-trips doubles exactly.
std::string format_double(double value);

// Point-cloud CSV: header x,y[,z][,label], one row per point.
geom::PointCloud read_point_cloud_csv(const std::string& path);
void write_point_cloud_csv(const std::string& path, const geom::PointCloud& cloud);

struct ManifestEntry {
  std::string path;  // relative to the manifest file
  int cloud_label = 0;
};

// Dataset manifest JSON: { "clouds": [ {"path": str, "cloud_label": int} ] }.
std::vector<ManifestEntry> read_dataset_manifest(const std::string& path);
void write_dataset_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<geom::PointCloud> load_manifest_clouds(const std::string& manifest_path,
                                                   std::vector<int>* labels);

// CVRP JSON: { "depot": [x,y], "points": [[x,y],...], "demands": [...],
// "capacity": 1.0 }.
geom::CvrpInstance read_cvrp_json(const std::string& path);
void write_cvrp_json(const std::string& path, const geom::CvrpInstance& instance);

// Embedding CSV (header h1,...,hk) plus sidecar JSON carrying
// top_eigenvalue, effective_rank, sign_mode, ambiguous_columns.
void write_embedding_csv(const std::string& path, const embed::InvariantEmbedding& e);
void write_embedding_sidecar(const std::string& path, const embed::InvariantEmbedding& e);
embed::InvariantEmbedding read_embedding(const std::string& csv_path,
                                         const std::string& sidecar_path);

// Model checkpoint JSON, version "tinv-model-v1", row-major weights.
void write_model_checkpoint(const std::string& path, const nn::Model& model);
nn::Model read_model_checkpoint(const std::string& path);

// Training log CSV: epoch,loss,train_acc,test_acc.
void write_training_log_csv(const std::string& path, const std::vector<nn::EpochLog>& log);

// Report CSV: task,setting,embed_mode,metric,value.
void write_report_csv(const std::string& path, const std::vector<tasks::ReportRow>& rows);

// Timing CSV for the scaling figure; comment header keeps gnuplot happy.
void write_timings_csv(const std::string& path, const tasks::BenchResult& bench);

std::string transform_to_json(const geom::SimilarityTransform& transform);

}  // namespace tinv::io
