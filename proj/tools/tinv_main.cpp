#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tinv/embed.hpp"
#include "tinv/errors.hpp"
#include "tinv/geometry.hpp"
#include "tinv/io.hpp"
#include "tinv/neuralnet.hpp"
#include "tinv/rng.hpp"
#include "tinv/tasks.hpp"

namespace fs = std::filesystem;
using namespace tinv;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitInternal = 4;

struct EmbedArgs {
  std::string input;
  std::string out;
  std::string sidecar;
  std::string sign = "canonical";
  int dim = 0;  // 0: use the cloud dimension
  double tol = 1e-10;
  std::uint64_t seed = 42;
};

int cmd_embed(const EmbedArgs& args) {
  const auto cloud = io::read_point_cloud_csv(args.input);
  const int k = args.dim > 0 ? args.dim : cloud.dim();
  linalg::EigOptions opts;
  opts.tol = args.tol;
  const auto raw = embed::tinv_embed(cloud, k, opts);
  const std::string sidecar =
      args.sidecar.empty() ? args.out + ".json" : args.sidecar;

  if (args.sign == "raw" || args.sign == "canonical") {
    const auto e = args.sign == "raw" ? raw : embed::canonical_sign(raw);
    io::write_embedding_csv(args.out, e);
    io::write_embedding_sidecar(sidecar, e);
    std::cout << "embed: wrote " << args.out << " (N=" << e.size() << ", k=" << e.width()
              << ", effective_rank=" << e.effective_rank << ", sign=" << args.sign << ")\n";
    return kExitOk;
  }
  if (args.sign == "enumerate") {
    const auto variants = embed::sign_variants(raw);
    const fs::path base(args.out);
    const std::string stem = (base.parent_path() / base.stem()).string();
    const std::string ext = base.extension().string().empty() ? ".csv" : base.extension().string();
    for (const auto& v : variants) {
      const std::string path = stem + ".variant" + std::to_string(v.variant_index) + ext;
      io::write_embedding_csv(path, v);
      io::write_embedding_sidecar(path + ".json", v);
    }
    std::cout << "embed: wrote " << variants.size() << " sign variants of " << stem << ext << "\n";
    return kExitOk;
  }
  throw InputError("--sign must be raw, canonical, or enumerate");
}

struct VerifyArgs {
  std::string input;
  int transforms = 100;
  double tol = 1e-6;
  std::uint64_t seed = 42;
};

int cmd_verify(const VerifyArgs& args) {
  const auto cloud = io::read_point_cloud_csv(args.input);
  const int d = cloud.dim();
  const auto base = embed::tinv_embed(cloud, d);
  const auto base_canonical = embed::canonical_sign(base);
  const auto check = embed::verify_distance_preservation(cloud, base);

  std::cout << "verify: input=" << args.input << " N=" << cloud.size() << " d=" << d
            << " transforms=" << args.transforms << " tol=" << args.tol << " seed=" << args.seed
            << "\n";
  std::cout << "distance preservation: max relative error " << check.max_relative_error
            << " (c' = " << check.scale_constant << ")\n";

  const geom::TransformSetting settings[] = {
      geom::TransformSetting::Translation, geom::TransformSetting::Rotation,
      geom::TransformSetting::Reflection, geom::TransformSetting::Scaling,
      geom::TransformSetting::ComposedAll};

  const Rng root(args.seed);
  double worst_sign_matched = 0.0;
  double worst_canonical = 0.0;
  int skipped_multiplicity = 0;
  int canonical_comparisons = 0;
  bool violated = check.max_relative_error > args.tol;
  std::string offending;

  for (int t = 0; t < args.transforms && !violated; ++t) {
    Rng stream = root.split(static_cast<std::uint64_t>(t));
    const auto setting = settings[t % std::size(settings)];
    const auto transform = geom::random_transform(stream, setting, d);
    const auto moved = embed::tinv_embed(geom::apply_transform(cloud, transform), d);
    if (base.multiplicity_warning || moved.multiplicity_warning) {
      ++skipped_multiplicity;
      continue;
    }
    double deviation = 0.0;
    for (int j = 0; j < moved.width(); ++j) {
      const double direct = (moved.h.col(j) - base.h.col(j)).cwiseAbs().maxCoeff();
      const double flipped = (moved.h.col(j) + base.h.col(j)).cwiseAbs().maxCoeff();
      deviation = std::max(deviation, std::min(direct, flipped));
    }
    worst_sign_matched = std::max(worst_sign_matched, deviation);

    const auto moved_canonical = embed::canonical_sign(moved);
    if (base_canonical.ambiguous_columns.empty() && moved_canonical.ambiguous_columns.empty()) {
      worst_canonical = std::max(
          worst_canonical, (moved_canonical.h - base_canonical.h).cwiseAbs().maxCoeff());
      ++canonical_comparisons;
    }
    if (deviation > args.tol) {
      violated = true;
      offending = io::transform_to_json(transform);
    }
  }

  std::cout << "invariance (up to sign): max deviation " << worst_sign_matched << "\n";
  std::cout << "invariance (canonical, unambiguous draws " << canonical_comparisons
            << "): max deviation " << worst_canonical << "\n";
  std::cout << "multiplicity-flagged draws skipped: " << skipped_multiplicity << "\n";
  if (violated) {
    std::cout << "FAIL tolerance breached";
    if (!offending.empty()) std::cout << " by transform " << offending;
    std::cout << "\n";
    return kExitViolation;
  }
  std::cout << "PASS\n";
  return kExitOk;
}

struct GenArgs {
  std::string kind = "shapes";
  std::string out;
  int count = 40;
  int n = 20;
  int points = 64;
  double noise = 0.02;
  std::uint64_t seed = 42;
};

int cmd_gen(const GenArgs& args) {
  fs::create_directories(args.out);
  const Rng root(args.seed);
  if (args.kind == "shapes") {
    std::vector<io::ManifestEntry> entries;
    const geom::ShapeKind kinds[] = {geom::ShapeKind::Sphere, geom::ShapeKind::CubeSurface,
                                     geom::ShapeKind::LineSegment, geom::ShapeKind::Torus};
    for (int i = 0; i < args.count; ++i) {
      const auto kind = kinds[i % 4];
      const auto cloud =
          geom::generate_shape(kind, args.points, args.noise, root.split(i).next_u64());
      char name[32];
      std::snprintf(name, sizeof(name), "cloud_%04d.csv", i);
      io::write_point_cloud_csv((fs::path(args.out) / name).string(), cloud);
      entries.push_back({name, static_cast<int>(kind)});
    }
    io::write_dataset_manifest((fs::path(args.out) / "manifest.json").string(), entries);
    std::cout << "gen: wrote " << args.count << " shape clouds and manifest.json under "
              << args.out << "\n";
    return kExitOk;
  }
  if (args.kind == "tsp") {
    for (int i = 0; i < args.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "tsp_%04d.csv", i);
      io::write_point_cloud_csv((fs::path(args.out) / name).string(),
                                geom::generate_tsp_instance(args.n, root.split(i).next_u64()));
    }
    std::cout << "gen: wrote " << args.count << " TSP instances under " << args.out << "\n";
    return kExitOk;
  }
  if (args.kind == "cvrp") {
    for (int i = 0; i < args.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "cvrp_%04d.json", i);
      io::write_cvrp_json((fs::path(args.out) / name).string(),
                          geom::generate_cvrp_instance(args.n, root.split(i).next_u64()));
    }
    std::cout << "gen: wrote " << args.count << " CVRP instances under " << args.out << "\n";
    return kExitOk;
  }
  throw InputError("--kind must be shapes, tsp, or cvrp");
}

struct BenchArgs {
  std::string sizes = "128,256,512,1024,2048";
  int repeats = 10;
  int dim = 3;
  std::string out;
  std::uint64_t seed = 42;
};

int cmd_bench(const BenchArgs& args) {
  std::vector<int> sizes;
  std::stringstream stream(args.sizes);
  std::string token;
  while (std::getline(stream, token, ',')) sizes.push_back(std::stoi(token));
  const auto result = tasks::bench_scaling(sizes, args.repeats, args.dim, args.seed);
  for (const auto& row : result.rows)
    std::cout << "bench: N=" << row.n << " mean " << row.mean_seconds << " s over "
              << args.repeats << " runs\n";
  std::cout << "bench: log-log slope " << result.loglog_slope << "\n";
  if (!args.out.empty()) io::write_timings_csv(args.out, result);
  return kExitOk;
}

struct TrainArgs {
  std::string protocol = "z/z";
  std::string mode = "tinv";
  std::string out;
  int epochs = 40;
  int train_per_class = 75;
  int test_per_class = 25;
  int points = 64;
  double noise = 0.02;
  std::uint64_t seed = 42;
};

int cmd_train_demo(const TrainArgs& args) {
  tasks::ShapeDatasetConfig data_config;
  data_config.train_per_class = args.train_per_class;
  data_config.test_per_class = args.test_per_class;
  data_config.points = args.points;
  data_config.noise_sigma = args.noise;
  data_config.seed = args.seed;
  const auto dataset = tasks::make_shape_dataset(data_config);

  nn::TrainConfig config;
  config.epochs = args.epochs;
  config.rng_seed = args.seed;
  config.rotation_copies = 2;

  const auto protocol = tasks::parse_protocol(args.protocol);
  const auto mode = nn::parse_embed_mode(args.mode);
  const auto run = tasks::run_classification_protocol(dataset, protocol, mode, config);

  std::cout << "train-demo: protocol " << tasks::to_string(protocol) << " mode "
            << nn::to_string(mode) << " accuracy " << run.accuracy << "\n";
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    io::write_training_log_csv((fs::path(args.out) / "log.csv").string(), run.training.log);
    io::write_model_checkpoint((fs::path(args.out) / "model.json").string(), run.training.model);
    json summary;
    summary["protocol"] = tasks::to_string(protocol);
    summary["mode"] = nn::to_string(mode);
    summary["accuracy"] = run.accuracy;
    summary["epochs"] = args.epochs;
    summary["seed"] = args.seed;
    summary["train_examples"] = run.training.train_example_count;
    std::ofstream((fs::path(args.out) / "summary.json").string()) << summary.dump(2) << "\n";
  }
  return kExitOk;
}

struct RouteArgs {
  std::string task = "tsp";
  std::string mode = "tinv";
  std::string settings = "all";
  std::string out;
  int n = 20;
  int instances = 100;
  std::uint64_t seed = 42;
};

int cmd_route_demo(const RouteArgs& args) {
  if (args.settings != "all")
    throw InputError("only --settings all is supported; the suite always runs the full battery");
  const auto mode = nn::parse_embed_mode(args.mode);
  const auto suite = tasks::run_routing_suite(args.task, args.n, args.instances, mode, args.seed);
  std::vector<tasks::ReportRow> rows;
  const std::string task_name = args.task + "-" + std::to_string(args.n);
  for (const auto& row : suite.rows) {
    const std::string setting = tasks::to_string(row.setting);
    std::cout << "route-demo: " << task_name << " " << setting << " mean length "
              << row.mean_length << " normalized " << row.mean_normalized_length
              << " identity rate " << row.identity_rate << "\n";
    rows.push_back({task_name, setting, nn::to_string(mode), "mean_length", row.mean_length});
    rows.push_back(
        {task_name, setting, nn::to_string(mode), "mean_normalized_length", row.mean_normalized_length});
    rows.push_back({task_name, setting, nn::to_string(mode), "identity_rate", row.identity_rate});
  }
  if (!args.out.empty()) io::write_report_csv(args.out, rows);
  return kExitOk;
}

struct ReportArgs {
  std::string out = "report";
  int epochs = 40;
  int instances = 200;
  int bench_repeats = 10;
  std::uint64_t seed = 42;
};

int cmd_report(const ReportArgs& args) {
  fs::create_directories(args.out);
  std::vector<tasks::ReportRow> rows;
  json summary;

  // classification protocols, both feature modes
  tasks::ShapeDatasetConfig data_config;
  data_config.seed = args.seed;
  const auto dataset = tasks::make_shape_dataset(data_config);
  nn::TrainConfig config;
  config.epochs = args.epochs;
  config.rng_seed = args.seed;
  config.rotation_copies = 2;
  for (const std::string protocol_name : {"z/z", "SO3/SO3", "z/SO3"}) {
    const auto protocol = tasks::parse_protocol(protocol_name);
    for (const auto mode : {nn::EmbedMode::Tinv, nn::EmbedMode::RawCoords}) {
      const auto run = tasks::run_classification_protocol(dataset, protocol, mode, config);
      rows.push_back({"classification", protocol_name, nn::to_string(mode), "accuracy",
                      run.accuracy});
      summary["classification"][protocol_name][nn::to_string(mode)] = run.accuracy;
      std::cout << "report: classification " << protocol_name << " " << nn::to_string(mode)
                << " accuracy " << run.accuracy << "\n";
    }
  }

  // canonical sign against enumeration
  const auto cmp = tasks::compare_sign_modes(dataset, tasks::parse_protocol("z/z"), config);
  rows.push_back({"classification", "z/z", "tinv-canonical", "accuracy", cmp.canonical_accuracy});
  rows.push_back(
      {"classification", "z/z", "tinv-enumeration", "accuracy", cmp.enumeration_accuracy});
  summary["sign_modes"] = {{"canonical_accuracy", cmp.canonical_accuracy},
                           {"enumeration_accuracy", cmp.enumeration_accuracy},
                           {"canonical_train_size", cmp.canonical_train_size},
                           {"enumeration_train_size", cmp.enumeration_train_size},
                           {"canonical_invariant", cmp.canonical_invariant},
                           {"enumeration_invariant", cmp.enumeration_invariant}};
  std::cout << "report: sign modes canonical " << cmp.canonical_accuracy << " enumeration "
            << cmp.enumeration_accuracy << "\n";

  // routing invariance battery
  for (const std::string task : {"tsp", "cvrp"}) {
    for (const auto mode : {nn::EmbedMode::Tinv, nn::EmbedMode::RawCoords}) {
      const auto suite = tasks::run_routing_suite(task, 20, args.instances, mode, args.seed);
      const std::string task_name = task + "-20";
      for (const auto& row : suite.rows) {
        const std::string setting = tasks::to_string(row.setting);
        rows.push_back({task_name, setting, nn::to_string(mode), "mean_length", row.mean_length});
        rows.push_back({task_name, setting, nn::to_string(mode), "mean_normalized_length",
                        row.mean_normalized_length});
        rows.push_back({task_name, setting, nn::to_string(mode), "identity_rate",
                        row.identity_rate});
        summary[task_name][nn::to_string(mode)][setting] = {
            {"mean_length", row.mean_length},
            {"mean_normalized_length", row.mean_normalized_length},
            {"identity_rate", row.identity_rate}};
      }
      std::cout << "report: " << task_name << " " << nn::to_string(mode) << " done\n";
    }
  }

  // scaling benchmark
  const auto bench = tasks::bench_scaling({128, 256, 512, 1024, 2048, 4096}, args.bench_repeats, 3,
                                          args.seed);
  io::write_timings_csv((fs::path(args.out) / "timings.csv").string(), bench);
  summary["bench"] = {{"loglog_slope", bench.loglog_slope}, {"repeats", bench.repeats}};
  for (const auto& row : bench.rows)
    summary["bench"]["rows"].push_back({{"n", row.n}, {"mean_seconds", row.mean_seconds}});
  std::cout << "report: bench slope " << bench.loglog_slope << "\n";

  io::write_report_csv((fs::path(args.out) / "report.csv").string(), rows);
  std::ofstream((fs::path(args.out) / "summary.json").string()) << summary.dump(2) << "\n";
  std::cout << "report: wrote report.csv, summary.json, timings.csv under " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformation-invariant point representations: embedding, verification, and demos"};
  app.require_subcommand(1);

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "embed a point-cloud CSV");
  embed_cmd->add_option("--input", embed_args.input, "point-cloud CSV")->required();
  embed_cmd->add_option("--out", embed_args.out, "embedding CSV path")->required();
  embed_cmd->add_option("--sidecar", embed_args.sidecar, "sidecar JSON path (default <out>.json)");
  embed_cmd->add_option("--sign", embed_args.sign, "raw | canonical | enumerate");
  embed_cmd->add_option("--dim", embed_args.dim, "embedding width k (default: cloud dimension)");
  embed_cmd->add_option("--tol", embed_args.tol, "eigensolver residual tolerance");
  embed_cmd->add_option("--seed", embed_args.seed, "root seed");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "check distance preservation and invariance");
  verify_cmd->add_option("--input", verify_args.input, "point-cloud CSV")->required();
  verify_cmd->add_option("--transforms", verify_args.transforms, "random transforms to draw");
  verify_cmd->add_option("--tol", verify_args.tol, "tolerance");
  verify_cmd->add_option("--seed", verify_args.seed, "root seed");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic datasets");
  gen_cmd->add_option("--kind", gen_args.kind, "shapes | tsp | cvrp");
  gen_cmd->add_option("--out", gen_args.out, "output directory")->required();
  gen_cmd->add_option("--count", gen_args.count, "number of clouds/instances");
  gen_cmd->add_option("--n", gen_args.n, "points per routing instance");
  gen_cmd->add_option("--points", gen_args.points, "points per shape cloud");
  gen_cmd->add_option("--noise", gen_args.noise, "shape jitter sigma");
  gen_cmd->add_option("--seed", gen_args.seed, "root seed");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "time the embedding across sizes");
  bench_cmd->add_option("--sizes", bench_args.sizes, "comma-separated point counts");
  bench_cmd->add_option("--repeats", bench_args.repeats, "runs per size");
  bench_cmd->add_option("--dim", bench_args.dim, "coordinate dimension");
  bench_cmd->add_option("--out", bench_args.out, "timings CSV path");
  bench_cmd->add_option("--seed", bench_args.seed, "root seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-demo", "train the shape classifier under a protocol");
  train_cmd->add_option("--protocol", train_args.protocol, "z/z | SO3/SO3 | z/SO3");
  train_cmd->add_option("--mode", train_args.mode, "tinv | raw");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--out", train_args.out, "output directory");
  train_cmd->add_option("--train-per-class", train_args.train_per_class, "training clouds per class");
  train_cmd->add_option("--test-per-class", train_args.test_per_class, "test clouds per class");
  train_cmd->add_option("--points", train_args.points, "points per cloud");
  train_cmd->add_option("--noise", train_args.noise, "shape jitter sigma");
  train_cmd->add_option("--seed", train_args.seed, "root seed");

  RouteArgs route_args;
  auto* route_cmd = app.add_subcommand("route-demo", "routing invariance battery");
  route_cmd->add_option("--task", route_args.task, "tsp | cvrp");
  route_cmd->add_option("--mode", route_args.mode, "tinv | raw");
  route_cmd->add_option("--settings", route_args.settings, "all (full battery)");
  route_cmd->add_option("--n", route_args.n, "points per instance");
  route_cmd->add_option("--instances", route_args.instances, "instances per setting");
  route_cmd->add_option("--out", route_args.out, "report CSV path");
  route_cmd->add_option("--seed", route_args.seed, "root seed");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "full experiment battery and summary artifacts");
  report_cmd->add_option("--out", report_args.out, "output directory");
  report_cmd->add_option("--epochs", report_args.epochs, "training epochs");
  report_cmd->add_option("--instances", report_args.instances, "routing instances per setting");
  report_cmd->add_option("--bench-repeats", report_args.bench_repeats, "bench runs per size");
  report_cmd->add_option("--seed", report_args.seed, "root seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (embed_cmd->parsed()) return cmd_embed(embed_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_args);
    if (gen_cmd->parsed()) return cmd_gen(gen_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    if (train_cmd->parsed()) return cmd_train_demo(train_args);
    if (route_cmd->parsed()) return cmd_route_demo(route_args);
    if (report_cmd->parsed()) return cmd_report(report_args);
  } catch (const DegenerateInputError& e) {
    std::cerr << "error (degenerate data): " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const ConvergenceError& e) {
    std::cerr << "error (convergence): " << e.what()
              << " achieved residual " << e.achieved_residual() << "\n";
    return kExitInternal;
  } catch (const InputError& e) {
    std::cerr << "error (input): " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
