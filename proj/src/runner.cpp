#include "dimal/runner.hpp"

#include <fstream>
#include <ostream>

#include "dimal/analysis.hpp"
#include "dimal/csv.hpp"
#include "dimal/parallel.hpp"

namespace dimal::config {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> embedding_header(int m) {
  std::vector<std::string> header;
  header.reserve(static_cast<std::size_t>(m));
  for (int d = 0; d < m; ++d) header.push_back("dim" + std::to_string(d));
  return header;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_landmarks(const fs::path& dir, const geodesics::LandmarkSet& lands) {
  write_json(dir / "landmarks.json", {{"indices", lands.indices}});
  io::write_csv(dir / "landmark_distances.csv", lands.distances);
}

void write_loss_history(const fs::path& path,
                        const std::vector<std::vector<double>>& histories) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  std::size_t longest = 0;
  for (const auto& h : histories) longest = std::max(longest, h.size());
  for (std::size_t r = 0; r < histories.size(); ++r) {
    if (r) out << ',';
    out << "restart" << r;
  }
  out << '\n';
  for (std::size_t row = 0; row < longest; ++row) {
    for (std::size_t r = 0; r < histories.size(); ++r) {
      if (r) out << ',';
      if (row < histories[r].size()) out << io::format_double(histories[r][row]);
    }
    out << '\n';
  }
}

void write_stress_table(const fs::path& path,
                        const std::vector<analysis::MethodRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "method,K,relative_stress,seconds\n";
  for (const auto& row : rows)
    out << row.method << ',' << row.num_landmarks << ','
        << io::format_double(row.relative_stress) << ','
        << io::format_double(row.seconds) << '\n';
}

analysis::PipelineOptions pipeline_options(const RunConfig& cfg) {
  analysis::PipelineOptions opts;
  opts.k_nn = cfg.graph_k;
  opts.num_landmarks = cfg.num_landmarks;
  opts.initial_landmark = cfg.initial_landmark;
  opts.conformal = cfg.conformal;
  opts.conformal_k = cfg.conformal_k;
  opts.seed = fps_seed(cfg);
  opts.network = cfg.model;
  opts.training = cfg.training;
  opts.evaluation.mode = cfg.stress_mode == "all_pairs"
                             ? analysis::StressMode::kAllPairs
                             : analysis::StressMode::kSampled;
  opts.evaluation.pair_count = cfg.sample_pairs;
  opts.evaluation.seed = evaluation_seed(cfg);
  return opts;
}

}  // namespace

nlohmann::json execute_run(const RunConfig& cfg, std::ostream& log) {
  set_max_threads(cfg.threads);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  const analysis::PipelineOptions opts = pipeline_options(cfg);
  nlohmann::json report;
  report["config"] = cfg.to_json();

  if (cfg.experiment == "dimal") {
    const geometry::PointCloud cloud =
        build_dataset(cfg.dataset, dataset_seed(cfg));
    log << "dataset: " << cloud.size() << " points in R^" << cloud.ambient_dim()
        << "\n";
    analysis::DimalRun run = analysis::run_dimal(cloud, opts);
    report["results"] = run.report;

    geometry::save_point_cloud(dir / "points.csv", cloud);
    io::write_csv(dir / "embedding.csv", run.embedding.coords,
                  embedding_header(run.embedding.target_dim()));
    nn::save_model(dir / "model.json", cfg.model, run.params);
    write_landmarks(dir, run.landmarks);
    write_loss_history(dir / "loss_history.csv", run.training.histories);
    write_stress_table(
        dir / "stress.csv",
        {{"dimal", run.landmarks.size(),
          run.report["stress"]["relative"].get<double>(),
          run.report["total_seconds"].get<double>()}});
    log << "relative stress: " << run.report["stress"]["relative"] << "\n";
  } else if (cfg.experiment == "generalization") {
    if (!cfg.test_dataset)
      throw ConfigError("test_dataset: required for generalization runs");
    const geometry::PointCloud train_cloud =
        build_dataset(cfg.dataset, dataset_seed(cfg));
    const geometry::PointCloud test_cloud =
        build_dataset(*cfg.test_dataset, test_dataset_seed(cfg));
    log << "train: " << train_cloud.size() << " points, test: "
        << test_cloud.size() << " points\n";
    analysis::GeneralizationRun run =
        analysis::run_generalization(train_cloud, test_cloud, opts);
    report["results"] = run.report;

    geometry::save_point_cloud(dir / "points_train.csv", train_cloud);
    geometry::save_point_cloud(dir / "points_test.csv", test_cloud);
    io::write_csv(dir / "embedding.csv", run.dimal_test.coords,
                  embedding_header(run.dimal_test.target_dim()));
    io::write_csv(dir / "embedding_liso.csv", run.liso_test.coords,
                  embedding_header(run.liso_test.target_dim()));
    nn::save_model(dir / "model.json", cfg.model, run.params);
    write_landmarks(dir, run.landmarks);
    const double dimal_stress =
        run.report["methods"]["dimal"]["relative"].get<double>();
    const double liso_stress =
        run.report["methods"]["landmark_isomap"]["relative"].get<double>();
    write_stress_table(dir / "stress.csv",
                       {{"dimal", run.landmarks.size(), dimal_stress, 0.0},
                        {"landmark_isomap", run.landmarks.size(), liso_stress,
                         0.0}});
    log << "relative test stress: dimal " << dimal_stress << ", landmark_isomap "
        << liso_stress << "\n";
  } else if (cfg.experiment == "compare") {
    const geometry::PointCloud cloud =
        build_dataset(cfg.dataset, dataset_seed(cfg));
    std::vector<analysis::Method> methods;
    for (const auto& name : cfg.methods) {
      try {
        methods.push_back(analysis::method_from_string(name));
      } catch (const std::exception& err) {
        throw ConfigError(std::string("evaluation.methods: ") + err.what());
      }
    }
    const std::vector<int> ks =
        cfg.k_sweep.empty() ? std::vector<int>{cfg.num_landmarks} : cfg.k_sweep;
    analysis::Comparison cmp =
        analysis::compare_methods(cloud, ks, methods, opts);
    report["results"] = cmp.report;
    geometry::save_point_cloud(dir / "points.csv", cloud);
    write_stress_table(dir / "stress.csv", cmp.rows);
    for (const auto& row : cmp.rows)
      log << row.method << " K=" << row.num_landmarks << " stress "
          << row.relative_stress << "\n";
  } else if (cfg.experiment == "order_of_accuracy") {
    if (cfg.k_sweep.size() < 3)
      throw ConfigError(
          "evaluation.k_sweep: order_of_accuracy needs at least 3 landmark "
          "counts");
    const geometry::PointCloud cloud =
        build_dataset(cfg.dataset, dataset_seed(cfg));
    std::vector<std::pair<int, double>> runs;
    std::vector<analysis::MethodRow> rows;
    for (int K : cfg.k_sweep) {
      analysis::PipelineOptions k_opts = opts;
      k_opts.num_landmarks = K;
      analysis::DimalRun run = analysis::run_dimal(cloud, k_opts);
      const double stress = run.report["stress"]["relative"].get<double>();
      runs.emplace_back(K, stress);
      rows.push_back({"dimal", K, stress,
                      run.report["total_seconds"].get<double>()});
      log << "K=" << K << " stress " << stress << "\n";
    }
    const analysis::AccuracyFit fit = analysis::order_of_accuracy(runs);
    report["results"] = {{"slope", fit.slope},
                         {"log_c", fit.log_c},
                         {"r_squared", fit.r_squared}};
    auto samples = nlohmann::json::array();
    for (const auto& [K, E] : runs) samples.push_back({{"K", K}, {"stress", E}});
    report["results"]["samples"] = std::move(samples);
    geometry::save_point_cloud(dir / "points.csv", cloud);
    write_stress_table(dir / "stress.csv", rows);
    log << "fitted slope " << fit.slope << " (r^2 " << fit.r_squared << ")\n";
  } else {
    throw ConfigError("config.experiment: unknown experiment '" +
                      cfg.experiment + "'");
  }

  write_json(dir / "report.json", report);
  return report;
}

}  // namespace dimal::config
