#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dimal/analysis.hpp"
#include "dimal/csv.hpp"
#include "dimal/parallel.hpp"
#include "dimal/runner.hpp"

namespace {

int resolve_threads(const CLI::Option* flag, int flag_value, int config_value) {
  if (flag && flag->count() > 0) return flag_value;
  if (const char* env = std::getenv("DIMAL_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring malformed DIMAL_THREADS='" << env << "'\n";
    }
  }
  return config_value;
}

int cmd_run(const std::string& config_path, const CLI::Option* seed_flag,
            std::uint64_t seed_value, const CLI::Option* threads_flag,
            int threads_value) {
  dimal::config::RunConfig cfg;
  try {
    cfg = dimal::config::load_config(config_path);
  } catch (const dimal::config::ConfigError& err) {
    std::cerr << "invalid config: " << err.what() << "\n";
    return 2;
  }
  if (seed_flag->count() > 0) cfg.sampling_seed = seed_value;
  cfg.threads = resolve_threads(threads_flag, threads_value, cfg.threads);

  try {
    dimal::config::execute_run(cfg, std::cout);
  } catch (const dimal::config::ConfigError& err) {
    std::cerr << "invalid config: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_embed(const std::string& model_path, const std::string& input_path,
              const std::string& output_path) {
  try {
    auto [spec, params] = dimal::nn::load_model(model_path);
    const dimal::nn::NetworkLayout layout = dimal::nn::analyze(spec);

    Eigen::MatrixXd inputs;
    if (std::filesystem::is_directory(input_path)) {
      const bool grayscale =
          !(spec.input_shape.size() == 3 && spec.input_shape[0] == 3);
      inputs = dimal::geometry::load_image_directory(input_path, grayscale).points;
    } else {
      inputs = dimal::io::read_csv(input_path);
    }

    if (inputs.rows() > 0 && inputs.cols() != layout.input.flat()) {
      std::cerr << "error: input width mismatch (expected "
                << layout.input.flat() << ", got " << inputs.cols() << ")\n";
      return 1;
    }

    const Eigen::MatrixXd out = dimal::nn::forward_all(params, spec, inputs);
    std::vector<std::string> header;
    for (int d = 0; d < layout.output_dim; ++d)
      header.push_back("dim" + std::to_string(d));
    dimal::io::write_csv(output_path, out, header);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isometric manifold embeddings from sparse geodesic samples"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_value = 0;
  int threads_value = 0;
  auto* run = app.add_subcommand("run", "Execute an experiment config");
  run->add_option("config", config_path, "Path to a JSON run configuration")
      ->required();
  auto* seed_flag =
      run->add_option("--seed", seed_value, "Override the sampling seed");
  auto* run_threads =
      run->add_option("--threads", threads_value, "Worker thread cap");

  std::string model_path, input_path, output_path;
  auto* embed =
      app.add_subcommand("embed", "Forward inputs through a trained model");
  embed->add_option("model", model_path, "model.json from a previous run")
      ->required();
  embed->add_option("input", input_path, "CSV of points or a PNG directory")
      ->required();
  embed->add_option("output", output_path, "Output embedding CSV")->required();
  int embed_threads_value = 0;
  auto* embed_threads =
      embed->add_option("--threads", embed_threads_value, "Worker thread cap");

  auto* config_cmd = app.add_subcommand("config", "Configuration helpers");
  config_cmd->require_subcommand(1);
  auto* dump = config_cmd->add_subcommand(
      "dump-defaults", "Print the default run configuration as JSON");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(config_path, seed_flag, seed_value, run_threads,
                   threads_value);
  if (embed->parsed()) {
    dimal::set_max_threads(
        resolve_threads(embed_threads, embed_threads_value, 0));
    return cmd_embed(model_path, input_path, output_path);
  }
  if (dump->parsed()) {
    std::cout << dimal::config::RunConfig::defaults().to_json().dump(2) << "\n";
    return 0;
  }
  return 0;
}
