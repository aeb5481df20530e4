#include "dimal/config.hpp"

#include <algorithm>
#include <fstream>

#include "dimal/random.hpp"

namespace dimal::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::vector<std::string>& allowed) {
  if (!obj.is_object())
    throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T field(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

DatasetConfig dataset_from_json(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"generator", "n", "omega1", "omega2", "width", "height",
                  "alpha_range", "rim_fraction", "path", "grayscale"});
  DatasetConfig dc;
  dc.generator = field<std::string>(j, where, "generator", dc.generator);
  const std::vector<std::string> known = {"s_curve",  "helical_ribbon",
                                          "swiss_roll", "horizon",
                                          "fishbowl", "image_dir"};
  if (std::find(known.begin(), known.end(), dc.generator) == known.end())
    throw ConfigError(where + ".generator: unknown generator '" + dc.generator +
                      "'");
  dc.n = field<int>(j, where, "n", dc.n);
  dc.omega1 = field<double>(j, where, "omega1", dc.omega1);
  dc.omega2 = field<double>(j, where, "omega2", dc.omega2);
  dc.width = field<int>(j, where, "width", dc.width);
  dc.height = field<int>(j, where, "height", dc.height);
  dc.rim_fraction = field<double>(j, where, "rim_fraction", dc.rim_fraction);
  dc.path = field<std::string>(j, where, "path", dc.path);
  dc.grayscale = field<bool>(j, where, "grayscale", dc.grayscale);
  if (j.contains("alpha_range")) {
    const auto& ar = j.at("alpha_range");
    if (!ar.is_array() || ar.size() != 2 || !ar[0].is_array() ||
        ar[0].size() != 2 || !ar[1].is_array() || ar[1].size() != 2)
      throw ConfigError(where + ".alpha_range: expected [[lo1,hi1],[lo2,hi2]]");
    dc.alpha_range.a1_lo = ar[0][0].get<double>();
    dc.alpha_range.a1_hi = ar[0][1].get<double>();
    dc.alpha_range.a2_lo = ar[1][0].get<double>();
    dc.alpha_range.a2_hi = ar[1][1].get<double>();
  }
  if (dc.generator == "image_dir" && dc.path.empty())
    throw ConfigError(where + ".path: required for image_dir datasets");
  return dc;
}

json dataset_to_json(const DatasetConfig& dc) {
  json j;
  j["generator"] = dc.generator;
  j["n"] = dc.n;
  j["omega1"] = dc.omega1;
  j["omega2"] = dc.omega2;
  j["width"] = dc.width;
  j["height"] = dc.height;
  j["alpha_range"] = {{dc.alpha_range.a1_lo, dc.alpha_range.a1_hi},
                      {dc.alpha_range.a2_lo, dc.alpha_range.a2_hi}};
  j["rim_fraction"] = dc.rim_fraction;
  j["path"] = dc.path;
  j["grayscale"] = dc.grayscale;
  return j;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.model = nn::NetworkSpec::mlp(3, {70, 70}, 2);
  cfg.training.seed = 1;
  return cfg;
}

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j, "config",
                 {"experiment", "output_dir", "threads", "dataset",
                  "test_dataset", "graph", "sampling", "model", "training",
                  "evaluation"});
  RunConfig cfg = defaults();
  cfg.experiment = field<std::string>(j, "config", "experiment", cfg.experiment);
  const std::vector<std::string> experiments = {
      "dimal", "compare", "generalization", "order_of_accuracy"};
  if (std::find(experiments.begin(), experiments.end(), cfg.experiment) ==
      experiments.end())
    throw ConfigError("config.experiment: unknown experiment '" +
                      cfg.experiment + "'");
  cfg.output_dir = field<std::string>(j, "config", "output_dir", cfg.output_dir);
  cfg.threads = field<int>(j, "config", "threads", cfg.threads);

  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"), "dataset");
  if (j.contains("test_dataset") && !j.at("test_dataset").is_null())
    cfg.test_dataset = dataset_from_json(j.at("test_dataset"), "test_dataset");

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    reject_unknown(g, "graph", {"k", "conformal", "conformal_k"});
    cfg.graph_k = field<int>(g, "graph", "k", cfg.graph_k);
    cfg.conformal = field<bool>(g, "graph", "conformal", cfg.conformal);
    cfg.conformal_k = field<int>(g, "graph", "conformal_k", cfg.conformal_k);
  }

  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    reject_unknown(s, "sampling", {"num_landmarks", "initial", "seed"});
    cfg.num_landmarks =
        field<int>(s, "sampling", "num_landmarks", cfg.num_landmarks);
    cfg.initial_landmark = field<int>(s, "sampling", "initial", cfg.initial_landmark);
    cfg.sampling_seed =
        field<std::uint64_t>(s, "sampling", "seed", cfg.sampling_seed);
  }

  if (j.contains("model")) {
    try {
      cfg.model = nn::spec_from_json(j.at("model"));
    } catch (const std::exception& err) {
      throw ConfigError(std::string("model: ") + err.what());
    }
  }

  if (j.contains("training")) {
    const auto& t = j.at("training");
    reject_unknown(t, "training",
                   {"iterations", "learning_rate", "beta1", "beta2", "restarts",
                    "loss", "margin", "seed"});
    cfg.training.iterations =
        field<int>(t, "training", "iterations", cfg.training.iterations);
    cfg.training.learning_rate =
        field<double>(t, "training", "learning_rate", cfg.training.learning_rate);
    cfg.training.beta1 = field<double>(t, "training", "beta1", cfg.training.beta1);
    cfg.training.beta2 = field<double>(t, "training", "beta2", cfg.training.beta2);
    cfg.training.restarts =
        field<int>(t, "training", "restarts", cfg.training.restarts);
    const std::string loss = field<std::string>(
        t, "training", "loss", nn::to_string(cfg.training.loss));
    try {
      cfg.training.loss = nn::loss_kind_from_string(loss);
    } catch (const std::exception& err) {
      throw ConfigError(std::string("training.loss: ") + err.what());
    }
    cfg.training.margin = field<double>(t, "training", "margin", cfg.training.margin);
    cfg.training.seed =
        field<std::uint64_t>(t, "training", "seed", cfg.training.seed);
    try {
      cfg.training.validate();
    } catch (const std::exception& err) {
      throw ConfigError(std::string("training: ") + err.what());
    }
  }

  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    reject_unknown(e, "evaluation",
                   {"stress_mode", "sample_pairs", "methods", "k_sweep"});
    cfg.stress_mode =
        field<std::string>(e, "evaluation", "stress_mode", cfg.stress_mode);
    if (cfg.stress_mode != "sampled" && cfg.stress_mode != "all_pairs")
      throw ConfigError("evaluation.stress_mode: expected sampled or all_pairs");
    cfg.sample_pairs =
        field<std::int64_t>(e, "evaluation", "sample_pairs", cfg.sample_pairs);
    cfg.methods = field<std::vector<std::string>>(e, "evaluation", "methods",
                                                  cfg.methods);
    cfg.k_sweep = field<std::vector<int>>(e, "evaluation", "k_sweep", cfg.k_sweep);
  }
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["dataset"] = dataset_to_json(dataset);
  j["test_dataset"] = test_dataset ? dataset_to_json(*test_dataset) : json();
  j["graph"] = {{"k", graph_k},
                {"conformal", conformal},
                {"conformal_k", conformal_k}};
  j["sampling"] = {{"num_landmarks", num_landmarks},
                   {"initial", initial_landmark},
                   {"seed", sampling_seed}};
  j["model"] = nn::spec_to_json(model);
  j["training"] = {{"iterations", training.iterations},
                   {"learning_rate", training.learning_rate},
                   {"beta1", training.beta1},
                   {"beta2", training.beta2},
                   {"restarts", training.restarts},
                   {"loss", nn::to_string(training.loss)},
                   {"margin", training.margin},
                   {"seed", training.seed}};
  j["evaluation"] = {{"stress_mode", stress_mode},
                     {"sample_pairs", sample_pairs},
                     {"methods", methods},
                     {"k_sweep", k_sweep}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& err) {
    throw ConfigError(path + ": " + err.what());
  }
  return RunConfig::from_json(j);
}

std::uint64_t dataset_seed(const RunConfig& cfg) {
  return mix_seed(cfg.sampling_seed, 1);
}
std::uint64_t test_dataset_seed(const RunConfig& cfg) {
  return mix_seed(cfg.sampling_seed, 2);
}
std::uint64_t fps_seed(const RunConfig& cfg) {
  return mix_seed(cfg.sampling_seed, 3);
}
std::uint64_t evaluation_seed(const RunConfig& cfg) {
  return mix_seed(cfg.sampling_seed, 4);
}

geometry::PointCloud build_dataset(const DatasetConfig& dc, std::uint64_t seed) {
  if (dc.generator == "s_curve") return geometry::gen_s_curve(dc.n, seed);
  if (dc.generator == "helical_ribbon")
    return geometry::gen_helical_ribbon(dc.n, seed);
  if (dc.generator == "swiss_roll") return geometry::gen_swiss_roll(dc.n, seed);
  if (dc.generator == "horizon") {
    geometry::HorizonParams hp;
    hp.omega1 = dc.omega1;
    hp.omega2 = dc.omega2;
    hp.width = dc.width;
    hp.height = dc.height;
    return geometry::gen_horizon_dataset(dc.n, hp, dc.alpha_range, seed);
  }
  if (dc.generator == "fishbowl")
    return geometry::gen_fishbowl(dc.n, dc.rim_fraction, seed);
  if (dc.generator == "image_dir")
    return geometry::load_image_directory(dc.path, dc.grayscale);
  throw ConfigError("dataset.generator: unknown generator '" + dc.generator + "'");
}

}  // namespace dimal::config
