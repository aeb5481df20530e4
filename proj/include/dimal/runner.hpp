#pragma once

#include <filesystem>
#include <iosfwd>

#include "dimal/config.hpp"

namespace dimal::config {

/// Executes the configured experiment and writes its artifacts (embedding
/// CSVs, report.json, stress.csv, model.json, loss_history.csv, landmark
/// files) into cfg.output_dir. Returns the report. Throws ConfigError on
/// semantic config problems and std::runtime_error on runtime failures.
nlohmann::json execute_run(const RunConfig& cfg, std::ostream& log);

}  // namespace dimal::config
