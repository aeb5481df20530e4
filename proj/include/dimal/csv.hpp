#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace dimal::io {

/// Shortest decimal representation that round-trips to the same double,
/// locale-independent. Non-finite values serialize as inf/-inf/nan.
std::string format_double(double v);

/// Parses a double; throws std::invalid_argument on malformed input.
double parse_double(const std::string& text);

/// Writes one row per matrix row; header omitted when empty.
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header = {});

/// Reads a numeric CSV. A non-numeric first line is treated as a header and
/// skipped. Empty file -> 0x0 matrix. Throws on ragged or malformed rows.
Eigen::MatrixXd read_csv(const std::filesystem::path& path);

/// One value per line.
void write_column(const std::filesystem::path& path,
                  const std::vector<double>& values);

}  // namespace dimal::io
