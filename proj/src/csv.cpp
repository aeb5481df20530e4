#include "dimal/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace dimal::io {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  double v = 0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) out << ',';
      out << header[c];
    }
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool numeric_line(const std::vector<std::string>& fields) {
  if (fields.empty()) return false;
  try {
    parse_double(fields[0]);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}
}  // namespace

Eigen::MatrixXd read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first && !numeric_line(fields)) {
      first = false;  // header
      continue;
    }
    first = false;
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const std::invalid_argument&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": malformed value '" + f + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_column(const std::filesystem::path& path,
                  const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (double v : values) out << format_double(v) << '\n';
}

}  // namespace dimal::io
