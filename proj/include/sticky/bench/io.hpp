#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticky::bench {

namespace fs = std::filesystem;

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

inline std::vector<double> parse_numbers(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw std::runtime_error(where + ": '" + cell + "' is not a number");
    }
    if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
      throw std::runtime_error(where + ": '" + cell + "' is not a number");
    out.push_back(v);
  }
  return out;
}

// Comma-separated numbers, one row per line; a non-numeric first line is a header.
inline Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (lineno == 1) {
      try {
        rows.push_back(parse_numbers(line, where));
      } catch (const std::runtime_error&) {
        continue;
      }
      continue;
    }
    rows.push_back(parse_numbers(line, where));
    if (rows.back().size() != rows.front().size()) throw std::runtime_error(where + ": ragged row");
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

inline std::vector<double> read_vector_csv(const fs::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 1 && m.rows() != 1 && m.size() > 0)
    throw std::runtime_error(path.string() + ": expected a single row or column");
  return std::vector<double>(m.data(), m.data() + m.size());
}

inline void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_output(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

inline void write_vector_csv(const fs::path& path, const std::vector<double>& v) {
  auto out = open_output(path);
  for (double x : v) out << x << '\n';
}

// Sparse matrices as "rows cols" followed by zero-based "row col value" lines.
inline void write_coordinate_list(const fs::path& path, const Eigen::SparseMatrix<double, Eigen::RowMajor>& A) {
  auto out = open_output(path);
  out << A.rows() << ' ' << A.cols() << '\n';
  for (Eigen::Index r = 0; r < A.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor> read_coordinate_list(const fs::path& path) {
  auto in = open_input(path);
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw std::runtime_error(path.string() + ": missing dimension line");
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::Index r = 0, c = 0;
  double v = 0.0;
  while (in >> r >> c >> v) {
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw std::runtime_error(path.string() + ": entry (" + std::to_string(r) + "," + std::to_string(c) + ") out of range");
    trip.emplace_back(r, c, v);
  }
  if (!in.eof()) throw std::runtime_error(path.string() + ": malformed entry after " + std::to_string(trip.size()) + " entries");
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(rows, cols);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

}  // namespace sticky::bench
