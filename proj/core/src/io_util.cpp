#include "solar/io_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace solar {

void write_file_atomic(const std::string &path, const std::string &content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string matrix_to_csv(const Matrix &m) {
  std::string out = std::to_string(m.rows) + "," + std::to_string(m.cols) + "\n";
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += format_real(m(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<double> parse_csv_line(const std::string &line, std::size_t line_no) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception &) {
      throw std::runtime_error("csv parse error at line " + std::to_string(line_no) +
                               ": bad value '" + tok + "'");
    }
  }
  return vals;
}

}  // namespace

Matrix matrix_from_csv_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const std::vector<double> header = parse_csv_line(line, 1);
  if (header.size() != 2)
    throw std::runtime_error(path + ": header must be rows,cols");
  const auto rows = static_cast<std::size_t>(header[0]);
  const auto cols = static_cast<std::size_t>(header[1]);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + ": truncated at row " + std::to_string(i));
    const std::vector<double> vals = parse_csv_line(line, i + 2);
    if (vals.size() != cols)
      throw std::runtime_error(path + ": row " + std::to_string(i) + " has " +
                               std::to_string(vals.size()) + " values, expected " +
                               std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = vals[j];
  }
  if (!is_finite(m)) throw std::runtime_error(path + ": non-finite entries");
  return m;
}

void write_matrix_csv(const std::string &path, const Matrix &m) {
  write_file_atomic(path, matrix_to_csv(m));
}

std::string factors_to_csv(const SvdFactors &f) {
  std::string out;
  for (std::size_t i = 0; i < f.s.size(); ++i) {
    if (i) out += ',';
    out += format_real(f.s[i]);
  }
  out += '\n';
  for (std::size_t i = 0; i < f.v.rows; ++i) {
    for (std::size_t j = 0; j < f.v.cols; ++j) {
      if (j) out += ',';
      out += format_real(f.v(i, j));
    }
    out += '\n';
  }
  return out;
}

SvdFactors factors_from_csv_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  SvdFactors f;
  f.s = parse_csv_line(line, 1);
  f.rank = f.s.size();
  std::vector<std::vector<double>> v_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    v_rows.push_back(parse_csv_line(line, line_no));
    if (v_rows.back().size() != f.rank)
      throw std::runtime_error(path + ": V row width != rank at line " +
                               std::to_string(line_no));
  }
  f.v = Matrix(v_rows.size(), f.rank);
  for (std::size_t i = 0; i < v_rows.size(); ++i)
    for (std::size_t j = 0; j < f.rank; ++j) f.v(i, j) = v_rows[i][j];
  return f;
}

std::string reports_to_csv(const std::vector<VerificationReport> &reports) {
  std::string out = "check,measured,expected,tolerance,pass\n";
  for (const auto &r : reports) {
    out += r.check + "," + format_real(r.measured) + "," + format_real(r.expected) +
           "," + format_real(r.tolerance) + "," + (r.pass ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace solar
