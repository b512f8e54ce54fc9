#include "solar/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace solar {

ItemCatalog gen_catalog(std::size_t vocab, std::size_t dim, std::size_t true_rank,
                        std::uint64_t seed, double shared_strength) {
  if (true_rank > dim)
    throw std::invalid_argument("gen_catalog: true_rank > dim");
  Rng rng(seed);
  ItemCatalog cat;
  cat.vocab_size = vocab;
  cat.dim = dim;
  cat.true_rank = true_rank;
  cat.shared_strength = shared_strength;

  const Matrix a = rng.gaussian_matrix(vocab, true_rank);
  const Matrix b = rng.gaussian_matrix(true_rank, dim);
  cat.embeddings = matmul(a, b);
  // Rows of A*B have norm ~ sqrt(true_rank * dim); normalize to ~unit so the
  // shared component ratio is meaningful.
  const double row_scale = 1.0 / std::sqrt(static_cast<double>(true_rank * dim));
  for (double &v : cat.embeddings.data) v *= row_scale;

  if (shared_strength > 0.0) {
    // x_k = c + d_k with ||c|| / ||d_k|| = shared_strength and ||x_k|| ~= 1.
    Matrix c0 = rng.gaussian_matrix(1, dim);
    const double norm = frobenius_norm(c0);
    for (double &v : c0.data) v /= norm;
    for (std::size_t i = 0; i < vocab; ++i) {
      double row_norm = 0.0;
      for (std::size_t j = 0; j < dim; ++j)
        row_norm += cat.embeddings(i, j) * cat.embeddings(i, j);
      row_norm = std::sqrt(row_norm);
      for (std::size_t j = 0; j < dim; ++j)
        cat.embeddings(i, j) =
            cat.embeddings(i, j) / (row_norm * shared_strength) + c0(0, j);
    }
  }
  return cat;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double cosine(const double *x, const double *y, std::size_t d) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  const double denom = std::sqrt(xx * yy);
  return denom > 0.0 ? xy / denom : 0.0;
}

}  // namespace

std::vector<double> eta_star_for(const ItemCatalog &catalog,
                                 const std::vector<double> &user_vec,
                                 const std::vector<std::size_t> &candidates,
                                 const FlipSpec &flip) {
  const std::size_t d = catalog.dim, m = candidates.size();
  std::vector<double> eta(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double *xi = catalog.embeddings.row_ptr(candidates[i]);
    double affinity = 0.0;
    for (std::size_t k = 0; k < d; ++k) affinity += user_vec[k] * xi[k];
    double max_cos = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      max_cos = std::max(
          max_cos, cosine(xi, catalog.embeddings.row_ptr(candidates[j]), d));
    }
    if (m == 1) max_cos = 0.0;
    eta[i] = sigmoid(flip.base_weight * affinity - flip.penalty_weight * max_cos);
  }
  return eta;
}

RankingInstance gen_instance(const ItemCatalog &catalog, std::size_t n_hist,
                             std::size_t m, const FlipSpec &flip, Rng &rng,
                             std::uint64_t user_id) {
  if (m < 2) throw std::invalid_argument("gen_instance: need m >= 2");
  if (n_hist < 1) throw std::invalid_argument("gen_instance: need n_hist >= 1");

  RankingInstance inst;
  inst.user_id = user_id;
  inst.history.resize(n_hist);
  for (auto &id : inst.history) id = rng.below(catalog.vocab_size);
  inst.candidates.resize(m);
  for (auto &id : inst.candidates) id = rng.below(catalog.vocab_size);

  const std::size_t d = catalog.dim;
  std::vector<double> user(d, 0.0);
  for (std::size_t t = 0; t < n_hist; ++t) {
    const double *row = catalog.embeddings.row_ptr(inst.history[t]);
    for (std::size_t k = 0; k < d; ++k) user[k] += row[k];
  }
  for (std::size_t k = 0; k < d; ++k)
    user[k] = user[k] / static_cast<double>(n_hist) + flip.noise * rng.gaussian();

  inst.eta_star = eta_star_for(catalog, user, inst.candidates, flip);
  inst.labels.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    inst.labels[i] = rng.uniform() < inst.eta_star[i] ? 1 : 0;

  if (flip.force_mixed) {
    std::size_t arg_hi = 0, arg_lo = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (inst.eta_star[i] > inst.eta_star[arg_hi]) arg_hi = i;
      if (inst.eta_star[i] < inst.eta_star[arg_lo]) arg_lo = i;
    }
    bool any_pos = false, any_neg = false;
    for (int l : inst.labels) (l ? any_pos : any_neg) = true;
    if (!any_pos) inst.labels[arg_hi] = 1;
    if (!any_neg) inst.labels[arg_lo] = 0;
  }
  return inst;
}

std::vector<RankingInstance> gen_dataset(const ItemCatalog &catalog,
                                         std::size_t users, std::size_t n_hist,
                                         std::size_t m, const FlipSpec &flip,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RankingInstance> data;
  data.reserve(users);
  for (std::size_t u = 0; u < users; ++u)
    data.push_back(gen_instance(catalog, n_hist, m, flip, rng, u));
  return data;
}

namespace {

void append_real(std::string &out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string format_instance(const RankingInstance &inst) {
  std::string line = std::to_string(inst.user_id);
  line += ' ';
  for (std::size_t i = 0; i < inst.history.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(inst.history[i]);
  }
  line += ' ';
  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(inst.candidates[i]);
  }
  line += ' ';
  for (std::size_t i = 0; i < inst.labels.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(inst.labels[i]);
  }
  line += ' ';
  for (std::size_t i = 0; i < inst.eta_star.size(); ++i) {
    if (i) line += ',';
    append_real(line, inst.eta_star[i]);
  }
  return line;
}

namespace {

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string &what) {
  throw std::runtime_error("dataset parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

}  // namespace

RankingInstance parse_instance(const std::string &line, std::size_t line_no) {
  const std::vector<std::string> fields = split(line, ' ');
  if (fields.size() != 5)
    parse_fail(line_no, "expected 5 fields, got " + std::to_string(fields.size()));

  RankingInstance inst;
  try {
    inst.user_id = std::stoull(fields[0]);
    for (const auto &tok : split(fields[1], ','))
      inst.history.push_back(std::stoull(tok));
    for (const auto &tok : split(fields[2], ','))
      inst.candidates.push_back(std::stoull(tok));
    for (const auto &tok : split(fields[3], ',')) {
      const int v = std::stoi(tok);
      if (v != 0 && v != 1) parse_fail(line_no, "label not in {0,1}");
      inst.labels.push_back(v);
    }
    for (const auto &tok : split(fields[4], ','))
      inst.eta_star.push_back(std::stod(tok));
  } catch (const std::invalid_argument &) {
    parse_fail(line_no, "malformed number");
  } catch (const std::out_of_range &) {
    parse_fail(line_no, "number out of range");
  }
  if (inst.labels.size() != inst.candidates.size() ||
      inst.eta_star.size() != inst.candidates.size())
    parse_fail(line_no, "field lengths disagree");
  return inst;
}

void write_dataset(const std::string &path, const std::vector<RankingInstance> &data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  for (const auto &inst : data) out << format_instance(inst) << '\n';
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

std::vector<RankingInstance> read_dataset(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
  std::vector<RankingInstance> data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) parse_fail(line_no, "empty line");
    data.push_back(parse_instance(line, line_no));
  }
  return data;
}

}  // namespace solar
