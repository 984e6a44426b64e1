#include "cliplab/synthdata.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string_view>

#include "cliplab/errors.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

void PairedDataset::validate() const {
  if (x.rows() != y.rows()) {
    throw ContractError("dataset: X has " + std::to_string(x.rows()) + " rows but Y has " + std::to_string(y.rows()));
  }
  if (labels && labels->size() != x.rows()) {
    throw ContractError("dataset: " + std::to_string(labels->size()) + " labels for " + std::to_string(x.rows()) +
                        " rows");
  }
}

PairedDataset subset(const PairedDataset& ds, const std::vector<std::size_t>& indices) {
  PairedDataset out;
  out.x = gather_rows(ds.x, indices);
  out.y = gather_rows(ds.y, indices);
  if (ds.labels) {
    std::vector<std::string> l;
    l.reserve(indices.size());
    for (std::size_t i : indices) l.push_back((*ds.labels)[i]);
    out.labels = std::move(l);
  }
  out.source = ds.source;
  return out;
}

std::string to_string(Setting s) { return s == Setting::Linear ? "linear" : "nonlinear"; }

Setting setting_from_string(const std::string& name) {
  if (name == "linear") return Setting::Linear;
  if (name == "nonlinear") return Setting::Nonlinear;
  throw ContractError("unknown setting '" + name + "' (expected linear or nonlinear)");
}

namespace {

void check_spec(const SyntheticSpec& spec) {
  if (spec.d1 == 0 || spec.d2 == 0) throw ContractError("synthetic: dimensions must be positive");
  if (spec.k_star == 0) throw ContractError("synthetic: k* must be at least 1");
  if (spec.k_star > spec.d1) throw ContractError("synthetic: k* exceeds d1");
  if (spec.k_star > spec.d2) throw ContractError("synthetic: k* exceeds d2");
}

std::string describe(const SyntheticSpec& spec) {
  return "synthetic:" + to_string(spec.setting) + ":n=" + std::to_string(spec.n) + ":d1=" + std::to_string(spec.d1) +
         ":d2=" + std::to_string(spec.d2) + ":k=" + std::to_string(spec.k_star) + ":seed=" + std::to_string(spec.seed);
}

}  // namespace

PairedDataset gen_linear(const SyntheticSpec& spec) {
  check_spec(spec);
  PairedDataset ds;
  ds.x = Matrix(spec.n, spec.d1);
  ds.y = Matrix(spec.n, spec.d2);
  ds.source = describe(spec);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < spec.d2; ++j) ds.y(i, j) = rng.normal();
    for (std::size_t j = 0; j < spec.k_star; ++j) ds.x(i, j) = ds.y(i, j);
    for (std::size_t j = spec.k_star; j < spec.d1; ++j) ds.x(i, j) = rng.normal();
  }
  return ds;
}

PairedDataset gen_nonlinear(const SyntheticSpec& spec) {
  check_spec(spec);
  if (spec.cross_term && spec.k_star < 3) throw ContractError("synthetic: cross term needs k* >= 3");
  PairedDataset ds;
  ds.x = Matrix(spec.n, spec.d1);
  ds.y = Matrix(spec.n, spec.d2);
  ds.source = describe(spec);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto y = ds.y.row(i);
    bool usable = false;
    while (!usable) {
      for (double& v : y) v = rng.normal();
      usable = true;
      for (std::size_t j = 2; j < spec.k_star; ++j) usable = usable && y[j] != 0.0;
    }
    auto x = ds.x.row(i);
    for (std::size_t j = 0; j < spec.k_star; ++j) {
      if (j == 0) {
        x[j] = 0.2 * y[0] * y[0] * y[0];
      } else if (j == 1) {
        x[j] = std::sin(spec.cross_term ? y[1] * y[2] : y[1] * y[1]);
      } else {
        x[j] = std::log(y[j] * y[j]);
      }
    }
    for (std::size_t j = spec.k_star; j < spec.d1; ++j) x[j] = rng.normal();
  }
  return ds;
}

PairedDataset generate(const SyntheticSpec& spec) {
  return spec.setting == Setting::Linear ? gen_linear(spec) : gen_nonlinear(spec);
}

SplitResult split(const PairedDataset& ds, const std::array<std::size_t, 3>& sizes, std::uint64_t seed) {
  ds.validate();
  const std::size_t total = sizes[0] + sizes[1] + sizes[2];
  if (total > ds.size()) {
    throw ContractError("split: requested " + std::to_string(total) + " rows from a dataset of " +
                        std::to_string(ds.size()));
  }
  Rng rng(seed);
  const auto perm = permutation(ds.size(), rng);
  auto take = [&](std::size_t begin, std::size_t count) {
    return subset(ds, std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                               perm.begin() + static_cast<std::ptrdiff_t>(begin + count)));
  };
  return SplitResult{take(0, sizes[0]), take(sizes[0], sizes[1]), take(sizes[0] + sizes[1], sizes[2])};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_number(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

}  // namespace

Matrix read_csv_matrix(const std::string& path, HeaderMode header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  bool first = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (first) {
      first = false;
      cols = cells.size();
      bool numeric = true;
      double tmp = 0.0;
      for (auto c : cells) numeric = numeric && parse_number(c, tmp);
      const bool is_header = header == HeaderMode::Present || (header == HeaderMode::Auto && !numeric);
      if (is_header) continue;
    }
    if (cells.size() != cols) {
      throw ParseError(path, line_no, cells.size(),
                       "expected " + std::to_string(cols) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_number(cells[c], v)) {
        throw ParseError(path, line_no, c + 1, "non-numeric cell '" + std::string(cells[c]) + "'");
      }
      if (!std::isfinite(v)) throw ParseError(path, line_no, c + 1, "non-finite value");
      data.push_back(v);
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv_matrix(const std::string& path, const Matrix& m, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << (j + 1);
  out << '\n';
  std::string line;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
}

std::vector<std::string> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    labels.push_back(line);
  }
  while (!labels.empty() && labels.back().empty()) labels.pop_back();
  return labels;
}

void write_labels(const std::string& path, const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& l : labels) out << l << '\n';
}

PairedDataset load_csv(const std::string& path_x, const std::string& path_y,
                       const std::optional<std::string>& path_labels, HeaderMode header) {
  PairedDataset ds;
  ds.x = read_csv_matrix(path_x, header);
  ds.y = read_csv_matrix(path_y, header);
  if (ds.x.rows() != ds.y.rows()) {
    throw InputError("row count mismatch: " + path_x + " has " + std::to_string(ds.x.rows()) + " rows, " + path_y +
                     " has " + std::to_string(ds.y.rows()) + " rows");
  }
  if (path_labels) {
    auto labels = read_labels(*path_labels);
    if (labels.size() != ds.x.rows()) {
      throw InputError("row count mismatch: " + *path_labels + " has " + std::to_string(labels.size()) +
                       " labels, data has " + std::to_string(ds.x.rows()) + " rows");
    }
    ds.labels = std::move(labels);
  }
  ds.source = "csv:" + path_x + "+" + path_y;
  return ds;
}

void save_csv(const std::string& dir, const PairedDataset& ds) {
  ds.validate();
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_csv_matrix((base / "X.csv").string(), ds.x, "x");
  write_csv_matrix((base / "Y.csv").string(), ds.y, "y");
  if (ds.labels) write_labels((base / "labels.txt").string(), *ds.labels);
}

void add_jitter(Matrix& m, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ContractError("jitter sigma must be nonnegative");
  Rng rng(seed, 0x6a17);
  for (double& v : m.values()) v += sigma * rng.normal();
}

}  // namespace cliplab
