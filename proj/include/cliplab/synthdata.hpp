#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cliplab/matrix.hpp"

namespace cliplab {

// Row-aligned observations of the two modalities.
struct PairedDataset {
  Matrix x;
  Matrix y;
  std::optional<std::vector<std::string>> labels;
  std::string source;

  std::size_t size() const noexcept { return x.rows(); }

  // Throws ContractError unless x, y and labels have matching row counts.
  void validate() const;
};

// Rows `indices` of every member, in that order.
PairedDataset subset(const PairedDataset& ds, const std::vector<std::size_t>& indices);

enum class Setting { Linear, Nonlinear };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& name);

struct SyntheticSpec {
  Setting setting = Setting::Linear;
  std::size_t n = 14000;
  std::size_t d1 = 20;
  std::size_t d2 = 20;
  std::size_t k_star = 5;
  std::uint64_t seed = 0;
  // Nonlinear second coordinate: false gives sin(Y2·Y2) as printed in the
  // original construction, true the cross term sin(Y2·Y3).
  bool cross_term = false;
};

// Y ~ N(0, I_d2), ξ ~ N(0, I_{d1-k*}), X = (Y_1..Y_k*, ξ).
PairedDataset gen_linear(const SyntheticSpec& spec);

// X = (0.2·Y_1³, sin(Y_2·Y_2), log Y_3², ..., log Y_k*², ξ). Rows with an
// exact zero in a log coordinate are redrawn.
PairedDataset gen_nonlinear(const SyntheticSpec& spec);

PairedDataset generate(const SyntheticSpec& spec);

struct SplitResult {
  PairedDataset train;
  PairedDataset test;
  PairedDataset norm;
};

// Disjoint subsets of the given sizes chosen by a seeded permutation.
SplitResult split(const PairedDataset& ds, const std::array<std::size_t, 3>& sizes, std::uint64_t seed);

enum class HeaderMode { Auto, Present, Absent };

// Strict numeric CSV reader. Auto treats the first line as a header when any
// of its cells is not a number.
Matrix read_csv_matrix(const std::string& path, HeaderMode header = HeaderMode::Auto);

// Writes a header line (x1,x2,... using `prefix`) and shortest round-trip decimals.
void write_csv_matrix(const std::string& path, const Matrix& m, const std::string& prefix);

std::vector<std::string> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<std::string>& labels);

PairedDataset load_csv(const std::string& path_x, const std::string& path_y,
                       const std::optional<std::string>& path_labels = std::nullopt,
                       HeaderMode header = HeaderMode::Auto);

// Writes X.csv, Y.csv and (when present) labels.txt into `dir`.
void save_csv(const std::string& dir, const PairedDataset& ds);

// Adds iid N(0, sigma²) noise to every entry of `m`.
void add_jitter(Matrix& m, double sigma, std::uint64_t seed);

// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace cliplab
