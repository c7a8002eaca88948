#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moat/domain.hpp"

namespace moat {

// Dense row-major matrix of variable values, one row per sample.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}
  DataMatrix(std::size_t cols, std::vector<int> cells);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const int> row(std::size_t i) const { return {cells_.data() + i * cols_, cols_}; }
  std::span<int> row(std::size_t i) { return {cells_.data() + i * cols_, cols_}; }
  int operator()(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }

  void append(std::span<const int> row);

  bool operator==(const DataMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> cells_;
};

// Throws DataError naming the first row that lies outside the domain.
void check_in_domain(const DataMatrix& data, const VarDomain& domain);

enum class Split { kTrain, kValid, kTest };
std::string_view split_name(Split split);

struct Dataset {
  DataMatrix data;
  Split split = Split::kTrain;
  std::string path;
};

// Lines of comma-separated nonnegative integers; blank lines are skipped.
// Throws DataError naming the line on malformed or ragged rows.
DataMatrix parse_dataset(std::string_view text, std::string_view source = "<memory>");
Dataset load_dataset(const std::string& path, Split split);

// Cardinality per column: one more than the largest value seen, at least 2.
VarDomain infer_domain(std::span<const DataMatrix* const> splits);

// <dir>/<name>/<name>.{ts,valid,test}.data, or the same files directly in
// <dir>. Empty when no complete triple exists.
struct DatasetFiles {
  std::string train;
  std::string valid;
  std::string test;
};
std::optional<DatasetFiles> locate_dataset(const std::string& data_dir, const std::string& name);

}  // namespace moat
