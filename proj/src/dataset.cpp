#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "moat/data.hpp"
#include "moat/errors.hpp"

namespace moat {

DataMatrix::DataMatrix(std::size_t cols, std::vector<int> cells) : cols_(cols), cells_(std::move(cells)) {
  if (cols == 0) {
    if (!cells_.empty()) throw ShapeError("cells given for a zero-width matrix");
    return;
  }
  if (cells_.size() % cols != 0) throw ShapeError("cell count is not a multiple of the column count");
  rows_ = cells_.size() / cols;
}

void DataMatrix::append(std::span<const int> row) {
  if (rows_ == 0 && cols_ == 0) cols_ = row.size();
  if (row.size() != cols_) throw ShapeError("row width does not match matrix");
  cells_.insert(cells_.end(), row.begin(), row.end());
  ++rows_;
}

void check_in_domain(const DataMatrix& data, const VarDomain& domain) {
  if (data.cols() != static_cast<std::size_t>(domain.size())) {
    throw DataError("data has " + std::to_string(data.cols()) + " columns, domain has " +
                    std::to_string(domain.size()) + " variables");
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      const int x = data(i, j);
      if (x < 0 || x >= domain.card(static_cast<int>(j))) {
        throw DataError("row " + std::to_string(i) + ", column " + std::to_string(j) + ": value " +
                        std::to_string(x) + " outside cardinality " + std::to_string(domain.card(static_cast<int>(j))));
      }
    }
  }
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

DataMatrix parse_dataset(std::string_view text, std::string_view source) {
  DataMatrix out;
  std::vector<int> row;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto fail = [&](const std::string& why) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + why);
    };
    row.clear();
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      std::string_view field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      int value = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        fail("cannot parse field '" + std::string(field) + "' as an integer");
      }
      if (value < 0) fail("negative value " + std::to_string(value));
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!out.empty() && row.size() != out.cols()) {
      fail("ragged row: " + std::to_string(row.size()) + " fields, expected " + std::to_string(out.cols()));
    }
    out.append(row);
  }
  return out;
}

Dataset load_dataset(const std::string& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Dataset ds{parse_dataset(buf.str(), path), split, path};
  if (ds.data.empty()) throw DataError(path + ": no rows");
  return ds;
}

VarDomain infer_domain(std::span<const DataMatrix* const> splits) {
  std::vector<int> cards;
  for (const DataMatrix* m : splits) {
    if (m->empty()) continue;
    if (cards.empty()) cards.assign(m->cols(), 2);
    if (m->cols() != cards.size()) throw DataError("splits disagree on the number of columns");
    for (std::size_t i = 0; i < m->rows(); ++i)
      for (std::size_t j = 0; j < m->cols(); ++j) cards[j] = std::max(cards[j], (*m)(i, j) + 1);
  }
  if (cards.empty()) throw DataError("cannot infer a domain from empty data");
  return VarDomain(std::move(cards));
}

std::optional<DatasetFiles> locate_dataset(const std::string& data_dir, const std::string& name) {
  namespace fs = std::filesystem;
  for (const fs::path& base : {fs::path(data_dir) / name, fs::path(data_dir)}) {
    DatasetFiles f{(base / (name + ".ts.data")).string(), (base / (name + ".valid.data")).string(),
                   (base / (name + ".test.data")).string()};
    if (fs::is_regular_file(f.train) && fs::is_regular_file(f.valid) && fs::is_regular_file(f.test)) return f;
  }
  return std::nullopt;
}

}  // namespace moat
