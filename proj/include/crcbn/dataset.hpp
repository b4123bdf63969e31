#pragma once

#include <span>
#include <string>
#include <vector>

#include "crcbn/model.hpp"

namespace crcbn {

/// Rows of coded categorical observations, row-major, kUnset marking a
/// missing cell. Every row carries a year tag.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(NetworkSchema schema, std::string id = {}) : schema_(std::move(schema)), id_(std::move(id)) {}

  const NetworkSchema& schema() const noexcept { return schema_; }
  const std::string& id() const noexcept { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  std::size_t rows() const noexcept { return years_.size(); }
  std::size_t cols() const noexcept { return schema_.size(); }
  bool empty() const noexcept { return years_.empty(); }

  void reserve(std::size_t n) {
    cells_.reserve(n * cols());
    years_.reserve(n);
  }

  void add_row(std::span<const State> row, int year = 0) {
    require(row.size() == cols(), "row width does not match schema");
    for (VarId v = 0; v < row.size(); ++v)
      require(row[v] == kUnset || (row[v] >= 0 && static_cast<std::size_t>(row[v]) < schema_.cardinality(v)),
              "state index out of range for '" + schema_[v].name + "'");
    cells_.insert(cells_.end(), row.begin(), row.end());
    years_.push_back(year);
  }

  std::span<const State> row(std::size_t i) const { return {cells_.data() + i * cols(), cols()}; }
  State at(std::size_t i, VarId v) const { return cells_[i * cols() + v]; }
  int year(std::size_t i) const { return years_[i]; }
  const std::vector<int>& years() const noexcept { return years_; }

  bool row_complete(std::size_t i) const {
    for (State s : row(i))
      if (s == kUnset) return false;
    return true;
  }

  /// True when no row is missing a value in any of `vars`.
  bool complete_on(std::span<const VarId> vars) const {
    for (std::size_t i = 0; i < rows(); ++i)
      for (VarId v : vars)
        if (at(i, v) == kUnset) return false;
    return true;
  }

  bool complete() const {
    for (State s : cells_)
      if (s == kUnset) return false;
    return true;
  }

  std::size_t missing_cells() const {
    std::size_t n = 0;
    for (State s : cells_) n += (s == kUnset);
    return n;
  }

  /// Rows for which `keep(i)` holds, same schema and id.
  template <class Pred>
  Dataset filter(Pred keep) const {
    Dataset out(schema_, id_);
    for (std::size_t i = 0; i < rows(); ++i)
      if (keep(i)) out.add_row_unchecked(row(i), year(i));
    return out;
  }

  void append(const Dataset& other) {
    require(other.schema() == schema_, "cannot append datasets with different schemas");
    cells_.insert(cells_.end(), other.cells_.begin(), other.cells_.end());
    years_.insert(years_.end(), other.years_.begin(), other.years_.end());
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.schema_ == b.schema_ && a.cells_ == b.cells_ && a.years_ == b.years_;
  }

 private:
  void add_row_unchecked(std::span<const State> row, int year) {
    cells_.insert(cells_.end(), row.begin(), row.end());
    years_.push_back(year);
  }

  NetworkSchema schema_;
  std::string id_;
  std::vector<State> cells_;
  std::vector<int> years_;
};

inline Dataset concatenate(const std::vector<Dataset>& parts, std::string id = "concat") {
  require(!parts.empty(), "nothing to concatenate");
  Dataset out(parts.front().schema(), std::move(id));
  for (const auto& p : parts) out.append(p);
  return out;
}

}  // namespace crcbn
