#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace seeopt {

/// Flat (path, slot) table of fixed-shape blocks. A block is a rows x cols
/// matrix (cols == 1 for plain vectors), stored column-major so the maps
/// below alias the storage directly.
class PathArray {
 public:
  PathArray() = default;
  PathArray(int n_paths, int n_slots, int rows, int cols = 1)
      : n_paths_(n_paths), n_slots_(n_slots), rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(n_paths) * n_slots * rows * cols, 0.0) {
    if (n_paths < 1 || n_slots < 1 || rows < 1 || cols < 1) {
      throw std::invalid_argument("PathArray: all dimensions must be >= 1");
    }
  }

  int n_paths() const { return n_paths_; }
  int n_slots() const { return n_slots_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int block_size() const { return rows_ * cols_; }

  Eigen::Map<Eigen::VectorXd> vec(int p, int i) {
    return {ptr(p, i), block_size()};
  }
  Eigen::Map<const Eigen::VectorXd> vec(int p, int i) const {
    return {ptr(p, i), block_size()};
  }
  Eigen::Map<Eigen::MatrixXd> mat(int p, int i) {
    return {ptr(p, i), rows_, cols_};
  }
  Eigen::Map<const Eigen::MatrixXd> mat(int p, int i) const {
    return {ptr(p, i), rows_, cols_};
  }

  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  double* ptr(int p, int i) {
    return data_.data() + (static_cast<std::size_t>(p) * n_slots_ + i) * block_size();
  }
  const double* ptr(int p, int i) const {
    return data_.data() + (static_cast<std::size_t>(p) * n_slots_ + i) * block_size();
  }

  int n_paths_ = 0;
  int n_slots_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace seeopt
