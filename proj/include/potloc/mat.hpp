#pragma once

#include <cstddef>
#include <vector>

namespace potloc {

// Dense row-major matrix of doubles. Rows index time, columns index channels
// almost everywhere in this codebase.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return data.data() + static_cast<size_t>(r) * cols;
  }
  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }
  friend bool operator==(const Mat&, const Mat&) = default;
};

}  // namespace potloc
