#pragma once

#include <vector>

#include <Eigen/Core>

namespace fmc {

struct Assignment {
  /// row_to_col[r] is the column matched to row r, or -1.
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs
/// (Kuhn-Munkres with potentials, O(n^2 m)).
Assignment hungarian(const Eigen::MatrixXd& cost);

}  // namespace fmc
