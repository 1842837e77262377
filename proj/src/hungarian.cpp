#include "fmc/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fmc {

Assignment hungarian(const Eigen::MatrixXd& cost) {
  Assignment out;
  out.row_to_col.assign(cost.rows(), -1);
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: costs must be finite");

  // The potential method needs rows <= cols; solve the transpose otherwise.
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based arrays; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    const int row = match[j] - 1;
    const int col = j - 1;
    if (transposed) {
      out.row_to_col[col] = row;
    } else {
      out.row_to_col[row] = col;
    }
  }
  for (int r = 0; r < static_cast<int>(cost.rows()); ++r) {
    if (out.row_to_col[r] >= 0) out.cost += cost(r, out.row_to_col[r]);
  }
  return out;
}

}  // namespace fmc
