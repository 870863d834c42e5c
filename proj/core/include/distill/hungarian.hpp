#pragma once

#include <Eigen/Core>

#include <vector>

namespace distill {

struct Assignment {
  std::vector<int> row_to_col;  // one column per row
  double cost = 0.0;            // sum of matched entries, accumulated in row order
};

// Minimum-cost injective assignment of rows to columns (rows <= cols). Among
// optimal assignments the lexicographically smallest row_to_col is returned.
Assignment hungarian_match(const Eigen::MatrixXd& cost);

}  // namespace distill
