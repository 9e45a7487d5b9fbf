#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace avfuse {

using Assignment = std::vector<std::pair<std::size_t, std::size_t>>;

/// Optimal one-to-one partial assignment over the finite cells of `cost`.
///
/// The result first maximizes the number of assigned finite cells and, among
/// those, minimizes the summed cost (Kuhn-Munkres with lexicographic costs).
/// Non-finite cells are never assigned. Rows are inserted in index order, so
/// ties resolve toward lower row indices. Pairs are sorted by row.
Assignment assign(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, const Assignment& a);

}  // namespace avfuse
