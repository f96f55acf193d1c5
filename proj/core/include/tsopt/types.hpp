#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace tsopt {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Identifier of an algebraic equation set. 0 is the healthy/base set g(0).
using ModeId = int;
inline constexpr ModeId kBaseMode = 0;

/// Column selection into the augmented initial state x0.
using ColumnSet = std::vector<Index>;

}  // namespace tsopt
