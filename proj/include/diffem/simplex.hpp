#pragma once

#include <span>
#include <vector>

namespace diffem {

/// Euclidean projection onto the probability simplex
/// { x : x_i >= 0, sum x_i = 1 } via the sort-and-threshold algorithm.
std::vector<double> project_simplex(std::vector<double> v);
void project_simplex_inplace(std::span<double> v);

}  // namespace diffem
