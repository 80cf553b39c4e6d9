#include "diffem/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffem/tensor.hpp"

namespace diffem {

void project_simplex_inplace(std::span<double> v) {
    const size_t n = v.size();
    if (n == 0) throw Error("project_simplex: empty vector");
    for (double x : v) {
        if (!std::isfinite(x)) throw Error("project_simplex: non-finite entry");
    }
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumulative = 0.0;
    double theta = u[0] - 1.0;  // overwritten; rho >= 1 always holds
    for (size_t j = 0; j < n; ++j) {
        cumulative += u[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) theta = candidate;
    }
    for (double& x : v) x = std::max(x - theta, 0.0);
}

std::vector<double> project_simplex(std::vector<double> v) {
    project_simplex_inplace(v);
    return v;
}

}  // namespace diffem
