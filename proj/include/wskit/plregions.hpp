#pragma once

#include <string>
#include <vector>

#include "wskit/types.hpp"

namespace wskit {

// Continuous piecewise-linear function on [a,b]: k breakpoints strictly inside
// (a,b) and k+1 segments given as (slope, intercept) of x -> slope*x + intercept.
// Breakpoints are essential: adjacent segments differ.
struct PL1D {
    double a = 0.0, b = 0.0;
    std::vector<double> breakpoints;
    std::vector<double> slopes;
    std::vector<double> intercepts;

    int num_regions() const { return static_cast<int>(slopes.size()); }
};

double pl_eval(const PL1D& p, double x);

// Exact PL description of a scalar 1-D-input ReLU net, by breakpoint
// propagation through the layers. Requires d_0 = 1, d_L = 1, relu, c = 1.
PL1D regions_1d(const WeightElement& v, double a, double b);

struct RegionBound {
    unsigned long long bound = 0;
    bool saturated = false;  // capped at 2^62
};

// Inductive upper bound on the number of linearity regions for 1-D inputs:
// M_0 = 1, M_l = M_{l-1}^{d_{l-1}} * 2^{d_l} over hidden layers.
RegionBound region_bound(const Architecture& arch);

bool pl_equal(const PL1D& p, const PL1D& q, double tol);

std::string pl_to_json(const PL1D& p, int indent = -1);

}  // namespace wskit
