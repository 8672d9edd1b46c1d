#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wskit/types.hpp"
#include "wskit/wscore.hpp"

namespace wskit::testing {

// Every element of S_{d_1} x ... x S_{d_{L-1}}, lexicographic order.
inline std::vector<GroupElement> all_group_elements(const Architecture& arch) {
    const int L = arch.num_layers();
    std::vector<std::vector<std::vector<int>>> layer_perms(static_cast<size_t>(L - 1));
    for (int h = 0; h < L - 1; ++h) {
        std::vector<int> p(static_cast<size_t>(arch.dims[static_cast<size_t>(h) + 1]));
        std::iota(p.begin(), p.end(), 0);
        do {
            layer_perms[static_cast<size_t>(h)].push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
    }
    std::vector<GroupElement> out;
    std::vector<size_t> idx(static_cast<size_t>(L - 1), 0);
    while (true) {
        GroupElement g;
        g.perms.resize(static_cast<size_t>(L - 1));
        for (int h = 0; h < L - 1; ++h)
            g.perms[static_cast<size_t>(h)] = layer_perms[static_cast<size_t>(h)][idx[static_cast<size_t>(h)]];
        out.push_back(g);
        int h = L - 2;
        for (; h >= 0; --h) {
            if (++idx[static_cast<size_t>(h)] < layer_perms[static_cast<size_t>(h)].size()) break;
            idx[static_cast<size_t>(h)] = 0;
        }
        if (h < 0) break;
    }
    return out;
}

inline bool bit_equal(const WeightElement& a, const WeightElement& b) {
    if (!(a.arch == b.arch) || a.channels != b.channels) return false;
    return a.W == b.W && a.b == b.b;
}

inline double max_abs_diff(const WeightElement& a, const WeightElement& b) {
    double m = 0.0;
    for (size_t l = 0; l < a.W.size(); ++l) {
        for (size_t i = 0; i < a.W[l].size(); ++i)
            m = std::max(m, std::fabs(a.W[l][i] - b.W[l][i]));
        for (size_t i = 0; i < a.b[l].size(); ++i)
            m = std::max(m, std::fabs(a.b[l][i] - b.b[l][i]));
    }
    return m;
}

inline double max_rel_diff(const WeightElement& a, const WeightElement& b) {
    double m = 0.0;
    for (size_t l = 0; l < a.W.size(); ++l) {
        for (size_t i = 0; i < a.W[l].size(); ++i)
            m = std::max(m, std::fabs(a.W[l][i] - b.W[l][i]) / (1.0 + std::fabs(b.W[l][i])));
        for (size_t i = 0; i < a.b[l].size(); ++i)
            m = std::max(m, std::fabs(a.b[l][i] - b.b[l][i]) / (1.0 + std::fabs(b.b[l][i])));
    }
    return m;
}

inline Architecture relu_arch(std::vector<int> dims) {
    Architecture a;
    a.dims = std::move(dims);
    a.activation = Activation::relu;
    return a;
}

}  // namespace wskit::testing
