#include "wskit/canonize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "wskit/wscore.hpp"

namespace wskit {

BiasRanks bias_ranks(const WeightElement& v) {
    if (v.channels != 1) fail("UnsupportedChannels", "bias_ranks requires c = 1");
    validate(v);
    const int L = v.num_layers();
    BiasRanks out;
    out.ranks.resize(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l) {
        const int d = v.rows(l);
        out.ranks[l].assign(static_cast<size_t>(d), 0);
        if (l == L - 1) {
            for (int i = 0; i < d; ++i) out.ranks[l][static_cast<size_t>(i)] = i;
            continue;
        }
        for (int i = 0; i < d; ++i) {
            int r = 0;
            for (int j = 0; j < d; ++j) {
                if (j != i && v.bias(l, j) == v.bias(l, i))
                    fail("TiedBiases", "layer " + std::to_string(l + 1) + ": biases " +
                                           std::to_string(std::min(i, j)) + " and " +
                                           std::to_string(std::max(i, j)) + " are equal");
                if (v.bias(l, j) < v.bias(l, i)) ++r;
            }
            out.ranks[l][static_cast<size_t>(i)] = r;
        }
    }
    return out;
}

WeightElement neuron_id_map(const WeightElement& v) {
    const BiasRanks br = bias_ranks(v);  // also validates and checks ties
    const int L = v.num_layers();
    WeightElement out = WeightElement::zeros(v.arch, 5);
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            const double tgt_id = l == L - 1 ? i : br.ranks[l][static_cast<size_t>(i)];
            for (int j = 0; j < v.cols(l); ++j) {
                const double src_id =
                    l == 0 ? j : br.ranks[static_cast<size_t>(l) - 1][static_cast<size_t>(j)];
                out.w(l, i, j, 0) = v.w(l, i, j);
                out.w(l, i, j, 1) = l + 1;
                out.w(l, i, j, 2) = 0;
                out.w(l, i, j, 3) = src_id;
                out.w(l, i, j, 4) = tgt_id;
            }
            out.bias(l, i, 0) = v.bias(l, i);
            out.bias(l, i, 1) = l + 1;
            out.bias(l, i, 2) = 1;
            out.bias(l, i, 3) = 0;
            out.bias(l, i, 4) = l == L - 1 ? i : br.ranks[l][static_cast<size_t>(i)];
        }
    }
    return out;
}

CanonResult canon(const WeightElement& v) {
    const WeightElement pe = neuron_id_map(v);
    const long long m = flat_length(v.arch);
    const FlatVector flat = flatten(pe);

    std::vector<std::array<double, 5>> rows(static_cast<size_t>(m));
    for (long long r = 0; r < m; ++r)
        for (int k = 0; k < 5; ++k)
            rows[static_cast<size_t>(r)][static_cast<size_t>(k)] =
                flat.values[static_cast<size_t>(r) * 5 + static_cast<size_t>(k)];
    // Keys are integer-valued by construction, so ties are impossible off the
    // exclusion set; TiedBiases has already been raised by neuron_id_map.
    std::stable_sort(rows.begin(), rows.end(),
                     [](const std::array<double, 5>& a, const std::array<double, 5>& b) {
                         for (int k = 1; k < 5; ++k) {
                             if (a[static_cast<size_t>(k)] != b[static_cast<size_t>(k)])
                                 return a[static_cast<size_t>(k)] < b[static_cast<size_t>(k)];
                         }
                         return false;
                     });

    FlatVector sorted;
    sorted.values.resize(static_cast<size_t>(m) * 5);
    for (long long r = 0; r < m; ++r)
        for (int k = 0; k < 5; ++k)
            sorted.values[static_cast<size_t>(r) * 5 + static_cast<size_t>(k)] =
                rows[static_cast<size_t>(r)][static_cast<size_t>(k)];

    CanonResult out;
    out.canon5 = unflatten(sorted, v.arch, 5);

    out.representative = WeightElement::zeros(v.arch, 1);
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j)
                out.representative.w(l, i, j) = out.canon5.w(l, i, j, 0);
            out.representative.bias(l, i) = out.canon5.bias(l, i, 0);
        }
    }

    // g_v per hidden layer is the argsort of the bias vector; sorting and the
    // tag construction make act(g_v, v) coincide with the representative.
    out.g_v = GroupElement::identity(v.arch);
    for (int h = 0; h + 1 < v.num_layers(); ++h) {
        std::vector<int>& p = out.g_v.perms[static_cast<size_t>(h)];
        std::iota(p.begin(), p.end(), 0);
        std::sort(p.begin(), p.end(), [&](int a, int b) { return v.bias(h, a) < v.bias(h, b); });
    }
    return out;
}

WeightElement canon_features(const WeightElement& v) {
    const CanonResult cr = canon(v);
    const FlatVector broadcast = flatten(cr.canon5);
    const int c = 1 + static_cast<int>(broadcast.values.size());
    WeightElement out = WeightElement::zeros(v.arch, c);
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) {
                out.w(l, i, j, 0) = v.w(l, i, j);
                for (size_t k = 0; k < broadcast.values.size(); ++k)
                    out.w(l, i, j, static_cast<int>(k) + 1) = broadcast.values[k];
            }
            out.bias(l, i, 0) = v.bias(l, i);
            for (size_t k = 0; k < broadcast.values.size(); ++k)
                out.bias(l, i, static_cast<int>(k) + 1) = broadcast.values[k];
        }
    }
    return out;
}

}  // namespace wskit
