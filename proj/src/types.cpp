#include "wskit/types.hpp"

#include <algorithm>
#include <cmath>

namespace wskit {

void fail(const std::string& code, const std::string& what) {
    throw Error(code, code + ": " + what);
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    fail("BadActivation", "unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "?";
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        case Activation::identity: return x;
    }
    return x;
}

void Architecture::validate() const {
    if (dims.size() < 2) fail("BadArchitecture", "need at least one layer (d_0 and d_1)");
    for (int d : dims)
        if (d < 1) fail("BadArchitecture", "every layer width must be >= 1");
}

WeightElement WeightElement::zeros(const Architecture& arch, int channels) {
    arch.validate();
    if (channels < 1) fail("BadChannels", "channels must be >= 1");
    WeightElement v;
    v.arch = arch;
    v.channels = channels;
    const int L = arch.num_layers();
    v.W.resize(L);
    v.b.resize(L);
    for (int l = 0; l < L; ++l) {
        v.W[l].assign(static_cast<size_t>(v.rows(l)) * v.cols(l) * channels, 0.0);
        v.b[l].assign(static_cast<size_t>(v.rows(l)) * channels, 0.0);
    }
    return v;
}

GroupElement GroupElement::identity(const Architecture& arch) {
    GroupElement g;
    const int L = arch.num_layers();
    g.perms.resize(L > 0 ? static_cast<size_t>(L - 1) : 0);
    for (int h = 0; h < L - 1; ++h) {
        g.perms[h].resize(static_cast<size_t>(arch.dims[static_cast<size_t>(h) + 1]));
        for (size_t i = 0; i < g.perms[h].size(); ++i) g.perms[h][i] = static_cast<int>(i);
    }
    return g;
}

bool GroupElement::is_identity() const {
    for (const auto& p : perms)
        for (size_t i = 0; i < p.size(); ++i)
            if (p[i] != static_cast<int>(i)) return false;
    return true;
}

void GroupElement::validate(const Architecture& arch) const {
    const int L = arch.num_layers();
    if (static_cast<int>(perms.size()) != L - 1)
        fail("ArchMismatch", "expected " + std::to_string(L - 1) + " hidden-layer permutations, got " +
                                 std::to_string(perms.size()));
    for (int h = 0; h < L - 1; ++h) {
        const int d = arch.dims[static_cast<size_t>(h) + 1];
        if (static_cast<int>(perms[h].size()) != d)
            fail("ArchMismatch", "permutation for hidden layer " + std::to_string(h + 1) +
                                     " has wrong size");
        std::vector<char> seen(static_cast<size_t>(d), 0);
        for (int x : perms[h]) {
            if (x < 0 || x >= d || seen[static_cast<size_t>(x)])
                fail("BadPermutation", "not a permutation of {0.." + std::to_string(d - 1) + "}");
            seen[static_cast<size_t>(x)] = 1;
        }
    }
}

}  // namespace wskit
