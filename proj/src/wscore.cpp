#include "wskit/wscore.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace wskit {

using json = nlohmann::ordered_json;

void validate(const Architecture& arch, const WeightElement& v) {
    arch.validate();
    if (v.channels < 1) fail("BadChannels", "channels must be >= 1");
    if (!(v.arch == arch)) fail("ShapeMismatch", "element architecture differs from declared one");
    const int L = arch.num_layers();
    if (static_cast<int>(v.W.size()) != L || static_cast<int>(v.b.size()) != L)
        fail("ShapeMismatch", "expected " + std::to_string(L) + " weight and bias tensors");
    for (int l = 0; l < L; ++l) {
        const size_t wn = static_cast<size_t>(v.rows(l)) * v.cols(l) * v.channels;
        const size_t bn = static_cast<size_t>(v.rows(l)) * v.channels;
        if (v.W[l].size() != wn)
            fail("ShapeMismatch", "layer " + std::to_string(l + 1) + ": W has " +
                                      std::to_string(v.W[l].size()) + " entries, expected " +
                                      std::to_string(wn));
        if (v.b[l].size() != bn)
            fail("ShapeMismatch", "layer " + std::to_string(l + 1) + ": b has " +
                                      std::to_string(v.b[l].size()) + " entries, expected " +
                                      std::to_string(bn));
        for (double x : v.W[l])
            if (!std::isfinite(x))
                fail("NonFiniteEntry", "W_" + std::to_string(l + 1) + " contains a non-finite value");
        for (double x : v.b[l])
            if (!std::isfinite(x))
                fail("NonFiniteEntry", "b_" + std::to_string(l + 1) + " contains a non-finite value");
    }
}

WeightElement act(const GroupElement& g, const WeightElement& v) {
    g.validate(v.arch);
    const int L = v.num_layers();
    WeightElement out = WeightElement::zeros(v.arch, v.channels);
    const int c = v.channels;
    auto row_perm = [&](int l, int i) {  // permutation on target index of layer l
        return l < L - 1 ? g.perms[l][static_cast<size_t>(i)] : i;
    };
    auto col_perm = [&](int l, int j) {  // permutation on source index of layer l
        return l > 0 ? g.perms[static_cast<size_t>(l) - 1][static_cast<size_t>(j)] : j;
    };
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            const int si = row_perm(l, i);
            for (int j = 0; j < v.cols(l); ++j) {
                const int sj = col_perm(l, j);
                for (int k = 0; k < c; ++k) out.w(l, i, j, k) = v.w(l, si, sj, k);
            }
            for (int k = 0; k < c; ++k) out.bias(l, i, k) = v.bias(l, si, k);
        }
    }
    return out;
}

GroupElement compose(const GroupElement& g1, const GroupElement& g2) {
    if (g1.perms.size() != g2.perms.size())
        fail("ArchMismatch", "group elements live on different architectures");
    GroupElement out;
    out.perms.resize(g1.perms.size());
    for (size_t h = 0; h < g1.perms.size(); ++h) {
        if (g1.perms[h].size() != g2.perms[h].size())
            fail("ArchMismatch", "hidden layer widths differ");
        out.perms[h].resize(g1.perms[h].size());
        // act(g1, act(g2, v))[i] = v[g2[g1[i]]]
        for (size_t i = 0; i < g1.perms[h].size(); ++i)
            out.perms[h][i] = g2.perms[h][static_cast<size_t>(g1.perms[h][i])];
    }
    return out;
}

GroupElement inverse(const GroupElement& g) {
    GroupElement out;
    out.perms.resize(g.perms.size());
    for (size_t h = 0; h < g.perms.size(); ++h) {
        out.perms[h].assign(g.perms[h].size(), 0);
        for (size_t i = 0; i < g.perms[h].size(); ++i)
            out.perms[h][static_cast<size_t>(g.perms[h][i])] = static_cast<int>(i);
    }
    return out;
}

bool is_general_position(const WeightElement& v, double tol) {
    if (v.channels != 1) fail("UnsupportedChannels", "general position is defined for c = 1");
    if (tol < 0) fail("BadTolerance", "tol must be >= 0");
    const int L = v.num_layers();
    for (int l = 0; l < L - 1; ++l) {  // hidden layers only
        for (int i = 0; i < v.rows(l); ++i)
            for (int j = i + 1; j < v.rows(l); ++j)
                if (!(std::fabs(v.bias(l, i) - v.bias(l, j)) > tol)) return false;
    }
    return true;
}

std::vector<double> realize(const WeightElement& v, const std::vector<double>& x) {
    if (v.channels != 1) fail("UnsupportedChannels", "realize requires c = 1");
    if (static_cast<int>(x.size()) != v.arch.dims[0])
        fail("DimensionMismatch", "input has length " + std::to_string(x.size()) + ", expected " +
                                      std::to_string(v.arch.dims[0]));
    for (double xi : x)
        if (!std::isfinite(xi)) fail("NonFiniteEntry", "input vector contains a non-finite value");
    const int L = v.num_layers();
    std::vector<double> h = x;
    for (int l = 0; l < L; ++l) {
        std::vector<double> z(static_cast<size_t>(v.rows(l)), 0.0);
        for (int i = 0; i < v.rows(l); ++i) {
            double acc = 0.0;
            for (int j = 0; j < v.cols(l); ++j) acc += v.w(l, i, j) * h[static_cast<size_t>(j)];
            acc += v.bias(l, i);
            z[static_cast<size_t>(i)] = l < L - 1 ? apply_activation(v.arch.activation, acc) : acc;
        }
        h = std::move(z);
    }
    return h;
}

long long flat_length(const Architecture& arch) {
    arch.validate();
    long long m = 0;
    for (int l = 0; l < arch.num_layers(); ++l)
        m += static_cast<long long>(arch.dims[static_cast<size_t>(l) + 1]) *
             (1 + arch.dims[static_cast<size_t>(l)]);
    return m;
}

FlatVector flatten(const WeightElement& v) {
    FlatVector f;
    f.values.reserve(static_cast<size_t>(flat_length(v.arch)) * v.channels);
    const int c = v.channels;
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int j = 0; j < v.cols(l); ++j)        // source-major weight block
            for (int i = 0; i < v.rows(l); ++i)
                for (int k = 0; k < c; ++k) f.values.push_back(v.w(l, i, j, k));
        for (int i = 0; i < v.rows(l); ++i)
            for (int k = 0; k < c; ++k) f.values.push_back(v.bias(l, i, k));
    }
    return f;
}

WeightElement unflatten(const FlatVector& f, const Architecture& arch, int channels) {
    const size_t expect = static_cast<size_t>(flat_length(arch)) * channels;
    if (f.values.size() != expect)
        fail("LengthMismatch", "flat vector has " + std::to_string(f.values.size()) +
                                   " entries, expected " + std::to_string(expect));
    WeightElement v = WeightElement::zeros(arch, channels);
    size_t pos = 0;
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int j = 0; j < v.cols(l); ++j)
            for (int i = 0; i < v.rows(l); ++i)
                for (int k = 0; k < channels; ++k) v.w(l, i, j, k) = f.values[pos++];
        for (int i = 0; i < v.rows(l); ++i)
            for (int k = 0; k < channels; ++k) v.bias(l, i, k) = f.values[pos++];
    }
    return v;
}

namespace {

class Sampler {
public:
    Sampler(std::uint64_t seed, const RandomDist& dist) : rng_(seed), dist_(dist) {}

    double operator()() {
        if (dist_.kind == RandomDist::Kind::uniform) {
            const double u = unit();
            return dist_.a + (dist_.b - dist_.a) * u;
        }
        if (!have_spare_) {
            constexpr double two_pi = 6.283185307179586;
            const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
            const double u2 = unit();
            const double r = std::sqrt(-2.0 * std::log(u1));
            spare_ = r * std::sin(two_pi * u2);
            have_spare_ = true;
            return dist_.mu + dist_.sigma * (r * std::cos(two_pi * u2));
        }
        have_spare_ = false;
        return dist_.mu + dist_.sigma * spare_;
    }

private:
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }  // [0,1)

    std::mt19937_64 rng_;
    RandomDist dist_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

WeightElement draw(const Architecture& arch, int channels, std::uint64_t seed,
                   const RandomDist& dist) {
    Sampler sample(seed, dist);
    WeightElement v = WeightElement::zeros(arch, channels);
    for (int l = 0; l < v.num_layers(); ++l) {
        for (auto& x : v.W[l]) x = sample();
        for (auto& x : v.b[l]) x = sample();
    }
    return v;
}

}  // namespace

WeightElement random_weights(const Architecture& arch, int channels, std::uint64_t seed,
                             const RandomDist& dist) {
    arch.validate();
    std::uint64_t s = seed;
    for (int attempt = 0; attempt < 64; ++attempt) {
        WeightElement v = draw(arch, channels, s, dist);
        if (channels != 1 || is_general_position(v, 0.0)) return v;
        s += 0x9e3779b97f4a7c15ull;  // deterministic retry off the exclusion set
    }
    fail("DegenerateDraw", "could not leave the exclusion set (degenerate distribution?)");
}

GroupElement random_group_element(const Architecture& arch, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ull);
    GroupElement g = GroupElement::identity(arch);
    for (auto& p : g.perms) {
        for (size_t i = p.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(rng() % i);
            std::swap(p[i - 1], p[j]);
        }
    }
    return g;
}

namespace {

void put_scalar_or_channels(json& arr, const WeightElement& v, const double* base, int c) {
    if (c == 1) {
        arr.push_back(*base);
    } else {
        json ch = json::array();
        for (int k = 0; k < c; ++k) ch.push_back(base[k]);
        arr.push_back(std::move(ch));
    }
    (void)v;
}

double read_channel(const json& cell, int k, int c) {
    if (c == 1) {
        if (!cell.is_number()) fail("ShapeMismatch", "expected a scalar weight entry");
        return cell.get<double>();
    }
    if (!cell.is_array() || static_cast<int>(cell.size()) != c)
        fail("ShapeMismatch", "expected an array of length channels");
    return cell[static_cast<size_t>(k)].get<double>();
}

}  // namespace

std::string weights_to_json(const WeightElement& v, int indent) {
    json out;
    out["dims"] = v.arch.dims;
    out["activation"] = to_string(v.arch.activation);
    out["channels"] = v.channels;
    json layers = json::array();
    for (int l = 0; l < v.num_layers(); ++l) {
        json layer;
        json wrows = json::array();
        for (int i = 0; i < v.rows(l); ++i) {
            json row = json::array();
            for (int j = 0; j < v.cols(l); ++j)
                put_scalar_or_channels(row, v, &v.W[l][v.widx(l, i, j, 0)], v.channels);
            wrows.push_back(std::move(row));
        }
        json brow = json::array();
        for (int i = 0; i < v.rows(l); ++i)
            put_scalar_or_channels(brow, v, &v.b[l][v.bidx(l, i, 0)], v.channels);
        layer["W"] = std::move(wrows);
        layer["b"] = std::move(brow);
        layers.push_back(std::move(layer));
    }
    out["layers"] = std::move(layers);
    return indent >= 0 ? out.dump(indent) : out.dump();
}

WeightElement weights_from_json(const std::string& text) {
    json in;
    try {
        in = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("JsonParse", e.what());
    }
    Architecture arch;
    if (!in.contains("dims") || !in["dims"].is_array())
        fail("ShapeMismatch", "missing 'dims' array");
    arch.dims = in["dims"].get<std::vector<int>>();
    arch.activation = activation_from_string(in.value("activation", std::string("relu")));
    arch.validate();
    const int c = in.value("channels", 1);
    if (c < 1) fail("BadChannels", "channels must be >= 1");
    WeightElement v = WeightElement::zeros(arch, c);
    if (!in.contains("layers") || !in["layers"].is_array() ||
        static_cast<int>(in["layers"].size()) != arch.num_layers())
        fail("ShapeMismatch", "expected " + std::to_string(arch.num_layers()) + " layers");
    for (int l = 0; l < arch.num_layers(); ++l) {
        const json& layer = in["layers"][static_cast<size_t>(l)];
        const json& wm = layer.at("W");
        const json& bv = layer.at("b");
        if (static_cast<int>(wm.size()) != v.rows(l))
            fail("ShapeMismatch", "layer " + std::to_string(l + 1) + ": W has " +
                                      std::to_string(wm.size()) + " rows, expected " +
                                      std::to_string(v.rows(l)));
        for (int i = 0; i < v.rows(l); ++i) {
            const json& row = wm[static_cast<size_t>(i)];
            if (static_cast<int>(row.size()) != v.cols(l))
                fail("ShapeMismatch", "layer " + std::to_string(l + 1) + ": W row has " +
                                          std::to_string(row.size()) + " columns, expected " +
                                          std::to_string(v.cols(l)));
            for (int j = 0; j < v.cols(l); ++j)
                for (int k = 0; k < c; ++k)
                    v.w(l, i, j, k) = read_channel(row[static_cast<size_t>(j)], k, c);
        }
        if (static_cast<int>(bv.size()) != v.rows(l))
            fail("ShapeMismatch", "layer " + std::to_string(l + 1) + ": b has " +
                                      std::to_string(bv.size()) + " entries, expected " +
                                      std::to_string(v.rows(l)));
        for (int i = 0; i < v.rows(l); ++i)
            for (int k = 0; k < c; ++k)
                v.bias(l, i, k) = read_channel(bv[static_cast<size_t>(i)], k, c);
    }
    validate(arch, v);
    return v;
}

}  // namespace wskit
