#include "wskit/archzoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "wskit/wscore.hpp"

namespace wskit {

using json = nlohmann::ordered_json;

MLPSpec MLPSpec::zeros(const Architecture& arch) {
    MLPSpec m;
    m.arch = arch;
    const WeightElement z = WeightElement::zeros(arch, 1);
    m.W = z.W;
    m.b = z.b;
    return m;
}

MLPSpec MLPSpec::from_weights(const WeightElement& v) {
    if (v.channels != 1) fail("UnsupportedChannels", "MLPSpec requires c = 1 weights");
    MLPSpec m;
    m.arch = v.arch;
    m.W = v.W;
    m.b = v.b;
    return m;
}

WeightElement MLPSpec::to_weights() const {
    WeightElement v = WeightElement::zeros(arch, 1);
    v.W = W;
    v.b = b;
    return v;
}

std::vector<double> mlp_eval(const MLPSpec& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.in_dim())
        fail("DimMismatch", "mlp input has length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(m.in_dim()));
    const int L = m.arch.num_layers();
    std::vector<double> h = x;
    for (int l = 0; l < L; ++l) {
        std::vector<double> z(static_cast<size_t>(m.rows(l)), 0.0);
        for (int i = 0; i < m.rows(l); ++i) {
            double acc = 0.0;
            for (int j = 0; j < m.cols(l); ++j) acc += m.w(l, i, j) * h[static_cast<size_t>(j)];
            acc += m.b[l][static_cast<size_t>(i)];
            z[static_cast<size_t>(i)] =
                l < L - 1 ? apply_activation(m.arch.activation, acc) : acc;
        }
        h = std::move(z);
    }
    return h;
}

// ---------------------------------------------------------------------------
// DWS primitives

DWSPrimitive DWSPrimitive::pointwise_affine(std::vector<double> A, int in_c, int out_c,
                                            std::vector<double> u) {
    DWSPrimitive p;
    p.kind = Kind::pointwise_affine;
    p.A = std::move(A);
    p.in_channels = in_c;
    p.out_channels = out_c;
    p.u = std::move(u);
    if (p.u.empty()) p.u.assign(static_cast<size_t>(out_c), 0.0);
    if (p.A.size() != static_cast<size_t>(in_c) * static_cast<size_t>(out_c) ||
        p.u.size() != static_cast<size_t>(out_c))
        fail("ChannelMismatch", "pointwise_affine matrix/vector sizes are inconsistent");
    return p;
}

DWSPrimitive DWSPrimitive::identity(int channels) {
    std::vector<double> A(static_cast<size_t>(channels) * channels, 0.0);
    for (int k = 0; k < channels; ++k) A[static_cast<size_t>(k) * channels + k] = 1.0;
    return pointwise_affine(std::move(A), channels, channels);
}

DWSPrimitive DWSPrimitive::global_sum() {
    DWSPrimitive p;
    p.kind = Kind::global_sum;
    return p;
}

DWSPrimitive DWSPrimitive::bias_sum(int layer) {
    DWSPrimitive p;
    p.kind = Kind::bias_sum;
    p.layer = layer;
    return p;
}

DWSPrimitive DWSPrimitive::lower_w2b() {
    DWSPrimitive p;
    p.kind = Kind::lower_w2b;
    return p;
}

DWSPrimitive DWSPrimitive::upper_w2b() {
    DWSPrimitive p;
    p.kind = Kind::upper_w2b;
    return p;
}

DWSPrimitive DWSPrimitive::first_layer_neuron(int i) {
    DWSPrimitive p;
    p.kind = Kind::first_layer_neuron;
    p.neuron = i;
    return p;
}

DWSPrimitive DWSPrimitive::last_layer_neuron(int j) {
    DWSPrimitive p;
    p.kind = Kind::last_layer_neuron;
    p.neuron = j;
    return p;
}

DWSPrimitive DWSPrimitive::col_pool(int offset, int width) {
    DWSPrimitive p;
    p.kind = Kind::col_pool;
    p.slice_offset = offset;
    p.slice_width = width;
    return p;
}

DWSPrimitive DWSPrimitive::row_pool(int offset, int width) {
    DWSPrimitive p;
    p.kind = Kind::row_pool;
    p.slice_offset = offset;
    p.slice_width = width;
    return p;
}

DWSPrimitive DWSPrimitive::pointwise_mlp(MLPSpec m) {
    DWSPrimitive p;
    p.kind = Kind::pointwise_mlp;
    p.mlp = std::move(m);
    return p;
}

DWSPrimitive DWSPrimitive::pointwise_nonlinearity(Activation a) {
    DWSPrimitive p;
    p.kind = Kind::pointwise_nonlinearity;
    p.nonlinearity = a;
    return p;
}

DWSPrimitive DWSPrimitive::concat(std::vector<DWSPrimitive> parts) {
    DWSPrimitive p;
    p.kind = Kind::concat;
    p.parts = std::move(parts);
    return p;
}

DWSPrimitive DWSPrimitive::sum_combine(std::vector<DWSPrimitive> parts) {
    DWSPrimitive p;
    p.kind = Kind::sum_combine;
    p.parts = std::move(parts);
    return p;
}

DWSPrimitive DWSPrimitive::const_channels(WeightElement constants) {
    DWSPrimitive p;
    p.kind = Kind::const_channels;
    p.constants = std::move(constants);
    return p;
}

int dws_output_channels(const DWSPrimitive& p, int in_channels) {
    using K = DWSPrimitive::Kind;
    switch (p.kind) {
        case K::pointwise_affine: return p.out_channels;
        case K::pointwise_mlp: return p.mlp.out_dim();
        case K::col_pool:
        case K::row_pool: return p.slice_width < 0 ? in_channels : p.slice_width;
        case K::concat: {
            int c = 0;
            for (const auto& part : p.parts) c += dws_output_channels(part, in_channels);
            return c;
        }
        case K::sum_combine:
            return p.parts.empty() ? in_channels : dws_output_channels(p.parts.front(), in_channels);
        case K::const_channels: return p.constants.channels;
        default: return in_channels;
    }
}

namespace {

// A constant block is a legal affine bias only when it is fixed by the whole
// group; adjacent transpositions generate it, so checking them suffices.
void check_constant_invariant(const WeightElement& c) {
    const int L = c.num_layers();
    for (int h = 0; h < L - 1; ++h) {
        const int d = c.arch.dims[static_cast<size_t>(h) + 1];
        for (int t = 0; t + 1 < d; ++t) {
            GroupElement g = GroupElement::identity(c.arch);
            std::swap(g.perms[static_cast<size_t>(h)][static_cast<size_t>(t)],
                      g.perms[static_cast<size_t>(h)][static_cast<size_t>(t) + 1]);
            const WeightElement moved = act(g, c);
            if (moved.W != c.W || moved.b != c.b)
                fail("NonEquivariantConstant",
                     "const_channels block is not fixed by hidden-layer permutations");
        }
    }
}

std::vector<double> affine_entry(const DWSPrimitive& p, const double* x) {
    std::vector<double> y(static_cast<size_t>(p.out_channels), 0.0);
    for (int k = 0; k < p.out_channels; ++k) {
        double acc = 0.0;
        for (int m = 0; m < p.in_channels; ++m)
            acc += x[m] * p.A[static_cast<size_t>(m) * p.out_channels + static_cast<size_t>(k)];
        acc += p.u[static_cast<size_t>(k)];
        y[static_cast<size_t>(k)] = acc;
    }
    return y;
}

}  // namespace

WeightElement dws_apply(const DWSPrimitive& p, const WeightElement& v) {
    using K = DWSPrimitive::Kind;
    const int L = v.num_layers();
    const int c = v.channels;
    const int out_c = dws_output_channels(p, c);

    switch (p.kind) {
        case K::pointwise_affine: {
            if (p.in_channels != c)
                fail("ChannelMismatch", "pointwise_affine expects c = " + std::to_string(p.in_channels));
            WeightElement out = WeightElement::zeros(v.arch, out_c);
            for (int l = 0; l < L; ++l) {
                for (int i = 0; i < v.rows(l); ++i) {
                    for (int j = 0; j < v.cols(l); ++j) {
                        const auto y = affine_entry(p, &v.W[l][v.widx(l, i, j, 0)]);
                        for (int k = 0; k < out_c; ++k) out.w(l, i, j, k) = y[static_cast<size_t>(k)];
                    }
                    const auto y = affine_entry(p, &v.b[l][v.bidx(l, i, 0)]);
                    for (int k = 0; k < out_c; ++k) out.bias(l, i, k) = y[static_cast<size_t>(k)];
                }
            }
            return out;
        }
        case K::global_sum: {
            WeightElement out = WeightElement::zeros(v.arch, c);
            std::vector<double> s(static_cast<size_t>(c), 0.0);
            for (int l = 0; l < L; ++l)
                for (int j = 0; j < v.cols(l); ++j)
                    for (int i = 0; i < v.rows(l); ++i)
                        for (int k = 0; k < c; ++k) s[static_cast<size_t>(k)] += v.w(l, i, j, k);
            for (int l = 0; l < L; ++l)
                for (int i = 0; i < v.rows(l); ++i)
                    for (int k = 0; k < c; ++k) s[static_cast<size_t>(k)] += v.bias(l, i, k);
            for (int l = 0; l < L; ++l) {
                for (int i = 0; i < v.rows(l); ++i) {
                    for (int j = 0; j < v.cols(l); ++j)
                        for (int k = 0; k < c; ++k) out.w(l, i, j, k) = s[static_cast<size_t>(k)];
                    for (int k = 0; k < c; ++k) out.bias(l, i, k) = s[static_cast<size_t>(k)];
                }
            }
            return out;
        }
        case K::bias_sum: {
            if (p.layer < 1 || p.layer > L) fail("IndexOutOfRange", "bias_sum layer out of range");
            WeightElement out = WeightElement::zeros(v.arch, c);
            const int l = p.layer - 1;
            std::vector<double> s(static_cast<size_t>(c), 0.0);
            for (int i = 0; i < v.rows(l); ++i)
                for (int k = 0; k < c; ++k) s[static_cast<size_t>(k)] += v.bias(l, i, k);
            for (int i = 0; i < v.rows(l); ++i)
                for (int k = 0; k < c; ++k) out.bias(l, i, k) = s[static_cast<size_t>(k)];
            return out;
        }
        case K::lower_w2b: {
            WeightElement out = v;
            for (int l = 0; l < L; ++l)
                for (int i = 0; i < v.rows(l); ++i)
                    for (int j = 0; j < v.cols(l); ++j)
                        for (int k = 0; k < c; ++k)
                            out.w(l, i, j, k) = l == 0 ? 0.0 : v.bias(l - 1, j, k);
            return out;
        }
        case K::upper_w2b: {
            WeightElement out = v;
            for (int l = 0; l < L; ++l)
                for (int i = 0; i < v.rows(l); ++i)
                    for (int j = 0; j < v.cols(l); ++j)
                        for (int k = 0; k < c; ++k) out.w(l, i, j, k) = v.bias(l, i, k);
            return out;
        }
        case K::first_layer_neuron: {
            if (p.neuron < 0 || p.neuron >= v.arch.dims[0])
                fail("IndexOutOfRange", "first_layer_neuron index out of range");
            WeightElement out = WeightElement::zeros(v.arch, c);
            for (int i = 0; i < v.rows(0); ++i)
                for (int k = 0; k < c; ++k) out.w(0, i, p.neuron, k) = v.w(0, i, p.neuron, k);
            return out;
        }
        case K::last_layer_neuron: {
            if (p.neuron < 0 || p.neuron >= v.arch.dims[static_cast<size_t>(L)])
                fail("IndexOutOfRange", "last_layer_neuron index out of range");
            WeightElement out = WeightElement::zeros(v.arch, c);
            for (int k = 0; k < c; ++k) out.bias(L - 1, p.neuron, k) = v.bias(L - 1, p.neuron, k);
            return out;
        }
        case K::col_pool: {
            const int off = p.slice_offset;
            const int w = p.slice_width < 0 ? c : p.slice_width;
            if (off < 0 || off + w > c) fail("ChannelMismatch", "col_pool slice out of range");
            WeightElement out = WeightElement::zeros(v.arch, w);
            for (int l = 0; l < L; ++l)
                for (int i = 0; i < v.rows(l); ++i)
                    for (int j = 0; j < v.cols(l); ++j)
                        for (int k = 0; k < w; ++k) out.bias(l, i, k) += v.w(l, i, j, off + k);
            return out;
        }
        case K::row_pool: {
            const int off = p.slice_offset;
            const int w = p.slice_width < 0 ? c : p.slice_width;
            if (off < 0 || off + w > c) fail("ChannelMismatch", "row_pool slice out of range");
            WeightElement out = WeightElement::zeros(v.arch, w);
            for (int l = 0; l + 1 < L; ++l)
                for (int i = 0; i < v.rows(l); ++i)
                    for (int kk = 0; kk < v.rows(l + 1); ++kk)
                        for (int k = 0; k < w; ++k) out.bias(l, i, k) += v.w(l + 1, kk, i, off + k);
            return out;
        }
        case K::pointwise_mlp: {
            if (p.mlp.in_dim() != c)
                fail("ChannelMismatch", "pointwise_mlp expects c = " + std::to_string(p.mlp.in_dim()));
            WeightElement out = WeightElement::zeros(v.arch, out_c);
            std::vector<double> x(static_cast<size_t>(c));
            for (int l = 0; l < L; ++l) {
                for (int i = 0; i < v.rows(l); ++i) {
                    for (int j = 0; j < v.cols(l); ++j) {
                        for (int k = 0; k < c; ++k) x[static_cast<size_t>(k)] = v.w(l, i, j, k);
                        const auto y = mlp_eval(p.mlp, x);
                        for (int k = 0; k < out_c; ++k) out.w(l, i, j, k) = y[static_cast<size_t>(k)];
                    }
                    for (int k = 0; k < c; ++k) x[static_cast<size_t>(k)] = v.bias(l, i, k);
                    const auto y = mlp_eval(p.mlp, x);
                    for (int k = 0; k < out_c; ++k) out.bias(l, i, k) = y[static_cast<size_t>(k)];
                }
            }
            return out;
        }
        case K::pointwise_nonlinearity: {
            WeightElement out = v;
            for (int l = 0; l < L; ++l) {
                for (auto& x : out.W[l]) x = apply_activation(p.nonlinearity, x);
                for (auto& x : out.b[l]) x = apply_activation(p.nonlinearity, x);
            }
            return out;
        }
        case K::concat: {
            if (p.parts.empty()) fail("ChannelMismatch", "concat needs at least one part");
            WeightElement out = WeightElement::zeros(v.arch, out_c);
            int base = 0;
            for (const auto& part : p.parts) {
                const WeightElement piece = dws_apply(part, v);
                for (int l = 0; l < L; ++l) {
                    for (int i = 0; i < v.rows(l); ++i) {
                        for (int j = 0; j < v.cols(l); ++j)
                            for (int k = 0; k < piece.channels; ++k)
                                out.w(l, i, j, base + k) = piece.w(l, i, j, k);
                        for (int k = 0; k < piece.channels; ++k)
                            out.bias(l, i, base + k) = piece.bias(l, i, k);
                    }
                }
                base += piece.channels;
            }
            return out;
        }
        case K::sum_combine: {
            if (p.parts.empty()) fail("ChannelMismatch", "sum_combine needs at least one part");
            WeightElement out = dws_apply(p.parts.front(), v);
            for (size_t q = 1; q < p.parts.size(); ++q) {
                const WeightElement piece = dws_apply(p.parts[q], v);
                if (piece.channels != out.channels)
                    fail("ChannelMismatch", "sum_combine parts disagree on output channels");
                for (int l = 0; l < L; ++l) {
                    for (size_t t = 0; t < out.W[l].size(); ++t) out.W[l][t] += piece.W[l][t];
                    for (size_t t = 0; t < out.b[l].size(); ++t) out.b[l][t] += piece.b[l][t];
                }
            }
            return out;
        }
        case K::const_channels: {
            if (!(p.constants.arch == v.arch))
                fail("ArchMismatch", "const_channels block built for a different architecture");
            check_constant_invariant(p.constants);
            return p.constants;
        }
    }
    fail("BadPrimitive", "unknown primitive kind");
}

WeightElement dws_run(const DWSProgram& prog, const WeightElement& v) {
    if (v.channels != prog.input_channels)
        fail("ChannelMismatch", "program expects c = " + std::to_string(prog.input_channels));
    WeightElement cur = v;
    for (const auto& step : prog.steps) cur = dws_apply(step, cur);
    if (prog.output_channels >= 0 && cur.channels != prog.output_channels)
        fail("ChannelMismatch", "program declared c_out = " + std::to_string(prog.output_channels) +
                                    " but produced " + std::to_string(cur.channels));
    return cur;
}

// ---------------------------------------------------------------------------
// Program serialization

namespace {

json mlp_to_json_obj(const MLPSpec& m) {
    return json::parse(weights_to_json(m.to_weights()));
}

MLPSpec mlp_from_json_obj(const json& j) {
    return MLPSpec::from_weights(weights_from_json(j.dump()));
}

json prim_to_json(const DWSPrimitive& p) {
    using K = DWSPrimitive::Kind;
    json j;
    switch (p.kind) {
        case K::pointwise_affine:
            j["kind"] = "pointwise_affine";
            j["in_channels"] = p.in_channels;
            j["out_channels"] = p.out_channels;
            j["A"] = p.A;
            j["u"] = p.u;
            break;
        case K::global_sum: j["kind"] = "global_sum"; break;
        case K::bias_sum:
            j["kind"] = "bias_sum";
            j["layer"] = p.layer;
            break;
        case K::lower_w2b: j["kind"] = "lower_w2b"; break;
        case K::upper_w2b: j["kind"] = "upper_w2b"; break;
        case K::first_layer_neuron:
            j["kind"] = "first_layer_neuron";
            j["neuron"] = p.neuron;
            break;
        case K::last_layer_neuron:
            j["kind"] = "last_layer_neuron";
            j["neuron"] = p.neuron;
            break;
        case K::col_pool:
        case K::row_pool:
            j["kind"] = p.kind == K::col_pool ? "col_pool" : "row_pool";
            j["offset"] = p.slice_offset;
            j["width"] = p.slice_width;
            break;
        case K::pointwise_mlp:
            j["kind"] = "pointwise_mlp";
            j["mlp"] = mlp_to_json_obj(p.mlp);
            break;
        case K::pointwise_nonlinearity:
            j["kind"] = "pointwise_nonlinearity";
            j["activation"] = to_string(p.nonlinearity);
            break;
        case K::concat:
        case K::sum_combine: {
            j["kind"] = p.kind == K::concat ? "concat" : "sum";
            json parts = json::array();
            for (const auto& part : p.parts) parts.push_back(prim_to_json(part));
            j["parts"] = std::move(parts);
            break;
        }
        case K::const_channels:
            j["kind"] = "const_channels";
            j["constants"] = json::parse(weights_to_json(p.constants));
            break;
    }
    return j;
}

DWSPrimitive prim_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "pointwise_affine")
        return DWSPrimitive::pointwise_affine(j.at("A").get<std::vector<double>>(),
                                              j.at("in_channels").get<int>(),
                                              j.at("out_channels").get<int>(),
                                              j.at("u").get<std::vector<double>>());
    if (kind == "global_sum") return DWSPrimitive::global_sum();
    if (kind == "bias_sum") return DWSPrimitive::bias_sum(j.at("layer").get<int>());
    if (kind == "lower_w2b") return DWSPrimitive::lower_w2b();
    if (kind == "upper_w2b") return DWSPrimitive::upper_w2b();
    if (kind == "first_layer_neuron") return DWSPrimitive::first_layer_neuron(j.at("neuron").get<int>());
    if (kind == "last_layer_neuron") return DWSPrimitive::last_layer_neuron(j.at("neuron").get<int>());
    if (kind == "col_pool") return DWSPrimitive::col_pool(j.at("offset").get<int>(), j.at("width").get<int>());
    if (kind == "row_pool") return DWSPrimitive::row_pool(j.at("offset").get<int>(), j.at("width").get<int>());
    if (kind == "pointwise_mlp") return DWSPrimitive::pointwise_mlp(mlp_from_json_obj(j.at("mlp")));
    if (kind == "pointwise_nonlinearity")
        return DWSPrimitive::pointwise_nonlinearity(activation_from_string(j.at("activation").get<std::string>()));
    if (kind == "concat" || kind == "sum") {
        std::vector<DWSPrimitive> parts;
        for (const auto& part : j.at("parts")) parts.push_back(prim_from_json(part));
        return kind == "concat" ? DWSPrimitive::concat(std::move(parts))
                                : DWSPrimitive::sum_combine(std::move(parts));
    }
    if (kind == "const_channels")
        return DWSPrimitive::const_channels(weights_from_json(j.at("constants").dump()));
    fail("BadPrimitive", "unknown primitive kind '" + kind + "'");
}

}  // namespace

std::string dws_program_to_json(const DWSProgram& prog, int indent) {
    json out;
    out["input_channels"] = prog.input_channels;
    out["output_channels"] = prog.output_channels;
    json steps = json::array();
    for (const auto& s : prog.steps) steps.push_back(prim_to_json(s));
    out["steps"] = std::move(steps);
    return indent >= 0 ? out.dump(indent) : out.dump();
}

DWSProgram dws_program_from_json(const std::string& text) {
    json in;
    try {
        in = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("JsonParse", e.what());
    }
    DWSProgram prog;
    prog.input_channels = in.at("input_channels").get<int>();
    prog.output_channels = in.value("output_channels", -1);
    for (const auto& s : in.at("steps")) prog.steps.push_back(prim_from_json(s));
    return prog;
}

// ---------------------------------------------------------------------------
// NP-NFN positional encoding

WeightElement nfn_positional_encoding(const WeightElement& v) {
    validate(v);
    const int L = v.num_layers();
    const int c = v.channels;
    const int d0 = v.arch.dims[0];
    const int dL = v.arch.dims[static_cast<size_t>(L)];
    const int t = d0 + dL + 1;  // |T_PE|, hidden type last
    WeightElement out = WeightElement::zeros(v.arch, c + 2 * t);
    auto type_src = [&](int l, int j) { return l == 0 ? j : t - 1; };
    auto type_tgt = [&](int l, int i) { return l == L - 1 ? d0 + i : t - 1; };
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) {
                for (int k = 0; k < c; ++k) out.w(l, i, j, k) = v.w(l, i, j, k);
                out.w(l, i, j, c + type_src(l, j)) = 1.0;
                out.w(l, i, j, c + t + type_tgt(l, i)) = 1.0;
            }
            for (int k = 0; k < c; ++k) out.bias(l, i, k) = v.bias(l, i, k);
            out.bias(l, i, c + t + type_tgt(l, i)) = 1.0;  // zero block, then own type
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Message passing layers

namespace {

void check_mlp_in(const MLPSpec& m, int expect, const char* what) {
    if (m.in_dim() != expect)
        fail("DimMismatch", std::string(what) + " expects input dim " + std::to_string(expect) +
                                ", got " + std::to_string(m.in_dim()));
}

std::vector<double> cat3(const std::vector<double>& a, const std::vector<double>& b,
                         const std::vector<double>& c) {
    std::vector<double> out;
    out.reserve(a.size() + b.size() + c.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    out.insert(out.end(), c.begin(), c.end());
    return out;
}

std::vector<double> cat4(const std::vector<double>& a, const std::vector<double>& b,
                         const std::vector<double>& c, const std::vector<double>& d) {
    std::vector<double> out = cat3(a, b, c);
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

}  // namespace

std::pair<NeuralGraph, std::vector<double>> gmn_layer(const NeuralGraph& g, const GMNParams& p,
                                                      const std::vector<double>& u) {
    const int dh = g.node_dim;
    const int de = g.edge_dim;
    const int du = static_cast<int>(u.size());
    check_mlp_in(p.phi_m, 2 * dh + de + du, "phi_m");
    check_mlp_in(p.phi_e, 2 * dh + de + du, "phi_e");
    const int dmsg = p.phi_m.out_dim();
    check_mlp_in(p.phi_h, dh + dmsg + du, "phi_h");
    check_mlp_in(p.phi_u, dh + de + du, "phi_u");

    std::vector<std::vector<double>> msg_sum(g.nodes.size(),
                                             std::vector<double>(static_cast<size_t>(dmsg), 0.0));
    NeuralGraph out = g;
    out.node_dim = p.phi_h.out_dim();
    out.edge_dim = p.phi_e.out_dim();

    // Messages and edge updates in edge-id order.
    for (size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        const auto& h_head = g.nodes[static_cast<size_t>(edge.dst)];
        const auto& h_tail = g.nodes[static_cast<size_t>(edge.src)];
        const auto m = mlp_eval(p.phi_m, cat4(h_head, h_tail, edge.feat, u));
        for (int k = 0; k < dmsg; ++k)
            msg_sum[static_cast<size_t>(edge.dst)][static_cast<size_t>(k)] += m[static_cast<size_t>(k)];
        out.edges[e].feat = mlp_eval(p.phi_e, cat4(h_head, h_tail, edge.feat, u));
    }
    for (size_t n = 0; n < g.nodes.size(); ++n)
        out.nodes[n] = mlp_eval(p.phi_h, cat3(g.nodes[n], msg_sum[n], u));

    // Global update over pre-update features, id order.
    std::vector<double> hsum(static_cast<size_t>(dh), 0.0), esum(static_cast<size_t>(de), 0.0);
    for (const auto& h : g.nodes)
        for (int k = 0; k < dh; ++k) hsum[static_cast<size_t>(k)] += h[static_cast<size_t>(k)];
    for (const auto& e : g.edges)
        for (int k = 0; k < de; ++k) esum[static_cast<size_t>(k)] += e.feat[static_cast<size_t>(k)];
    std::vector<double> u_next = mlp_eval(p.phi_u, cat3(hsum, esum, u));
    return {std::move(out), std::move(u_next)};
}

NeuralGraph ng_layer(const NeuralGraph& g, const NGParams& p) {
    if (g.variant != GraphVariant::NG) fail("VariantMismatch", "ng_layer expects an NG graph");
    const int dh = g.node_dim;
    const int de = g.edge_dim;
    check_mlp_in(p.phi_m, 2 * dh + de, "phi_m");
    check_mlp_in(p.phi_e, 2 * dh + de, "phi_e");
    const int dmsg = p.phi_m.out_dim();
    check_mlp_in(p.phi_h, dh + dmsg, "phi_h");

    std::vector<std::vector<double>> msg_sum(g.nodes.size(),
                                             std::vector<double>(static_cast<size_t>(dmsg), 0.0));
    NeuralGraph out = g;
    out.node_dim = p.phi_h.out_dim();
    out.edge_dim = p.phi_e.out_dim();
    for (size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        const auto& h_head = g.nodes[static_cast<size_t>(edge.dst)];
        const auto& h_tail = g.nodes[static_cast<size_t>(edge.src)];
        const auto m = mlp_eval(p.phi_m, cat3(h_head, h_tail, edge.feat));
        for (int k = 0; k < dmsg; ++k)
            msg_sum[static_cast<size_t>(edge.dst)][static_cast<size_t>(k)] += m[static_cast<size_t>(k)];
        out.edges[e].feat = mlp_eval(p.phi_e, cat3(h_head, h_tail, edge.feat));
    }
    for (size_t n = 0; n < g.nodes.size(); ++n)
        out.nodes[n] = mlp_eval(p.phi_h, cat3(g.nodes[n], msg_sum[n], {}));
    return out;
}

// ---------------------------------------------------------------------------
// NFT

std::vector<double> nft_attention(const std::vector<double>& q,
                                  const std::vector<std::pair<std::vector<double>,
                                                              std::vector<double>>>& kvs) {
    if (kvs.empty()) fail("EmptyKV", "attention needs at least one key/value pair");
    std::vector<double> scores(kvs.size(), 0.0);
    for (size_t p = 0; p < kvs.size(); ++p) {
        if (kvs[p].first.size() != q.size())
            fail("DimMismatch", "key dimension differs from query dimension");
        double s = 0.0;
        for (size_t k = 0; k < q.size(); ++k) s += q[k] * kvs[p].first[k];
        scores[p] = s;
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - m);
        z += s;
    }
    std::vector<double> out(kvs.front().second.size(), 0.0);
    for (size_t p = 0; p < kvs.size(); ++p) {
        if (kvs[p].second.size() != out.size())
            fail("DimMismatch", "value dimensions differ across pairs");
        const double a = scores[p] / z;
        for (size_t k = 0; k < out.size(); ++k) out[k] += a * kvs[p].second[k];
    }
    return out;
}

namespace {

void check_proj(const std::vector<double>& theta, int c, const char* what) {
    if (theta.size() != static_cast<size_t>(c) * static_cast<size_t>(c))
        fail("DimMismatch", std::string(what) + " projection must be c x c");
}

std::vector<double> proj(const std::vector<double>& theta, const double* x, int c) {
    std::vector<double> y(static_cast<size_t>(c), 0.0);
    for (int i = 0; i < c; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += theta[static_cast<size_t>(i) * c + static_cast<size_t>(j)] * x[j];
        y[static_cast<size_t>(i)] = acc;
    }
    return y;
}

// Array token: a sequence of projected c-vectors; scores are Frobenius inner
// products, the convex combination is applied positionwise.
struct ArrayToken {
    std::vector<std::vector<double>> k;  // theta_K-projected entries
    std::vector<std::vector<double>> vv; // theta_V-projected entries
};

std::vector<std::vector<double>> attend_arrays(const std::vector<std::vector<double>>& query,
                                               const std::vector<ArrayToken>& keys) {
    std::vector<double> scores(keys.size(), 0.0);
    for (size_t p = 0; p < keys.size(); ++p) {
        double s = 0.0;
        for (size_t pos = 0; pos < query.size(); ++pos)
            for (size_t ch = 0; ch < query[pos].size(); ++ch)
                s += query[pos][ch] * keys[p].k[pos][ch];
        scores[p] = s;
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - m);
        z += s;
    }
    std::vector<std::vector<double>> out(query.size(),
                                         std::vector<double>(query.empty() ? 0 : query[0].size(), 0.0));
    for (size_t p = 0; p < keys.size(); ++p) {
        const double a = scores[p] / z;
        for (size_t pos = 0; pos < out.size(); ++pos)
            for (size_t ch = 0; ch < out[pos].size(); ++ch)
                out[pos][ch] += a * keys[p].vv[pos][ch];
    }
    return out;
}

struct SAResult {
    WeightElement delta;  // sum of enabled attention summands, zero elsewhere
    WeightElement mask;   // 1 where some summand applied
};

// Row arrays of weight layer l live on the layer-(l+1) neuron axis; adjacent
// KV1 members with the same shape are the columns of W_{l-1} and b_{l-1}.
void kv1_rows(const WeightElement& v, const NFTParams& p, SAResult& r) {
    const AttnProj& pr = *p.kv1;
    const int c = v.channels;
    for (int l = 0; l < v.num_layers(); ++l) {
        if (p.restrict_layer && *p.restrict_layer != l + 1) continue;
        std::vector<ArrayToken> keys;
        auto push_array = [&](auto&& entry_at, int len) {
            ArrayToken t;
            t.k.reserve(static_cast<size_t>(len));
            t.vv.reserve(static_cast<size_t>(len));
            for (int pos = 0; pos < len; ++pos) {
                const double* x = entry_at(pos);
                t.k.push_back(proj(pr.theta_k, x, c));
                t.vv.push_back(proj(pr.theta_v, x, c));
            }
            keys.push_back(std::move(t));
        };
        if (p.kv1_include_adjacent && l >= 1) {
            for (int q = 0; q < v.cols(l - 1); ++q)
                push_array([&](int pos) { return &v.W[l - 1][v.widx(l - 1, pos, q, 0)]; }, v.rows(l - 1));
        }
        for (int row = 0; row < v.rows(l); ++row)
            push_array([&](int pos) { return &v.W[l][v.widx(l, row, pos, 0)]; }, v.cols(l));
        if (p.kv1_include_adjacent && l >= 1)
            push_array([&](int pos) { return &v.b[l - 1][v.bidx(l - 1, pos, 0)]; }, v.rows(l - 1));

        for (int row = 0; row < v.rows(l); ++row) {
            std::vector<std::vector<double>> query;
            query.reserve(static_cast<size_t>(v.cols(l)));
            for (int j = 0; j < v.cols(l); ++j)
                query.push_back(proj(pr.theta_q, &v.W[l][v.widx(l, row, j, 0)], c));
            const auto outp = attend_arrays(query, keys);
            for (int j = 0; j < v.cols(l); ++j)
                for (int k = 0; k < c; ++k) {
                    r.delta.w(l, row, j, k) += outp[static_cast<size_t>(j)][static_cast<size_t>(k)];
                    r.mask.w(l, row, j, k) = 1.0;
                }
        }
    }
}

// Column arrays of weight layer l live on the layer-(l+1) target axis; KV2
// also serves the bias update of layer l with the same key set.
void kv2_cols(const WeightElement& v, const NFTParams& p, SAResult& r) {
    const AttnProj& pr = *p.kv2;
    const int c = v.channels;
    for (int l = 0; l < v.num_layers(); ++l) {
        if (p.restrict_layer && *p.restrict_layer != l + 1) continue;
        std::vector<ArrayToken> keys;
        auto push_array = [&](auto&& entry_at, int len) {
            ArrayToken t;
            for (int pos = 0; pos < len; ++pos) {
                const double* x = entry_at(pos);
                t.k.push_back(proj(pr.theta_k, x, c));
                t.vv.push_back(proj(pr.theta_v, x, c));
            }
            keys.push_back(std::move(t));
        };
        for (int q = 0; q < v.cols(l); ++q)
            push_array([&](int pos) { return &v.W[l][v.widx(l, pos, q, 0)]; }, v.rows(l));
        if (p.kv2_include_adjacent && l + 1 < v.num_layers()) {
            for (int row = 0; row < v.rows(l + 1); ++row)
                push_array([&](int pos) { return &v.W[l + 1][v.widx(l + 1, row, pos, 0)]; }, v.cols(l + 1));
        }
        push_array([&](int pos) { return &v.b[l][v.bidx(l, pos, 0)]; }, v.rows(l));

        for (int col = 0; col < v.cols(l); ++col) {
            std::vector<std::vector<double>> query;
            for (int i = 0; i < v.rows(l); ++i)
                query.push_back(proj(pr.theta_q, &v.W[l][v.widx(l, i, col, 0)], c));
            const auto outp = attend_arrays(query, keys);
            for (int i = 0; i < v.rows(l); ++i)
                for (int k = 0; k < c; ++k) {
                    r.delta.w(l, i, col, k) += outp[static_cast<size_t>(i)][static_cast<size_t>(k)];
                    r.mask.w(l, i, col, k) = 1.0;
                }
        }
        std::vector<std::vector<double>> query;
        for (int i = 0; i < v.rows(l); ++i)
            query.push_back(proj(pr.theta_q, &v.b[l][v.bidx(l, i, 0)], c));
        const auto outp = attend_arrays(query, keys);
        for (int i = 0; i < v.rows(l); ++i)
            for (int k = 0; k < c; ++k) {
                r.delta.bias(l, i, k) += outp[static_cast<size_t>(i)][static_cast<size_t>(k)];
                r.mask.bias(l, i, k) = 1.0;
            }
    }
}

// Global token attention: every entry is a token, canonical flatten order.
void kv3_global(const WeightElement& v, const NFTParams& p, SAResult& r) {
    const AttnProj& pr = *p.kv3;
    const int c = v.channels;
    std::vector<const double*> tokens;
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int j = 0; j < v.cols(l); ++j)
            for (int i = 0; i < v.rows(l); ++i) tokens.push_back(&v.W[l][v.widx(l, i, j, 0)]);
        for (int i = 0; i < v.rows(l); ++i) tokens.push_back(&v.b[l][v.bidx(l, i, 0)]);
    }
    std::vector<std::pair<std::vector<double>, std::vector<double>>> kvs;
    kvs.reserve(tokens.size());
    for (const double* t : tokens)
        kvs.emplace_back(proj(pr.theta_k, t, c), proj(pr.theta_v, t, c));

    auto attend_token = [&](const double* x, double* out_entry, double* mask_entry) {
        const auto q = proj(pr.theta_q, x, c);
        const auto o = nft_attention(q, kvs);
        for (int k = 0; k < c; ++k) {
            out_entry[k] += o[static_cast<size_t>(k)];
            mask_entry[k] = 1.0;
        }
    };
    for (int l = 0; l < v.num_layers(); ++l) {
        if (p.restrict_layer && *p.restrict_layer != l + 1) continue;
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j)
                attend_token(&v.W[l][v.widx(l, i, j, 0)], &r.delta.W[l][r.delta.widx(l, i, j, 0)],
                             &r.mask.W[l][r.mask.widx(l, i, j, 0)]);
            attend_token(&v.b[l][v.bidx(l, i, 0)], &r.delta.b[l][r.delta.bidx(l, i, 0)],
                         &r.mask.b[l][r.mask.bidx(l, i, 0)]);
        }
    }
}

SAResult self_attention_masked(const WeightElement& v, const NFTParams& p) {
    const int c = v.channels;
    if (p.channels != c) fail("DimMismatch", "params built for different channel count");
    SAResult r{WeightElement::zeros(v.arch, c), WeightElement::zeros(v.arch, c)};
    if (p.kv1) {
        check_proj(p.kv1->theta_q, c, "kv1 query");
        check_proj(p.kv1->theta_k, c, "kv1 key");
        check_proj(p.kv1->theta_v, c, "kv1 value");
        kv1_rows(v, p, r);
    }
    if (p.kv2) {
        check_proj(p.kv2->theta_q, c, "kv2 query");
        check_proj(p.kv2->theta_k, c, "kv2 key");
        check_proj(p.kv2->theta_v, c, "kv2 value");
        kv2_cols(v, p, r);
    }
    if (p.kv3) {
        check_proj(p.kv3->theta_q, c, "kv3 query");
        check_proj(p.kv3->theta_k, c, "kv3 key");
        check_proj(p.kv3->theta_v, c, "kv3 value");
        kv3_global(v, p, r);
    }
    return r;
}

WeightElement layernorm(const WeightElement& v) {
    constexpr double eps = 1e-5;
    const int c = v.channels;
    WeightElement out = v;
    auto norm = [&](double* x) {
        double mu = 0.0;
        for (int k = 0; k < c; ++k) mu += x[k];
        mu /= c;
        double var = 0.0;
        for (int k = 0; k < c; ++k) var += (x[k] - mu) * (x[k] - mu);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int k = 0; k < c; ++k) x[k] = (x[k] - mu) * inv;
    };
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) norm(&out.W[l][out.widx(l, i, j, 0)]);
            norm(&out.b[l][out.bidx(l, i, 0)]);
        }
    }
    return out;
}

}  // namespace

WeightElement nft_layer_encode(const WeightElement& v, const NFTParams& p) {
    if (p.layer_enc_w.empty() && p.layer_enc_b.empty()) return v;
    if (static_cast<int>(p.layer_enc_w.size()) != v.num_layers() ||
        static_cast<int>(p.layer_enc_b.size()) != v.num_layers())
        fail("DimMismatch", "layer encodings need one vector per layer");
    WeightElement out = v;
    for (int l = 0; l < v.num_layers(); ++l) {
        if (static_cast<int>(p.layer_enc_w[l].size()) != v.channels ||
            static_cast<int>(p.layer_enc_b[l].size()) != v.channels)
            fail("DimMismatch", "layer encodings must have length c");
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j)
                for (int k = 0; k < v.channels; ++k)
                    out.w(l, i, j, k) += p.layer_enc_w[l][static_cast<size_t>(k)];
            for (int k = 0; k < v.channels; ++k)
                out.bias(l, i, k) += p.layer_enc_b[l][static_cast<size_t>(k)];
        }
    }
    return out;
}

WeightElement nft_self_attention(const WeightElement& v, const NFTParams& p) {
    return self_attention_masked(v, p).delta;
}

WeightElement nft_block(const WeightElement& v, const NFTParams& p) {
    const WeightElement input = nft_layer_encode(v, p);
    const WeightElement x1 = p.use_layernorm ? layernorm(input) : input;
    const SAResult sa = self_attention_masked(x1, p);

    WeightElement z = WeightElement::zeros(v.arch, v.channels);
    for (int l = 0; l < v.num_layers(); ++l) {
        for (size_t t = 0; t < z.W[l].size(); ++t)
            z.W[l][t] = p.residual_sa ? input.W[l][t] + sa.delta.W[l][t]
                                      : (sa.mask.W[l][t] != 0.0 ? sa.delta.W[l][t] : input.W[l][t]);
        for (size_t t = 0; t < z.b[l].size(); ++t)
            z.b[l][t] = p.residual_sa ? input.b[l][t] + sa.delta.b[l][t]
                                      : (sa.mask.b[l][t] != 0.0 ? sa.delta.b[l][t] : input.b[l][t]);
    }
    if (!p.mlp) return z;

    if (p.mlp->in_dim() != v.channels || p.mlp->out_dim() != v.channels)
        fail("DimMismatch", "block MLP must map c -> c");
    const WeightElement x2 = p.use_layernorm ? layernorm(z) : z;
    WeightElement out = WeightElement::zeros(v.arch, v.channels);
    std::vector<double> buf(static_cast<size_t>(v.channels));
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) {
                for (int k = 0; k < v.channels; ++k) buf[static_cast<size_t>(k)] = x2.w(l, i, j, k);
                const auto y = mlp_eval(*p.mlp, buf);
                for (int k = 0; k < v.channels; ++k)
                    out.w(l, i, j, k) = (p.residual_mlp ? z.w(l, i, j, k) : 0.0) + y[static_cast<size_t>(k)];
            }
            for (int k = 0; k < v.channels; ++k) buf[static_cast<size_t>(k)] = x2.bias(l, i, k);
            const auto y = mlp_eval(*p.mlp, buf);
            for (int k = 0; k < v.channels; ++k)
                out.bias(l, i, k) = (p.residual_mlp ? z.bias(l, i, k) : 0.0) + y[static_cast<size_t>(k)];
        }
    }
    return out;
}

std::vector<double> nft_pool(const WeightElement& v, const NFTPoolParams& p) {
    const int c = v.channels;
    check_proj(p.theta_q, c, "pool query");
    check_proj(p.theta_k, c, "pool key");
    check_proj(p.theta_v, c, "pool value");
    if (static_cast<int>(p.token.size()) != c) fail("DimMismatch", "pool token must have length c");
    std::vector<std::pair<std::vector<double>, std::vector<double>>> kvs;
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int j = 0; j < v.cols(l); ++j)
            for (int i = 0; i < v.rows(l); ++i)
                kvs.emplace_back(proj(p.theta_k, &v.W[l][v.widx(l, i, j, 0)], c),
                                 proj(p.theta_v, &v.W[l][v.widx(l, i, j, 0)], c));
        for (int i = 0; i < v.rows(l); ++i)
            kvs.emplace_back(proj(p.theta_k, &v.b[l][v.bidx(l, i, 0)], c),
                             proj(p.theta_v, &v.b[l][v.bidx(l, i, 0)], c));
    }
    return nft_attention(proj(p.theta_q, p.token.data(), c), kvs);
}

}  // namespace wskit
