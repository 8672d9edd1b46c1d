#include "wskit/neuralgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "wskit/wscore.hpp"

namespace wskit {

using json = nlohmann::ordered_json;

int NeuralGraph::neuron_node(int layer, int i) const {
    int base = 0;
    for (int l = 0; l < layer; ++l) base += arch.dims[static_cast<size_t>(l)];
    return base + i;
}

int NeuralGraph::bias_node(int layer) const {
    if (variant != GraphVariant::GMN) fail("VariantMismatch", "bias nodes exist only in GMN graphs");
    int base = 0;
    for (int l = 0; l <= arch.num_layers(); ++l) base += arch.dims[static_cast<size_t>(l)];
    return base + (layer - 1);
}

namespace {

void one_hot(std::vector<double>& out, int size, int index) {
    for (int k = 0; k < size; ++k) out.push_back(k == index ? 1.0 : 0.0);
}

// Type index within T_GMN = {in_1..in_d0, out_1..out_dL, bias_1..bias_L, hidden}
// or T_NG/T_PE = {in_1..in_d0, out_1..out_dL, hidden}.
int ntype_index_neuron(const Architecture& arch, int layer, int i) {
    const int L = arch.num_layers();
    if (layer == 0) return i;
    if (layer == L) return arch.dims[0] + i;
    return -1;  // hidden; resolved by caller against the set size
}

}  // namespace

NeuralGraph build_graph(const WeightElement& v, GraphVariant variant) {
    validate(v);
    NeuralGraph g;
    g.variant = variant;
    g.arch = v.arch;
    g.channels = v.channels;
    const int L = v.arch.num_layers();
    const int c = v.channels;
    const int d0 = v.arch.dims[0];
    const int dL = v.arch.dims[static_cast<size_t>(L)];

    const bool gmn = variant == GraphVariant::GMN;
    const int ntype_size = gmn ? d0 + dL + L + 1 : d0 + dL + 1;
    g.node_dim = (L + 1) + ntype_size + (gmn ? 0 : c);
    g.edge_dim = c + L + (gmn ? 4 : 2);

    // Neuron nodes, layer-major.
    for (int layer = 0; layer <= L; ++layer) {
        for (int i = 0; i < v.arch.dims[static_cast<size_t>(layer)]; ++i) {
            std::vector<double> h;
            h.reserve(static_cast<size_t>(g.node_dim));
            one_hot(h, L + 1, layer);
            int t = ntype_index_neuron(v.arch, layer, i);
            if (t < 0) t = ntype_size - 1;  // hidden is the last type
            one_hot(h, ntype_size, t);
            if (!gmn) {
                if (layer == 0) {
                    for (int k = 0; k < c; ++k) h.push_back(0.0);  // zero bias padding
                } else {
                    for (int k = 0; k < c; ++k) h.push_back(v.bias(layer - 1, i, k));
                }
            }
            g.nodes.push_back(std::move(h));
        }
    }
    // GMN bias nodes, one per layer 1..L.
    if (gmn) {
        for (int layer = 1; layer <= L; ++layer) {
            std::vector<double> h;
            h.reserve(static_cast<size_t>(g.node_dim));
            one_hot(h, L + 1, layer);
            one_hot(h, ntype_size, d0 + dL + (layer - 1));  // bias_layer type
            g.nodes.push_back(std::move(h));
        }
    }

    auto edge_feat = [&](const double* params, int layer, bool forward, bool weight_edge) {
        std::vector<double> e;
        e.reserve(static_cast<size_t>(g.edge_dim));
        for (int k = 0; k < c; ++k) e.push_back(params[k]);
        one_hot(e, L, layer - 1);              // layer one-hot over 1..L
        one_hot(e, 2, forward ? 0 : 1);        // dir
        if (gmn) one_hot(e, 2, weight_edge ? 0 : 1);  // ptype
        return e;
    };

    // Weight edges per layer, target-major, forward edge then its reverse.
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) {
                const double* p = &v.W[l][v.widx(l, i, j, 0)];
                const int src = g.neuron_node(l, j);
                const int dst = g.neuron_node(l + 1, i);
                g.edges.push_back({src, dst, edge_feat(p, l + 1, true, true)});
                g.edges.push_back({dst, src, edge_feat(p, l + 1, false, true)});
            }
        }
        if (gmn) {
            for (int i = 0; i < v.rows(l); ++i) {
                const double* p = &v.b[l][v.bidx(l, i, 0)];
                const int bn = g.bias_node(l + 1);
                const int nn = g.neuron_node(l + 1, i);
                g.edges.push_back({bn, nn, edge_feat(p, l + 1, true, false)});
                g.edges.push_back({nn, bn, edge_feat(p, l + 1, false, false)});
            }
        }
    }
    return g;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

void fnv_double(std::uint64_t& h, double x) {
    if (x == 0.0) x = 0.0;  // normalize -0.0
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    fnv_bytes(h, &bits, sizeof(bits));
}

std::uint64_t hash_feature(const std::vector<double>& feat) {
    std::uint64_t h = kFnvOffset;
    for (double x : feat) fnv_double(h, x);
    return h;
}

struct ColorDict {
    std::unordered_map<std::string, int> ids;
    int intern(const std::string& sig) {
        auto [it, inserted] = ids.emplace(sig, static_cast<int>(ids.size()));
        (void)inserted;
        return it->second;
    }
};

std::string node_signature(const std::vector<double>& feat) {
    std::string sig;
    sig.reserve(feat.size() * 8 + 1);
    sig.push_back('n');
    for (double x : feat) {
        double y = x == 0.0 ? 0.0 : x;
        char buf[8];
        std::memcpy(buf, &y, 8);
        sig.append(buf, 8);
    }
    return sig;
}

std::string round_signature(int own, const std::vector<std::pair<int, std::uint64_t>>& neigh) {
    std::string sig;
    sig.reserve(16 + neigh.size() * 12 + 1);
    sig.push_back('r');
    sig.append(reinterpret_cast<const char*>(&own), sizeof(own));
    for (const auto& [color, ehash] : neigh) {
        sig.append(reinterpret_cast<const char*>(&color), sizeof(color));
        sig.append(reinterpret_cast<const char*>(&ehash), sizeof(ehash));
    }
    return sig;
}

struct RefineState {
    std::vector<int> colors;
    std::vector<std::vector<std::pair<int, std::uint64_t>>> incoming;  // node -> (src, edge hash)
};

RefineState init_state(const NeuralGraph& g, ColorDict& dict) {
    RefineState st;
    st.colors.resize(g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) st.colors[i] = dict.intern(node_signature(g.nodes[i]));
    st.incoming.resize(g.nodes.size());
    for (const auto& e : g.edges)
        st.incoming[static_cast<size_t>(e.dst)].emplace_back(e.src, hash_feature(e.feat));
    return st;
}

// One parallel refinement round over all supplied states; returns true when
// the joint partition strictly refined.
bool refine_round(std::vector<RefineState*>& states, ColorDict& dict) {
    size_t before = 0, after = 0;
    {
        std::map<int, int> seen;
        for (auto* st : states)
            for (int col : st->colors) seen[col] = 1;
        before = seen.size();
    }
    std::vector<std::vector<int>> next(states.size());
    for (size_t s = 0; s < states.size(); ++s) {
        RefineState& st = *states[s];
        next[s].resize(st.colors.size());
        for (size_t i = 0; i < st.colors.size(); ++i) {
            std::vector<std::pair<int, std::uint64_t>> neigh;
            neigh.reserve(st.incoming[i].size());
            for (const auto& [src, ehash] : st.incoming[i])
                neigh.emplace_back(st.colors[static_cast<size_t>(src)], ehash);
            std::sort(neigh.begin(), neigh.end());
            next[s][i] = dict.intern(round_signature(st.colors[i], neigh));
        }
    }
    std::map<int, int> seen;
    for (const auto& cols : next)
        for (int col : cols) seen[col] = 1;
    after = seen.size();
    for (size_t s = 0; s < states.size(); ++s) states[s]->colors = std::move(next[s]);
    return after > before;
}

std::vector<std::pair<int, long long>> make_histogram(const std::vector<int>& colors) {
    std::map<int, long long> counts;
    for (int c : colors) ++counts[c];
    return {counts.begin(), counts.end()};
}

}  // namespace

WLColoring wl_refine(const NeuralGraph& g, int max_rounds) {
    if (max_rounds < 0) fail("BadArgument", "max_rounds must be >= 0");
    ColorDict dict;
    RefineState st = init_state(g, dict);
    std::vector<RefineState*> states = {&st};
    WLColoring out;
    out.rounds_to_stabilize = 0;
    for (int round = 0; round < max_rounds; ++round) {
        if (!refine_round(states, dict)) break;
        out.rounds_to_stabilize = round + 1;
    }
    out.colors = st.colors;
    out.histogram = make_histogram(st.colors);
    return out;
}

bool wl_distinguishable(const NeuralGraph& g1, const NeuralGraph& g2) {
    if (g1.variant != g2.variant)
        fail("VariantMismatch", "graphs use different encodings");
    ColorDict dict;
    RefineState s1 = init_state(g1, dict);
    RefineState s2 = init_state(g2, dict);
    std::vector<RefineState*> states = {&s1, &s2};
    const int cap = static_cast<int>(g1.nodes.size() + g2.nodes.size());
    for (int round = 0; round < cap; ++round)
        if (!refine_round(states, dict)) break;
    return make_histogram(s1.colors) != make_histogram(s2.colors);
}

std::string graph_to_json(const NeuralGraph& g, int indent) {
    json out;
    out["variant"] = g.variant == GraphVariant::GMN ? "gmn" : "ng";
    out["dims"] = g.arch.dims;
    out["channels"] = g.channels;
    out["node_dim"] = g.node_dim;
    out["edge_dim"] = g.edge_dim;
    json nodes = json::array();
    for (size_t i = 0; i < g.nodes.size(); ++i)
        nodes.push_back(json{{"id", i}, {"feat", g.nodes[i]}});
    json edges = json::array();
    for (const auto& e : g.edges)
        edges.push_back(json{{"src", e.src}, {"dst", e.dst}, {"feat", e.feat}});
    out["nodes"] = std::move(nodes);
    out["edges"] = std::move(edges);
    return indent >= 0 ? out.dump(indent) : out.dump();
}

std::string graph_to_edge_list(const NeuralGraph& g) {
    std::ostringstream os;
    os << "# " << (g.variant == GraphVariant::GMN ? "gmn" : "ng") << " nodes="
       << g.nodes.size() << " edges=" << g.edges.size() << "\n";
    for (const auto& e : g.edges) {
        os << e.src << " -> " << e.dst << " [";
        for (size_t k = 0; k < e.feat.size(); ++k) {
            if (k) os << ",";
            os << e.feat[k];
        }
        os << "]\n";
    }
    return os.str();
}

}  // namespace wskit
