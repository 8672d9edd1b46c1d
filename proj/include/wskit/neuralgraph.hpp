#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wskit/types.hpp"

namespace wskit {

enum class GraphVariant { GMN, NG };

// MLP parameter graph per the GMN / NG encodings. Node ids are layer-major
// neuron nodes (layer 0 first), followed for GMN by one bias node per layer.
// Every directed edge has its reverse counterpart; edges are emitted layer by
// layer, per (target, source) pair forward-then-backward, bias edges after
// weight edges within a layer (GMN).
struct NeuralGraph {
    struct Edge {
        int src = 0;
        int dst = 0;
        std::vector<double> feat;
    };

    GraphVariant variant = GraphVariant::NG;
    Architecture arch;
    int channels = 1;
    int node_dim = 0;
    int edge_dim = 0;
    std::vector<std::vector<double>> nodes;
    std::vector<Edge> edges;

    int neuron_node(int layer, int i) const;  // layer in 0..L
    int bias_node(int layer) const;           // GMN only, layer in 1..L
    int num_nodes() const { return static_cast<int>(nodes.size()); }
};

NeuralGraph build_graph(const WeightElement& v, GraphVariant variant);

struct WLColoring {
    std::vector<int> colors;  // node id -> color
    int rounds_to_stabilize = 0;
    std::vector<std::pair<int, long long>> histogram;  // sorted (color, count)
};

// Edge-featured 1-WL. Round-0 colors hash the node feature vector; round t+1
// hashes (own color, sorted multiset of (neighbor color, edge feature hash))
// over incoming directed edges. Deterministic: byte-canonical feature
// serialization into FNV-1a 64, colors drawn from a dictionary keyed by the
// full signature.
WLColoring wl_refine(const NeuralGraph& g, int max_rounds);

// Joint refinement with one shared color dictionary; true iff the stable
// histograms differ.
bool wl_distinguishable(const NeuralGraph& g1, const NeuralGraph& g2);

std::string graph_to_json(const NeuralGraph& g, int indent = -1);
std::string graph_to_edge_list(const NeuralGraph& g);

}  // namespace wskit
