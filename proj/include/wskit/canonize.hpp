#pragma once

#include <vector>

#include "wskit/types.hpp"

namespace wskit {

// Per layer l in 1..L: for hidden layers entry i is the number of strictly
// smaller biases in that layer; for layer L it is the raw (0-based) index.
struct BiasRanks {
    std::vector<std::vector<int>> ranks;
};

struct CanonResult {
    WeightElement canon5;         // channels = 5, the sorted pe output
    WeightElement representative; // channel 1 of canon5; hidden biases strictly ascending
    GroupElement g_v;             // representative == act(g_v, input), bit-exact
};

// Throws TiedBiases when two hidden biases coincide exactly. Requires c = 1.
BiasRanks bias_ranks(const WeightElement& v);

// Neuron-identification map, channels = 5.
// Bias entry (l,i)   -> (value, l, 1, 0, eta_b(l,i))
// Weight entry (l,i,j) -> (value, l, 0, src_id, tgt_id) with src_id the raw
// index j for l=1 and the layer-(l-1) bias rank otherwise, tgt_id the layer-l
// bias rank for hidden layers and the raw index i for l=L. Layer channel is
// 1-based, raw indices 0-based.
WeightElement neuron_id_map(const WeightElement& v);

// Lexicographic canonization: rows of flatten(neuron_id_map(v)) sorted by the
// integer channels 2..5 (channel 1 ignored). G-invariant bit-exactly.
CanonResult canon(const WeightElement& v);

// Channels = 5*M + 1: channel 1 is the entry's own value, channels 2..5M+1
// carry flatten(canon5) broadcast identically to every position.
WeightElement canon_features(const WeightElement& v);

}  // namespace wskit
