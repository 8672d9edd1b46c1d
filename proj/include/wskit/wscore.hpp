#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wskit/types.hpp"

namespace wskit {

// Shape/finiteness check; throws ShapeMismatch or NonFiniteEntry.
void validate(const Architecture& arch, const WeightElement& v);
inline void validate(const WeightElement& v) { validate(v.arch, v); }

// Hidden-neuron permutation action. Pure index gather, bit-exact: the output
// entries are a permutation of the input entries.
//   W'_1 = P^T W_1, b'_1 = P^T b_1, W'_l = P^T W_l P, W'_L = W_L P, b'_L = b_L,
// applied independently per channel.
WeightElement act(const GroupElement& g, const WeightElement& v);

// act(compose(g1, g2), v) == act(g1, act(g2, v)).
GroupElement compose(const GroupElement& g1, const GroupElement& g2);
GroupElement inverse(const GroupElement& g);

// True iff within every hidden layer all biases are pairwise separated by more
// than tol (tol = 0 means strict inequality of exact values). Requires c = 1.
bool is_general_position(const WeightElement& v, double tol = 0.0);

// Forward pass f_v(x), double precision, fixed left-to-right accumulation
// (ascending source index, bias added last). Requires c = 1.
std::vector<double> realize(const WeightElement& v, const std::vector<double>& x);

// M = sum_l d_l (1 + d_{l-1}).
long long flat_length(const Architecture& arch);

// Bijective flattening in the canonical entry order (see FlatVector).
FlatVector flatten(const WeightElement& v);
WeightElement unflatten(const FlatVector& f, const Architecture& arch, int channels);

struct RandomDist {
    enum class Kind { uniform, normal } kind = Kind::uniform;
    double a = -1.0, b = 1.0;   // uniform bounds
    double mu = 0.0, sigma = 1.0;

    static RandomDist uniform(double a, double b) {
        RandomDist d;
        d.kind = Kind::uniform;
        d.a = a;
        d.b = b;
        return d;
    }
    static RandomDist normal(double mu, double sigma) {
        RandomDist d;
        d.kind = Kind::normal;
        d.mu = mu;
        d.sigma = sigma;
        return d;
    }
};

// Deterministic for a fixed seed (mt19937_64; uniform via (r>>11)*2^-53,
// normal via Box-Muller). For c = 1 the draw is retried with a re-derived seed
// on the measure-zero event that it lands in the exclusion set.
WeightElement random_weights(const Architecture& arch, int channels, std::uint64_t seed,
                             const RandomDist& dist);

// JSON weight file:
// {"dims":[...],"activation":"relu","channels":1,
//  "layers":[{"W":[[row of source entries]...],"b":[...]}...]}
// W rows are indexed by target neuron; for c > 1 every scalar becomes an
// array of length c. Shape errors mirror validate().
WeightElement weights_from_json(const std::string& text);
std::string weights_to_json(const WeightElement& v, int indent = -1);

GroupElement random_group_element(const Architecture& arch, std::uint64_t seed);

}  // namespace wskit
