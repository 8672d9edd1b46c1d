#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wskit/types.hpp"

namespace wskit {

struct Box {
    std::vector<double> lo, hi;
};

// Functional equality. For 1-D ReLU nets with scalar output the exact
// piecewise-linear comparison is used; otherwise a deterministic Halton
// sample of the box decides max |f_v - f_w| <= tol.
bool functionally_equal(const WeightElement& v, const WeightElement& w, const Box& domain,
                        int n_samples, double tol);

// Exhaustive orbit search. Returns the lexicographically smallest witness g
// with act(g, v) == w (entrywise within tol; tol = 0 means bit-exact).
// Throws BudgetExceeded when the group has more than 10^7 elements.
std::pair<bool, std::optional<GroupElement>> g_equivalent(const WeightElement& v,
                                                          const WeightElement& w,
                                                          double tol = 0.0);

// The (1,2,1) positive-homogeneity pair: functionally equal, separated by the
// linear invariant sum(W_1).
std::pair<WeightElement, WeightElement> counterexample_scaling(double lambda);

// The (1,4,4,1) binary pair: ranks 3 vs 2, WL-indistinguishable graphs, both
// realizing 8*ReLU(x).
std::pair<WeightElement, WeightElement> counterexample_wl();

double w1_sum_invariant(const WeightElement& v);

// Exact integer rank by fraction-free (Bareiss) elimination.
int exact_matrix_rank(std::vector<std::vector<long long>> m);

struct SeparationDemo {
    double out_v1 = 0.0, out_v2 = 0.0;
    std::vector<std::vector<double>> attn_v1, attn_v2;  // 4x4 row-attention results
};

// Scripted NFT pipeline: replacement row attention on W_2 with identity
// projections, threshold pointwise MLP (0 below 0.8, 1 above 0.85), uniform
// mean pooling over all 33 entries. Returns 8/33 and 16/33.
SeparationDemo nft_separation_demo();

// The same pipeline on an arbitrary (1,4,4,1) element; G-invariant.
double separation_pipeline(const WeightElement& v);

// Symmetric Hausdorff distance under the grid sup-norm between the realized
// samples of A and the target samples B; true iff < eps. B entries hold the
// target values flattened grid-major with the output dimension innermost.
bool eps_approx_check(const std::vector<WeightElement>& A,
                      const std::vector<std::vector<double>>& B,
                      const std::vector<std::vector<double>>& grid, double eps);

struct WitnessReport {
    std::string name;
    std::optional<bool> g_equivalent, functionally_equal, wl_distinguishable;
    std::optional<double> rank_left, rank_right, invariant_left, invariant_right;
    std::string notes;
};

std::string witness_to_json(const WitnessReport& r, int indent = -1);

}  // namespace wskit
