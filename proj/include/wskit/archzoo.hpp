#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wskit/neuralgraph.hpp"
#include "wskit/types.hpp"

namespace wskit {

// Plain MLP used as an update function (phi_m, phi_h, phi_e, phi_u) and as a
// pointwise feature map. Same storage layout as a c=1 WeightElement.
struct MLPSpec {
    Architecture arch;
    std::vector<std::vector<double>> W;
    std::vector<std::vector<double>> b;

    static MLPSpec zeros(const Architecture& arch);
    static MLPSpec from_weights(const WeightElement& v);  // requires c = 1
    WeightElement to_weights() const;

    int in_dim() const { return arch.dims.front(); }
    int out_dim() const { return arch.dims.back(); }
    int rows(int l) const { return arch.dims[static_cast<size_t>(l) + 1]; }
    int cols(int l) const { return arch.dims[static_cast<size_t>(l)]; }
    double w(int l, int i, int j) const {
        return W[l][static_cast<size_t>(i) * cols(l) + static_cast<size_t>(j)];
    }
    double& w(int l, int i, int j) {
        return W[l][static_cast<size_t>(i) * cols(l) + static_cast<size_t>(j)];
    }
};

std::vector<double> mlp_eval(const MLPSpec& m, const std::vector<double>& x);

// The restricted equivariant update set plus the two pooling maps and the
// combinators needed to assemble full affine layers from them.
struct DWSPrimitive {
    enum class Kind {
        pointwise_affine,   // x -> x A + u on every entry's channel vector
        global_sum,         // every entry becomes the global feature sum
        bias_sum,           // layer-l bias sum broadcast on layer l, rest zero
        lower_w2b,          // W_l[i][j] <- b_{l-1}[j] (zero for l = 1), biases kept
        upper_w2b,          // W_l[i][j] <- b_l[i], biases kept
        first_layer_neuron, // keep W_1 column i', zero the rest
        last_layer_neuron,  // keep b_L entry j', zero the rest
        col_pool,           // b_l[i] <- sum_j W_l[i][j] (channel slice), rest zero
        row_pool,           // b_l[i] <- sum_k W_{l+1}[k][i] (channel slice), rest zero
        pointwise_mlp,      // shared MLP on every entry's channel vector
        pointwise_nonlinearity,
        concat,             // channel concatenation of parts on the same input
        sum_combine,        // elementwise sum of parts (equal output channels)
        const_channels,     // emit a constant, G-invariant element
    };

    Kind kind = Kind::pointwise_affine;
    std::vector<double> A;  // in_channels x out_channels, row-major
    std::vector<double> u;
    int in_channels = 0;
    int out_channels = 0;
    int layer = 1;           // bias_sum target, 1-based
    int neuron = 0;          // first/last_layer_neuron index, 0-based
    int slice_offset = 0;    // col/row_pool input channel window
    int slice_width = -1;    // -1: all channels
    MLPSpec mlp;
    Activation nonlinearity = Activation::relu;
    std::vector<DWSPrimitive> parts;
    WeightElement constants;

    static DWSPrimitive pointwise_affine(std::vector<double> A, int in_c, int out_c,
                                         std::vector<double> u = {});
    static DWSPrimitive identity(int channels);
    static DWSPrimitive global_sum();
    static DWSPrimitive bias_sum(int layer);
    static DWSPrimitive lower_w2b();
    static DWSPrimitive upper_w2b();
    static DWSPrimitive first_layer_neuron(int i);
    static DWSPrimitive last_layer_neuron(int j);
    static DWSPrimitive col_pool(int offset = 0, int width = -1);
    static DWSPrimitive row_pool(int offset = 0, int width = -1);
    static DWSPrimitive pointwise_mlp(MLPSpec m);
    static DWSPrimitive pointwise_nonlinearity(Activation a);
    static DWSPrimitive concat(std::vector<DWSPrimitive> parts);
    static DWSPrimitive sum_combine(std::vector<DWSPrimitive> parts);
    static DWSPrimitive const_channels(WeightElement constants);
};

int dws_output_channels(const DWSPrimitive& p, int in_channels);
WeightElement dws_apply(const DWSPrimitive& p, const WeightElement& v);

struct DWSProgram {
    int input_channels = 1;
    int output_channels = -1;  // -1: inferred; otherwise enforced by dws_run
    std::vector<DWSPrimitive> steps;
};

WeightElement dws_run(const DWSProgram& prog, const WeightElement& v);
std::string dws_program_to_json(const DWSProgram& prog, int indent = -1);
DWSProgram dws_program_from_json(const std::string& text);

// Neuron-type positional encoding of NP-NFN: appends source/target type
// one-hots over T_PE = {in_1..in_d0, out_1..out_dL, hidden} to weights and a
// zero-padded own-type one-hot to biases. Output channels: c + 2(d_0+d_L+1).
WeightElement nfn_positional_encoding(const WeightElement& v);

struct GMNParams {
    MLPSpec phi_m, phi_h, phi_e, phi_u;
};

// One GMN message-passing step. For a directed edge e = (tail -> head):
// m_e = phi_m(h_head, h_tail, e_e, u); h'_head = phi_h(h_head, sum m, u) with
// messages accumulated in edge-id order; e'_e = phi_e(h_head, h_tail, e_e, u);
// u' = phi_u(sum_h, sum_e, u) over pre-update features in id order.
std::pair<NeuralGraph, std::vector<double>> gmn_layer(const NeuralGraph& g, const GMNParams& p,
                                                      const std::vector<double>& u);

struct NGParams {
    MLPSpec phi_m, phi_h, phi_e;
};

NeuralGraph ng_layer(const NeuralGraph& g, const NGParams& p);

// Dot-product attention with max-subtracted softmax.
std::vector<double> nft_attention(const std::vector<double>& q,
                                  const std::vector<std::pair<std::vector<double>,
                                                              std::vector<double>>>& kvs);

struct AttnProj {
    std::vector<double> theta_q, theta_k, theta_v;  // each c x c, row-major
};

struct NFTParams {
    int channels = 1;
    std::optional<AttnProj> kv1, kv2, kv3;  // enabled summands
    bool kv1_include_adjacent = true;       // columns of W_{l-1} and b_{l-1} as extra rows
    bool kv2_include_adjacent = true;       // rows of W_{l+1} as extra columns
    std::optional<int> restrict_layer;      // apply weight updates to this layer only (1-based)
    std::vector<std::vector<double>> layer_enc_w, layer_enc_b;  // optional, one c-vector per layer
    std::optional<MLPSpec> mlp;             // pointwise feed-forward, c -> c
    bool use_layernorm = true;
    bool residual_sa = true;
    bool residual_mlp = true;
};

WeightElement nft_layer_encode(const WeightElement& v, const NFTParams& p);
WeightElement nft_self_attention(const WeightElement& v, const NFTParams& p);
WeightElement nft_block(const WeightElement& v, const NFTParams& p);

struct NFTPoolParams {
    std::vector<double> token;                       // length c
    std::vector<double> theta_q, theta_k, theta_v;   // each c x c
};

// Cross-attention of the learned token against every weight-space entry; zero
// query/key projections reduce to the uniform mean of projected tokens.
std::vector<double> nft_pool(const WeightElement& v, const NFTPoolParams& p);

}  // namespace wskit
