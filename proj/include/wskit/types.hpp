#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wskit {

// All failures carry a stable machine-readable code (e.g. "ShapeMismatch")
// next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] void fail(const std::string& code, const std::string& what);

enum class Activation { relu, tanh, identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
double apply_activation(Activation a, double x);

// Layer widths d_0..d_L plus the activation applied after every layer except
// the last. L = dims.size()-1 is the number of affine layers.
struct Architecture {
    std::vector<int> dims;
    Activation activation = Activation::relu;

    int num_layers() const { return static_cast<int>(dims.size()) - 1; }
    int width(int layer) const { return dims[static_cast<size_t>(layer)]; }
    bool operator==(const Architecture& o) const {
        return dims == o.dims && activation == o.activation;
    }
    void validate() const;
};

// Per-layer weight/bias tensors with a feature-channel axis (c >= 1).
//
// Code uses 0-based layer indices: W[l] is the (l+1)-th affine layer, shaped
// d_{l+1} x d_l x c with rows indexed by target neuron and columns by source
// neuron; b[l] is shaped d_{l+1} x c. Channels are innermost in storage.
struct WeightElement {
    Architecture arch;
    int channels = 1;
    std::vector<std::vector<double>> W;
    std::vector<std::vector<double>> b;

    static WeightElement zeros(const Architecture& arch, int channels = 1);

    int num_layers() const { return arch.num_layers(); }
    int rows(int l) const { return arch.dims[static_cast<size_t>(l) + 1]; }
    int cols(int l) const { return arch.dims[static_cast<size_t>(l)]; }

    size_t widx(int l, int i, int j, int k = 0) const {
        return (static_cast<size_t>(i) * cols(l) + static_cast<size_t>(j)) *
                   channels +
               static_cast<size_t>(k);
    }
    size_t bidx(int /*l*/, int i, int k = 0) const {
        return static_cast<size_t>(i) * channels + static_cast<size_t>(k);
    }
    double w(int l, int i, int j, int k = 0) const { return W[l][widx(l, i, j, k)]; }
    double& w(int l, int i, int j, int k = 0) { return W[l][widx(l, i, j, k)]; }
    double bias(int l, int i, int k = 0) const { return b[l][bidx(l, i, k)]; }
    double& bias(int l, int i, int k = 0) { return b[l][bidx(l, i, k)]; }
};

// Tuple of hidden-layer permutations. perms[h] acts on hidden layer h+1 (width
// d_{h+1}) and is stored as an image array; the action gathers, never
// multiplies matrices: act(g, v).b[h][i] = v.b[h][perms[h][i]].
struct GroupElement {
    std::vector<std::vector<int>> perms;

    static GroupElement identity(const Architecture& arch);
    bool is_identity() const;
    void validate(const Architecture& arch) const;
};

// Canonical flattening of a weight element into length M*c, where
// M = sum_l d_l(1+d_{l-1}). Entry order: layer-major; within a layer the
// weight block comes first in source-major order (source index outer, target
// index inner), then the bias block; channels are innermost. This is the same
// order the canonization sort produces, which is what makes the sorted rows
// land back in place under unflatten.
struct FlatVector {
    std::vector<double> values;

    static constexpr const char* layout =
        "layer-major; per layer: weights source-major, then biases; channels innermost";
};

}  // namespace wskit
