#include "wskit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "wskit/neuralgraph.hpp"
#include "wskit/wscore.hpp"

namespace wskit {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Pointwise-MLP assembler.
//
// Builds one ReLU MLP that evaluates several sub-MLPs on selected input
// channels in parallel. Blocks marked gated are multiplied by an exact {0,1}
// gate (the sum of the gate channels) via
//   y = ReLU(g - M*(1-gate)) - ReLU(-g - M*(1-gate)),
// which is bit-exact for |g| <= M. Ungated blocks use the same split with no
// M term, which is the exact identity. Shorter blocks are padded with
// ReLU-pair identity carries.

struct GateBlock {
    std::vector<int> sel;  // input channels the sub-MLP consumes, in order
    MLPSpec phi;
    bool gated = false;
};

MLPSpec identity_mlp(int n) {
    Architecture a;
    a.dims = {n, n};
    a.activation = Activation::relu;
    MLPSpec m = MLPSpec::zeros(a);
    for (int i = 0; i < n; ++i) m.w(0, i, i) = 1.0;
    return m;
}

struct Wire {
    // Current representation of one block inside the assembled hidden state.
    // plain: channels hold the sub-MLP's last hidden activations (nonnegative)
    // pairs: channels hold (p_0, n_0, p_1, n_1, ...) with value_i = p_i - n_i
    enum class Enc { input, plain, pairs } enc = Enc::input;
    std::vector<int> chans;  // positions in the current hidden layer
};

class Assembler {
public:
    Assembler(int in_dim, std::vector<GateBlock> blocks, std::vector<int> gate_channels,
              double bound)
        : in_dim_(in_dim), blocks_(std::move(blocks)), gate_sel_(std::move(gate_channels)),
          bound_(bound) {}

    MLPSpec build() {
        int max_hidden = 0;
        for (const auto& b : blocks_)
            max_hidden = std::max(max_hidden, b.phi.arch.num_layers() - 1);
        const bool gated = !gate_sel_.empty();
        // One extra layer turns the gate sum into an exact complement wire.
        const int t_gate = std::max(max_hidden + 1, gated ? 2 : 1);

        std::vector<Wire> wires(blocks_.size());
        for (auto& w : wires) w.enc = Wire::Enc::input;
        int gate_wire = -1;

        dims_.push_back(in_dim_);
        for (int t = 1; t < t_gate; ++t) {
            begin_layer();
            for (size_t bi = 0; bi < blocks_.size(); ++bi) advance_block(bi, wires[bi], t);
            if (gated) {
                if (t == 1) {
                    // g10 = ReLU(1 - sum of gate channels)
                    const int r = new_row(1.0);
                    for (int s : gate_sel_) coef(r, s, -1.0);
                    gate_wire = r;
                } else {
                    const int r = new_row(0.0);
                    coef(r, gate_wire, 1.0);
                    gate_wire = r;
                }
            }
            end_layer();
        }

        // Gating layer: fold every block's final affine into (z1, z2) pairs.
        begin_layer();
        std::vector<std::pair<int, int>> outs;  // (z1 base, width) per block
        for (size_t bi = 0; bi < blocks_.size(); ++bi) {
            const GateBlock& b = blocks_[bi];
            const MLPSpec& phi = b.phi;
            const int last = phi.arch.num_layers() - 1;
            const int width = phi.out_dim();
            const int base = next_row_;
            for (int sign = 0; sign < 2; ++sign) {
                for (int k = 0; k < width; ++k) {
                    const double sg = sign == 0 ? 1.0 : -1.0;
                    const int r = new_row(sg * phi.b[last][static_cast<size_t>(k)]);
                    fold_affine(r, wires[bi], b, last, k, sg);
                    if (b.gated) coef(r, gate_wire, -bound_);
                }
            }
            outs.emplace_back(base, width);
        }
        end_layer();

        // Output layer: out = z1 - z2 per channel.
        begin_layer();
        for (size_t bi = 0; bi < blocks_.size(); ++bi) {
            const auto [base, width] = outs[bi];
            for (int k = 0; k < width; ++k) {
                const int r = new_row(0.0);
                coef(r, base + k, 1.0);
                coef(r, base + width + k, -1.0);
            }
        }
        end_layer();

        MLPSpec out;
        out.arch.dims = dims_;
        out.arch.activation = Activation::relu;
        out.W = std::move(Ws_);
        out.b = std::move(bs_);
        return out;
    }

private:
    void begin_layer() {
        rows_.clear();
        biases_.clear();
        next_row_ = 0;
    }
    void end_layer() {
        const int in_w = dims_.back();
        dims_.push_back(next_row_);
        std::vector<double> W(static_cast<size_t>(next_row_) * in_w, 0.0);
        for (const auto& [r, s, val] : rows_) W[static_cast<size_t>(r) * in_w + s] += val;
        Ws_.push_back(std::move(W));
        bs_.push_back(biases_);
    }
    int new_row(double bias) {
        biases_.push_back(bias);
        return next_row_++;
    }
    void coef(int row, int src, double val) { rows_.emplace_back(row, src, val); }

    // Add phi's layer `layer` row `k` (scaled by sg) against a wire state.
    void fold_affine(int r, const Wire& w, const GateBlock& b, int layer, int k, double sg) {
        const MLPSpec& phi = b.phi;
        for (int j = 0; j < phi.cols(layer); ++j) {
            const double coeff = sg * phi.w(layer, k, j);
            switch (w.enc) {
                case Wire::Enc::input: coef(r, b.sel[static_cast<size_t>(j)], coeff); break;
                case Wire::Enc::plain: coef(r, w.chans[static_cast<size_t>(j)], coeff); break;
                case Wire::Enc::pairs:
                    coef(r, w.chans[static_cast<size_t>(2 * j)], coeff);
                    coef(r, w.chans[static_cast<size_t>(2 * j) + 1], -coeff);
                    break;
            }
        }
    }

    void advance_block(size_t bi, Wire& w, int t) {
        const GateBlock& b = blocks_[bi];
        const MLPSpec& phi = b.phi;
        const int hidden = phi.arch.num_layers() - 1;
        if (t <= hidden) {
            // The block's own hidden layer t (1-based).
            std::vector<int> next;
            next.reserve(static_cast<size_t>(phi.rows(t - 1)));
            for (int k = 0; k < phi.rows(t - 1); ++k) {
                const int r = new_row(phi.b[t - 1][static_cast<size_t>(k)]);
                fold_affine(r, w, b, t - 1, k, 1.0);
                next.push_back(r);
            }
            w.enc = Wire::Enc::plain;
            w.chans = std::move(next);
            return;
        }
        // Carry: inputs split into pairs once, nonnegative states stay plain.
        if (w.enc == Wire::Enc::input) {
            std::vector<int> next;
            next.reserve(b.sel.size() * 2);
            for (int s : b.sel) {
                const int rp = new_row(0.0);
                coef(rp, s, 1.0);
                const int rn = new_row(0.0);
                coef(rn, s, -1.0);
                next.push_back(rp);
                next.push_back(rn);
            }
            w.enc = Wire::Enc::pairs;
            w.chans = std::move(next);
            return;
        }
        std::vector<int> next;
        next.reserve(w.chans.size());
        for (int s : w.chans) {
            const int r = new_row(0.0);
            coef(r, s, 1.0);
            next.push_back(r);
        }
        w.chans = std::move(next);
    }

    int in_dim_;
    std::vector<GateBlock> blocks_;
    std::vector<int> gate_sel_;
    double bound_;

    std::vector<int> dims_;
    std::vector<std::vector<double>> Ws_, bs_;
    std::vector<std::tuple<int, int, double>> rows_;
    std::vector<double> biases_;
    int next_row_ = 0;
};

MLPSpec assemble_pointwise(int in_dim, std::vector<GateBlock> blocks,
                           std::vector<int> gate_channels, double bound) {
    for (const auto& b : blocks) {
        if (b.phi.arch.num_layers() > 1 && b.phi.arch.activation != Activation::relu)
            fail("UnsupportedArch", "compiled update MLPs must use relu hidden activations");
        if (static_cast<int>(b.sel.size()) != b.phi.in_dim())
            fail("DimMismatch", "selection width differs from sub-MLP input dim");
        if (b.gated && gate_channels.empty())
            fail("DimMismatch", "gated block without gate channels");
        for (int s : b.sel)
            if (s < 0 || s >= in_dim) fail("DimMismatch", "selection channel out of range");
    }
    return Assembler(in_dim, std::move(blocks), std::move(gate_channels), bound).build();
}

std::vector<int> iota_range(int from, int width) {
    std::vector<int> v(static_cast<size_t>(width));
    std::iota(v.begin(), v.end(), from);
    return v;
}

struct StageDims {
    int L, d0, dL, T, de, dh, dmsg, dhp;
    int c1, c2, c3, c4;
};

StageDims stage_dims(const NGParams& params, const Architecture& arch, int c_in) {
    StageDims s{};
    s.L = arch.num_layers();
    s.d0 = arch.dims.front();
    s.dL = arch.dims.back();
    s.T = s.d0 + s.dL + 1;
    s.de = c_in + s.L + 2;
    s.dh = (s.L + 1) + s.T + c_in;
    if (params.phi_m.in_dim() != 2 * s.dh + s.de || params.phi_e.in_dim() != 2 * s.dh + s.de)
        fail("DimMismatch", "phi_m/phi_e must take 2*d_h + d_e inputs");
    if (params.phi_e.out_dim() != s.de)
        fail("DimMismatch", "phi_e must output d_e channels to keep the packed layout");
    s.dmsg = params.phi_m.out_dim();
    if (params.phi_h.in_dim() != s.dh + s.dmsg)
        fail("DimMismatch", "phi_h must take d_h + d_msg inputs");
    s.dhp = params.phi_h.out_dim();
    s.c1 = 2 * s.de + 2 * s.dh;
    s.c2 = 2 * (s.de + s.dmsg) + s.dh;
    s.c3 = 2 * s.de + s.dh + s.dmsg;
    s.c4 = 2 * s.de + s.dhp;
    return s;
}

// Constant blocks of the packing stage. Values depend only on the layer index,
// the entry kind, and boundary (input/output) neuron indices, so they are
// fixed by every hidden-neuron permutation.
WeightElement const_edge_tags(const Architecture& arch, int L, bool forward) {
    WeightElement c = WeightElement::zeros(arch, L + 2);
    for (int l = 0; l < L; ++l)
        for (int i = 0; i < c.rows(l); ++i)
            for (int j = 0; j < c.cols(l); ++j) {
                c.w(l, i, j, l) = 1.0;
                c.w(l, i, j, forward ? L : L + 1) = 1.0;
            }
    return c;
}

WeightElement const_node_tags(const Architecture& arch, const StageDims& s, bool target_side) {
    // [nlayer one-hot (L+1), ntype one-hot (T)]
    WeightElement c = WeightElement::zeros(arch, s.L + 1 + s.T);
    auto ntype = [&](int node_layer, int idx) {
        if (node_layer == 0) return idx;              // in_idx
        if (node_layer == s.L) return s.d0 + idx;     // out_idx
        return s.T - 1;                               // hidden
    };
    for (int l = 0; l < s.L; ++l) {
        for (int i = 0; i < c.rows(l); ++i) {
            for (int j = 0; j < c.cols(l); ++j) {
                const int node_layer = target_side ? l + 1 : l;
                const int idx = target_side ? i : j;
                c.w(l, i, j, node_layer) = 1.0;
                c.w(l, i, j, s.L + 1 + ntype(node_layer, idx)) = 1.0;
            }
            if (target_side) {
                c.bias(l, i, l + 1) = 1.0;
                c.bias(l, i, s.L + 1 + ntype(l + 1, i)) = 1.0;
            }
        }
    }
    return c;
}

}  // namespace

DWSProgram compile_ng_to_dws(const NGParams& params, const Architecture& arch, int channels,
                             double gate_bound) {
    arch.validate();
    const StageDims s = stage_dims(params, arch, channels);
    const int c_in = channels;

    // L1: [e_fwd, e_bwd, h_src, h_tgt] on weights, [.., h] on biases.
    DWSPrimitive l1 = DWSPrimitive::concat({
        DWSPrimitive::identity(c_in),                              // e_fwd: value
        DWSPrimitive::const_channels(const_edge_tags(arch, s.L, true)),
        DWSPrimitive::identity(c_in),                              // e_bwd: value
        DWSPrimitive::const_channels(const_edge_tags(arch, s.L, false)),
        DWSPrimitive::const_channels(const_node_tags(arch, s, false)),  // h_src tags
        DWSPrimitive::lower_w2b(),                                      // h_src bias block
        DWSPrimitive::const_channels(const_node_tags(arch, s, true)),   // h_tgt tags
        DWSPrimitive::upper_w2b(),                                      // h_tgt bias block
    });

    // M2: gated (phi_m, phi_e) on both directions plus the node-feature carry.
    // Channel map inside c1:
    //   e_fwd value [0,c_in), layer one-hot [c_in, c_in+L), dir [c_in+L, de)
    //   e_bwd [de, 2de), h_src [2de, 2de+dh), h_tgt [2de+dh, c1)
    const std::vector<int> e_fwd = iota_range(0, s.de);
    const std::vector<int> e_bwd = iota_range(s.de, s.de);
    const std::vector<int> h_src = iota_range(2 * s.de, s.dh);
    const std::vector<int> h_tgt = iota_range(2 * s.de + s.dh, s.dh);
    auto sel_msg = [&](const std::vector<int>& head, const std::vector<int>& tail,
                       const std::vector<int>& edge) {
        std::vector<int> sel;
        sel.insert(sel.end(), head.begin(), head.end());
        sel.insert(sel.end(), tail.begin(), tail.end());
        sel.insert(sel.end(), edge.begin(), edge.end());
        return sel;
    };
    std::vector<GateBlock> m2_blocks;
    m2_blocks.push_back({sel_msg(h_tgt, h_src, e_fwd), params.phi_m, true});  // m_fwd
    m2_blocks.push_back({sel_msg(h_tgt, h_src, e_fwd), params.phi_e, true});  // e'_fwd
    m2_blocks.push_back({sel_msg(h_src, h_tgt, e_bwd), params.phi_m, true});  // m_bwd
    m2_blocks.push_back({sel_msg(h_src, h_tgt, e_bwd), params.phi_e, true});  // e'_bwd
    m2_blocks.push_back({h_tgt, identity_mlp(s.dh), false});                  // node carry
    DWSPrimitive m2 = DWSPrimitive::pointwise_mlp(
        assemble_pointwise(s.c1, std::move(m2_blocks), iota_range(c_in, s.L), gate_bound));

    // L3: keep e', pool messages. c2 layout: [m_fwd, e'_fwd, m_bwd, e'_bwd, h].
    const int off_m_fwd = 0;
    const int off_e_fwd = s.dmsg;
    const int off_m_bwd = s.dmsg + s.de;
    const int off_e_bwd = 2 * s.dmsg + s.de;
    const int off_h = 2 * (s.dmsg + s.de);
    std::vector<double> sel_e(static_cast<size_t>(s.c2) * (2 * s.de), 0.0);
    for (int k = 0; k < s.de; ++k) {
        sel_e[static_cast<size_t>(off_e_fwd + k) * (2 * s.de) + k] = 1.0;
        sel_e[static_cast<size_t>(off_e_bwd + k) * (2 * s.de) + (s.de + k)] = 1.0;
    }
    std::vector<double> sel_h(static_cast<size_t>(s.c2) * s.dh, 0.0);
    for (int k = 0; k < s.dh; ++k) sel_h[static_cast<size_t>(off_h + k) * s.dh + k] = 1.0;
    DWSPrimitive l3 = DWSPrimitive::concat({
        DWSPrimitive::pointwise_affine(std::move(sel_e), s.c2, 2 * s.de),
        DWSPrimitive::pointwise_affine(std::move(sel_h), s.c2, s.dh),
        DWSPrimitive::sum_combine({DWSPrimitive::col_pool(off_m_fwd, s.dmsg),
                                   DWSPrimitive::row_pool(off_m_bwd, s.dmsg)}),
    });

    // M4: keep e', apply phi_h to [h, s].
    std::vector<GateBlock> m4_blocks;
    m4_blocks.push_back({iota_range(0, 2 * s.de), identity_mlp(2 * s.de), false});
    m4_blocks.push_back({iota_range(2 * s.de, s.dh + s.dmsg), params.phi_h, false});
    DWSPrimitive m4 =
        DWSPrimitive::pointwise_mlp(assemble_pointwise(s.c3, std::move(m4_blocks), {}, gate_bound));

    DWSProgram prog;
    prog.input_channels = c_in;
    prog.output_channels = s.c4;
    prog.steps = {std::move(l1), std::move(m2), std::move(l3), std::move(m4)};
    return prog;
}

double simulation_deviation(const NGParams& params, const WeightElement& v,
                            const DWSProgram& prog) {
    validate(v);
    const StageDims s = stage_dims(params, v.arch, v.channels);
    const NeuralGraph g = build_graph(v, GraphVariant::NG);
    const NeuralGraph ref = ng_layer(g, params);
    const WeightElement out = dws_run(prog, v);
    if (out.channels != s.c4) fail("ChannelMismatch", "compiled program emitted wrong channel count");

    double dev = 0.0;
    // Edge features: forward at channels [0, de), backward at [de, 2de).
    size_t e = 0;
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            for (int j = 0; j < v.cols(l); ++j) {
                const auto& fwd = ref.edges[e++].feat;
                const auto& bwd = ref.edges[e++].feat;
                for (int k = 0; k < s.de; ++k) {
                    dev = std::max(dev, std::fabs(out.w(l, i, j, k) - fwd[static_cast<size_t>(k)]));
                    dev = std::max(dev,
                                   std::fabs(out.w(l, i, j, s.de + k) - bwd[static_cast<size_t>(k)]));
                }
            }
        }
    }
    // Node features for layers 1..L live in the bias channels.
    for (int l = 0; l < v.num_layers(); ++l) {
        for (int i = 0; i < v.rows(l); ++i) {
            const auto& h = ref.nodes[static_cast<size_t>(ref.neuron_node(l + 1, i))];
            for (int k = 0; k < s.dhp; ++k)
                dev = std::max(dev, std::fabs(out.bias(l, i, 2 * s.de + k) - h[static_cast<size_t>(k)]));
        }
    }
    return dev;
}

SimulationReport verify_simulation(const NGParams& params, const WeightElement& v, double tol) {
    const StageDims s = stage_dims(params, v.arch, v.channels);
    SimulationReport rep;
    rep.arch = v.arch;
    rep.c_in = v.channels;
    rep.c1 = s.c1;
    rep.c2 = s.c2;
    rep.c3 = s.c3;
    rep.c4 = s.c4;
    rep.max_deviation =
        simulation_deviation(params, v, compile_ng_to_dws(params, v.arch, v.channels));
    rep.pass = rep.max_deviation <= tol;
    return rep;
}

std::string simulation_report_to_json(const SimulationReport& r, int indent) {
    json out;
    out["dims"] = r.arch.dims;
    out["activation"] = to_string(r.arch.activation);
    out["channels"] = {{"c_in", r.c_in}, {"c1", r.c1}, {"c2", r.c2}, {"c3", r.c3}, {"c4", r.c4}};
    out["max_deviation"] = r.max_deviation;
    out["pass"] = r.pass;
    return indent >= 0 ? out.dump(indent) : out.dump();
}

}  // namespace wskit
