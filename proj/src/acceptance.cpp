#include "wskit/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wskit/archzoo.hpp"
#include "wskit/canonize.hpp"
#include "wskit/equivlab.hpp"
#include "wskit/neuralgraph.hpp"
#include "wskit/plregions.hpp"
#include "wskit/simulate.hpp"
#include "wskit/wscore.hpp"

namespace wskit {

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << what;
        }
    }
};

double max_abs_diff(const WeightElement& a, const WeightElement& b) {
    double m = 0.0;
    for (size_t l = 0; l < a.W.size(); ++l) {
        for (size_t t = 0; t < a.W[l].size(); ++t)
            m = std::max(m, std::fabs(a.W[l][t] - b.W[l][t]));
        for (size_t t = 0; t < a.b[l].size(); ++t)
            m = std::max(m, std::fabs(a.b[l][t] - b.b[l][t]));
    }
    return m;
}

double max_rel_diff(const WeightElement& a, const WeightElement& b) {
    double m = 0.0;
    for (size_t l = 0; l < a.W.size(); ++l) {
        for (size_t t = 0; t < a.W[l].size(); ++t)
            m = std::max(m, std::fabs(a.W[l][t] - b.W[l][t]) / (1.0 + std::fabs(b.W[l][t])));
        for (size_t t = 0; t < a.b[l].size(); ++t)
            m = std::max(m, std::fabs(a.b[l][t] - b.b[l][t]) / (1.0 + std::fabs(b.b[l][t])));
    }
    return m;
}

Architecture relu_arch(std::vector<int> dims) {
    Architecture a;
    a.dims = std::move(dims);
    a.activation = Activation::relu;
    return a;
}

std::vector<GroupElement> all_group_elements(const Architecture& arch) {
    const int L = arch.num_layers();
    std::vector<std::vector<std::vector<int>>> layer_perms(static_cast<size_t>(L - 1));
    for (int h = 0; h < L - 1; ++h) {
        std::vector<int> p(static_cast<size_t>(arch.dims[static_cast<size_t>(h) + 1]));
        std::iota(p.begin(), p.end(), 0);
        do {
            layer_perms[static_cast<size_t>(h)].push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
    }
    std::vector<GroupElement> out;
    std::vector<size_t> idx(static_cast<size_t>(L - 1), 0);
    while (true) {
        GroupElement g;
        g.perms.resize(static_cast<size_t>(L - 1));
        for (int h = 0; h < L - 1; ++h)
            g.perms[static_cast<size_t>(h)] =
                layer_perms[static_cast<size_t>(h)][idx[static_cast<size_t>(h)]];
        out.push_back(g);
        int h = L - 2;
        for (; h >= 0; --h) {
            if (++idx[static_cast<size_t>(h)] < layer_perms[static_cast<size_t>(h)].size()) break;
            idx[static_cast<size_t>(h)] = 0;
        }
        if (h < 0) break;
    }
    return out;
}

MLPSpec random_mlp(std::vector<int> dims, std::uint64_t seed, bool linear = false) {
    Architecture a;
    a.dims = std::move(dims);
    a.activation = Activation::relu;
    if (linear) a.dims = {a.dims.front(), a.dims.back()};
    return MLPSpec::from_weights(random_weights(a, 1, seed, RandomDist::normal(0.0, 0.5)));
}

// criterion 1 -----------------------------------------------------------------

void criterion_nft_separation(Check& c) {
    const SeparationDemo demo = nft_separation_demo();
    c.require(std::fabs(demo.out_v1 - 8.0 / 33.0) <= 1e-12, "out_v1 != 8/33");
    c.require(std::fabs(demo.out_v2 - 16.0 / 33.0) <= 1e-12, "out_v2 != 16/33");

    const double e1 = std::exp(1.0), e2 = std::exp(2.0);
    const double a1 = e1 / (e1 + 1.0), b1 = 1.0 / (e1 + 1.0);
    const double a2 = e2 / (e2 + 1.0), b2 = 1.0 / (e2 + 1.0);
    c.require(std::fabs(a1 - 0.73105857863) < 1e-9 && std::fabs(b1 - 0.26894142137) < 1e-9,
              "softmax(2,1,0,1) closed form drifted");
    // v1 rows are the cyclic (a,a,b,b) pattern, v2 the block (a2,a2,b2,b2) one.
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool hot1 = j == i || j == (i + 1) % 4;
            const double want1 = hot1 ? a1 : b1;
            const double printed1 = hot1 ? 0.73 : 0.27;
            c.require(std::fabs(demo.attn_v1[i][j] - want1) <= 1e-4, "v1 attention off closed form");
            c.require(std::fabs(demo.attn_v1[i][j] - printed1) <= 1e-2, "v1 attention off print");
            const bool hot2 = (i < 2) == (j < 2);
            const double want2 = hot2 ? a2 : b2;
            const double printed2 = hot2 ? 0.88 : 0.12;
            c.require(std::fabs(demo.attn_v2[i][j] - want2) <= 1e-4, "v2 attention off closed form");
            c.require(std::fabs(demo.attn_v2[i][j] - printed2) <= 1e-2, "v2 attention off print");
        }
    c.detail << "outputs " << demo.out_v1 << ", " << demo.out_v2;
}

// criterion 2 -----------------------------------------------------------------

void criterion_wl_counterexample(Check& c) {
    auto [v, w] = counterexample_wl();
    auto to_int = [](const WeightElement& e, int l) {
        std::vector<std::vector<long long>> m(static_cast<size_t>(e.rows(l)),
                                              std::vector<long long>(static_cast<size_t>(e.cols(l))));
        for (int i = 0; i < e.rows(l); ++i)
            for (int j = 0; j < e.cols(l); ++j)
                m[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    static_cast<long long>(e.w(l, i, j));
        return m;
    };
    c.require(exact_matrix_rank(to_int(v, 1)) == 3, "rank(W_2) != 3");
    c.require(exact_matrix_rank(to_int(w, 1)) == 2, "rank(W_2') != 2");

    for (GraphVariant variant : {GraphVariant::GMN, GraphVariant::NG}) {
        const bool dist = wl_distinguishable(build_graph(v, variant), build_graph(w, variant));
        c.require(!dist, "WL separated the pair");
    }
    const auto [equi, witness] = g_equivalent(v, w);
    c.require(!equi && !witness, "exhaustive search found a bogus witness");

    PL1D eight_relu;
    eight_relu.a = -10.0;
    eight_relu.b = 10.0;
    eight_relu.breakpoints = {0.0};
    eight_relu.slopes = {0.0, 8.0};
    eight_relu.intercepts = {0.0, 0.0};
    c.require(pl_equal(regions_1d(v, -10, 10), eight_relu, 1e-12), "v != 8*ReLU");
    c.require(pl_equal(regions_1d(w, -10, 10), eight_relu, 1e-12), "v' != 8*ReLU");
}

// criterion 3 -----------------------------------------------------------------

void criterion_scaling_counterexample(Check& c) {
    auto [v, w] = counterexample_scaling(2.0);
    Box box;
    box.lo = {-10.0};
    box.hi = {10.0};
    c.require(functionally_equal(v, w, box, 0, 1e-12), "pair not functionally equal");
    c.require(w1_sum_invariant(v) == 1.0, "w1_sum(v) != 1");
    c.require(w1_sum_invariant(w) == 2.0, "w1_sum(v') != 2");
    const auto [equi, witness] = g_equivalent(v, w);
    c.require(!equi && !witness, "scaling pair claimed G-equivalent");
}

// criterion 4 -----------------------------------------------------------------

struct EquivCase {
    Architecture arch;
    WeightElement v;
    GroupElement g;
};

void check_weight_op(Check& c, const EquivCase& cs, const char* name, bool bit_exact,
                     const std::function<WeightElement(const WeightElement&)>& op) {
    const WeightElement lhs = op(act(cs.g, cs.v));
    const WeightElement rhs = act(cs.g, op(cs.v));
    if (bit_exact) {
        c.require(lhs.W == rhs.W && lhs.b == rhs.b, std::string(name) + " not bit-exact");
    } else {
        const double viol = max_rel_diff(lhs, rhs);
        c.require(viol <= 1e-9, std::string(name) + " violation " + std::to_string(viol));
    }
}

// Node map induced by g: neuron (l, i) of G(v) appears as (l, inv_tau_l(i)) in
// G(act(g,v)); bias nodes and boundary neurons stay put.
int mapped_node(const NeuralGraph& g, const GroupElement& inv, int layer, int i) {
    const int L = g.arch.num_layers();
    int k = i;
    if (layer > 0 && layer < L) k = inv.perms[static_cast<size_t>(layer) - 1][static_cast<size_t>(i)];
    return g.neuron_node(layer, k);
}

void check_graph_op(Check& c, const EquivCase& cs, GraphVariant variant, const char* name,
                    const std::function<NeuralGraph(const NeuralGraph&)>& op) {
    const NeuralGraph base = op(build_graph(cs.v, variant));
    const NeuralGraph moved = op(build_graph(act(cs.g, cs.v), variant));
    const GroupElement inv = inverse(cs.g);
    const int L = cs.arch.num_layers();

    double viol = 0.0;
    auto tally = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (size_t k = 0; k < a.size(); ++k)
            viol = std::max(viol, std::fabs(a[k] - b[k]) / (1.0 + std::fabs(b[k])));
    };
    for (int layer = 0; layer <= L; ++layer)
        for (int i = 0; i < cs.arch.dims[static_cast<size_t>(layer)]; ++i)
            tally(moved.nodes[static_cast<size_t>(mapped_node(moved, inv, layer, i))],
                  base.nodes[static_cast<size_t>(base.neuron_node(layer, i))]);
    if (variant == GraphVariant::GMN)
        for (int layer = 1; layer <= L; ++layer)
            tally(moved.nodes[static_cast<size_t>(moved.bias_node(layer))],
                  base.nodes[static_cast<size_t>(base.bias_node(layer))]);

    // Edge lookup in the moved graph by (src node, dst node).
    std::map<std::pair<int, int>, const std::vector<double>*> moved_edges;
    for (const auto& e : moved.edges) moved_edges[{e.src, e.dst}] = &e.feat;
    auto map_node_id = [&](int node) {
        int acc = 0;
        for (int layer = 0; layer <= L; ++layer) {
            const int d = cs.arch.dims[static_cast<size_t>(layer)];
            if (node < acc + d) return mapped_node(moved, inv, layer, node - acc);
            acc += d;
        }
        return node;  // bias node, fixed
    };
    for (const auto& e : base.edges) {
        const auto it = moved_edges.find({map_node_id(e.src), map_node_id(e.dst)});
        if (it == moved_edges.end()) {
            c.require(false, std::string(name) + " edge missing under relabeling");
            return;
        }
        tally(*it->second, e.feat);
    }
    c.require(viol <= 1e-9, std::string(name) + " violation " + std::to_string(viol));
}

void criterion_equivariance(Check& c) {
    const std::vector<Architecture> archs = {relu_arch({1, 3, 1}), relu_arch({2, 4, 3, 2}),
                                             relu_arch({1, 4, 4, 1})};
    for (int t = 0; t < 100; ++t) {
        EquivCase cs;
        cs.arch = archs[static_cast<size_t>(t) % archs.size()];
        cs.v = random_weights(cs.arch, 1, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        cs.g = random_group_element(cs.arch, static_cast<std::uint64_t>(t) + 1000);

        check_weight_op(c, cs, "pointwise_affine", true, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::pointwise_affine({2.0}, 1, 1, {0.3}), v);
        });
        check_weight_op(c, cs, "global_sum", false, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::global_sum(), v);
        });
        check_weight_op(c, cs, "bias_sum", false, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::bias_sum(1), v);
        });
        check_weight_op(c, cs, "lower_w2b", true, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::lower_w2b(), v);
        });
        check_weight_op(c, cs, "upper_w2b", true, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::upper_w2b(), v);
        });
        check_weight_op(c, cs, "first_layer_neuron", true, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::first_layer_neuron(0), v);
        });
        check_weight_op(c, cs, "last_layer_neuron", true, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::last_layer_neuron(0), v);
        });
        check_weight_op(c, cs, "col_pool", false, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::col_pool(), v);
        });
        check_weight_op(c, cs, "row_pool", false, [](const WeightElement& v) {
            return dws_apply(DWSPrimitive::row_pool(), v);
        });
        check_weight_op(c, cs, "nfn_positional_encoding", true,
                        [](const WeightElement& v) { return nfn_positional_encoding(v); });

        NFTParams nft;
        nft.channels = 1;
        nft.kv1 = AttnProj{{0.7}, {0.4}, {1.1}};
        nft.kv2 = AttnProj{{-0.5}, {0.9}, {0.8}};
        nft.kv3 = AttnProj{{0.3}, {-0.2}, {0.6}};
        check_weight_op(c, cs, "nft_self_attention", false,
                        [&](const WeightElement& v) { return nft_self_attention(v, nft); });
        NFTParams block = nft;
        Architecture ma;
        ma.dims = {1, 3, 1};
        ma.activation = Activation::relu;
        block.mlp = MLPSpec::from_weights(
            random_weights(ma, 1, static_cast<std::uint64_t>(t) + 7, RandomDist::normal(0, 0.5)));
        check_weight_op(c, cs, "nft_block", false,
                        [&](const WeightElement& v) { return nft_block(v, block); });

        // Graph layers on the NG / GMN encodings of the same element.
        {
            const NeuralGraph probe = build_graph(cs.v, GraphVariant::NG);
            NGParams ng;
            ng.phi_m = random_mlp({2 * probe.node_dim + probe.edge_dim, 6, 3},
                                  static_cast<std::uint64_t>(t) + 11);
            ng.phi_e = random_mlp({2 * probe.node_dim + probe.edge_dim, 6, probe.edge_dim},
                                  static_cast<std::uint64_t>(t) + 12);
            ng.phi_h = random_mlp({probe.node_dim + 3, 6, 4}, static_cast<std::uint64_t>(t) + 13);
            check_graph_op(c, cs, GraphVariant::NG, "ng_layer",
                           [&](const NeuralGraph& g) { return ng_layer(g, ng); });
        }
        {
            const NeuralGraph probe = build_graph(cs.v, GraphVariant::GMN);
            const std::vector<double> u = {0.2, -0.7};
            GMNParams gm;
            gm.phi_m = random_mlp({2 * probe.node_dim + probe.edge_dim + 2, 6, 3},
                                  static_cast<std::uint64_t>(t) + 21);
            gm.phi_h = random_mlp({probe.node_dim + 3 + 2, 6, 4}, static_cast<std::uint64_t>(t) + 22);
            gm.phi_e = random_mlp({2 * probe.node_dim + probe.edge_dim + 2, 6, 5},
                                  static_cast<std::uint64_t>(t) + 23);
            gm.phi_u = random_mlp({probe.node_dim + probe.edge_dim + 2, 6, 2},
                                  static_cast<std::uint64_t>(t) + 24);
            std::vector<double> u_base, u_moved;
            check_graph_op(c, cs, GraphVariant::GMN, "gmn_layer", [&](const NeuralGraph& g) {
                auto [out, u2] = gmn_layer(g, gm, u);
                if (u_base.empty())
                    u_base = u2;
                else
                    u_moved = u2;
                return out;
            });
            if (!u_moved.empty())
                for (size_t k = 0; k < u_base.size(); ++k)
                    c.require(std::fabs(u_moved[k] - u_base[k]) <= 1e-9 * (1.0 + std::fabs(u_base[k])),
                              "gmn global feature not invariant");
        }
        if (!c.pass) {
            c.detail << " (case " << t << ")";
            return;
        }
    }
}

// criterion 5 -----------------------------------------------------------------

void criterion_realization_invariance(Check& c) {
    const std::vector<Architecture> archs = {relu_arch({1, 3, 1}), relu_arch({2, 4, 3, 2}),
                                             relu_arch({1, 4, 4, 1})};
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const Architecture& arch = archs[static_cast<size_t>(t) % archs.size()];
        const WeightElement v =
            random_weights(arch, 1, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        const GroupElement g = random_group_element(arch, static_cast<std::uint64_t>(t) + 5000);
        std::vector<double> x(static_cast<size_t>(arch.dims.front()));
        for (size_t k = 0; k < x.size(); ++k)
            x[k] = 3.0 * std::sin(0.7 * static_cast<double>(t) + 1.3 * static_cast<double>(k));
        const auto fa = realize(act(g, v), x);
        const auto fb = realize(v, x);
        for (size_t k = 0; k < fb.size(); ++k)
            worst = std::max(worst, std::fabs(fa[k] - fb[k]) / (1.0 + std::fabs(fb[k])));
    }
    c.require(worst <= 1e-9, "violation " + std::to_string(worst));
    c.detail << "max relative deviation " << worst;
}

// criterion 6 -----------------------------------------------------------------

void criterion_canonization(Check& c) {
    const Architecture arch = relu_arch({1, 3, 3, 1});
    const auto group = all_group_elements(arch);
    c.require(group.size() == 36, "wrong group size");
    for (int t = 0; t < 50 && c.pass; ++t) {
        const WeightElement v =
            random_weights(arch, 1, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        const CanonResult base = canon(v);
        c.require(max_abs_diff(act(base.g_v, v), base.representative) == 0.0, "orbit membership");
        c.require(max_abs_diff(act(inverse(base.g_v), base.representative), v) == 0.0,
                  "inverse orbit membership");
        for (const auto& h : group) {
            const CanonResult moved = canon(act(h, v));
            c.require(moved.canon5.W == base.canon5.W && moved.canon5.b == base.canon5.b,
                      "canon5 not invariant");
            c.require(moved.g_v.perms == compose(base.g_v, inverse(h)).perms, "cocycle law");
        }
    }
    WeightElement tied = WeightElement::zeros(arch, 1);
    bool threw = false;
    try {
        canon(tied);
    } catch (const Error& e) {
        threw = e.code() == "TiedBiases";
    }
    c.require(threw, "tied biases did not raise TiedBiases");
}

// criterion 7 -----------------------------------------------------------------

void criterion_ng_dws(Check& c) {
    const std::vector<Architecture> archs = {relu_arch({2, 3, 2}), relu_arch({1, 3, 1}),
                                             relu_arch({3, 5, 4, 2}), relu_arch({2, 4, 3, 2})};
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Architecture& arch = archs[static_cast<size_t>(t) % archs.size()];
        const int ch = 1 + t % 2;
        const WeightElement v =
            random_weights(arch, ch, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        const NeuralGraph probe = build_graph(v, GraphVariant::NG);
        const int in_me = 2 * probe.node_dim + probe.edge_dim;
        const int dmsg = 2 + t % 3;
        const bool linear = t % 4 == 0;
        NGParams ng;
        ng.phi_m = random_mlp({in_me, 8, dmsg}, static_cast<std::uint64_t>(t) + 31, linear);
        ng.phi_e = random_mlp({in_me, 8, probe.edge_dim}, static_cast<std::uint64_t>(t) + 32, linear);
        ng.phi_h = random_mlp({probe.node_dim + dmsg, 8, 5}, static_cast<std::uint64_t>(t) + 33, linear);
        const SimulationReport rep = verify_simulation(ng, v, 1e-9);
        worst = std::max(worst, rep.max_deviation);
        c.require(rep.pass, "config " + std::to_string(t) + " deviation " +
                                std::to_string(rep.max_deviation));
        if (t == 0) {
            // Mutation: corrupting one compiled primitive must break exactness.
            DWSProgram prog = compile_ng_to_dws(ng, v.arch, v.channels);
            prog.steps[1].mlp.W[0][0] += 0.5;
            c.require(simulation_deviation(ng, v, prog) > 1e-9,
                      "mutated program still matched the oracle");
        }
    }
    c.detail << "max deviation " << worst;
}

// criterion 8 -----------------------------------------------------------------

void criterion_graph_encodings(Check& c) {
    const WeightElement v =
        random_weights(relu_arch({1, 4, 4, 1}), 1, 0, RandomDist::uniform(-1, 1));
    const NeuralGraph gmn = build_graph(v, GraphVariant::GMN);
    c.require(gmn.num_nodes() == 13, "gmn nodes");
    c.require(gmn.edges.size() == 66, "gmn edges");
    c.require(gmn.edge_dim == 8, "gmn d_e");
    c.require(gmn.node_dim == 10, "gmn d_h");
    const NeuralGraph ng = build_graph(v, GraphVariant::NG);
    c.require(ng.num_nodes() == 10, "ng nodes");
    c.require(ng.edges.size() == 48, "ng edges");
    c.require(ng.edge_dim == 6, "ng d_e");
    c.require(ng.node_dim == 8, "ng d_h");
    for (const NeuralGraph* g : {&gmn, &ng}) {
        std::set<std::pair<int, int>> pairs;
        for (const auto& e : g->edges) pairs.insert({e.src, e.dst});
        for (const auto& e : g->edges)
            c.require(pairs.count({e.dst, e.src}) == 1, "missing reverse edge");
    }
}

// criterion 9 -----------------------------------------------------------------

void criterion_pl_regions(Check& c) {
    for (int t = 0; t < 100; ++t) {
        const int k = 1 + t % 16;
        const Architecture arch = relu_arch({1, k, 1});
        const WeightElement v =
            random_weights(arch, 1, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        const PL1D pl = regions_1d(v, -10, 10);
        const RegionBound bound = region_bound(arch);
        c.require(pl.num_regions() <= k + 1, "region count exceeds k+1");
        c.require(static_cast<unsigned long long>(k) + 1 <= bound.bound, "k+1 exceeds bound");
        double worst = 0.0;
        for (int s = 0; s < 1000; ++s) {
            const double x = -10.0 + 20.0 * static_cast<double>(s) / 999.0;
            worst = std::max(worst, std::fabs(pl_eval(pl, x) - realize(v, {x})[0]));
        }
        c.require(worst <= 1e-9, "PL evaluation drifts from realize by " + std::to_string(worst));
        if (!c.pass) {
            c.detail << " (net " << t << ")";
            return;
        }
    }
    auto [v, w] = counterexample_wl();
    for (const WeightElement* e : {&v, &w}) {
        const PL1D pl = regions_1d(*e, -10, 10);
        c.require(pl.num_regions() == 2, "counterexample region count");
        c.require(pl.breakpoints.size() == 1 && std::fabs(pl.breakpoints[0]) <= 1e-12,
                  "counterexample breakpoint");
    }
}

// criterion 10 ----------------------------------------------------------------

void criterion_tags_and_flatten(Check& c) {
    const std::vector<Architecture> archs = {relu_arch({1, 2, 1}), relu_arch({1, 3, 1}),
                                             relu_arch({2, 4, 3, 2}), relu_arch({1, 4, 4, 1}),
                                             relu_arch({3, 5, 4, 2})};
    c.require(flat_length(relu_arch({1, 4, 4, 1})) == 33, "M(1,4,4,1) != 33");
    for (int t = 0; t < 100; ++t) {
        const Architecture& arch = archs[static_cast<size_t>(t) % archs.size()];
        const WeightElement v =
            random_weights(arch, 1, static_cast<std::uint64_t>(t), RandomDist::normal(0, 1));
        const WeightElement pe = neuron_id_map(v);
        std::set<std::array<double, 4>> tags;
        long long count = 0;
        for (int l = 0; l < pe.num_layers(); ++l)
            for (int i = 0; i < pe.rows(l); ++i) {
                for (int j = 0; j < pe.cols(l); ++j) {
                    tags.insert({pe.w(l, i, j, 1), pe.w(l, i, j, 2), pe.w(l, i, j, 3), pe.w(l, i, j, 4)});
                    ++count;
                }
                tags.insert({pe.bias(l, i, 1), pe.bias(l, i, 2), pe.bias(l, i, 3), pe.bias(l, i, 4)});
                ++count;
            }
        c.require(static_cast<long long>(tags.size()) == count, "duplicate pe tags");
        const WeightElement round = unflatten(flatten(v), arch, 1);
        c.require(round.W == v.W && round.b == v.b, "flatten round trip not bit-exact");
    }
}

CriterionResult run_one(int id, const std::string& name, double time_limit,
                        const std::function<void(Check&)>& fn) {
    CriterionResult r;
    r.id = id;
    r.name = name;
    Check c;
    const auto start = Clock::now();
    try {
        fn(c);
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (time_limit > 0 && r.seconds >= time_limit)
        c.require(false, "runtime " + std::to_string(r.seconds) + "s over limit");
    r.pass = c.pass;
    r.detail = c.detail.str();
    return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance() {
    std::vector<CriterionResult> out;
    out.push_back(run_one(1, "nft-separation", 0.1, criterion_nft_separation));
    out.push_back(run_one(2, "wl-counterexample", 1.0, criterion_wl_counterexample));
    out.push_back(run_one(3, "scaling-counterexample", 0.1, criterion_scaling_counterexample));
    out.push_back(run_one(4, "equivariance-suite", 30.0, criterion_equivariance));
    out.push_back(run_one(5, "realization-invariance", 0.0, criterion_realization_invariance));
    out.push_back(run_one(6, "canonization", 0.0, criterion_canonization));
    out.push_back(run_one(7, "ng-via-dws", 10.0, criterion_ng_dws));
    out.push_back(run_one(8, "graph-encodings", 0.0, criterion_graph_encodings));
    out.push_back(run_one(9, "pl-regions", 0.0, criterion_pl_regions));
    out.push_back(run_one(10, "pe-tags-and-flatten", 0.0, criterion_tags_and_flatten));
    return out;
}

std::string acceptance_to_json(const std::vector<CriterionResult>& results, int indent) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    bool all = true;
    for (const auto& r : results) {
        arr.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        all = all && r.pass;
    }
    nlohmann::ordered_json out;
    out["criteria"] = std::move(arr);
    out["pass"] = all;
    return indent >= 0 ? out.dump(indent) : out.dump();
}

}  // namespace wskit
