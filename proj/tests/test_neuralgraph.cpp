#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "wskit/equivlab.hpp"
#include "wskit/neuralgraph.hpp"
#include "wskit/wscore.hpp"

using namespace wskit;
using namespace wskit::testing;

TEST_CASE("graph sizes and feature dims for (1,4,4,1)") {
    const WeightElement v = random_weights(relu_arch({1, 4, 4, 1}), 1, 1, RandomDist::uniform(-1, 1));
    const NeuralGraph gmn = build_graph(v, GraphVariant::GMN);
    CHECK(gmn.num_nodes() == 13);
    CHECK(gmn.edges.size() == 66);
    CHECK(gmn.edge_dim == 8);
    CHECK(gmn.node_dim == 10);
    const NeuralGraph ng = build_graph(v, GraphVariant::NG);
    CHECK(ng.num_nodes() == 10);
    CHECK(ng.edges.size() == 48);
    CHECK(ng.edge_dim == 6);
    CHECK(ng.node_dim == 8);
}

TEST_CASE("forward and reverse direction one-hots") {
    const WeightElement v = random_weights(relu_arch({1, 4, 4, 1}), 1, 2, RandomDist::uniform(-1, 1));
    const NeuralGraph g = build_graph(v, GraphVariant::GMN);
    // forward edge nu^(0)_0 -> nu^(1)_1 carries dir = e_1, its reverse e_2
    const int L = 3;
    bool saw_fwd = false, saw_bwd = false;
    for (const auto& e : g.edges) {
        if (e.src == g.neuron_node(0, 0) && e.dst == g.neuron_node(1, 1)) {
            CHECK(e.feat[1 + L] == 1.0);  // dir block after value + layer one-hot
            CHECK(e.feat[1 + L + 1] == 0.0);
            saw_fwd = true;
        }
        if (e.src == g.neuron_node(1, 1) && e.dst == g.neuron_node(0, 0)) {
            CHECK(e.feat[1 + L] == 0.0);
            CHECK(e.feat[1 + L + 1] == 1.0);
            saw_bwd = true;
        }
    }
    CHECK(saw_fwd);
    CHECK(saw_bwd);
}

TEST_CASE("NG node features carry biases with zero-padded inputs") {
    WeightElement v = WeightElement::zeros(relu_arch({1, 2, 1}), 1);
    v.bias(0, 0) = 0.25;
    v.bias(0, 1) = -0.75;
    v.bias(1, 0) = 2.0;
    const NeuralGraph g = build_graph(v, GraphVariant::NG);
    CHECK(g.nodes[static_cast<size_t>(g.neuron_node(0, 0))].back() == 0.0);
    CHECK(g.nodes[static_cast<size_t>(g.neuron_node(1, 0))].back() == 0.25);
    CHECK(g.nodes[static_cast<size_t>(g.neuron_node(1, 1))].back() == -0.75);
    CHECK(g.nodes[static_cast<size_t>(g.neuron_node(2, 0))].back() == 2.0);
}

TEST_CASE("wl_refine merges equal isolated nodes") {
    NeuralGraph g;
    g.variant = GraphVariant::NG;
    g.arch = relu_arch({1, 1});
    g.node_dim = 2;
    g.edge_dim = 0;
    g.nodes = {{1.0, 2.0}, {1.0, 2.0}};
    const WLColoring wl = wl_refine(g, 10);
    CHECK(wl.histogram.size() == 1);
    CHECK(wl.histogram[0].second == 2);
    CHECK(wl.rounds_to_stabilize == 0);
}

TEST_CASE("3-cycle vs 3-path separate after one round") {
    auto make = [](bool cycle) {
        NeuralGraph g;
        g.variant = GraphVariant::NG;
        g.arch = relu_arch({1, 1});
        g.node_dim = 1;
        g.edge_dim = 1;
        g.nodes = {{1.0}, {1.0}, {1.0}};
        auto link = [&](int a, int b) {
            g.edges.push_back({a, b, {1.0}});
            g.edges.push_back({b, a, {1.0}});
        };
        link(0, 1);
        link(1, 2);
        if (cycle) link(2, 0);
        return g;
    };
    CHECK(wl_distinguishable(make(true), make(false)));
    CHECK_FALSE(wl_distinguishable(make(true), make(true)));
}

TEST_CASE("the rank counterexample pair is WL-indistinguishable in both encodings") {
    auto [v, w] = counterexample_wl();
    for (GraphVariant variant : {GraphVariant::GMN, GraphVariant::NG}) {
        CHECK_FALSE(wl_distinguishable(build_graph(v, variant), build_graph(w, variant)));
        CHECK_FALSE(wl_distinguishable(build_graph(v, variant), build_graph(v, variant)));
    }
}

TEST_CASE("a single weight edit is visible to WL") {
    auto [v, w] = counterexample_wl();
    (void)w;
    WeightElement u = v;
    u.w(1, 0, 0) = 2.0;
    for (GraphVariant variant : {GraphVariant::GMN, GraphVariant::NG})
        CHECK(wl_distinguishable(build_graph(v, variant), build_graph(u, variant)));
}

TEST_CASE("WL histogram is invariant under the group action") {
    const Architecture arch = relu_arch({1, 3, 3, 1});
    const WeightElement v = random_weights(arch, 1, 5, RandomDist::normal(0, 1));
    for (std::uint64_t s = 0; s < 8; ++s) {
        const GroupElement g = random_group_element(arch, s);
        for (GraphVariant variant : {GraphVariant::GMN, GraphVariant::NG}) {
            CHECK_FALSE(wl_distinguishable(build_graph(v, variant), build_graph(act(g, v), variant)));
            // standalone refinement: same multiset of class sizes
            auto sizes = [&](const WeightElement& e) {
                const NeuralGraph gr = build_graph(e, variant);
                const WLColoring wl = wl_refine(gr, gr.num_nodes());
                std::multiset<long long> out;
                for (const auto& [color, count] : wl.histogram) out.insert(count);
                return out;
            };
            CHECK(sizes(v) == sizes(act(g, v)));
        }
    }
}

TEST_CASE("build_graph commutes with the action up to the induced relabeling") {
    const Architecture arch = relu_arch({2, 4, 3, 2});
    const WeightElement v = random_weights(arch, 1, 13, RandomDist::normal(0, 1));
    const int L = arch.num_layers();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const GroupElement g = random_group_element(arch, s);
        const GroupElement inv = inverse(g);
        for (GraphVariant variant : {GraphVariant::GMN, GraphVariant::NG}) {
            const NeuralGraph base = build_graph(v, variant);
            const NeuralGraph moved = build_graph(act(g, v), variant);
            auto map_neuron = [&](int layer, int i) {
                const int k = (layer > 0 && layer < L)
                                  ? inv.perms[static_cast<size_t>(layer) - 1][static_cast<size_t>(i)]
                                  : i;
                return moved.neuron_node(layer, k);
            };
            for (int layer = 0; layer <= L; ++layer)
                for (int i = 0; i < arch.dims[static_cast<size_t>(layer)]; ++i)
                    CHECK(moved.nodes[static_cast<size_t>(map_neuron(layer, i))] ==
                          base.nodes[static_cast<size_t>(base.neuron_node(layer, i))]);
            std::map<std::pair<int, int>, std::vector<double>> moved_edges;
            for (const auto& e : moved.edges) moved_edges[{e.src, e.dst}] = e.feat;
            auto map_node = [&](int node) {
                int acc = 0;
                for (int layer = 0; layer <= L; ++layer) {
                    const int d = arch.dims[static_cast<size_t>(layer)];
                    if (node < acc + d) return map_neuron(layer, node - acc);
                    acc += d;
                }
                return node;  // bias node
            };
            for (const auto& e : base.edges) {
                auto it = moved_edges.find({map_node(e.src), map_node(e.dst)});
                REQUIRE(it != moved_edges.end());
                CHECK(it->second == e.feat);
            }
        }
    }
}

TEST_CASE("refinement is monotone and stabilizes within |nodes| rounds") {
    const WeightElement v = random_weights(relu_arch({2, 4, 3, 2}), 1, 9, RandomDist::normal(0, 1));
    const NeuralGraph g = build_graph(v, GraphVariant::GMN);
    const WLColoring full = wl_refine(g, g.num_nodes());
    CHECK(full.rounds_to_stabilize <= g.num_nodes());
    size_t prev = 0;
    for (int r = 0; r <= full.rounds_to_stabilize; ++r) {
        const WLColoring wl = wl_refine(g, r);
        std::set<int> classes(wl.colors.begin(), wl.colors.end());
        CHECK(classes.size() >= prev);
        prev = classes.size();
    }
}

TEST_CASE("variant mismatch is rejected") {
    const WeightElement v = random_weights(relu_arch({1, 2, 1}), 1, 3, RandomDist::uniform(-1, 1));
    CHECK_THROWS_WITH_AS(
        wl_distinguishable(build_graph(v, GraphVariant::GMN), build_graph(v, GraphVariant::NG)),
        doctest::Contains("VariantMismatch"), Error);
}

TEST_CASE("json and edge-list exports mention every edge") {
    const WeightElement v = random_weights(relu_arch({1, 2, 1}), 1, 4, RandomDist::uniform(-1, 1));
    const NeuralGraph g = build_graph(v, GraphVariant::NG);
    const std::string js = graph_to_json(g);
    CHECK(js.find("\"edges\"") != std::string::npos);
    const std::string el = graph_to_edge_list(g);
    size_t arrows = 0, pos = 0;
    while ((pos = el.find("->", pos)) != std::string::npos) {
        ++arrows;
        pos += 2;
    }
    CHECK(arrows == g.edges.size());
}
