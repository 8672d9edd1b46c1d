// wskit - reproducible weight-space checks with JSON reports on stdout.
// Exit codes: 0 pass, 1 check failure, 2 usage error, 3 JSON parse error.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wskit/acceptance.hpp"
#include "wskit/archzoo.hpp"
#include "wskit/canonize.hpp"
#include "wskit/equivlab.hpp"
#include "wskit/neuralgraph.hpp"
#include "wskit/plregions.hpp"
#include "wskit/simulate.hpp"
#include "wskit/wscore.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace wskit;

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("WSKIT_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

std::vector<double> parse_vector(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<int> parse_dims(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

// "1:1,0;2:2,0,1" -> layer (1-based hidden index) : image list.
GroupElement parse_perm_spec(const std::string& spec, const Architecture& arch) {
    GroupElement g = GroupElement::identity(arch);
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ';')) {
        if (part.empty()) continue;
        const auto colon = part.find(':');
        if (colon == std::string::npos) fail("BadPermSpec", "expected layer:image-list");
        const int layer = std::stoi(part.substr(0, colon));
        if (layer < 1 || layer > arch.num_layers() - 1)
            fail("BadPermSpec", "hidden layer index out of range");
        std::vector<int> image;
        std::stringstream is(part.substr(colon + 1));
        std::string tok;
        while (std::getline(is, tok, ',')) image.push_back(std::stoi(tok));
        g.perms[static_cast<size_t>(layer) - 1] = image;
    }
    g.validate(arch);
    return g;
}

struct Report {
    std::string command;
    std::uint64_t digest = 0;
    json results;
    bool pass = true;
};

int emit(const Report& r, bool pretty, std::chrono::steady_clock::time_point start) {
    json out;
    out["command"] = r.command;
    {
        std::ostringstream os;
        os << std::hex << r.digest;
        out["inputs_digest"] = os.str();
    }
    out["results"] = r.results;
    out["pass"] = r.pass;
    std::cout << (pretty ? out.dump(2) : out.dump()) << "\n";
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wall_time_ms " << ms << "\n";
    return r.pass ? 0 : 1;
}

json weights_json(const WeightElement& v) { return json::parse(weights_to_json(v)); }

}  // namespace

int main(int argc, char** argv) {
    const auto start = std::chrono::steady_clock::now();
    CLI::App app{"wskit - weight-space symmetry toolkit"};
    app.require_subcommand(1);
    bool pretty = false;
    app.add_flag("--pretty", pretty, "indent the JSON report");

    std::string weights_path, weights_path_b, xs, perm_spec, variant = "gmn", which, interval = "-10,10", arch_spec;
    double tol = 0.0;
    bool run_wl = false, exact_1d = false;
    std::uint64_t seed = default_seed();

    auto* forward = app.add_subcommand("forward", "evaluate f_v(x)");
    forward->add_option("weights", weights_path)->required();
    forward->add_option("--x", xs, "comma-separated input vector")->required();

    auto* act_cmd = app.add_subcommand("act", "apply a hidden-neuron permutation");
    act_cmd->add_option("weights", weights_path)->required();
    act_cmd->add_option("--perm", perm_spec, "layer:image-list;... e.g. \"1:1,0;2:2,0,1\"")->required();

    auto* canon_cmd = app.add_subcommand("canonize", "orbit representative and witness");
    canon_cmd->add_option("weights", weights_path)->required();

    auto* gp = app.add_subcommand("gp-check", "general position check");
    gp->add_option("weights", weights_path)->required();
    gp->add_option("--tol", tol, "bias separation tolerance (default 0)");

    auto* graph = app.add_subcommand("graph", "GMN/NG graph encoding");
    graph->add_option("weights", weights_path)->required();
    graph->add_option("--variant", variant, "gmn|ng")->check(CLI::IsMember({"gmn", "ng"}));
    graph->add_flag("--wl", run_wl, "also run 1-WL refinement");

    auto* counter = app.add_subcommand("counterexample", "built-in separation witnesses");
    counter->add_option("which", which, "scaling|wl|nft")
        ->required()
        ->check(CLI::IsMember({"scaling", "wl", "nft"}));

    auto* equiv = app.add_subcommand("equiv-test", "functional and G-equivalence");
    equiv->add_option("a", weights_path)->required();
    equiv->add_option("b", weights_path_b)->required();
    equiv->add_flag("--exact-1d", exact_1d, "require the exact PL comparison");

    auto* sim = app.add_subcommand("simulate-ng-dws", "NG layer via DWS program");
    sim->add_option("--seed", seed, "RNG seed (default WSKIT_SEED or 0)");
    sim->add_option("--arch", arch_spec, "comma-separated dims, e.g. 2,3,2")->required();

    auto* regions = app.add_subcommand("regions", "exact PL regions of a 1-D ReLU net");
    regions->add_option("weights", weights_path)->required();
    regions->add_option("--interval", interval, "a,b (default -10,10)");

    app.add_subcommand("suite", "run the full acceptance suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    Report rep;
    try {
        if (forward->parsed()) {
            rep.command = "forward";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text + "|" + xs);
            const WeightElement v = weights_from_json(text);
            rep.results["output"] = realize(v, parse_vector(xs));
        } else if (act_cmd->parsed()) {
            rep.command = "act";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text + "|" + perm_spec);
            const WeightElement v = weights_from_json(text);
            const GroupElement g = parse_perm_spec(perm_spec, v.arch);
            rep.results["element"] = weights_json(act(g, v));
        } else if (canon_cmd->parsed()) {
            rep.command = "canonize";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text);
            const CanonResult cr = canon(weights_from_json(text));
            rep.results["representative"] = weights_json(cr.representative);
            rep.results["g_v"] = cr.g_v.perms;
        } else if (gp->parsed()) {
            rep.command = "gp-check";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text + "|" + std::to_string(tol));
            const bool ok = is_general_position(weights_from_json(text), tol);
            rep.results["general_position"] = ok;
            rep.pass = ok;
        } else if (graph->parsed()) {
            rep.command = "graph";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text + "|" + variant);
            const NeuralGraph g = build_graph(weights_from_json(text),
                                              variant == "gmn" ? GraphVariant::GMN : GraphVariant::NG);
            rep.results["graph"] = json::parse(graph_to_json(g));
            if (run_wl) {
                const WLColoring wl = wl_refine(g, g.num_nodes());
                rep.results["wl"] = {{"rounds", wl.rounds_to_stabilize},
                                     {"histogram", wl.histogram}};
            }
        } else if (counter->parsed()) {
            rep.command = "counterexample " + which;
            rep.digest = fnv1a(which);
            if (which == "scaling") {
                auto [v, w] = counterexample_scaling(2.0);
                Box box;
                box.lo = {-10};
                box.hi = {10};
                WitnessReport wr;
                wr.name = "scaling";
                wr.functionally_equal = functionally_equal(v, w, box, 0, 1e-12);
                wr.g_equivalent = g_equivalent(v, w).first;
                wr.invariant_left = w1_sum_invariant(v);
                wr.invariant_right = w1_sum_invariant(w);
                wr.notes = "positive homogeneity pair, lambda = 2";
                rep.results = json::parse(witness_to_json(wr));
                rep.pass = *wr.functionally_equal && !*wr.g_equivalent &&
                           *wr.invariant_left == 1.0 && *wr.invariant_right == 2.0;
            } else if (which == "wl") {
                auto [v, w] = counterexample_wl();
                auto to_int = [](const WeightElement& e) {
                    std::vector<std::vector<long long>> m(4, std::vector<long long>(4));
                    for (int i = 0; i < 4; ++i)
                        for (int j = 0; j < 4; ++j)
                            m[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                                static_cast<long long>(e.w(1, i, j));
                    return m;
                };
                WitnessReport wr;
                wr.name = "wl";
                wr.rank_left = exact_matrix_rank(to_int(v));
                wr.rank_right = exact_matrix_rank(to_int(w));
                wr.g_equivalent = g_equivalent(v, w).first;
                wr.wl_distinguishable =
                    wl_distinguishable(build_graph(v, GraphVariant::NG), build_graph(w, GraphVariant::NG)) ||
                    wl_distinguishable(build_graph(v, GraphVariant::GMN), build_graph(w, GraphVariant::GMN));
                Box box;
                box.lo = {-10};
                box.hi = {10};
                wr.functionally_equal = functionally_equal(v, w, box, 0, 1e-12);
                rep.results = json::parse(witness_to_json(wr));
                rep.pass = *wr.rank_left == 3 && *wr.rank_right == 2 && !*wr.g_equivalent &&
                           !*wr.wl_distinguishable && *wr.functionally_equal;
            } else {
                const SeparationDemo demo = nft_separation_demo();
                rep.results["outputs"] = {demo.out_v1, demo.out_v2};
                rep.results["attention_v1"] = demo.attn_v1;
                rep.results["attention_v2"] = demo.attn_v2;
                rep.pass = std::fabs(demo.out_v1 - 8.0 / 33.0) <= 1e-12 &&
                           std::fabs(demo.out_v2 - 16.0 / 33.0) <= 1e-12;
            }
        } else if (equiv->parsed()) {
            rep.command = "equiv-test";
            const std::string ta = read_file(weights_path);
            const std::string tb = read_file(weights_path_b);
            rep.digest = fnv1a(ta + "|" + tb);
            const WeightElement a = weights_from_json(ta);
            const WeightElement b = weights_from_json(tb);
            Box box;
            box.lo.assign(static_cast<size_t>(a.arch.dims.front()), -10.0);
            box.hi.assign(static_cast<size_t>(a.arch.dims.front()), 10.0);
            if (exact_1d && (a.arch.dims.front() != 1 || a.arch.dims.back() != 1 ||
                             a.arch.activation != Activation::relu))
                fail("UnsupportedArch", "--exact-1d needs a scalar 1-D ReLU net");
            WitnessReport wr;
            wr.name = "equiv-test";
            wr.functionally_equal = functionally_equal(a, b, box, 512, 1e-9);
            const auto [ge, witness] = g_equivalent(a, b);
            wr.g_equivalent = ge;
            rep.results = json::parse(witness_to_json(wr));
            if (witness) rep.results["witness"] = witness->perms;
        } else if (sim->parsed()) {
            rep.command = "simulate-ng-dws";
            rep.digest = fnv1a(arch_spec + "|" + std::to_string(seed));
            Architecture arch;
            arch.dims = parse_dims(arch_spec);
            arch.activation = Activation::relu;
            const WeightElement v = random_weights(arch, 1, seed, RandomDist::normal(0, 1));
            const NeuralGraph probe = build_graph(v, GraphVariant::NG);
            NGParams ng;
            const int in_me = 2 * probe.node_dim + probe.edge_dim;
            Architecture am, ae, ah;
            am.dims = {in_me, 8, 3};
            ae.dims = {in_me, 8, probe.edge_dim};
            ah.dims = {probe.node_dim + 3, 8, 4};
            am.activation = ae.activation = ah.activation = Activation::relu;
            ng.phi_m = MLPSpec::from_weights(random_weights(am, 1, seed + 1, RandomDist::normal(0, 0.5)));
            ng.phi_e = MLPSpec::from_weights(random_weights(ae, 1, seed + 2, RandomDist::normal(0, 0.5)));
            ng.phi_h = MLPSpec::from_weights(random_weights(ah, 1, seed + 3, RandomDist::normal(0, 0.5)));
            const SimulationReport r = verify_simulation(ng, v, 1e-9);
            rep.results = json::parse(simulation_report_to_json(r));
            rep.pass = r.pass;
        } else if (regions->parsed()) {
            rep.command = "regions";
            const std::string text = read_file(weights_path);
            rep.digest = fnv1a(text + "|" + interval);
            const auto ab = parse_vector(interval);
            if (ab.size() != 2) fail("BadInterval", "--interval expects a,b");
            const PL1D pl = regions_1d(weights_from_json(text), ab[0], ab[1]);
            rep.results = json::parse(pl_to_json(pl));
        } else {  // suite
            rep.command = "suite";
            rep.digest = fnv1a("suite");
            const auto results = run_acceptance();
            rep.results = json::parse(acceptance_to_json(results));
            rep.pass = rep.results["pass"].get<bool>();
        }
    } catch (const Error& e) {
        json out;
        out["command"] = rep.command;
        out["error"] = {{"code", e.code()}, {"message", e.what()}};
        std::cout << (pretty ? out.dump(2) : out.dump()) << "\n";
        return e.code() == "JsonParse" ? 3 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return emit(rep, pretty, start);
}
