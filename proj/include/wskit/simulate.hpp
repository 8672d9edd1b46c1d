#pragma once

#include <string>

#include "wskit/archzoo.hpp"
#include "wskit/types.hpp"

namespace wskit {

struct SimulationReport {
    Architecture arch;
    int c_in = 0;
    int c1 = 0, c2 = 0, c3 = 0, c4 = 0;  // staged channel counts
    double max_deviation = 0.0;
    bool pass = false;
};

// Compiles one NG message-passing layer into a four-stage DWS program:
//   L1 packs [e_fwd, e_bwd, h_src, h_tgt] into weight channels and node
//      features into bias channels (identity, lower/upper weight-to-bias,
//      constant-channel injection);
//   M2 applies (phi_m, phi_e) pointwise to both edge directions, gated on the
//      layer one-hot block so bias entries come out exactly zero;
//   L3 keeps the updated edge features and pools forward/backward messages
//      into the bias channels (column- and row-pool);
//   M4 applies phi_h pointwise.
// phi_m/phi_e take 2*d_h + d_e inputs, phi_e must output d_e, phi_h takes
// d_h + d_msg. gate_bound caps the magnitude the gate has to flush to zero;
// gating is bit-exact below it.
DWSProgram compile_ng_to_dws(const NGParams& params, const Architecture& arch, int channels,
                             double gate_bound = 1099511627776.0 /* 2^40 */);

// Runs ng_layer on build_graph(v, NG) and the compiled program on v, then
// compares every directed edge feature and the node features of layers 1..L
// (layer-0 updates have no weight-space slot). pass iff max deviation <= tol.
SimulationReport verify_simulation(const NGParams& params, const WeightElement& v, double tol);

// Max deviation of an arbitrary program (e.g. a mutated one) from the
// ng_layer oracle, over the same feature set verify_simulation compares.
double simulation_deviation(const NGParams& params, const WeightElement& v,
                            const DWSProgram& prog);

std::string simulation_report_to_json(const SimulationReport& r, int indent = -1);

}  // namespace wskit
