#include "wskit/equivlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "wskit/archzoo.hpp"
#include "wskit/plregions.hpp"
#include "wskit/wscore.hpp"

namespace wskit {

using json = nlohmann::ordered_json;

namespace {

double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    std::uint64_t i = index;
    while (i > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

bool functionally_equal(const WeightElement& v, const WeightElement& w, const Box& domain,
                        int n_samples, double tol) {
    if (!(v.arch == w.arch)) fail("ArchMismatch", "elements use different architectures");
    if (v.channels != 1 || w.channels != 1)
        fail("UnsupportedChannels", "functional equality requires c = 1");
    const int d0 = v.arch.dims.front();
    if (static_cast<int>(domain.lo.size()) != d0 || static_cast<int>(domain.hi.size()) != d0)
        fail("DimensionMismatch", "domain box must match the input dimension");

    if (d0 == 1 && v.arch.dims.back() == 1 && v.arch.activation == Activation::relu) {
        const PL1D pv = regions_1d(v, domain.lo[0], domain.hi[0]);
        const PL1D pw = regions_1d(w, domain.lo[0], domain.hi[0]);
        return pl_equal(pv, pw, tol);
    }
    if (static_cast<size_t>(d0) > std::size(kPrimes))
        fail("DimensionMismatch", "sampled mode supports up to 12 input dimensions");
    std::vector<double> x(static_cast<size_t>(d0), 0.0);
    for (int s = 0; s < n_samples; ++s) {
        for (int k = 0; k < d0; ++k) {
            const double u = halton(static_cast<std::uint64_t>(s) + 1, kPrimes[k]);
            x[static_cast<size_t>(k)] =
                domain.lo[static_cast<size_t>(k)] +
                (domain.hi[static_cast<size_t>(k)] - domain.lo[static_cast<size_t>(k)]) * u;
        }
        const auto fv = realize(v, x);
        const auto fw = realize(w, x);
        for (size_t k = 0; k < fv.size(); ++k)
            if (std::fabs(fv[k] - fw[k]) > tol) return false;
    }
    return true;
}

std::pair<bool, std::optional<GroupElement>> g_equivalent(const WeightElement& v,
                                                          const WeightElement& w, double tol) {
    if (!(v.arch == w.arch)) fail("ArchMismatch", "elements use different architectures");
    if (v.channels != w.channels) fail("ArchMismatch", "elements use different channel counts");
    const int L = v.arch.num_layers();

    double budget = 1.0;
    for (int h = 1; h < L; ++h) {
        double f = 1.0;
        for (int k = 2; k <= v.arch.dims[static_cast<size_t>(h)]; ++k) f *= k;
        budget *= f;
        if (budget > 1e7) fail("BudgetExceeded", "group has more than 10^7 elements");
    }

    auto matches = [&](const WeightElement& a) {
        if (tol == 0.0) return a.W == w.W && a.b == w.b;
        for (int l = 0; l < L; ++l) {
            for (size_t t = 0; t < a.W[l].size(); ++t)
                if (std::fabs(a.W[l][t] - w.W[l][t]) > tol) return false;
            for (size_t t = 0; t < a.b[l].size(); ++t)
                if (std::fabs(a.b[l][t] - w.b[l][t]) > tol) return false;
        }
        return true;
    };

    std::vector<std::vector<std::vector<int>>> layer_perms(static_cast<size_t>(L - 1));
    for (int h = 0; h < L - 1; ++h) {
        std::vector<int> p(static_cast<size_t>(v.arch.dims[static_cast<size_t>(h) + 1]));
        std::iota(p.begin(), p.end(), 0);
        do {
            layer_perms[static_cast<size_t>(h)].push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
    }
    std::vector<size_t> idx(static_cast<size_t>(L - 1), 0);
    while (true) {
        GroupElement g;
        g.perms.resize(static_cast<size_t>(L - 1));
        for (int h = 0; h < L - 1; ++h)
            g.perms[static_cast<size_t>(h)] =
                layer_perms[static_cast<size_t>(h)][idx[static_cast<size_t>(h)]];
        if (matches(act(g, v))) return {true, g};
        int h = L - 2;
        for (; h >= 0; --h) {
            if (++idx[static_cast<size_t>(h)] < layer_perms[static_cast<size_t>(h)].size()) break;
            idx[static_cast<size_t>(h)] = 0;
        }
        if (h < 0) break;
    }
    return {false, std::nullopt};
}

std::pair<WeightElement, WeightElement> counterexample_scaling(double lambda) {
    if (!(lambda > 0.0) || lambda == 1.0) fail("BadLambda", "need lambda > 0 and lambda != 1");
    Architecture arch;
    arch.dims = {1, 2, 1};
    arch.activation = Activation::relu;
    WeightElement v = WeightElement::zeros(arch, 1);
    v.w(0, 0, 0) = 1.0;
    v.w(1, 0, 0) = 1.0;
    WeightElement w = WeightElement::zeros(arch, 1);
    w.w(0, 0, 0) = lambda;
    w.w(1, 0, 0) = 1.0 / lambda;
    return {std::move(v), std::move(w)};
}

std::pair<WeightElement, WeightElement> counterexample_wl() {
    Architecture arch;
    arch.dims = {1, 4, 4, 1};
    arch.activation = Activation::relu;
    WeightElement v = WeightElement::zeros(arch, 1);
    WeightElement w = WeightElement::zeros(arch, 1);
    for (int i = 0; i < 4; ++i) {
        v.w(0, i, 0) = 1.0;
        w.w(0, i, 0) = 1.0;
        v.w(2, 0, i) = 1.0;
        w.w(2, 0, i) = 1.0;
    }
    const int circulant[4][4] = {{1, 1, 0, 0}, {0, 1, 1, 0}, {0, 0, 1, 1}, {1, 0, 0, 1}};
    const int block[4][4] = {{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            v.w(1, i, j) = circulant[i][j];
            w.w(1, i, j) = block[i][j];
        }
    return {std::move(v), std::move(w)};
}

double w1_sum_invariant(const WeightElement& v) {
    if (v.channels != 1) fail("UnsupportedChannels", "w1_sum_invariant requires c = 1");
    // Accumulate in sorted order so the result is exactly invariant under
    // entry permutations, not just up to rounding.
    std::vector<double> entries = v.W[0];
    std::sort(entries.begin(), entries.end());
    double s = 0.0;
    for (double x : entries) s += x;
    return s;
}

int exact_matrix_rank(std::vector<std::vector<long long>> m) {
    if (m.empty()) return 0;
    const size_t rows = m.size(), cols = m[0].size();
    size_t r = 0;
    long long prev = 1;
    for (size_t c = 0; c < cols && r < rows; ++c) {
        size_t pivot = r;
        while (pivot < rows && m[pivot][c] == 0) ++pivot;
        if (pivot == rows) continue;
        std::swap(m[r], m[pivot]);
        for (size_t i = r + 1; i < rows; ++i) {
            for (size_t j = c + 1; j < cols; ++j)
                m[i][j] = (m[r][c] * m[i][j] - m[i][c] * m[r][j]) / prev;
            m[i][c] = 0;
        }
        prev = m[r][c];
        ++r;
    }
    return static_cast<int>(r);
}

namespace {

struct SeparationConfig {
    NFTParams block1, block2;
    NFTPoolParams pool;
};

SeparationConfig separation_config() {
    SeparationConfig cfg;
    // Block 1: replacement row attention on W_2, identity projections.
    cfg.block1.channels = 1;
    cfg.block1.kv1 = AttnProj{{1.0}, {1.0}, {1.0}};
    cfg.block1.kv1_include_adjacent = false;
    cfg.block1.restrict_layer = 2;
    cfg.block1.use_layernorm = false;
    cfg.block1.residual_sa = false;

    // Block 2: replacement threshold MLP, attention off.
    // ramp(x) = 20*ReLU(x - 0.8) - 20*ReLU(x - 0.85): 0 below 0.8, 1 above 0.85.
    Architecture ramp_arch;
    ramp_arch.dims = {1, 2, 1};
    ramp_arch.activation = Activation::relu;
    MLPSpec ramp = MLPSpec::zeros(ramp_arch);
    ramp.w(0, 0, 0) = 1.0;
    ramp.b[0][0] = -0.8;
    ramp.w(0, 1, 0) = 1.0;
    ramp.b[0][1] = -0.85;
    ramp.w(1, 0, 0) = 20.0;
    ramp.w(1, 0, 1) = -20.0;
    cfg.block2.channels = 1;
    cfg.block2.mlp = ramp;
    cfg.block2.use_layernorm = false;
    cfg.block2.residual_sa = true;  // attention absent, pure skip
    cfg.block2.residual_mlp = false;

    cfg.pool.token = {1.0};
    cfg.pool.theta_q = {0.0};
    cfg.pool.theta_k = {0.0};
    cfg.pool.theta_v = {1.0};
    return cfg;
}

}  // namespace

double separation_pipeline(const WeightElement& v) {
    const SeparationConfig cfg = separation_config();
    return nft_pool(nft_block(nft_block(v, cfg.block1), cfg.block2), cfg.pool)[0];
}

SeparationDemo nft_separation_demo() {
    auto [v1, v2] = counterexample_wl();
    const SeparationConfig cfg = separation_config();
    SeparationDemo demo;
    auto run = [&](const WeightElement& v, std::vector<std::vector<double>>& attn) {
        const WeightElement z1 = nft_block(v, cfg.block1);
        attn.assign(4, std::vector<double>(4, 0.0));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                attn[static_cast<size_t>(i)][static_cast<size_t>(j)] = z1.w(1, i, j);
        const WeightElement z2 = nft_block(z1, cfg.block2);
        return nft_pool(z2, cfg.pool)[0];
    };
    demo.out_v1 = run(v1, demo.attn_v1);
    demo.out_v2 = run(v2, demo.attn_v2);
    return demo;
}

bool eps_approx_check(const std::vector<WeightElement>& A,
                      const std::vector<std::vector<double>>& B,
                      const std::vector<std::vector<double>>& grid, double eps) {
    if (A.empty() || B.empty()) fail("EmptySet", "both function sets must be nonempty");
    if (grid.empty()) fail("EmptySet", "evaluation grid must be nonempty");

    std::vector<std::vector<double>> a_samples;
    a_samples.reserve(A.size());
    for (const auto& v : A) {
        std::vector<double> s;
        for (const auto& x : grid) {
            const auto y = realize(v, x);
            s.insert(s.end(), y.begin(), y.end());
        }
        a_samples.push_back(std::move(s));
    }
    for (const auto& bsamp : B)
        if (bsamp.size() != a_samples.front().size())
            fail("DimensionMismatch", "target samples do not match grid * output size");

    auto supdist = [](const std::vector<double>& x, const std::vector<double>& y) {
        double m = 0.0;
        for (size_t k = 0; k < x.size(); ++k) m = std::max(m, std::fabs(x[k] - y[k]));
        return m;
    };
    double hausdorff = 0.0;
    for (const auto& a : a_samples) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : B) best = std::min(best, supdist(a, b));
        hausdorff = std::max(hausdorff, best);
    }
    for (const auto& b : B) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& a : a_samples) best = std::min(best, supdist(a, b));
        hausdorff = std::max(hausdorff, best);
    }
    return hausdorff < eps;
}

std::string witness_to_json(const WitnessReport& r, int indent) {
    json out;
    out["name"] = r.name;
    auto put = [&](const char* key, const auto& opt) {
        if (opt) out[key] = *opt;
    };
    put("g_equivalent", r.g_equivalent);
    put("functionally_equal", r.functionally_equal);
    put("wl_distinguishable", r.wl_distinguishable);
    put("rank_left", r.rank_left);
    put("rank_right", r.rank_right);
    put("invariant_left", r.invariant_left);
    put("invariant_right", r.invariant_right);
    if (!r.notes.empty()) out["notes"] = r.notes;
    return indent >= 0 ? out.dump(indent) : out.dump();
}

}  // namespace wskit
