#include "wskit/plregions.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "wskit/wscore.hpp"

namespace wskit {

using json = nlohmann::ordered_json;

namespace {

constexpr double kDedupTol = 1e-12;  // absolute breakpoint dedup tolerance

struct Affine {
    double slope = 0.0, intercept = 0.0;
};

// Piecewise representation of the current layer outputs: shared breakpoints,
// one affine map per (segment, neuron).
struct Piecewise {
    std::vector<double> cuts;                  // strictly inside (a,b), sorted
    std::vector<std::vector<Affine>> segs;     // segment -> neuron -> affine
};

double segment_lo(const Piecewise& p, double a, size_t s) {
    return s == 0 ? a : p.cuts[s - 1];
}
double segment_hi(const Piecewise& p, double b, size_t s) {
    return s == p.cuts.size() ? b : p.cuts[s];
}

}  // namespace

double pl_eval(const PL1D& p, double x) {
    size_t s = 0;
    while (s < p.breakpoints.size() && x > p.breakpoints[s]) ++s;
    return p.slopes[s] * x + p.intercepts[s];
}

PL1D regions_1d(const WeightElement& v, double a, double b) {
    validate(v);
    if (v.channels != 1) fail("UnsupportedChannels", "regions_1d requires c = 1");
    if (v.arch.activation != Activation::relu)
        fail("UnsupportedArch", "regions_1d requires relu activation");
    if (v.arch.dims.front() != 1 || v.arch.dims.back() != 1)
        fail("UnsupportedArch", "regions_1d requires d_0 = 1 and d_L = 1");
    if (!(a < b)) fail("BadInterval", "need a < b");

    const int L = v.num_layers();
    Piecewise cur;
    cur.segs = {{Affine{1.0, 0.0}}};  // the input coordinate itself

    for (int l = 0; l < L; ++l) {
        // Affine pre-activations per segment, fixed accumulation order.
        Piecewise pre;
        pre.cuts = cur.cuts;
        pre.segs.resize(cur.segs.size());
        for (size_t s = 0; s < cur.segs.size(); ++s) {
            pre.segs[s].resize(static_cast<size_t>(v.rows(l)));
            for (int i = 0; i < v.rows(l); ++i) {
                double sl = 0.0, ic = 0.0;
                for (int j = 0; j < v.cols(l); ++j) {
                    sl += v.w(l, i, j) * cur.segs[s][static_cast<size_t>(j)].slope;
                    ic += v.w(l, i, j) * cur.segs[s][static_cast<size_t>(j)].intercept;
                }
                ic += v.bias(l, i);
                pre.segs[s][static_cast<size_t>(i)] = {sl, ic};
            }
        }
        if (l == L - 1) {
            cur = std::move(pre);
            break;
        }

        // Zero crossings of any pre-activation strictly inside a segment
        // become new breakpoints.
        std::vector<double> cuts = pre.cuts;
        for (size_t s = 0; s < pre.segs.size(); ++s) {
            const double lo = segment_lo(pre, a, s);
            const double hi = segment_hi(pre, b, s);
            for (const Affine& f : pre.segs[s]) {
                if (f.slope == 0.0) continue;
                double x = -f.intercept / f.slope;
                if (x == 0.0) x = 0.0;  // normalize -0.0
                if (!(x > lo + kDedupTol && x < hi - kDedupTol)) continue;
                bool dup = false;
                for (double t : cuts)
                    if (std::fabs(t - x) <= kDedupTol) {
                        dup = true;
                        break;
                    }
                if (!dup) cuts.push_back(x);
            }
        }
        std::sort(cuts.begin(), cuts.end());

        // Refine segments onto the new cut set and apply the ReLU using the
        // sign at the midpoint (constant inside every refined segment).
        Piecewise next;
        next.cuts = cuts;
        next.segs.resize(cuts.size() + 1);
        for (size_t s = 0; s <= cuts.size(); ++s) {
            const double lo = s == 0 ? a : cuts[s - 1];
            const double hi = s == cuts.size() ? b : cuts[s];
            const double mid = 0.5 * (lo + hi);
            size_t old = 0;
            while (old < pre.cuts.size() && mid > pre.cuts[old]) ++old;
            next.segs[s].resize(pre.segs[old].size());
            for (size_t i = 0; i < pre.segs[old].size(); ++i) {
                const Affine& f = pre.segs[old][i];
                next.segs[s][i] = f.slope * mid + f.intercept > 0.0 ? f : Affine{0.0, 0.0};
            }
        }
        cur = std::move(next);
    }

    // Merge non-essential breakpoints.
    PL1D out;
    out.a = a;
    out.b = b;
    out.slopes.push_back(cur.segs[0][0].slope);
    out.intercepts.push_back(cur.segs[0][0].intercept);
    for (size_t s = 1; s < cur.segs.size(); ++s) {
        const Affine& f = cur.segs[s][0];
        const double ds = std::fabs(f.slope - out.slopes.back());
        const double di = std::fabs(f.intercept - out.intercepts.back());
        if (ds <= kDedupTol * std::max(1.0, std::fabs(f.slope)) &&
            di <= kDedupTol * std::max(1.0, std::fabs(f.intercept)))
            continue;  // same affine piece, breakpoint not essential
        out.breakpoints.push_back(cur.cuts[s - 1]);
        out.slopes.push_back(f.slope);
        out.intercepts.push_back(f.intercept);
    }
    return out;
}

RegionBound region_bound(const Architecture& arch) {
    arch.validate();
    if (arch.activation != Activation::relu)
        fail("UnsupportedArch", "region_bound is defined for relu architectures");
    RegionBound out;
    unsigned long long lg = 0;  // log2 of M_l, M_0 = 1
    const int L = arch.num_layers();
    for (int l = 1; l <= L - 1; ++l) {
        const unsigned long long dprev = static_cast<unsigned long long>(arch.dims[static_cast<size_t>(l) - 1]);
        const unsigned long long dl = static_cast<unsigned long long>(arch.dims[static_cast<size_t>(l)]);
        if (lg > 62 / std::max(1ull, dprev)) {
            lg = 62;
            out.saturated = true;
            break;
        }
        lg = lg * dprev + dl;
        if (lg >= 62) {
            lg = 62;
            out.saturated = true;
            break;
        }
    }
    out.bound = 1ull << lg;
    return out;
}

bool pl_equal(const PL1D& p, const PL1D& q, double tol) {
    if (p.a != q.a || p.b != q.b) fail("IntervalMismatch", "PL descriptions use different intervals");
    std::vector<double> cuts;
    cuts.reserve(p.breakpoints.size() + q.breakpoints.size());
    cuts.insert(cuts.end(), p.breakpoints.begin(), p.breakpoints.end());
    cuts.insert(cuts.end(), q.breakpoints.begin(), q.breakpoints.end());
    std::sort(cuts.begin(), cuts.end());
    auto seg_at = [](const PL1D& f, double x) {
        size_t s = 0;
        while (s < f.breakpoints.size() && x > f.breakpoints[s]) ++s;
        return s;
    };
    double lo = p.a;
    for (size_t k = 0; k <= cuts.size(); ++k) {
        const double hi = k == cuts.size() ? p.b : cuts[k];
        if (hi - lo > kDedupTol) {
            const double mid = 0.5 * (lo + hi);
            const size_t sp = seg_at(p, mid);
            const size_t sq = seg_at(q, mid);
            if (std::fabs(p.slopes[sp] - q.slopes[sq]) > tol ||
                std::fabs(p.intercepts[sp] - q.intercepts[sq]) > tol)
                return false;
        }
        lo = hi;
    }
    return true;
}

std::string pl_to_json(const PL1D& p, int indent) {
    json out;
    out["interval"] = {p.a, p.b};
    out["breakpoints"] = p.breakpoints;
    json segs = json::array();
    for (size_t s = 0; s < p.slopes.size(); ++s)
        segs.push_back(json{{"slope", p.slopes[s]}, {"intercept", p.intercepts[s]}});
    out["segments"] = std::move(segs);
    return indent >= 0 ? out.dump(indent) : out.dump();
}

}  // namespace wskit
