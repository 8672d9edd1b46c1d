#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "wskit/equivlab.hpp"
#include "wskit/wscore.hpp"

using namespace wskit;
using namespace wskit::testing;

namespace {

Box box1d(double lo, double hi) {
    Box b;
    b.lo = {lo};
    b.hi = {hi};
    return b;
}

}  // namespace

TEST_CASE("functionally_equal") {
    SUBCASE("an element equals its own orbit points") {
        const Architecture arch = relu_arch({2, 4, 3, 2});
        Box box;
        box.lo = {-5, -5};
        box.hi = {5, 5};
        for (std::uint64_t s = 0; s < 10; ++s) {
            const WeightElement v = random_weights(arch, 1, s, RandomDist::normal(0, 1));
            const GroupElement g = random_group_element(arch, s + 3);
            CHECK(functionally_equal(v, act(g, v), box, 256, 1e-9));
        }
    }
    SUBCASE("the scaling pair is exactly equal in PL mode") {
        auto [v, w] = counterexample_scaling(2.0);
        CHECK(functionally_equal(v, w, box1d(-10, 10), 0, 1e-12));
    }
    SUBCASE("an output bias shift is detected") {
        auto [v, w] = counterexample_scaling(2.0);
        (void)w;
        WeightElement shifted = v;
        shifted.bias(1, 0) = 1.0;
        CHECK_FALSE(functionally_equal(v, shifted, box1d(-10, 10), 0, 1e-6));
    }
    SUBCASE("architecture mismatch is rejected") {
        const WeightElement a = random_weights(relu_arch({1, 2, 1}), 1, 0, RandomDist::uniform(-1, 1));
        const WeightElement b = random_weights(relu_arch({1, 3, 1}), 1, 0, RandomDist::uniform(-1, 1));
        CHECK_THROWS_WITH_AS(functionally_equal(a, b, box1d(-1, 1), 16, 1e-9),
                             doctest::Contains("ArchMismatch"), Error);
    }
}

TEST_CASE("g_equivalent") {
    const Architecture arch = relu_arch({1, 3, 3, 1});
    const WeightElement v = random_weights(arch, 1, 4, RandomDist::normal(0, 1));
    SUBCASE("recovers a planted witness") {
        const GroupElement g = random_group_element(arch, 9);
        const auto [ok, witness] = g_equivalent(v, act(g, v));
        REQUIRE(ok);
        REQUIRE(witness);
        CHECK(bit_equal(act(*witness, v), act(g, v)));
    }
    SUBCASE("self comparison returns the identity") {
        const auto [ok, witness] = g_equivalent(v, v);
        REQUIRE(ok);
        CHECK(witness->is_identity());
    }
    SUBCASE("the rank pair has no witness among all 576 elements") {
        auto [a, b] = counterexample_wl();
        const auto [ok, witness] = g_equivalent(a, b);
        CHECK_FALSE(ok);
        CHECK_FALSE(witness.has_value());
    }
    SUBCASE("budget guard") {
        const Architecture big = relu_arch({1, 12, 12, 1});
        const WeightElement a = random_weights(big, 1, 0, RandomDist::uniform(-1, 1));
        CHECK_THROWS_WITH_AS(g_equivalent(a, a), doctest::Contains("BudgetExceeded"), Error);
    }
    SUBCASE("equivalence relation on a small orbit set") {
        const WeightElement a = v;
        const GroupElement g1 = random_group_element(arch, 100);
        const GroupElement g2 = random_group_element(arch, 101);
        const WeightElement b = act(g1, a);
        const WeightElement c = act(g2, b);
        CHECK(g_equivalent(a, a).first);
        const auto ab = g_equivalent(a, b);
        const auto ba = g_equivalent(b, a);
        REQUIRE((ab.first && ba.first));
        CHECK(bit_equal(act(*ba.second, b), a));  // symmetry via an inverse witness
        const auto ac = g_equivalent(a, c);
        REQUIRE(ac.first);                         // transitivity
        CHECK(bit_equal(act(*ac.second, a), c));
    }
}

TEST_CASE("counterexample_scaling") {
    auto [v, w] = counterexample_scaling(2.0);
    CHECK(w1_sum_invariant(v) == 1.0);
    CHECK(w1_sum_invariant(w) == 2.0);
    CHECK(realize(v, {2.0})[0] == 2.0);
    CHECK(realize(w, {2.0})[0] == 2.0);
    CHECK(functionally_equal(v, w, box1d(-10, 10), 0, 1e-12));
    CHECK_FALSE(g_equivalent(v, w).first);
    CHECK_THROWS_WITH_AS(counterexample_scaling(1.0), doctest::Contains("BadLambda"), Error);
    CHECK_THROWS_WITH_AS(counterexample_scaling(-2.0), doctest::Contains("BadLambda"), Error);
}

TEST_CASE("counterexample_wl") {
    auto [v, w] = counterexample_wl();
    auto to_int = [](const WeightElement& e) {
        std::vector<std::vector<long long>> m(4, std::vector<long long>(4));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                m[static_cast<size_t>(i)][static_cast<size_t>(j)] = static_cast<long long>(e.w(1, i, j));
        return m;
    };
    CHECK(exact_matrix_rank(to_int(v)) == 3);
    CHECK(exact_matrix_rank(to_int(w)) == 2);
    CHECK(realize(v, {1.0})[0] == 8.0);
    CHECK(realize(v, {-1.0})[0] == 0.0);
    CHECK(realize(w, {1.0})[0] == 8.0);
    CHECK(realize(w, {-1.0})[0] == 0.0);
    CHECK_FALSE(g_equivalent(v, w).first);
}

TEST_CASE("exact_matrix_rank") {
    CHECK(exact_matrix_rank({{1, 0}, {0, 1}}) == 2);
    CHECK(exact_matrix_rank({{1, 2}, {2, 4}}) == 1);
    CHECK(exact_matrix_rank({{0, 0}, {0, 0}}) == 0);
    CHECK(exact_matrix_rank({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}) == 2);
}

TEST_CASE("w1_sum_invariant is exactly G-invariant") {
    const Architecture arch = relu_arch({2, 4, 3, 2});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const WeightElement v = random_weights(arch, 1, s, RandomDist::normal(0, 1));
        const GroupElement g = random_group_element(arch, s + 17);
        CHECK(w1_sum_invariant(act(g, v)) == w1_sum_invariant(v));
    }
    CHECK(w1_sum_invariant(WeightElement::zeros(arch, 1)) == 0.0);
}

TEST_CASE("nft separation demo hits 8/33 and 16/33") {
    const SeparationDemo demo = nft_separation_demo();
    CHECK(std::fabs(demo.out_v1 - 8.0 / 33.0) <= 1e-12);
    CHECK(std::fabs(demo.out_v2 - 16.0 / 33.0) <= 1e-12);
    CHECK(std::fabs(demo.out_v1 - 0.242424242424) <= 1e-9);
    CHECK(std::fabs(demo.out_v2 - 0.484848484848) <= 1e-9);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool hot1 = j == i || j == (i + 1) % 4;
            CHECK(std::fabs(demo.attn_v1[i][j] - (hot1 ? 0.73 : 0.27)) <= 1e-2);
            const bool hot2 = (i < 2) == (j < 2);
            CHECK(std::fabs(demo.attn_v2[i][j] - (hot2 ? 0.88 : 0.12)) <= 1e-2);
        }
}

TEST_CASE("the separation outputs are invariant under the action") {
    auto [v1, v2] = counterexample_wl();
    const double o1 = separation_pipeline(v1);
    const double o2 = separation_pipeline(v2);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const GroupElement g = random_group_element(v1.arch, s);
        CHECK(std::fabs(separation_pipeline(act(g, v1)) - o1) <= 1e-12);
        CHECK(std::fabs(separation_pipeline(act(g, v2)) - o2) <= 1e-12);
    }
}

TEST_CASE("eps_approx_check") {
    const Architecture arch = relu_arch({1, 3, 1});
    std::vector<std::vector<double>> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back({-2.0 + 0.2 * i});

    std::vector<WeightElement> A;
    for (std::uint64_t s = 0; s < 3; ++s)
        A.push_back(random_weights(arch, 1, s, RandomDist::uniform(-1, 1)));

    auto sample = [&](const WeightElement& v, double offset) {
        std::vector<double> out;
        for (const auto& x : grid) out.push_back(realize(v, x)[0] + offset);
        return out;
    };
    SUBCASE("exact match for any eps") {
        std::vector<std::vector<double>> B;
        for (const auto& v : A) B.push_back(sample(v, 0.0));
        CHECK(eps_approx_check(A, B, grid, 1e-12));
    }
    SUBCASE("a 2-eps offset fails") {
        const double eps = 0.01;
        std::vector<std::vector<double>> B = {sample(A[0], 2.0 * eps)};
        CHECK_FALSE(eps_approx_check({A[0]}, B, grid, eps));
    }
    SUBCASE("noise below eps/2 passes") {
        const double eps = 0.05;
        std::vector<std::vector<double>> B;
        std::uint64_t k = 0;
        for (const auto& v : A) {
            auto s = sample(v, 0.0);
            for (auto& x : s) x += 0.4 * eps * std::sin(static_cast<double>(++k));
            B.push_back(std::move(s));
        }
        CHECK(eps_approx_check(A, B, grid, eps));
    }
    SUBCASE("empty inputs are rejected") {
        CHECK_THROWS_WITH_AS(eps_approx_check({}, {{1.0}}, grid, 0.1),
                             doctest::Contains("EmptySet"), Error);
    }
}

TEST_CASE("witness report serialization") {
    WitnessReport r;
    r.name = "demo";
    r.g_equivalent = false;
    r.functionally_equal = true;
    r.rank_left = 3;
    r.rank_right = 2;
    const std::string js = witness_to_json(r);
    CHECK(js.find("\"g_equivalent\":false") != std::string::npos);
    CHECK(js.find("\"rank_left\":3") != std::string::npos);
    CHECK(js.find("wl_distinguishable") == std::string::npos);  // not populated, not emitted
}
