#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sgm/resistance.hpp"

using namespace sgm;

TEST(ErExact, SingleEdgeOhmsLaw) {
    auto er = er_exact(Laplacian(SparseGraph(2, {{0, 1, 1.0}})));
    EXPECT_NEAR(er.r[0], 1.0, 1e-12);
}

TEST(ErExact, SeriesPath) {
    Laplacian lap(SparseGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}));
    DenseResistance oracle(lap);
    EXPECT_NEAR(oracle(0, 2), 2.0, 1e-12);
    EXPECT_NEAR(oracle(0, 1), 1.0, 1e-12);
}

TEST(ErExact, UnitTriangle) {
    auto er = er_exact(Laplacian(SparseGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}})));
    for (double r : er.r) EXPECT_NEAR(r, 2.0 / 3.0, 1e-12);
}

TEST(ErExact, GuardRefusesLargeGraphs) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < 30; ++i) edges.push_back({i, i + 1, 1.0});
    Laplacian lap(SparseGraph(30, edges));
    try {
        er_exact(lap, 20);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("krylov"), std::string::npos);
    }
}

TEST(ErExact, TreesHaveSingleEdgeResistance) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = oracle::random_tree(60, seed);
        auto er = er_exact(Laplacian(g));
        for (std::size_t i = 0; i < g.edge_count(); ++i) EXPECT_NEAR(er.r[i], 1.0 / g.edges()[i].w, 1e-9);
    }
}

TEST(ErExact, MatchesEigenPseudoInverse) {
    auto g = oracle::random_graph(40, 0.2, 3, 0.5, 2.0);
    auto er = er_exact(Laplacian(g));
    // per-component pseudo-inverse via eigendecomposition of the whole Laplacian
    const Eigen::MatrixXd p = oracle::pinv_sym(oracle::dense_laplacian(g.n(), g.edges()));
    for (std::size_t i = 0; i < g.edge_count(); ++i)
        EXPECT_NEAR(er.r[i], oracle::resistance(p, g.edges()[i].p, g.edges()[i].q), 1e-9);
}

TEST(ErExact, FosterSumRulePerComponent) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = oracle::random_graph(80, 0.04, seed, 0.5, 3.0);  // usually disconnected
        std::size_t comps = 0;
        g.components(&comps);
        auto er = er_exact(Laplacian(g));
        double s = 0.0;
        for (std::size_t i = 0; i < g.edge_count(); ++i) s += g.edges()[i].w * er.r[i];
        EXPECT_NEAR(s, static_cast<double>(g.n() - comps), 1e-6);
    }
}

TEST(ErExact, RayleighMonotonicity) {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto g = oracle::largest_component(oracle::random_graph(25, 0.2, seed, 0.5, 2.0));
        DenseResistance before(Laplacian(g), 100);
        // add one random missing edge
        std::uniform_int_distribution<std::size_t> pick(0, g.n() - 1);
        auto edges = g.edges();
        for (int tries = 0; tries < 100; ++tries) {
            std::size_t a = pick(rng), b = pick(rng);
            if (a == b || g.find_edge(std::min(a, b), std::max(a, b)) != static_cast<std::size_t>(-1)) continue;
            edges.push_back({std::min(a, b), std::max(a, b), 1.0});
            break;
        }
        DenseResistance after(Laplacian(SparseGraph(g.n(), edges)), 100);
        for (std::size_t p = 0; p < g.n(); ++p)
            for (std::size_t q = p + 1; q < g.n(); ++q) EXPECT_LE(after(p, q), before(p, q) + 1e-12);
    }
}

TEST(ErKrylov, SingleEdge) {
    auto er = er_krylov(Laplacian(SparseGraph(2, {{0, 1, 1.0}})), {4, 2, 0});
    ASSERT_EQ(er.r.size(), 1u);
    EXPECT_GT(er.r[0], 0.0);
    EXPECT_TRUE(std::isfinite(er.r[0]));
}

TEST(ErKrylov, RankFidelityOnRandomGraph) {
    auto g = oracle::largest_component(oracle::random_graph(100, 0.1, 17));
    Laplacian lap(g);
    auto ex = er_exact(lap);
    auto kr = er_krylov(lap, {16, 10, 1});
    EXPECT_GE(oracle::spearman(ex.r, kr.r), 0.9);
}

TEST(ErKrylov, LowerBoundsExact) {
    auto g = oracle::largest_component(oracle::random_graph(300, 0.03, 4, 0.5, 2.0));
    Laplacian lap(g);
    auto ex = er_exact(lap);
    auto kr = er_krylov(lap, {8, 5, 2});
    for (std::size_t i = 0; i < g.edge_count(); ++i) EXPECT_LE(kr.r[i], ex.r[i] * (1 + 1e-8));
}

TEST(ErKrylov, GridBoundaryEdgesRankAboveCentre) {
    const std::size_t side = 20;
    std::vector<Edge> edges;
    auto id = [&](std::size_t i, std::size_t j) { return i * side + j; };
    for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j) {
            if (i + 1 < side) edges.push_back({id(i, j), id(i + 1, j), 1.0});
            if (j + 1 < side) edges.push_back({id(i, j), id(i, j + 1), 1.0});
        }
    SparseGraph g(side * side, edges);
    Laplacian lap(g);
    auto ex = er_exact(lap);
    auto kr = er_krylov(lap, {16, 10, 3});
    // boundary-adjacent edges have larger exact resistance than central ones
    std::vector<double> ex_sel, kr_sel;
    std::size_t boundary_above = 0, pairs = 0;
    for (std::size_t a = 0; a < edges.size(); ++a) {
        const auto& e = g.edges()[a];
        auto on_rim = [&](std::size_t v) { return v / side == 0 || v / side == side - 1 || v % side == 0 || v % side == side - 1; };
        auto central = [&](std::size_t v) {
            const double i = static_cast<double>(v / side), j = static_cast<double>(v % side);
            return std::abs(i - 9.5) < 3 && std::abs(j - 9.5) < 3;
        };
        if (on_rim(e.p) && on_rim(e.q)) {
            for (std::size_t b = 0; b < edges.size(); ++b) {
                const auto& f = g.edges()[b];
                if (!(central(f.p) && central(f.q))) continue;
                ++pairs;
                if (kr.r[a] > kr.r[b]) ++boundary_above;
            }
        }
    }
    ASSERT_GT(pairs, 0u);
    EXPECT_GE(static_cast<double>(boundary_above) / static_cast<double>(pairs), 0.85);
    EXPECT_GE(oracle::pair_agreement(ex.r, kr.r), 0.85);
}

TEST(ErKrylov, DisconnectedGraphIsFinite) {
    SparseGraph g(5, {{0, 1, 1.0}, {1, 2, 1.0}, {3, 4, 2.0}});
    auto kr = er_krylov(Laplacian(g), {4, 3, 0});
    for (double r : kr.r) {
        EXPECT_TRUE(std::isfinite(r));
        EXPECT_GT(r, 0.0);
    }
    auto ex = er_exact(Laplacian(g));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(kr.r[i], ex.r[i], 1e-8);  // tiny graph: span is complete
}

TEST(ErKrylov, DeterministicForSeed) {
    auto g = oracle::largest_component(oracle::random_graph(150, 0.05, 8));
    Laplacian lap(g);
    EXPECT_EQ(er_krylov(lap, {8, 4, 11}).r, er_krylov(lap, {8, 4, 11}).r);
}
