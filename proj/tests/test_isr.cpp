#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sgm/isr.hpp"
#include "sgm/pointcloud.hpp"

using namespace sgm;

namespace {

RowMatrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    return m;
}

Laplacian knn_lap(const RowMatrix& pts, std::size_t k) {
    const KnnOptions o{k, WeightScheme::inverse_distance, 1e-12};
    return Laplacian(bridge_components(build_knn(pts, o), pts, o));
}

}  // namespace

TEST(Isr, IdentityMapHasUnitSpectrum) {
    auto lap = knn_lap(random_points(150, 2, 1), 6);
    for (std::size_t limit : {std::size_t{1000}, std::size_t{0}}) {
        IsrOptions o;
        o.r = 4;
        o.dense_limit = limit;
        auto [basis, scores] = isr_compute(lap, lap, o);
        EXPECT_NEAR(scores.isr_max, 1.0, 1e-6);
        for (Eigen::Index i = 0; i < basis.eigvals.size(); ++i) EXPECT_NEAR(basis.eigvals[i], 1.0, 1e-6);
    }
}

TEST(Isr, ScaledOutputScalesIsr) {
    const auto x = random_points(200, 2, 2);
    for (double c : {2.0, 5.0}) {
        const RowMatrix y = c * x;
        auto [basis, scores] = isr_compute(knn_lap(x, 7), knn_lap(y, 7));
        EXPECT_NEAR(scores.isr_max, c, 0.02 * c);
    }
}

TEST(Isr, NodeScoreIsMeanOfIncidentEdges) {
    Laplacian lx(SparseGraph(3, {{0, 1, 1.0}, {1, 2, 3.0}}));
    Laplacian ly(SparseGraph(3, {{0, 1, 2.0}, {1, 2, 0.5}}));
    auto [basis, scores] = isr_compute(lx, ly, {2});
    ASSERT_EQ(scores.edge_scores.size(), 2u);
    EXPECT_DOUBLE_EQ(scores.node_scores[1], 0.5 * (scores.edge_scores[0] + scores.edge_scores[1]));
    EXPECT_DOUBLE_EQ(scores.node_scores[0], scores.edge_scores[0]);
}

TEST(Isr, MatchesDensePseudoInverseOracle) {
    const auto x = random_points(10, 2, 3);
    const auto lx = knn_lap(x, 3);
    RowMatrix y(10, 1);
    for (int i = 0; i < 10; ++i) y(i, 0) = std::sin(4 * x(i, 0)) + x(i, 1) * x(i, 1);
    const auto ly = knn_lap(y, 3);
    auto [basis, scores] = isr_compute(lx, ly, {2});

    // independent route: eigenpairs of the non-symmetric matrix pinv(L_Y) L_X
    const Eigen::MatrixXd ly_d = oracle::dense_laplacian(10, ly.graph().edges());
    const Eigen::MatrixXd m = oracle::pinv_sym(ly_d) * oracle::dense_laplacian(10, lx.graph().edges());
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;
    for (int i = 0; i < 10; ++i) pairs.emplace_back(es.eigenvalues()[i].real(), es.eigenvectors().col(i).real());
    std::sort(pairs.begin(), pairs.end(), [](auto& a, auto& b) { return a.first > b.first; });
    Eigen::MatrixXd vr(10, 2);
    for (int i = 0; i < 2; ++i) {
        Eigen::VectorXd v = pairs[i].second;
        v /= std::sqrt(v.dot(ly_d * v));
        vr.col(i) = v * std::sqrt(pairs[i].first);
        EXPECT_NEAR(basis.eigvals[i], pairs[i].first, 1e-6 * pairs[i].first);
    }
    std::vector<double> node(10, 0.0), deg(10, 0.0);
    for (std::size_t e = 0; e < lx.graph().edge_count(); ++e) {
        const auto& ed = lx.graph().edges()[e];
        const double s = (vr.row(ed.p) - vr.row(ed.q)).squaredNorm();
        EXPECT_NEAR(scores.edge_scores[e], s, 1e-6 * std::max(1.0, s));
        node[ed.p] += s;
        node[ed.q] += s;
        deg[ed.p] += 1;
        deg[ed.q] += 1;
    }
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(scores.node_scores[i], node[i] / deg[i], 1e-6 * std::max(1.0, node[i]));
}

TEST(Isr, IterativeAgreesWithDense) {
    const auto x = random_points(400, 2, 4);
    RowMatrix y(400, 1);
    for (int i = 0; i < 400; ++i) y(i, 0) = std::exp(-10 * ((x(i, 0) - 0.4) * (x(i, 0) - 0.4) + (x(i, 1) - 0.6) * (x(i, 1) - 0.6)));
    const auto lx = knn_lap(x, 6);
    const auto ly = knn_lap(y, 6);
    IsrOptions dense, iter;
    iter.dense_limit = 0;
    auto [bd, sd] = isr_compute(lx, ly, dense);
    auto [bi, si] = isr_compute(lx, ly, iter);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(bi.eigvals[i], bd.eigvals[i], 1e-6 * bd.eigvals[0]);
    const double top = *std::max_element(sd.node_scores.begin(), sd.node_scores.end());
    for (std::size_t v = 0; v < 400; ++v) EXPECT_NEAR(si.node_scores[v], sd.node_scores[v], 1e-5 * top);
}

TEST(Isr, PermutationEquivariance) {
    const auto x = random_points(60, 2, 5);
    RowMatrix y(60, 1);
    for (int i = 0; i < 60; ++i) y(i, 0) = std::tanh(5 * (x(i, 0) - x(i, 1)));
    std::vector<std::size_t> perm(60);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(1);
    std::shuffle(perm.begin(), perm.end(), rng);
    RowMatrix xp(60, 2), yp(60, 1);
    for (int i = 0; i < 60; ++i) {
        xp.row(i) = x.row(perm[i]);
        yp.row(i) = y.row(perm[i]);
    }
    auto [b1, s1] = isr_compute(knn_lap(x, 5), knn_lap(y, 5));
    auto [b2, s2] = isr_compute(knn_lap(xp, 5), knn_lap(yp, 5));
    EXPECT_NEAR(s1.isr_max, s2.isr_max, 1e-8 * s1.isr_max);
    for (int i = 0; i < 60; ++i) EXPECT_NEAR(s2.node_scores[i], s1.node_scores[perm[i]], 1e-6 * s1.isr_max);
}

TEST(Isr, RejectsMismatchedOrIsolatedOutput) {
    Laplacian a(SparseGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}));
    Laplacian b(SparseGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}}));
    EXPECT_THROW(isr_compute(a, b), ConfigError);
    Laplacian iso(SparseGraph(3, {{0, 1, 1.0}}));
    try {
        isr_compute(a, iso);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("isolated nodes: 2"), std::string::npos);
    }
}

TEST(Isr, ConstantLossesAreDegenerate) {
    const auto x = random_points(30, 2, 6);
    std::vector<double> losses(30, 0.7);
    auto s = isr_node_scores_subset(x, losses, 5);
    EXPECT_TRUE(s.degenerate);
    for (double v : s.node_scores) EXPECT_EQ(v, 0.0);
}

TEST(Isr, SubsetTooSmall) {
    const auto x = random_points(6, 2, 6);
    std::vector<double> losses{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(isr_node_scores_subset(x, losses, 5), ConfigError);
}

TEST(Isr, LineScoresFollowSteepestSlope) {
    const int n = 50;
    RowMatrix x(n, 1);
    std::vector<double> loss(n), grad(n);
    auto f = [](double t) { return std::tanh(8.0 * (t - 0.4)); };
    const double h = 1.0 / (n - 1);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = i * h;
        loss[i] = f(i * h);
    }
    for (int i = 0; i < n; ++i) {
        const double lo = f(i * h - h), hi = f(i * h + h);
        grad[i] = std::abs((hi - lo) / (2 * h));  // central-difference oracle
    }
    auto s = isr_node_scores_subset(x, loss, 3);
    EXPECT_FALSE(s.degenerate);
    const auto arg_s = std::max_element(s.node_scores.begin(), s.node_scores.end()) - s.node_scores.begin();
    const auto arg_g = std::max_element(grad.begin(), grad.end()) - grad.begin();
    EXPECT_LE(std::abs(arg_s - arg_g), 1);
    EXPECT_GE(oracle::spearman(s.node_scores, grad), 0.5);
    for (double v : s.node_scores) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Isr, EdgeScoresFollowDistanceMappingDistortion) {
    const int n = 40;
    RowMatrix x(n, 1), y(n, 1);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = static_cast<double>(i) / (n - 1);
        y(i, 0) = std::exp(2.5 * x(i, 0));
    }
    const KnnOptions o{1, WeightScheme::inverse_distance, 0.0};
    Laplacian lx(build_knn(x, o)), ly(build_knn(y, o));
    IsrOptions opt;
    opt.r = n - 1;
    auto [basis, scores] = isr_compute(lx, ly, opt);
    std::vector<double> dmd;
    for (const auto& e : lx.graph().edges())
        dmd.push_back(std::abs(y(e.p, 0) - y(e.q, 0)) / std::abs(x(e.p, 0) - x(e.q, 0)));
    EXPECT_GE(oracle::pair_agreement(dmd, scores.edge_scores), 0.9);
}

TEST(Isr, GradientRankingOnSmoothField) {
    const auto x = random_points(400, 2, 7);
    std::vector<double> f(400), g(400);
    for (int i = 0; i < 400; ++i) {
        const double a = x(i, 0), b = x(i, 1);
        f[i] = std::tanh(6 * (a + b - 1));
        g[i] = 6 * std::sqrt(2.0) / std::pow(std::cosh(6 * (a + b - 1)), 2);
    }
    auto s = isr_node_scores_subset(x, f, 10);
    EXPECT_GE(oracle::spearman(s.node_scores, g), 0.5);
}
