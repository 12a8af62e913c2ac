#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/graph.hpp"
#include "sgm/text_io.hpp"

namespace sgm {

/// Top generalized eigenpairs of L_X u = lambda L_Y u, in descending order.
struct SpectralBasis {
    Eigen::VectorXd eigvals;
    Eigen::MatrixXd eigvecs;  // n x r, each normalized to v^T L_Y v = 1
    Eigen::MatrixXd vr;       // columns v_i * sqrt(lambda_i)
};

struct IsrScores {
    double isr_max = 0.0;
    std::vector<double> edge_scores;  // per input-graph edge
    std::vector<double> node_scores;  // mean of incident edge scores
};

struct IsrOptions {
    std::size_t r = 3;
    std::size_t dense_limit = 1000;
    std::size_t max_iterations = 200;
    double tol = 1e-10;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_isr_inputs(const Laplacian& lx, const Laplacian& ly) {
    if (lx.n() != ly.n())
        throw ConfigError("isr: input graph has " + std::to_string(lx.n()) + " nodes but output graph has " +
                          std::to_string(ly.n()));
    std::string isolated;
    std::size_t count = 0;
    for (std::size_t v = 0; v < ly.n(); ++v) {
        if (ly.graph().degree(v) == 0) {
            if (count < 10) isolated += (count ? "," : "") + std::to_string(v);
            ++count;
        }
    }
    if (count) throw ConfigError("isr: output graph has isolated nodes: " + isolated + (count > 10 ? ",..." : ""));
    std::size_t comps = 0;
    ly.graph().components(&comps);
    if (comps > 1) throw ConfigError("isr: output graph is disconnected (" + std::to_string(comps) + " components)");
}

inline void center_columns(Eigen::MatrixXd& x) { x.rowwise() -= x.colwise().mean(); }

/// Solves L_Y x = b for b orthogonal to the ones vector, returning the mean-zero solution.
class GroundedSolver {
public:
    explicit GroundedSolver(const Laplacian& ly) {
        const auto n = static_cast<Eigen::Index>(ly.n());
        const Eigen::SparseMatrix<double>& l = ly.sparse();
        reduced_ = l.bottomRightCorner(n - 1, n - 1);
        ldlt_.compute(reduced_);
        if (ldlt_.info() != Eigen::Success) throw NumericError("isr: factorization of the output Laplacian failed");
    }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(b.rows(), b.cols());
        x.bottomRows(b.rows() - 1) = ldlt_.solve(b.bottomRows(b.rows() - 1));
        center_columns(x);
        return x;
    }

private:
    Eigen::SparseMatrix<double> reduced_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_pairs(const Laplacian& lx, const Laplacian& ly,
                                                               std::size_t r) {
    const auto n = static_cast<Eigen::Index>(lx.n());
    const Eigen::MatrixXd a = lx.dense();
    Eigen::MatrixXd b = ly.dense();
    double s = 0.0;
    for (double d : ly.diag()) s += d;
    s /= static_cast<double>(n);
    b.array() += s / static_cast<double>(n);  // rank-one shift along the ones vector
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b);
    if (es.info() != Eigen::Success) throw NumericError("isr: dense generalized eigensolve failed");
    const auto rr = static_cast<Eigen::Index>(r);
    Eigen::VectorXd vals(rr);
    Eigen::MatrixXd vecs(n, rr);
    for (Eigen::Index i = 0; i < rr; ++i) {
        vals[i] = es.eigenvalues()[n - 1 - i];
        vecs.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return {vals, vecs};
}

inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> iterative_pairs(const Laplacian& lx, const Laplacian& ly,
                                                                   const IsrOptions& opt) {
    const auto n = static_cast<Eigen::Index>(lx.n());
    const auto rr = static_cast<Eigen::Index>(opt.r);
    const Eigen::Index block = std::min<Eigen::Index>(n - 1, std::max<Eigen::Index>(2 * rr, rr + 4));
    GroundedSolver solver(ly);
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(n, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = gauss(rng);
    center_columns(x);

    Eigen::VectorXd prev = Eigen::VectorXd::Zero(rr);
    Eigen::VectorXd vals(rr);
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
        Eigen::MatrixXd y = solver.solve(lx.apply(x));
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        y = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        center_columns(y);
        Eigen::MatrixXd a = y.transpose() * lx.apply(y);
        Eigen::MatrixXd b = y.transpose() * ly.apply(y);
        a = 0.5 * (a + a.transpose());
        b = 0.5 * (b + b.transpose());
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b);
        if (es.info() != Eigen::Success) throw NumericError("isr: Rayleigh-Ritz step failed");
        Eigen::MatrixXd w(block, block);
        for (Eigen::Index i = 0; i < block; ++i) w.col(i) = es.eigenvectors().col(block - 1 - i);
        x = y * w;
        for (Eigen::Index i = 0; i < rr; ++i) vals[i] = es.eigenvalues()[block - 1 - i];
        const double change = (vals - prev).cwiseAbs().maxCoeff();
        if (it > 0 && change <= opt.tol * std::max(1.0, vals.cwiseAbs().maxCoeff())) break;
        prev = vals;
    }
    return {vals, x.leftCols(rr)};
}

}  // namespace detail

/// Inverse stability rating of the map from the input manifold graph (L_X) to the
/// output manifold graph (L_Y): top-r eigenpairs of L_Y^+ L_X, per-edge scores
/// ||V_r^T e_pq||^2 over the input graph's edges, and per-node means.
inline std::pair<SpectralBasis, IsrScores> isr_compute(const Laplacian& lx, const Laplacian& ly,
                                                       const IsrOptions& opt = {}) {
    detail::check_isr_inputs(lx, ly);
    const std::size_t n = lx.n();
    if (opt.r < 1) throw ConfigError("isr: r must be >= 1");
    if (n < 2) throw ConfigError("isr: need at least two nodes");
    IsrOptions o = opt;
    o.r = std::min(opt.r, n - 1);

    auto [vals, vecs] = n <= o.dense_limit ? detail::dense_pairs(lx, ly, o.r) : detail::iterative_pairs(lx, ly, o);

    SpectralBasis basis;
    basis.eigvals = vals.cwiseMax(0.0);
    basis.eigvecs = vecs;
    const Eigen::MatrixXd lyv = ly.apply(vecs);
    for (Eigen::Index i = 0; i < vecs.cols(); ++i) {
        const double nrm2 = vecs.col(i).dot(lyv.col(i));
        if (nrm2 > 0.0) basis.eigvecs.col(i) /= std::sqrt(nrm2);
        else basis.eigvecs.col(i).setZero();
    }
    basis.vr = basis.eigvecs * basis.eigvals.cwiseSqrt().asDiagonal();

    IsrScores scores;
    scores.isr_max = basis.eigvals.size() ? basis.eigvals[0] : 0.0;
    const auto& edges = lx.graph().edges();
    scores.edge_scores.reserve(edges.size());
    scores.node_scores.assign(n, 0.0);
    std::vector<double> deg(n, 0.0);
    for (const auto& e : edges) {
        const double s = (basis.vr.row(static_cast<Eigen::Index>(e.p)) - basis.vr.row(static_cast<Eigen::Index>(e.q)))
                             .squaredNorm();
        scores.edge_scores.push_back(s);
        scores.node_scores[e.p] += s;
        scores.node_scores[e.q] += s;
        deg[e.p] += 1.0;
        deg[e.q] += 1.0;
    }
    for (std::size_t v = 0; v < n; ++v)
        if (deg[v] > 0.0) scores.node_scores[v] /= deg[v];
    return {std::move(basis), std::move(scores)};
}

struct SubsetIsr {
    std::vector<double> node_scores;  // min-max normalized to [0, 1]
    double isr_max = 0.0;
    bool degenerate = false;          // constant losses: scores are all zero
};

/// Min-max normalization to [0, 1]; constant input maps to all zeros.
inline std::vector<double> minmax_normalize(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double a = *lo, b = *hi;
    for (auto& x : out) x = b > a ? (x - a) / (b - a) : 0.0;
    return out;
}

/// ISR node scores for a sample subset: L_X from the subset's input features, L_Y from a
/// kNN graph in 1-D loss space. Both graphs are bridged to be connected.
inline SubsetIsr isr_node_scores_subset(const RowMatrix& inputs, std::span<const double> losses, std::size_t k,
                                        const IsrOptions& opt = {},
                                        WeightScheme scheme = WeightScheme::inverse_distance) {
    const std::size_t n = static_cast<std::size_t>(inputs.rows());
    if (losses.size() != n) throw ConfigError("isr subset: losses and inputs differ in length");
    if (n < k + 2)
        throw ConfigError("isr subset: need at least k+2 = " + std::to_string(k + 2) + " points, got " +
                          std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(losses[i])) throw NumericError("isr subset: non-finite loss at subset point " + std::to_string(i));

    SubsetIsr out;
    RowMatrix y(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i), 0) = losses[i];
    const RowMatrix ys = standardize_columns(y);
    if (ys.cwiseAbs().maxCoeff() == 0.0) {
        out.node_scores.assign(n, 0.0);
        out.degenerate = true;
        return out;
    }
    const KnnOptions ko{k, scheme, 1e-12};
    const SparseGraph gx = bridge_components(build_knn(inputs, ko), inputs, ko);
    const SparseGraph gy = bridge_components(build_knn(ys, ko), ys, ko);
    const auto [basis, scores] = isr_compute(Laplacian(gx), Laplacian(gy), opt);
    out.isr_max = scores.isr_max;
    out.node_scores = minmax_normalize(scores.node_scores);
    return out;
}

/// Debug dump "node_id,isr_score".
inline void save_isr_scores(std::span<const double> scores, const std::string& path) {
    auto out = text::open_out(path);
    out << "node_id,isr_score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out << i << ',' << text::format_double(scores[i]) << '\n';
}

}  // namespace sgm
