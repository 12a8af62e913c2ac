#pragma once

// Independent reference computations used only by tests. Nothing here calls into the
// implementation path it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "sgm/graph.hpp"

namespace oracle {

inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j);
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

/// Fraction of index pairs (i<j) ordered the same way by a and b (ties in `a` skipped).
inline double pair_agreement(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            if (a[i] == a[j]) continue;
            ++total;
            if ((a[i] < a[j]) == (b[i] < b[j])) ++agree;
        }
    return total ? static_cast<double>(agree) / static_cast<double>(total) : 1.0;
}

/// Dense Laplacian assembled directly from an edge list.
inline Eigen::MatrixXd dense_laplacian(std::size_t n, const std::vector<sgm::Edge>& edges) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& e : edges) {
        l(e.p, e.p) += e.w;
        l(e.q, e.q) += e.w;
        l(e.p, e.q) -= e.w;
        l(e.q, e.p) -= e.w;
    }
    return l;
}

/// Moore-Penrose pseudo-inverse through a symmetric eigendecomposition.
inline Eigen::MatrixXd pinv_sym(const Eigen::MatrixXd& a, double rel_tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const double cut = rel_tol * es.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = es.eigenvalues().unaryExpr([cut](double x) { return std::abs(x) > cut ? 1.0 / x : 0.0; });
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline double resistance(const Eigen::MatrixXd& pinv, std::size_t p, std::size_t q) {
    return pinv(p, p) + pinv(q, q) - 2.0 * pinv(p, q);
}

/// Brute-force k nearest neighbours (ties by index), excluding i itself.
inline std::vector<std::size_t> brute_knn(const sgm::RowMatrix& pts, std::size_t i, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (Eigen::Index j = 0; j < pts.rows(); ++j)
        if (static_cast<std::size_t>(j) != i) d.emplace_back((pts.row(j) - pts.row(i)).squaredNorm(), j);
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < k; ++t) out.push_back(d[t].second);
    return out;
}

/// Erdos-Renyi G(n, p) with weights drawn from [wlo, whi].
inline sgm::SparseGraph random_graph(std::size_t n, double p, std::uint64_t seed, double wlo = 1.0,
                                     double whi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<sgm::Edge> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (u(rng) < p) edges.push_back({a, b, wlo + (whi - wlo) * u(rng)});
    return sgm::SparseGraph(n, std::move(edges));
}

/// Largest connected component relabelled to 0..m-1.
inline sgm::SparseGraph largest_component(const sgm::SparseGraph& g) {
    std::size_t count = 0;
    auto lab = g.components(&count);
    std::vector<std::size_t> sizes(count, 0);
    for (auto l : lab) ++sizes[l];
    const std::size_t big = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<std::size_t> remap(g.n(), g.n());
    std::size_t m = 0;
    for (std::size_t v = 0; v < g.n(); ++v)
        if (lab[v] == big) remap[v] = m++;
    std::vector<sgm::Edge> edges;
    for (const auto& e : g.edges())
        if (lab[e.p] == big) edges.push_back({remap[e.p], remap[e.q], e.w});
    return sgm::SparseGraph(m, std::move(edges));
}

/// Random labelled tree: node i attaches to a uniformly chosen earlier node.
inline sgm::SparseGraph random_tree(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(0.2, 5.0);
    std::vector<sgm::Edge> edges;
    for (std::size_t i = 1; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        edges.push_back({pick(rng), i, w(rng)});
    }
    return sgm::SparseGraph(n, std::move(edges));
}

}  // namespace oracle
