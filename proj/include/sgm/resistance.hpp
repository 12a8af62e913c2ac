#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/graph.hpp"

namespace sgm {

enum class ErMethod { krylov, exact };

inline std::string to_string(ErMethod m) { return m == ErMethod::exact ? "exact" : "krylov"; }

inline ErMethod er_method_from_name(std::string_view s) {
    if (s == "krylov") return ErMethod::krylov;
    if (s == "exact") return ErMethod::exact;
    throw ConfigError("unknown ER method '" + std::string(s) + "' (valid: krylov, exact)");
}

/// Per-edge effective resistance, indexed like SparseGraph::edges().
struct EdgeResistances {
    std::vector<double> r;
    ErMethod method = ErMethod::krylov;
    std::size_t node_count = 0;
};

inline constexpr std::size_t dense_oracle_limit = 2000;

/// Exact pairwise effective resistance from a dense pseudo-inverse, built per
/// connected component as (L_c + J/n_c)^-1 - J/n_c.
class DenseResistance {
public:
    explicit DenseResistance(const Laplacian& lap, std::size_t guard = dense_oracle_limit) {
        const std::size_t n = lap.n();
        if (n > guard)
            throw ConfigError("exact effective resistance refused for " + std::to_string(n) + " nodes (limit " +
                              std::to_string(guard) + "); use the krylov method");
        std::size_t count = 0;
        comp_ = lap.graph().components(&count);
        local_.assign(n, 0);
        std::vector<std::vector<std::size_t>> members(count);
        for (std::size_t v = 0; v < n; ++v) {
            local_[v] = members[comp_[v]].size();
            members[comp_[v]].push_back(v);
        }
        const Eigen::MatrixXd full = lap.dense();
        pinv_.resize(count);
        for (std::size_t c = 0; c < count; ++c) {
            const auto& m = members[c];
            const auto k = static_cast<Eigen::Index>(m.size());
            Eigen::MatrixXd lc(k, k);
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = 0; j < k; ++j) lc(i, j) = full(m[i], m[j]);
            const double j = 1.0 / static_cast<double>(k);
            lc.array() += j;
            Eigen::MatrixXd inv = lc.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
            inv.array() -= j;
            pinv_[c] = std::move(inv);
        }
    }

    bool same_component(std::size_t p, std::size_t q) const { return comp_[p] == comp_[q]; }

    double operator()(std::size_t p, std::size_t q) const {
        if (!same_component(p, q))
            throw ConfigError("effective resistance undefined across components (" + std::to_string(p) + "," +
                              std::to_string(q) + ")");
        const auto& P = pinv_[comp_[p]];
        const auto a = static_cast<Eigen::Index>(local_[p]), b = static_cast<Eigen::Index>(local_[q]);
        return P(a, a) + P(b, b) - 2.0 * P(a, b);
    }

private:
    std::vector<std::size_t> comp_;
    std::vector<std::size_t> local_;
    std::vector<Eigen::MatrixXd> pinv_;
};

inline EdgeResistances er_exact(const Laplacian& lap, std::size_t guard = dense_oracle_limit) {
    DenseResistance oracle(lap, guard);
    EdgeResistances out;
    out.method = ErMethod::exact;
    out.node_count = lap.n();
    out.r.reserve(lap.graph().edge_count());
    for (const auto& e : lap.graph().edges()) out.r.push_back(oracle(e.p, e.q));
    return out;
}

struct KrylovOptions {
    std::size_t n_vectors = 16;
    std::size_t smoothing_steps = 10;
    std::uint64_t seed = 0;
    /// Weighted-Jacobi damping.
    double omega = 0.5;
};

/// Krylov-subspace effective-resistance sketch.
///
/// Random +-1 vectors (made orthogonal to the constant vector of their component)
/// seed the block Krylov space {X, SX, ..., S^t X} of the weighted-Jacobi smoother
/// S = I - omega D^-1 L. The basis is made L-orthonormal, which turns every basis
/// vector's contribution into (v_p - v_q)^2 / (v^T L v). Each edge additionally gets a
/// Rayleigh-Ritz correction from the local vector D^-1 e_pq, which carries the
/// high-frequency part the smoothed space misses. The result is a lower bound of the
/// exact resistance; cost is O(|E| m + n m^2) with m = n_vectors * (steps + 1).
inline EdgeResistances er_krylov(const Laplacian& lap, const KrylovOptions& opt = {}) {
    if (opt.n_vectors < 1) throw ConfigError("er_krylov: n_vectors must be >= 1");
    if (opt.smoothing_steps < 1) throw ConfigError("er_krylov: smoothing_steps must be >= 1");
    const SparseGraph& g = lap.graph();
    const auto n = static_cast<Eigen::Index>(lap.n());
    const auto& d = lap.diag();
    std::size_t ncomp = 0;
    const auto comp = g.components(&ncomp);
    std::vector<double> comp_size(ncomp, 0.0);
    for (auto c : comp) comp_size[c] += 1.0;

    auto center = [&](Eigen::Ref<Eigen::MatrixXd> x) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ncomp), x.cols());
        for (Eigen::Index i = 0; i < n; ++i) sums.row(comp[i]) += x.row(i);
        for (std::size_t c = 0; c < ncomp; ++c) sums.row(c) /= comp_size[c];
        for (Eigen::Index i = 0; i < n; ++i) x.row(i) -= sums.row(comp[i]);
    };

    const auto nv = static_cast<Eigen::Index>(opt.n_vectors);
    const auto blocks = static_cast<Eigen::Index>(opt.smoothing_steps + 1);
    Eigen::MatrixXd basis(n, nv * blocks);
    {
        std::mt19937_64 rng(opt.seed);
        std::bernoulli_distribution coin(0.5);
        Eigen::MatrixXd x(n, nv);
        for (Eigen::Index j = 0; j < nv; ++j)
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) = coin(rng) ? 1.0 : -1.0;
        Eigen::VectorXd inv_d(n);
        for (Eigen::Index i = 0; i < n; ++i) inv_d[i] = d[i] > 0.0 ? 1.0 / d[i] : 0.0;
        center(x);
        for (Eigen::Index b = 0; b < blocks; ++b) {
            // unit columns keep the block QR well scaled as smoothing shrinks them
            for (Eigen::Index j = 0; j < nv; ++j) {
                const double nrm = x.col(j).norm();
                if (nrm > 0.0) x.col(j) /= nrm;
            }
            basis.middleCols(b * nv, nv) = x;
            if (b + 1 < blocks) {
                x -= opt.omega * (inv_d.asDiagonal() * lap.apply(x));
                center(x);
            }
        }
    }

    // Euclidean orthonormal basis, then L-orthonormalize through the projected Gram matrix.
    const Eigen::Index m = std::min<Eigen::Index>(basis.cols(), n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    center(q);
    Eigen::MatrixXd lq = lap.apply(q);
    Eigen::MatrixXd gram = q.transpose() * lq;
    gram = 0.5 * (gram + gram.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cutoff) keep.push_back(i);
    Eigen::MatrixXd t(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        t.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(ev[keep[j]]);
    // row-major: the edge loop below reads whole rows, which must be contiguous to stay linear in n
    const RowMatrix v = q * t;
    const RowMatrix lv = lq * t;

    EdgeResistances out;
    out.method = ErMethod::krylov;
    out.node_count = lap.n();
    out.r.reserve(g.edge_count());
    for (const auto& e : g.edges()) {
        const auto p = static_cast<Eigen::Index>(e.p), qn = static_cast<Eigen::Index>(e.q);
        const Eigen::RowVectorXd ve = v.row(p) - v.row(qn);
        double r = ve.squaredNorm();
        // local vector y = e_p/d_p - e_q/d_q, L-orthogonalized against the basis
        const double dp = d[e.p], dq = d[e.q];
        const Eigen::RowVectorXd c = lv.row(p) / dp - lv.row(qn) / dq;
        const double ye = 1.0 / dp + 1.0 / dq;
        const double yly = ye + 2.0 * e.w / (dp * dq);
        const double num = ye - c.dot(ve);
        const double den = yly - c.squaredNorm();
        if (den > 1e-14 * yly) r += num * num / den;
        out.r.push_back(r);
    }
    return out;
}

}  // namespace sgm
