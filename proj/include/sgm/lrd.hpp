#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/graph.hpp"
#include "sgm/resistance.hpp"
#include "sgm/text_io.hpp"
#include "sgm/union_find.hpp"

namespace sgm {

/// Node partition into clusters with an upper bound on each cluster's resistance diameter.
struct Clustering {
    std::vector<std::size_t> assignment;
    std::vector<std::vector<std::size_t>> members;
    std::vector<double> diam_est;
    int levels_used = 0;

    std::size_t cluster_count() const { return members.size(); }
    std::size_t node_count() const { return assignment.size(); }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s(members.size());
        for (std::size_t c = 0; c < members.size(); ++c) s[c] = members[c].size();
        return s;
    }

    /// Every node in exactly one non-empty cluster, members consistent with assignment.
    bool consistent() const {
        std::size_t total = 0;
        for (std::size_t c = 0; c < members.size(); ++c) {
            if (members[c].empty()) return false;
            for (auto v : members[c])
                if (v >= assignment.size() || assignment[v] != c) return false;
            total += members[c].size();
        }
        return total == assignment.size() && diam_est.size() == members.size();
    }

    /// Builds members from an assignment with dense ids.
    static Clustering from_assignment(std::vector<std::size_t> assignment) {
        Clustering c;
        std::size_t k = 0;
        for (auto a : assignment) k = std::max(k, a + 1);
        c.members.assign(k, {});
        for (std::size_t v = 0; v < assignment.size(); ++v) c.members[assignment[v]].push_back(v);
        for (std::size_t i = 0; i < k; ++i)
            if (c.members[i].empty()) throw ParseError("cluster id " + std::to_string(i) + " has no members", 0);
        c.assignment = std::move(assignment);
        c.diam_est.assign(k, 0.0);
        return c;
    }
};

/// 1 / (average weighted degree).
inline double default_diam_budget(const SparseGraph& g, double scale = 1.0) {
    double total = 0.0;
    for (const auto& e : g.edges()) total += 2.0 * e.w;
    const double avg = total / static_cast<double>(std::max<std::size_t>(g.n(), 1));
    return avg > 0.0 ? scale / avg : scale;
}

/// Low-resistance-diameter decomposition by level-wise agglomerative contraction.
///
/// Edges are visited in ascending (r, p, q) order. Within a level each cluster takes
/// part in at most one merge, and a merge is accepted only while
/// diam(a) + diam(b) + r(edge) stays within the budget. Since effective resistance is
/// a metric, that sum bounds the merged cluster's true diameter when r is exact.
inline Clustering decompose(const SparseGraph& g, const EdgeResistances& er, int levels, double diam_budget) {
    if (levels < 1) throw ConfigError("decompose: levels must be >= 1");
    if (!(diam_budget >= 0.0) || !std::isfinite(diam_budget))
        throw ConfigError("decompose: diameter budget must be finite and >= 0");
    const auto& edges = g.edges();
    if (er.r.size() < edges.size()) {
        const auto& e = edges[er.r.size()];
        throw ConfigError("decompose: missing effective resistance for edge (" + std::to_string(e.p) + "," +
                          std::to_string(e.q) + ")");
    }
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (!std::isfinite(er.r[i]) || er.r[i] < 0.0)
            throw ConfigError("decompose: invalid effective resistance for edge (" + std::to_string(edges[i].p) +
                              "," + std::to_string(edges[i].q) + ")");

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (er.r[a] != er.r[b]) return er.r[a] < er.r[b];
        if (edges[a].p != edges[b].p) return edges[a].p < edges[b].p;
        return edges[a].q < edges[b].q;
    });

    const std::size_t n = g.n();
    UnionFind uf(n);
    std::vector<double> diam(n, 0.0);  // by root
    std::vector<int> merged_at(n, -1);  // level in which a root last merged
    int levels_used = 0;
    for (int level = 0; level < levels; ++level) {
        bool any = false;
        for (auto id : order) {
            const std::size_t a = uf.find(edges[id].p), b = uf.find(edges[id].q);
            if (a == b || merged_at[a] == level || merged_at[b] == level) continue;
            const double d = diam[a] + diam[b] + er.r[id];
            if (d > diam_budget) continue;
            const std::size_t root = uf.unite(a, b);
            diam[root] = d;
            merged_at[root] = level;
            any = true;
        }
        if (!any) break;
        levels_used = level + 1;
    }

    std::size_t k = 0;
    Clustering c;
    c.assignment = uf.labels(&k);
    c.members.assign(k, {});
    c.diam_est.assign(k, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        c.members[c.assignment[v]].push_back(v);
        c.diam_est[c.assignment[v]] = diam[uf.find(v)];
    }
    c.levels_used = levels_used;
    return c;
}

/// Exact resistance diameter of every cluster (max over intra-cluster pairs).
inline std::vector<double> verify_diameter(const Clustering& c, const Laplacian& lap,
                                           std::size_t guard = dense_oracle_limit) {
    DenseResistance oracle(lap, guard);
    std::vector<double> out(c.cluster_count(), 0.0);
    for (std::size_t k = 0; k < c.cluster_count(); ++k) {
        const auto& m = c.members[k];
        double best = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = i + 1; j < m.size(); ++j) best = std::max(best, oracle(m[i], m[j]));
        out[k] = best;
    }
    return out;
}

// Cluster file: "node_id,cluster_id" header then one row per node.

inline void save_clusters(const Clustering& c, const std::string& path) {
    auto out = text::open_out(path);
    out << "node_id,cluster_id\n";
    for (std::size_t v = 0; v < c.assignment.size(); ++v) out << v << ',' << c.assignment[v] << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline Clustering load_clusters(const std::string& path) {
    auto in = text::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        auto sv = text::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        if (sv == "node_id,cluster_id") continue;
        auto f = text::split(sv, ',');
        if (f.size() != 2) throw ParseError("expected 'node_id,cluster_id'", lineno);
        rows.emplace_back(text::parse_int<std::size_t>(f[0], lineno), text::parse_int<std::size_t>(f[1], lineno));
    }
    std::vector<std::size_t> assignment(rows.size(), 0);
    std::vector<char> seen(rows.size(), 0);
    for (const auto& [v, c] : rows) {
        if (v >= rows.size() || seen[v]) throw ParseError("node ids must be a permutation of 0..n-1", 0);
        seen[v] = 1;
        assignment[v] = c;
    }
    return Clustering::from_assignment(std::move(assignment));
}

}  // namespace sgm
