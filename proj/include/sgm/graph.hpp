#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/kdtree.hpp"
#include "sgm/pointcloud.hpp"
#include "sgm/text_io.hpp"
#include "sgm/union_find.hpp"

namespace sgm {

struct Edge {
    std::size_t p;
    std::size_t q;
    double w;
};

enum class WeightScheme { inverse_distance, inverse_square };

inline WeightScheme weight_scheme_from_name(std::string_view s) {
    if (s == "inverse_distance") return WeightScheme::inverse_distance;
    if (s == "inverse_square") return WeightScheme::inverse_square;
    throw ConfigError("unknown weight scheme '" + std::string(s) + "' (valid: inverse_distance, inverse_square)");
}

inline std::string to_string(WeightScheme s) {
    return s == WeightScheme::inverse_distance ? "inverse_distance" : "inverse_square";
}

/// Undirected weighted graph. Edges are stored once with p < q, sorted by (p, q);
/// the CSR view lists every edge from both endpoints.
class SparseGraph {
public:
    SparseGraph() = default;

    SparseGraph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
        for (auto& e : edges_) {
            if (e.p == e.q) throw ConfigError("graph: self-loop at node " + std::to_string(e.p));
            if (e.p > e.q) std::swap(e.p, e.q);
            if (e.q >= n_) throw ConfigError("graph: edge endpoint " + std::to_string(e.q) + " out of range");
            if (!std::isfinite(e.w) || e.w <= 0.0)
                throw ConfigError("graph: edge (" + std::to_string(e.p) + "," + std::to_string(e.q) +
                                  ") must have finite positive weight");
        }
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return a.p < b.p || (a.p == b.p && a.q < b.q); });
        for (std::size_t i = 1; i < edges_.size(); ++i)
            if (edges_[i].p == edges_[i - 1].p && edges_[i].q == edges_[i - 1].q)
                throw ConfigError("graph: duplicate edge (" + std::to_string(edges_[i].p) + "," +
                                  std::to_string(edges_[i].q) + ")");
        build_csr();
    }

    std::size_t n() const { return n_; }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

    /// Neighbours of v as (neighbour, edge id) ranges into the CSR arrays.
    std::size_t adj_begin(std::size_t v) const { return offsets_[v]; }
    std::size_t adj_end(std::size_t v) const { return offsets_[v + 1]; }
    std::size_t adj_node(std::size_t slot) const { return adj_[slot]; }
    std::size_t adj_edge(std::size_t slot) const { return adj_edge_[slot]; }

    /// Edge id of (p, q) or npos.
    std::size_t find_edge(std::size_t p, std::size_t q) const {
        for (std::size_t s = offsets_[p]; s < offsets_[p + 1]; ++s)
            if (adj_[s] == q) return adj_edge_[s];
        return std::numeric_limits<std::size_t>::max();
    }

    double weighted_degree(std::size_t v) const {
        double d = 0.0;
        for (std::size_t s = offsets_[v]; s < offsets_[v + 1]; ++s) d += edges_[adj_edge_[s]].w;
        return d;
    }

    /// Connected-component labels (dense, by first appearance).
    std::vector<std::size_t> components(std::size_t* count = nullptr) const {
        UnionFind uf(n_);
        for (const auto& e : edges_) uf.unite(e.p, e.q);
        return uf.labels(count);
    }

private:
    void build_csr() {
        offsets_.assign(n_ + 1, 0);
        for (const auto& e : edges_) {
            ++offsets_[e.p + 1];
            ++offsets_[e.q + 1];
        }
        for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
        adj_.resize(2 * edges_.size());
        adj_edge_.resize(2 * edges_.size());
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t id = 0; id < edges_.size(); ++id) {
            const auto& e = edges_[id];
            adj_[fill[e.p]] = e.q;
            adj_edge_[fill[e.p]++] = id;
            adj_[fill[e.q]] = e.p;
            adj_edge_[fill[e.q]++] = id;
        }
    }

    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> adj_;
    std::vector<std::size_t> adj_edge_;
};

/// Graph Laplacian L = D - W in operator form.
class Laplacian {
public:
    Laplacian() = default;
    explicit Laplacian(SparseGraph g) : graph_(std::move(g)), diag_(graph_.n(), 0.0) {
        for (const auto& e : graph_.edges()) {
            diag_[e.p] += e.w;
            diag_[e.q] += e.w;
        }
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(n() + 2 * graph_.edge_count());
        for (std::size_t i = 0; i < n(); ++i) t.emplace_back(i, i, diag_[i]);
        for (const auto& e : graph_.edges()) {
            t.emplace_back(e.p, e.q, -e.w);
            t.emplace_back(e.q, e.p, -e.w);
        }
        mat_.resize(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(n()));
        mat_.setFromTriplets(t.begin(), t.end());
    }

    const SparseGraph& graph() const { return graph_; }
    const std::vector<double>& diag() const { return diag_; }
    std::size_t n() const { return graph_.n(); }

    /// y = L x for a block of column vectors.
    template <typename In>
    Eigen::MatrixXd apply(const Eigen::MatrixBase<In>& x) const {
        return mat_ * x;
    }

    const Eigen::SparseMatrix<double>& sparse() const { return mat_; }

    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(sparse()); }

private:
    SparseGraph graph_;
    std::vector<double> diag_;
    Eigen::SparseMatrix<double> mat_;
};

inline Laplacian laplacian(const SparseGraph& g) {
    if (g.n() == 0) throw ConfigError("laplacian: empty graph");
    return Laplacian(g);
}

struct KnnOptions {
    std::size_t k = 10;
    WeightScheme scheme = WeightScheme::inverse_distance;
    double eps = 1e-12;
};

inline double edge_weight(double dist2, const KnnOptions& opt) {
    return opt.scheme == WeightScheme::inverse_distance ? 1.0 / (std::sqrt(dist2) + opt.eps)
                                                        : 1.0 / (dist2 + opt.eps);
}

/// Union of directed k-nearest-neighbour relations over the rows of `points`.
inline SparseGraph build_knn(const RowMatrix& points, const KnnOptions& opt) {
    const std::size_t n = static_cast<std::size_t>(points.rows());
    if (opt.k < 1) throw ConfigError("build_knn: k must be >= 1");
    if (points.cols() < 1) throw ConfigError("build_knn: no features selected");
    if (n <= opt.k)
        throw ConfigError("build_knn: need more points (" + std::to_string(n) + ") than k (" + std::to_string(opt.k) + ")");
    KdTree tree(points);
    std::vector<Edge> directed;
    directed.reserve(n * opt.k);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& nb : tree.knn(points.row(static_cast<Eigen::Index>(i)).data(), opt.k, i)) {
            const double w = edge_weight(nb.dist2, opt);
            directed.push_back({std::min(i, nb.index), std::max(i, nb.index), w});
        }
    }
    std::sort(directed.begin(), directed.end(),
              [](const Edge& a, const Edge& b) { return a.p < b.p || (a.p == b.p && a.q < b.q); });
    std::vector<Edge> edges;
    edges.reserve(directed.size());
    for (const auto& e : directed)
        if (edges.empty() || edges.back().p != e.p || edges.back().q != e.q) edges.push_back(e);
    return SparseGraph(n, std::move(edges));
}

inline SparseGraph build_knn(const PointCloud& pc, const std::vector<std::size_t>& features, const KnnOptions& opt) {
    if (features.empty()) throw ConfigError("build_knn: feature set is empty");
    for (auto f : features)
        if (f >= pc.dims()) throw ConfigError("build_knn: feature index " + std::to_string(f) + " out of range");
    std::vector<std::size_t> rows(pc.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return build_knn(pc.select(rows, features), opt);
}

/// Column-wise z-score; constant columns map to zero.
inline RowMatrix standardize_columns(const RowMatrix& m) {
    RowMatrix out = m;
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).sum() / n;
        const double var = (m.col(c).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd <= 1e-300 || sd <= 1e-14 * std::abs(mean)) out.col(c).setZero();
        else out.col(c) = (m.col(c).array() - mean) / sd;
    }
    return out;
}

/// kNN over input features concatenated with standardized output columns.
inline SparseGraph rebuild_with_outputs(const RowMatrix& inputs, const RowMatrix& outputs, const KnnOptions& opt,
                                        double output_scale = 1.0) {
    if (outputs.rows() != inputs.rows())
        throw ConfigError("rebuild_with_outputs: output rows (" + std::to_string(outputs.rows()) +
                          ") must equal point count (" + std::to_string(inputs.rows()) + ")");
    for (Eigen::Index i = 0; i < outputs.rows(); ++i)
        if (!outputs.row(i).allFinite())
            throw NumericError("rebuild_with_outputs: non-finite output at row " + std::to_string(i));
    RowMatrix all(inputs.rows(), inputs.cols() + outputs.cols());
    all.leftCols(inputs.cols()) = inputs;
    all.rightCols(outputs.cols()) = output_scale * standardize_columns(outputs);
    return build_knn(all, opt);
}

inline SparseGraph rebuild_with_outputs(const PointCloud& pc, const std::vector<std::size_t>& features,
                                        const RowMatrix& outputs, const KnnOptions& opt,
                                        double output_scale = 1.0) {
    std::vector<std::size_t> rows(pc.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rebuild_with_outputs(pc.select(rows, features), outputs, opt, output_scale);
}

/// Joins every component to the rest by an edge from its closest point pair to the
/// outside, until the graph is connected. Quadratic per component; meant for subsets.
inline SparseGraph bridge_components(const SparseGraph& g, const RowMatrix& points, const KnnOptions& opt) {
    std::size_t count = 0;
    auto labels = g.components(&count);
    if (count <= 1) return g;
    std::vector<Edge> edges = g.edges();
    const std::size_t n = g.n();
    UnionFind uf(n);
    for (const auto& e : edges) uf.unite(e.p, e.q);
    while (true) {
        std::size_t c = 0;
        labels = uf.labels(&c);
        if (c <= 1) break;
        std::vector<std::size_t> sizes(c, 0);
        for (auto l : labels) ++sizes[l];
        const std::size_t largest =
            static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        // bridge the smallest-labelled non-largest component first
        std::size_t target = largest == 0 ? 1 : 0;
        double best = std::numeric_limits<double>::infinity();
        std::size_t bp = 0, bq = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != target) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] == target) continue;
                const double d2 = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    bp = i;
                    bq = j;
                }
            }
        }
        edges.push_back({std::min(bp, bq), std::max(bp, bq), edge_weight(best, opt)});
        uf.unite(bp, bq);
    }
    return SparseGraph(n, std::move(edges));
}

// Edge-list interchange: optional "# nodes: n" header, then "p q w" per line.

inline void save_edge_list(const SparseGraph& g, const std::string& path) {
    auto out = text::open_out(path);
    out << "# nodes: " << g.n() << '\n';
    for (const auto& e : g.edges()) out << e.p << ' ' << e.q << ' ' << text::format_double(e.w) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline SparseGraph load_edge_list(const std::string& path) {
    auto in = text::open_in(path);
    std::string line;
    std::size_t lineno = 0, n = 0;
    bool have_n = false;
    std::vector<Edge> edges;
    while (std::getline(in, line)) {
        ++lineno;
        auto sv = text::trim(line);
        if (sv.empty()) continue;
        if (sv.front() == '#') {
            constexpr std::string_view key = "# nodes:";
            if (sv.substr(0, key.size()) == key) {
                n = text::parse_int<std::size_t>(text::trim(sv.substr(key.size())), lineno);
                have_n = true;
            }
            continue;
        }
        auto tok = text::tokens(sv);
        if (tok.size() != 3) throw ParseError("expected 'p q w'", lineno);
        Edge e{text::parse_int<std::size_t>(tok[0], lineno), text::parse_int<std::size_t>(tok[1], lineno),
               text::parse_double(tok[2], lineno)};
        if (e.p == e.q) throw ParseError("self-loop", lineno);
        if (!(e.w > 0.0) || !std::isfinite(e.w)) throw ParseError("weight must be finite and positive", lineno);
        if (e.p > e.q) std::swap(e.p, e.q);
        if (have_n && e.q >= n) throw ParseError("node index out of range", lineno);
        edges.push_back(e);
    }
    if (!have_n)
        for (const auto& e : edges) n = std::max(n, e.q + 1);
    return SparseGraph(n, std::move(edges));
}

}  // namespace sgm
