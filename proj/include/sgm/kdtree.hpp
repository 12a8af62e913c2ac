#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace sgm {

/// Static kd-tree for exact k-nearest-neighbour queries in Euclidean space.
/// Neighbours are ordered by (squared distance, index), so results are
/// deterministic even with duplicate points.
class KdTree {
public:
    struct Neighbor {
        std::size_t index;
        double dist2;
        bool operator<(const Neighbor& o) const {
            return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
        }
    };

    using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    explicit KdTree(Points points, std::size_t leaf_size = 16)
        : pts_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
        order_.resize(static_cast<std::size_t>(pts_.rows()));
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!order_.empty()) root_ = build(0, order_.size());
    }

    std::size_t size() const { return order_.size(); }
    std::size_t dims() const { return static_cast<std::size_t>(pts_.cols()); }
    const Points& points() const { return pts_; }

    /// k nearest neighbours of `query`, skipping index `exclude` (pass npos to keep all).
    std::vector<Neighbor> knn(const double* query, std::size_t k,
                              std::size_t exclude = std::numeric_limits<std::size_t>::max()) const {
        std::vector<Neighbor> heap;
        if (k == 0 || order_.empty()) return heap;
        heap.reserve(k + 1);
        search(root_, query, k, exclude, heap);
        std::sort_heap(heap.begin(), heap.end());
        return heap;
    }

private:
    struct Node {
        std::size_t begin, end;  // range in order_
        int split_dim = -1;      // -1 for leaves
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({begin, end});
        if (end - begin <= leaf_size_) return id;

        int best_dim = 0;
        double best_spread = -1.0;
        for (Eigen::Index d = 0; d < pts_.cols(); ++d) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = begin; i < end; ++i) {
                const double v = pts_(static_cast<Eigen::Index>(order_[i]), d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = static_cast<int>(d);
            }
        }
        if (best_spread <= 0.0) return id;  // all points coincide

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                         order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                             return pts_(static_cast<Eigen::Index>(a), best_dim) <
                                    pts_(static_cast<Eigen::Index>(b), best_dim);
                         });
        const double split = pts_(static_cast<Eigen::Index>(order_[mid]), best_dim);
        const std::size_t l = build(begin, mid);
        const std::size_t r = build(mid, end);
        nodes_[id].split_dim = best_dim;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    double dist2(std::size_t i, const double* q) const {
        double s = 0.0;
        const auto row = pts_.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index d = 0; d < pts_.cols(); ++d) {
            const double t = row[d] - q[d];
            s += t * t;
        }
        return s;
    }

    void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) const {
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
    }

    void search(std::size_t id, const double* q, std::size_t k, std::size_t exclude,
                std::vector<Neighbor>& heap) const {
        const Node& n = nodes_[id];
        if (n.split_dim < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const std::size_t idx = order_[i];
                if (idx == exclude) continue;
                offer(heap, k, {idx, dist2(idx, q)});
            }
            return;
        }
        const double diff = q[n.split_dim] - n.split;
        const std::size_t near = diff < 0.0 ? n.left : n.right;
        const std::size_t far = diff < 0.0 ? n.right : n.left;
        search(near, q, k, exclude, heap);
        // <= keeps equal-distance candidates reachable for the index tie rule
        if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, exclude, heap);
    }

    Points pts_;
    std::size_t leaf_size_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t root_ = 0;
};

}  // namespace sgm
