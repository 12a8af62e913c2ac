#pragma once

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace sgm {

/// Disjoint-set forest with union by size and path halving.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    /// Returns the surviving root.
    std::size_t unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return a;
    }

    std::size_t set_size(std::size_t x) { return size_[find(x)]; }
    std::size_t size() const { return parent_.size(); }

    /// Dense labels 0..k-1, numbered by first appearance in index order.
    std::vector<std::size_t> labels(std::size_t* count = nullptr) {
        const std::size_t none = parent_.size();
        std::vector<std::size_t> root_label(parent_.size(), none), out(parent_.size());
        std::size_t next = 0;
        for (std::size_t i = 0; i < parent_.size(); ++i) {
            const std::size_t r = find(i);
            if (root_label[r] == none) root_label[r] = next++;
            out[i] = root_label[r];
        }
        if (count) *count = next;
        return out;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

}  // namespace sgm
