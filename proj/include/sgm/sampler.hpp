#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/graph.hpp"
#include "sgm/isr.hpp"
#include "sgm/kdtree.hpp"
#include "sgm/lrd.hpp"
#include "sgm/resistance.hpp"

namespace sgm {

enum class SamplerMode { uniform, mis, sgm, sgm_s };

inline SamplerMode sampler_mode_from_name(std::string_view s) {
    if (s == "uniform") return SamplerMode::uniform;
    if (s == "mis") return SamplerMode::mis;
    if (s == "sgm") return SamplerMode::sgm;
    if (s == "sgm_s") return SamplerMode::sgm_s;
    throw ConfigError("unknown sampler mode '" + std::string(s) + "' (valid: uniform, mis, sgm, sgm_s)");
}

inline std::string to_string(SamplerMode m) {
    switch (m) {
        case SamplerMode::uniform: return "uniform";
        case SamplerMode::mis: return "mis";
        case SamplerMode::sgm: return "sgm";
        case SamplerMode::sgm_s: return "sgm_s";
    }
    return "?";
}

struct SamplerConfig {
    SamplerMode mode = SamplerMode::uniform;
    std::size_t batch_size = 256;
    double probe_fraction = 0.15;
    std::size_t tau_e = 700;
    std::size_t tau_g = 2500;
    double p_min = 0.02;
    double p_max = 0.6;
    std::size_t epoch_target = 0;  // 0: N / 16
    std::size_t mis_seeds = 1000;
    std::uint64_t seed = 0;

    std::size_t resolved_epoch_target(std::size_t n_points) const {
        return epoch_target ? epoch_target : std::max<std::size_t>(n_points / 16, 1);
    }

    /// Every violated invariant, so configuration errors can be reported together.
    std::vector<std::string> problems(std::size_t n_points) const {
        std::vector<std::string> out;
        if (batch_size == 0) out.push_back("sampler.batch_size must be positive");
        if (!(probe_fraction > 0.0 && probe_fraction <= 1.0)) out.push_back("sampler.probe_fraction must be in (0,1]");
        if (tau_e == 0) out.push_back("sampler.tau_e must be positive");
        if (tau_g == 0) out.push_back("sampler.tau_g must be positive");
        if (!(p_min > 0.0 && p_min <= p_max && p_max <= 1.0)) out.push_back("sampler: require 0 < p_min <= p_max <= 1");
        if (mis_seeds == 0) out.push_back("sampler.mis_seeds must be positive");
        if (n_points && (mode == SamplerMode::sgm || mode == SamplerMode::sgm_s) &&
            batch_size > resolved_epoch_target(n_points))
            out.push_back("sampler.batch_size (" + std::to_string(batch_size) + ") exceeds epoch_target (" +
                          std::to_string(resolved_epoch_target(n_points)) + ")");
        return out;
    }

    void validate(std::size_t n_points) const {
        auto p = problems(n_points);
        if (!p.empty()) throw ConfigError(p);
    }
};

/// Per-point scalar loss for a list of node ids (evaluated with the current model).
using BatchLossFn = std::function<std::vector<double>(const std::vector<std::size_t>&)>;

struct Probe {
    std::vector<std::vector<std::size_t>> points;  // per cluster
    std::vector<std::vector<double>> losses;       // aligned with points
    std::vector<double> mean;
    std::size_t evaluations = 0;
};

inline std::size_t probe_count(double r, std::size_t cluster_size) {
    const auto c = static_cast<std::size_t>(std::ceil(r * static_cast<double>(cluster_size) - 1e-9));
    return std::clamp<std::size_t>(c, 1, cluster_size);
}

/// Fresh uniform probe of ceil(r * S_i) distinct points per cluster; one batched loss call.
inline Probe probe_losses(const Clustering& c, const BatchLossFn& loss, double r, std::uint64_t seed) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("probe fraction must be in (0,1]");
    std::mt19937_64 rng(seed);
    Probe p;
    std::vector<std::size_t> flat;
    for (const auto& m : c.members) {
        std::vector<std::size_t> pool = m;
        const std::size_t take = probe_count(r, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        pool.resize(take);
        flat.insert(flat.end(), pool.begin(), pool.end());
        p.points.push_back(std::move(pool));
    }
    const auto values = loss(flat);
    if (values.size() != flat.size()) throw ConfigError("probe: loss function returned the wrong number of values");
    p.evaluations = flat.size();
    std::size_t k = 0;
    for (const auto& pts : p.points) {
        std::vector<double> l;
        double s = 0.0;
        for (auto id : pts) {
            const double v = values[k++];
            if (!std::isfinite(v)) throw NumericError("probe: non-finite loss at point " + std::to_string(id));
            l.push_back(v);
            s += v;
        }
        p.mean.push_back(s / static_cast<double>(pts.size()));
        p.losses.push_back(std::move(l));
    }
    return p;
}

struct ScoreTable {
    std::vector<double> probe_loss_mean;
    std::vector<double> isr_mean;  // empty unless ISR was combined
    std::vector<double> combined;
    std::vector<double> p;
    std::size_t iteration = 0;

    std::size_t size() const { return p.size(); }
};

/// Min-max normalized loss (plus normalized ISR when given), mapped linearly onto [p_min, p_max].
inline ScoreTable score_and_map(std::span<const double> probe_mean, std::span<const double> isr_mean, double p_min,
                                double p_max, std::size_t iteration = 0) {
    if (probe_mean.empty()) throw ConfigError("score table is empty");
    if (!isr_mean.empty() && isr_mean.size() != probe_mean.size())
        throw ConfigError("isr scores cover " + std::to_string(isr_mean.size()) + " clusters, losses cover " +
                          std::to_string(probe_mean.size()));
    ScoreTable t;
    t.iteration = iteration;
    t.probe_loss_mean.assign(probe_mean.begin(), probe_mean.end());
    t.isr_mean.assign(isr_mean.begin(), isr_mean.end());
    t.combined = minmax_normalize(probe_mean);
    if (!isr_mean.empty()) {
        const auto ni = minmax_normalize(isr_mean);
        for (std::size_t i = 0; i < ni.size(); ++i) t.combined[i] += ni[i];
    }
    for (double c : t.combined)
        if (!std::isfinite(c)) throw NumericError("score table: non-finite combined score");
    const auto [lo, hi] = std::minmax_element(t.combined.begin(), t.combined.end());
    const double a = *lo, b = *hi;
    for (double c : t.combined) t.p.push_back(b > a ? p_min + (c - a) / (b - a) * (p_max - p_min) : 0.5 * (p_min + p_max));
    return t;
}

struct Epoch {
    std::vector<std::size_t> indices;
    std::vector<std::size_t> composition;  // per-cluster counts
};

/// Per-cluster counts: P_i * S_i scaled to the target, largest-remainder rounding,
/// clamped to [1, S_i]. Mass removed by the upper clamp is re-spread over the others.
inline std::vector<std::size_t> epoch_counts(const std::vector<std::size_t>& sizes, const ScoreTable& t,
                                             std::size_t target) {
    const std::size_t nc = sizes.size();
    if (t.size() != nc) throw ConfigError("score table has " + std::to_string(t.size()) + " rows for " + std::to_string(nc) + " clusters");
    if (target < nc)
        throw ConfigError("epoch_target (" + std::to_string(target) + ") is below the cluster count (" +
                          std::to_string(nc) + "): per-cluster floors cannot be met");
    std::vector<std::size_t> counts(nc, 0);
    std::vector<bool> full(nc, false);
    std::size_t budget = target;
    for (int round = 0; round < static_cast<int>(nc) + 1; ++round) {
        double raw_sum = 0.0;
        for (std::size_t i = 0; i < nc; ++i)
            if (!full[i]) raw_sum += t.p[i] * static_cast<double>(sizes[i]);
        std::vector<double> x(nc, 0.0);
        std::size_t floor_sum = 0;
        for (std::size_t i = 0; i < nc; ++i) {
            if (full[i]) continue;
            x[i] = raw_sum > 0 ? t.p[i] * static_cast<double>(sizes[i]) * static_cast<double>(budget) / raw_sum : 0.0;
            counts[i] = static_cast<std::size_t>(std::floor(x[i]));
            floor_sum += counts[i];
        }
        // largest remainder; ties go to the higher-scored, then lower-indexed cluster
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < nc; ++i)
            if (!full[i]) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ra = x[a] - std::floor(x[a]), rb = x[b] - std::floor(x[b]);
            if (ra != rb) return ra > rb;
            return t.combined[a] > t.combined[b];
        });
        for (std::size_t k = 0; k < order.size() && floor_sum < budget && raw_sum > 0; ++k, ++floor_sum) ++counts[order[k]];
        bool clamped = false;
        for (std::size_t i = 0; i < nc; ++i) {
            if (!full[i] && counts[i] > sizes[i]) {
                counts[i] = sizes[i];
                full[i] = true;
                budget -= std::min(budget, sizes[i]);
                clamped = true;
            }
        }
        if (!clamped) break;
    }
    for (std::size_t i = 0; i < nc; ++i) counts[i] = std::clamp<std::size_t>(counts[i], 1, sizes[i]);
    return counts;
}

inline Epoch assemble_epoch(const Clustering& c, const ScoreTable& t, std::size_t target, std::uint64_t seed) {
    Epoch e;
    e.composition = epoch_counts(c.sizes(), t, target);
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < c.cluster_count(); ++k) {
        std::vector<std::size_t> pool = c.members[k];
        const std::size_t take = e.composition[k];
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        e.indices.insert(e.indices.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::shuffle(e.indices.begin(), e.indices.end(), rng);
    return e;
}

/// Consecutive disjoint slices of an epoch; reshuffled and reused when a pass ends.
class EpochStream {
public:
    EpochStream() = default;
    EpochStream(std::vector<std::size_t> indices, std::uint64_t seed) : idx_(std::move(indices)), rng_(seed) {}

    bool empty() const { return idx_.empty(); }
    std::size_t size() const { return idx_.size(); }
    std::size_t passes() const { return passes_; }
    /// True when the next batch starts a fresh pass.
    bool at_boundary() const { return pos_ == 0; }
    const std::vector<std::size_t>& indices() const { return idx_; }

    std::vector<std::size_t> next(std::size_t beta) {
        if (idx_.empty()) throw ConfigError("epoch stream is empty");
        std::vector<std::size_t> out;
        out.reserve(beta);
        while (out.size() < beta) {
            const std::size_t take = std::min(beta - out.size(), idx_.size() - pos_);
            out.insert(out.end(), idx_.begin() + static_cast<std::ptrdiff_t>(pos_),
                       idx_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
            pos_ += take;
            if (pos_ == idx_.size()) {
                pos_ = 0;
                ++passes_;
                std::shuffle(idx_.begin(), idx_.end(), rng_);
            }
        }
        return out;
    }

private:
    std::vector<std::size_t> idx_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0, passes_ = 0;
};

/// Piecewise-constant loss-proportional distribution built from random seed points.
class MisDistribution {
public:
    MisDistribution() = default;

    /// `points` are node features (one row per node); the nearest seed donates its loss.
    MisDistribution(const RowMatrix& points, const BatchLossFn& loss, std::size_t n_seeds, std::uint64_t seed) {
        const auto n = static_cast<std::size_t>(points.rows());
        if (n_seeds == 0) throw ConfigError("mis_seeds must be positive");
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const std::size_t m = std::min(n_seeds, n);
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        seeds_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
        seed_loss_ = loss(seeds_);
        evaluations_ = seeds_.size();
        RowMatrix sp(static_cast<Eigen::Index>(m), points.cols());
        for (std::size_t i = 0; i < m; ++i) sp.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(seeds_[i]));
        std::vector<double> w(n);
        if (m == 1) {
            owner_.assign(n, 0);
        } else {
            KdTree tree(sp);
            owner_.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::VectorXd q = points.row(static_cast<Eigen::Index>(i)).transpose();
                owner_[i] = tree.knn(q.data(), 1)[0].index;
            }
        }
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l = seed_loss_[owner_[i]];
            if (!std::isfinite(l) || l < 0) throw NumericError("mis: invalid loss at seed point " + std::to_string(seeds_[owner_[i]]));
            w[i] = l;
            total += l;
        }
        uniform_ = !(total > 0.0);
        cdf_.resize(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += uniform_ ? 1.0 : w[i];
            cdf_[i] = acc;
        }
    }

    bool uniform_fallback() const { return uniform_; }
    std::size_t evaluations() const { return evaluations_; }
    std::size_t size() const { return cdf_.size(); }
    const std::vector<std::size_t>& seeds() const { return seeds_; }
    const std::vector<std::size_t>& owner() const { return owner_; }

    double probability(std::size_t i) const {
        return (cdf_[i] - (i ? cdf_[i - 1] : 0.0)) / cdf_.back();
    }

    std::vector<std::size_t> draw(std::size_t count, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, cdf_.back());
        std::vector<std::size_t> out(count);
        for (auto& o : out) {
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u(rng));
            o = std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
        }
        return out;
    }

private:
    std::vector<std::size_t> seeds_, owner_;
    std::vector<double> seed_loss_, cdf_;
    std::size_t evaluations_ = 0;
    bool uniform_ = false;
};

inline MisDistribution mis_baseline(const RowMatrix& points, const BatchLossFn& loss, std::size_t mis_seeds,
                                    std::uint64_t seed) {
    return MisDistribution(points, loss, mis_seeds, seed);
}

/// Graph, resistance, decomposition and ISR settings of the clustered samplers.
struct PipelineSettings {
    KnnOptions knn{10, WeightScheme::inverse_distance, 1e-12};
    int levels = 10;
    double diam_scale = 64.0;    // diam_budget = diam_scale / average weighted degree
    double output_scale = 0.25;  // weight of standardized outputs in rebuilt graphs
    KrylovOptions er{};
    std::size_t isr_k = 10;
    IsrOptions isr{};
    bool background = false;     // rebuild on a worker thread (not bit-reproducible)
};

/// Input graph -> Krylov ER -> LRD clustering.
inline Clustering cluster_points(const SparseGraph& g, const PipelineSettings& s) {
    const Laplacian lap(g);
    const auto er = er_krylov(lap, s.er);
    return decompose(g, er, s.levels, default_diam_budget(g, s.diam_scale));
}

struct SamplerStats {
    std::size_t refreshes = 0;
    std::size_t rebuilds_started = 0;
    std::size_t rebuilds_swapped = 0;
    std::size_t rebuild_failures = 0;
    std::size_t loss_evaluations = 0;
    std::size_t last_refresh_evaluations = 0;
    std::size_t last_refresh_budget = 0;  // sum ceil(r S_i) + n_c
    double graph_seconds = 0.0;           // time spent (on the training thread) in graph work
};

/// Training-time sampler state machine over N nodes (the interior collocation points).
class Sampler {
public:
    using OutputFn = std::function<RowMatrix()>;

    Sampler(const SamplerConfig& cfg, const PipelineSettings& ps, RowMatrix features)
        : cfg_(cfg), ps_(ps), features_(std::move(features)), rng_(cfg.seed) {
        const auto n = static_cast<std::size_t>(features_.rows());
        cfg_.validate(n);
        target_ = cfg_.resolved_epoch_target(n);
        if (cfg_.mode == SamplerMode::uniform) {
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), std::size_t{0});
            std::shuffle(all.begin(), all.end(), rng_);
            stream_ = EpochStream(std::move(all), cfg_.seed + 1);
        } else if (cfg_.mode == SamplerMode::sgm || cfg_.mode == SamplerMode::sgm_s) {
            const auto t0 = std::chrono::steady_clock::now();
            clusters_ = std::make_shared<const Clustering>(cluster_points(build_knn(features_, ps_.knn), ps_));
            stats_.graph_seconds += seconds_since(t0);
            if (clusters_->cluster_count() > target_)
                throw ConfigError("epoch_target (" + std::to_string(target_) + ") is below the cluster count (" +
                                  std::to_string(clusters_->cluster_count()) +
                                  "); raise sampler.epoch_target or lrd.diam_scale");
        }
    }

    ~Sampler() {
        if (pending_.valid()) pending_.wait();
    }

    const SamplerConfig& config() const { return cfg_; }
    const SamplerStats& stats() const { return stats_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    std::shared_ptr<const Clustering> clustering() const { return clusters_; }
    const ScoreTable& table() const { return table_; }
    const Epoch& epoch() const { return epoch_; }
    const MisDistribution& mis() const { return mis_; }
    std::size_t epoch_target() const { return target_; }

    /// Test hook run inside every rebuild task; an exception simulates a background failure.
    void set_fault_injector(std::function<void()> f) { fault_ = std::move(f); }

    /// Batch of node ids for iteration t. `loss` evaluates the current model per point;
    /// `outputs` returns current model outputs at every node (used for graph rebuilds).
    std::vector<std::size_t> next_batch(std::size_t t, const BatchLossFn& loss, const OutputFn& outputs = {}) {
        switch (cfg_.mode) {
            case SamplerMode::uniform: return stream_.next(cfg_.batch_size);
            case SamplerMode::mis:
                if (t % cfg_.tau_e == 0 || mis_.size() == 0) {
                    mis_ = MisDistribution(features_, loss, cfg_.mis_seeds, derive_seed(t, 1));
                    stats_.loss_evaluations += mis_.evaluations();
                    stats_.last_refresh_evaluations = mis_.evaluations();
                    ++stats_.refreshes;
                }
                return mis_.draw(cfg_.batch_size, rng_);
            case SamplerMode::sgm:
            case SamplerMode::sgm_s: break;
        }
        harvest();
        if (t > 0 && t % cfg_.tau_g == 0 && outputs) launch_rebuild(outputs(), t);
        bool refresh = t % cfg_.tau_e == 0 || stream_.empty();
        // a pass may end inside the previous batch; any completed pass counts as a boundary
        const bool boundary = stream_.at_boundary() || stream_.passes() != seen_passes_;
        seen_passes_ = stream_.passes();
        if (boundary && try_swap()) refresh = true;
        if (refresh) this->refresh(t, loss);
        return stream_.next(cfg_.batch_size);
    }

    /// Blocks until an in-flight rebuild finishes (it is swapped in at the next boundary).
    void wait_for_rebuild() {
        if (pending_.valid()) pending_.wait();
        harvest();
    }

private:
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::uint64_t derive_seed(std::size_t t, std::uint64_t salt) const {
        std::seed_seq sq{cfg_.seed, static_cast<std::uint64_t>(t), salt};
        std::uint64_t out[1];
        sq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
        return out[0];
    }

    void refresh(std::size_t t, const BatchLossFn& loss) {
        const auto& c = *clusters_;
        const Probe p = probe_losses(c, loss, cfg_.probe_fraction, derive_seed(t, 2));
        std::vector<double> isr_mean;
        if (cfg_.mode == SamplerMode::sgm_s) isr_mean = probe_isr(p);
        table_ = score_and_map(p.mean, isr_mean, cfg_.p_min, cfg_.p_max, t);
        epoch_ = assemble_epoch(c, table_, target_, derive_seed(t, 3));
        stream_ = EpochStream(epoch_.indices, derive_seed(t, 4));
        seen_passes_ = 0;
        ++stats_.refreshes;
        stats_.loss_evaluations += p.evaluations;
        stats_.last_refresh_evaluations = p.evaluations;
        std::size_t budget = c.cluster_count();
        for (auto s : c.sizes()) budget += probe_count(cfg_.probe_fraction, s);
        stats_.last_refresh_budget = budget;
    }

    /// Per-cluster mean of ISR node scores over the probe subset (losses as the output manifold).
    std::vector<double> probe_isr(const Probe& p) {
        const auto t0 = std::chrono::steady_clock::now();
        std::size_t n = 0;
        for (const auto& pts : p.points) n += pts.size();
        RowMatrix x(static_cast<Eigen::Index>(n), features_.cols());
        std::vector<double> l;
        std::size_t k = 0;
        for (std::size_t c = 0; c < p.points.size(); ++c)
            for (std::size_t i = 0; i < p.points[c].size(); ++i, ++k) {
                x.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(p.points[c][i]));
                l.push_back(p.losses[c][i]);
            }
        std::vector<double> mean(p.points.size(), 0.0);
        if (n < ps_.isr_k + 2) return mean;
        const auto s = isr_node_scores_subset(x, l, ps_.isr_k, ps_.isr, ps_.knn.scheme);
        k = 0;
        for (std::size_t c = 0; c < p.points.size(); ++c) {
            for (std::size_t i = 0; i < p.points[c].size(); ++i) mean[c] += s.node_scores[k++];
            mean[c] /= static_cast<double>(p.points[c].size());
        }
        stats_.graph_seconds += seconds_since(t0);
        return mean;
    }

    void launch_rebuild(RowMatrix outputs, std::size_t t) {
        if (pending_.valid()) {
            warnings_.push_back("iteration " + std::to_string(t) + ": previous rebuild still running; skipped");
            return;
        }
        ++stats_.rebuilds_started;
        auto job = [features = features_, outputs = std::move(outputs), ps = ps_, fault = fault_]() {
            if (fault) fault();
            const auto g = rebuild_with_outputs(features, outputs, ps.knn, ps.output_scale);
            return std::make_shared<const Clustering>(cluster_points(g, ps));
        };
        if (ps_.background) {
            pending_ = std::async(std::launch::async, std::move(job));
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            std::promise<std::shared_ptr<const Clustering>> pr;
            try {
                pr.set_value(job());
            } catch (...) {
                pr.set_exception(std::current_exception());
            }
            pending_ = pr.get_future();
            stats_.graph_seconds += seconds_since(t0);
        }
    }

    /// Collects a finished rebuild: failures are logged right away, results wait for a boundary.
    void harvest() {
        if (!pending_.valid() || pending_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
        try {
            auto next = pending_.get();
            if (next->cluster_count() > target_) {
                warnings_.push_back("rebuilt clustering has " + std::to_string(next->cluster_count()) +
                                    " clusters, above epoch_target; keeping the previous one");
                ++stats_.rebuild_failures;
                return;
            }
            ready_ = std::move(next);
        } catch (const std::exception& e) {
            warnings_.push_back(std::string("graph rebuild failed, keeping previous clustering: ") + e.what());
            ++stats_.rebuild_failures;
        }
    }

    bool try_swap() {
        harvest();
        if (!ready_) return false;
        clusters_ = std::move(ready_);
        ready_.reset();
        ++stats_.rebuilds_swapped;
        return true;
    }

    SamplerConfig cfg_;
    PipelineSettings ps_;
    RowMatrix features_;
    std::mt19937_64 rng_;
    std::size_t target_ = 0;
    std::shared_ptr<const Clustering> clusters_;
    ScoreTable table_;
    Epoch epoch_;
    EpochStream stream_;
    MisDistribution mis_;
    SamplerStats stats_;
    std::vector<std::string> warnings_;
    std::future<std::shared_ptr<const Clustering>> pending_;
    std::size_t seen_passes_ = 0;
    std::shared_ptr<const Clustering> ready_;  // finished rebuild awaiting the next epoch boundary
    std::function<void()> fault_;
};

}  // namespace sgm
