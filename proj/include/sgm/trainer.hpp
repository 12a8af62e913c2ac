#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/network.hpp"
#include "sgm/pde.hpp"
#include "sgm/pointcloud.hpp"
#include "sgm/sampler.hpp"
#include "sgm/text_io.hpp"

namespace sgm {

struct TrainOptions {
    std::size_t steps = 20000;
    std::size_t eval_every = 250;
    std::size_t boundary_batch = 64;
    double divergence_threshold = 1e6;
    std::size_t eval_resolution = ReferenceEvaluator::default_resolution;
    std::uint64_t seed = 0;
    bool record_wall_time = true;  // false writes 0 so trajectories compare bit-exactly
    /// Stop early once every validated error is at or below this value (0 disables).
    double stop_at_error = 0.0;
};

/// One trajectory row; losses are means over the steps since the previous row.
struct TrajectoryRow {
    std::size_t iteration = 0;
    double wall_time_s = 0.0;
    double loss_total = 0.0, loss_interior = 0.0, loss_boundary = 0.0;
    std::vector<double> errors;  // order of Problem::error_outputs()
};

struct TrainResult {
    std::vector<std::string> error_names;
    std::vector<TrajectoryRow> trajectory;
    std::vector<double> step_losses;  // total batch loss of every completed step
    std::size_t steps_done = 0;
    bool diverged = false;
    std::string message;
    double train_seconds = 0.0;
    SamplerStats sampler_stats;
    std::vector<std::string> warnings;

    std::vector<double> final_errors() const { return trajectory.empty() ? std::vector<double>{} : trajectory.back().errors; }

    /// Smallest error of output k over the trajectory.
    double min_error(std::size_t k) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : trajectory) m = std::min(m, r.errors.at(k));
        return m;
    }
};

inline std::string trajectory_header(const std::vector<std::string>& error_names) {
    std::string h = "iteration,wall_time_s,loss_total,loss_interior,loss_boundary";
    for (const auto& n : error_names) h += ",err_" + n;
    return h;
}

inline void write_trajectory(std::ostream& out, const TrainResult& r) {
    using text::format_double;
    out << trajectory_header(r.error_names) << "\n";
    for (const auto& row : r.trajectory) {
        out << row.iteration << "," << format_double(row.wall_time_s) << "," << format_double(row.loss_total) << ","
            << format_double(row.loss_interior) << "," << format_double(row.loss_boundary);
        for (double e : row.errors) out << "," << format_double(e);
        out << "\n";
    }
}

inline void save_trajectory(const TrainResult& r, const std::string& path) {
    auto out = text::open_out(path);
    write_trajectory(out, r);
}

/// Reads a trajectory CSV back (iteration, wall time, losses, errors).
inline TrainResult load_trajectory(const std::string& path) {
    auto in = text::open_in(path);
    TrainResult r;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (ln == 1) {
            if (f.size() < 6 || f[0] != "iteration") throw ParseError("not a trajectory header", ln);
            for (std::size_t k = 5; k < f.size(); ++k) r.error_names.emplace_back(f[k].substr(f[k].find('_') + 1));
            continue;
        }
        if (f.size() != 5 + r.error_names.size()) throw ParseError("wrong field count", ln);
        TrajectoryRow row;
        row.iteration = text::parse_int<std::size_t>(f[0], ln);
        row.wall_time_s = text::parse_double(f[1], ln);
        row.loss_total = text::parse_double(f[2], ln);
        row.loss_interior = text::parse_double(f[3], ln);
        row.loss_boundary = text::parse_double(f[4], ln);
        for (std::size_t k = 5; k < f.size(); ++k) row.errors.push_back(text::parse_double(f[k], ln));
        r.trajectory.push_back(std::move(row));
    }
    if (!r.trajectory.empty()) r.steps_done = r.trajectory.back().iteration;
    return r;
}

/// The interior/boundary split of a point cloud in network-input layout.
struct TrainingData {
    Eigen::MatrixXd interior;         // in_dim x N
    RowMatrix features;               // N x d, sampler graph features
    Eigen::MatrixXd boundary;         // in_dim x Nb
    std::vector<PointTag> boundary_tags;

    TrainingData(const Problem& pb, const PointCloud& pc) {
        if (pc.dims() != pb.in_dim())
            throw ConfigError("point cloud has " + std::to_string(pc.dims()) + " features, problem " + pb.name() +
                              " needs " + std::to_string(pb.in_dim()));
        const auto in = pc.interior_indices(), bd = pc.boundary_indices();
        if (in.empty() || bd.empty()) throw ConfigError("point cloud needs interior and boundary points");
        interior = as_columns(pc, in, pb.in_dim());
        features = pc.select(in, pc.schema().spatial_and_params());
        boundary = as_columns(pc, bd, pb.in_dim());
        for (auto i : bd) boundary_tags.push_back(pc.tags()[i]);
    }

    std::size_t n_interior() const { return static_cast<std::size_t>(interior.cols()); }
};

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& ids) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(ids[k]));
    return out;
}

/// Physics-informed training: each step draws an interior batch from the sampler and a
/// uniform boundary batch, and takes one optimizer step on the weighted loss. Validation
/// (excluded from wall time) runs every eval_every steps and after the last step.
inline TrainResult train(const Problem& pb, Network& net, const TrainingData& data, Sampler& sampler, Optimizer& opt,
                         const TrainOptions& o) {
    if (o.eval_every == 0) throw ConfigError("train.eval_every must be positive");
    if (o.boundary_batch == 0) throw ConfigError("train.boundary_batch must be positive");
    if (net.dims().front() != pb.in_dim() || net.dims().back() != pb.out_dim())
        throw ConfigError("network dimensions do not match problem " + pb.name());
    using clock = std::chrono::steady_clock;

    TrainResult res;
    res.error_names = pb.error_outputs();
    const ReferenceEvaluator ref(pb, o.eval_resolution);
    std::mt19937_64 rng(o.seed);
    std::uniform_int_distribution<std::size_t> pick_b(0, static_cast<std::size_t>(data.boundary.cols()) - 1);

    const BatchLossFn loss_fn = [&](const std::vector<std::size_t>& ids) {
        return pointwise_loss(pb, net, gather_columns(data.interior, ids));
    };
    const Sampler::OutputFn outputs_fn = [&] {
        return RowMatrix(net.forward(data.interior).transpose());
    };

    double elapsed = 0.0, sum_t = 0.0, sum_i = 0.0, sum_b = 0.0;
    std::size_t window = 0;
    auto record = [&](std::size_t it) {
        TrajectoryRow row;
        row.iteration = it;
        row.wall_time_s = o.record_wall_time ? elapsed : 0.0;
        if (window) {
            row.loss_total = sum_t / static_cast<double>(window);
            row.loss_interior = sum_i / static_cast<double>(window);
            row.loss_boundary = sum_b / static_cast<double>(window);
        }
        row.errors = ref.errors(net);
        res.trajectory.push_back(std::move(row));
        sum_t = sum_i = sum_b = 0.0;
        window = 0;
    };

    Eigen::VectorXd grad;
    std::vector<std::size_t> bids(o.boundary_batch);
    for (std::size_t t = 0; t < o.steps; ++t) {
        const auto t0 = clock::now();
        try {
            const auto ids = sampler.next_batch(t, loss_fn, outputs_fn);
            for (auto& b : bids) b = pick_b(rng);
            const Eigen::MatrixXd xi = gather_columns(data.interior, ids), xb = gather_columns(data.boundary, bids);
            std::vector<PointTag> tags(bids.size());
            for (std::size_t k = 0; k < bids.size(); ++k) tags[k] = data.boundary_tags[bids[k]];
            const LossReport rep = batch_loss(pb, net, xi, xb, tags, &grad);
            if (!std::isfinite(rep.total) || rep.total > o.divergence_threshold)
                throw NumericError("loss " + text::format_double(rep.total) + " exceeds the divergence threshold");
            opt.step(net.params(), grad);
            res.step_losses.push_back(rep.total);
            sum_t += rep.total;
            sum_i += rep.interior;
            sum_b += rep.boundary;
            ++window;
        } catch (const NumericError& e) {
            elapsed += std::chrono::duration<double>(clock::now() - t0).count();
            res.diverged = true;
            res.message = "diverged at iteration " + std::to_string(t) + ": " + e.what();
            res.steps_done = t;
            break;
        }
        elapsed += std::chrono::duration<double>(clock::now() - t0).count();
        res.steps_done = t + 1;
        if (res.steps_done % o.eval_every == 0 || res.steps_done == o.steps) {
            record(res.steps_done);
            if (o.stop_at_error > 0.0) {
                const auto& e = res.trajectory.back().errors;
                if (std::all_of(e.begin(), e.end(), [&](double v) { return v <= o.stop_at_error; })) break;
            }
        }
    }
    if (res.trajectory.empty() || res.trajectory.back().iteration != res.steps_done) {
        if (!res.diverged || res.trajectory.empty()) record(res.steps_done);
    }
    res.train_seconds = elapsed;
    res.sampler_stats = sampler.stats();
    res.warnings = sampler.warnings();
    return res;
}

}  // namespace sgm
