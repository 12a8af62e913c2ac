#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgm/error.hpp"
#include "sgm/network.hpp"
#include "sgm/pde.hpp"
#include "sgm/sampler.hpp"
#include "sgm/trainer.hpp"

extern char** environ;

namespace sgm {

using json = nlohmann::json;

struct CloudConfig {
    std::string path;  // load instead of generating when set
    std::size_t n_interior = 20000;
    std::size_t n_boundary = 2000;
    std::uint64_t seed = 0;
};

struct NetworkConfig {
    std::size_t width = 32;
    std::size_t depth = 3;
    std::string encoder = "identity";
    std::size_t fourier_features = 16;
    double fourier_scale = 1.0;
    double init_gain = 2.0;
};

struct OptimizerConfig {
    std::string kind = "adam";
    double lr = 1e-3;
    double gamma = 0.95;
    std::size_t decay_steps = 4000;
};

/// Complete description of a training or benchmark run.
struct RunConfig {
    std::string problem = "poisson2d";
    double reynolds = 100.0;
    LossWeights weights{};
    CloudConfig cloud{};
    KnnOptions graph{};
    int lrd_levels = 10;
    double lrd_diam_scale = 64.0;
    double output_scale = 0.25;
    std::size_t er_vectors = 16;
    std::size_t er_steps = 10;
    std::size_t isr_k = 10;
    std::string sampler_mode = "uniform";
    SamplerConfig sampler{};
    NetworkConfig network{};
    OptimizerConfig optimizer{};
    TrainOptions train{};
    std::vector<std::uint64_t> seeds{0};
    std::vector<std::string> methods;  // bench only
    std::string output = "runs";
    std::size_t threads = 1;  // > 1 runs graph rebuilds on a worker thread

    Problem make_problem() const { return Problem(problem_from_name(problem), weights, reynolds); }

    NetworkShape network_shape() const {
        const Problem pb = make_problem();
        return {pb.in_dim(), pb.out_dim(), network.width, network.depth, encoder_from_name(network.encoder),
                network.fourier_features, network.fourier_scale, network.init_gain};
    }

    PipelineSettings pipeline() const {
        PipelineSettings ps;
        ps.knn = graph;
        ps.levels = lrd_levels;
        ps.diam_scale = lrd_diam_scale;
        ps.output_scale = output_scale;
        ps.er.n_vectors = er_vectors;
        ps.er.smoothing_steps = er_steps;
        ps.isr_k = isr_k;
        ps.background = threads > 1;
        return ps;
    }

    SamplerConfig sampler_for(const std::string& mode, std::uint64_t seed) const {
        SamplerConfig s = sampler;
        s.mode = sampler_mode_from_name(mode);
        s.seed = seed;
        return s;
    }

    Optimizer make_optimizer() const {
        return Optimizer(optimizer_from_name(optimizer.kind), {optimizer.lr, optimizer.gamma, optimizer.decay_steps});
    }
};

namespace detail {

/// Reads known keys of one JSON object, recording type errors and unknown keys.
class SectionReader {
public:
    SectionReader(const json& root, std::string name, std::vector<std::string>& problems)
        : name_(std::move(name)), problems_(problems) {
        if (name_.empty()) {
            obj_ = &root;
        } else if (root.contains(name_)) {
            obj_ = &root.at(name_);
            if (!obj_->is_object()) {
                problems_.push_back("'" + name_ + "' must be an object");
                obj_ = nullptr;
            }
        }
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.push_back(key);
        if (!obj_ || !obj_->contains(key)) return;
        const json& v = obj_->at(key);
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("");
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw std::invalid_argument("");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            problems_.push_back(path(key) + " has the wrong type (" + std::string(v.type_name()) + ")");
        }
    }

    void mark(const std::string& key) { seen_.push_back(key); }

    void done() {
        if (!obj_) return;
        for (const auto& [k, v] : obj_->items()) {
            if (name_.empty() && v.is_object()) continue;  // sections are checked separately
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) problems_.push_back("unknown key " + path(k));
        }
    }

private:
    std::string path(const std::string& key) const { return name_.empty() ? "'" + key + "'" : "'" + name_ + "." + key + "'"; }

    const json* obj_ = nullptr;
    std::string name_;
    std::vector<std::string>& problems_;
    std::vector<std::string> seen_;
};

inline const std::vector<std::string>& config_sections() {
    static const std::vector<std::string> s{"problem", "cloud", "graph", "lrd", "isr", "sampler", "network",
                                            "optimizer", "train", "run"};
    return s;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

/// Applies SGM_<SECTION>_<KEY>=value variables. Values that parse as JSON keep their
/// type; anything else is taken as a string. Top-level keys use the RUN section.
inline void apply_env_overrides(json& j, const std::map<std::string, std::string>& env,
                                std::vector<std::string>& problems) {
    for (const auto& [name, value] : env) {
        if (name.rfind("SGM_", 0) != 0) continue;
        const std::string rest = name.substr(4);
        const auto us = rest.find('_');
        if (us == std::string::npos || us + 1 == rest.size()) {
            problems.push_back("environment variable " + name + " is not of the form SGM_<SECTION>_<KEY>");
            continue;
        }
        const std::string section = detail::lower(rest.substr(0, us)), key = detail::lower(rest.substr(us + 1));
        const auto& secs = detail::config_sections();
        if (std::find(secs.begin(), secs.end(), section) == secs.end()) {
            problems.push_back("environment variable " + name + " names unknown section '" + section + "'");
            continue;
        }
        json v = json::parse(value, nullptr, false);
        if (v.is_discarded()) v = value;
        if (section == "run" && key == "seeds" && v.is_string()) {
            json arr = json::array();
            for (auto part : text::split(value, ',')) {
                json p = json::parse(part, nullptr, false);
                arr.push_back(p.is_discarded() ? json(std::string(part)) : p);
            }
            v = arr;
        }
        if (section == "run" && key == "seeds" && v.is_number()) v = json::array({v});
        if (section == "run" && key == "methods" && v.is_string()) {
            json arr = json::array();
            for (auto part : text::split(value, ',')) arr.push_back(std::string(part));
            v = arr;
        }
        if (section == "run") {
            j[key] = v;
        } else {
            if (!j.contains(section) || !j[section].is_object()) j[section] = json::object();
            j[section][key] = v;
        }
    }
}

inline std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        const std::string kv(*e);
        const auto eq = kv.find('=');
        if (eq != std::string::npos && kv.rfind("SGM_", 0) == 0) env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return env;
}

/// Parses and validates a configuration; every problem is reported in one ConfigError.
inline RunConfig parse_config(json j, const std::map<std::string, std::string>& env = {}) {
    std::vector<std::string> problems;
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    apply_env_overrides(j, env, problems);
    RunConfig c;

    for (const auto& [k, v] : j.items())
        if (v.is_object()) {
            const auto& secs = detail::config_sections();
            if (std::find(secs.begin(), secs.end(), k) == secs.end() || k == "run")
                problems.push_back("unknown section '" + k + "'");
        }

    {
        detail::SectionReader r(j, "", problems);
        r.get("steps", c.train.steps);
        r.get("output", c.output);
        r.get("threads", c.threads);
        if (j.contains("seeds")) {
            c.seeds.clear();
            const json& s = j.at("seeds");
            if (!s.is_array()) problems.push_back("'seeds' must be an array of non-negative integers");
            else
                for (const auto& v : s) {
                    if (v.is_number_integer() && v.get<long long>() >= 0) c.seeds.push_back(v.get<std::uint64_t>());
                    else problems.push_back("'seeds' entries must be non-negative integers");
                }
        }
        if (j.contains("methods")) {
            const json& m = j.at("methods");
            if (!m.is_array()) problems.push_back("'methods' must be an array of sampler modes");
            else
                for (const auto& v : m) {
                    if (v.is_string()) c.methods.push_back(v.get<std::string>());
                    else problems.push_back("'methods' entries must be strings");
                }
        }
        r.mark("seeds");
        r.mark("methods");
        r.done();
    }
    {
        detail::SectionReader r(j, "problem", problems);
        r.get("name", c.problem);
        r.get("reynolds", c.reynolds);
        r.get("w_interior", c.weights.interior);
        r.get("w_boundary", c.weights.boundary);
        r.done();
    }
    {
        detail::SectionReader r(j, "cloud", problems);
        r.get("path", c.cloud.path);
        r.get("n_interior", c.cloud.n_interior);
        r.get("n_boundary", c.cloud.n_boundary);
        r.get("seed", c.cloud.seed);
        r.done();
    }
    std::string scheme = to_string(c.graph.scheme);
    {
        detail::SectionReader r(j, "graph", problems);
        r.get("k", c.graph.k);
        r.get("weight_scheme", scheme);
        r.get("eps", c.graph.eps);
        r.get("output_scale", c.output_scale);
        r.done();
    }
    {
        detail::SectionReader r(j, "lrd", problems);
        r.get("levels", c.lrd_levels);
        r.get("diam_scale", c.lrd_diam_scale);
        r.get("er_vectors", c.er_vectors);
        r.get("er_steps", c.er_steps);
        r.done();
    }
    {
        detail::SectionReader r(j, "isr", problems);
        r.get("k", c.isr_k);
        r.done();
    }
    {
        detail::SectionReader r(j, "sampler", problems);
        r.get("mode", c.sampler_mode);
        r.get("batch_size", c.sampler.batch_size);
        r.get("probe_fraction", c.sampler.probe_fraction);
        r.get("tau_e", c.sampler.tau_e);
        r.get("tau_g", c.sampler.tau_g);
        r.get("p_min", c.sampler.p_min);
        r.get("p_max", c.sampler.p_max);
        r.get("epoch_target", c.sampler.epoch_target);
        r.get("mis_seeds", c.sampler.mis_seeds);
        r.get("seed", c.sampler.seed);
        r.done();
    }
    {
        detail::SectionReader r(j, "network", problems);
        r.get("width", c.network.width);
        r.get("depth", c.network.depth);
        r.get("encoder", c.network.encoder);
        r.get("fourier_features", c.network.fourier_features);
        r.get("fourier_scale", c.network.fourier_scale);
        r.get("init_gain", c.network.init_gain);
        r.done();
    }
    {
        detail::SectionReader r(j, "optimizer", problems);
        r.get("kind", c.optimizer.kind);
        r.get("lr", c.optimizer.lr);
        r.get("gamma", c.optimizer.gamma);
        r.get("decay_steps", c.optimizer.decay_steps);
        r.done();
    }
    {
        detail::SectionReader r(j, "train", problems);
        r.get("eval_every", c.train.eval_every);
        r.get("boundary_batch", c.train.boundary_batch);
        r.get("eval_resolution", c.train.eval_resolution);
        r.get("divergence_threshold", c.train.divergence_threshold);
        r.get("record_wall_time", c.train.record_wall_time);
        r.get("stop_at_error", c.train.stop_at_error);
        r.done();
    }

    // value checks
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            problems.push_back(e.what());
        }
    };
    check([&] { problem_from_name(c.problem); });
    check([&] { c.graph.scheme = weight_scheme_from_name(scheme); });
    check([&] { c.sampler.mode = sampler_mode_from_name(c.sampler_mode); });
    for (const auto& m : c.methods) check([&] { sampler_mode_from_name(m); });
    check([&] { encoder_from_name(c.network.encoder); });
    check([&] { optimizer_from_name(c.optimizer.kind); });
    if (c.weights.interior < 0 || c.weights.boundary < 0) problems.push_back("problem weights must be non-negative");
    if (!(c.reynolds > 0)) problems.push_back("problem.reynolds must be positive");
    if (!c.cloud.path.empty() && !std::filesystem::exists(c.cloud.path))
        problems.push_back("cloud.path '" + c.cloud.path + "' does not exist");
    if (c.cloud.path.empty() && (c.cloud.n_interior == 0 || c.cloud.n_boundary == 0))
        problems.push_back("cloud.n_interior and cloud.n_boundary must be positive");
    if (c.graph.k == 0) problems.push_back("graph.k must be positive");
    if (!(c.graph.eps > 0)) problems.push_back("graph.eps must be positive");
    if (!(c.output_scale >= 0)) problems.push_back("graph.output_scale must be non-negative");
    if (c.lrd_levels < 1) problems.push_back("lrd.levels must be >= 1");
    if (!(c.lrd_diam_scale > 0)) problems.push_back("lrd.diam_scale must be positive");
    if (c.er_vectors == 0) problems.push_back("lrd.er_vectors must be positive");
    if (c.isr_k == 0) problems.push_back("isr.k must be positive");
    if (c.network.width == 0 || c.network.depth == 0) problems.push_back("network.width and network.depth must be positive");
    if (!(c.optimizer.lr > 0)) problems.push_back("optimizer.lr must be positive");
    if (!(c.optimizer.gamma > 0 && c.optimizer.gamma <= 1)) problems.push_back("optimizer.gamma must be in (0,1]");
    if (c.train.eval_every == 0) problems.push_back("train.eval_every must be positive");
    if (c.train.boundary_batch == 0) problems.push_back("train.boundary_batch must be positive");
    if (c.train.eval_resolution < 16) problems.push_back("train.eval_resolution must be >= 16");
    if (c.seeds.empty()) problems.push_back("'seeds' must be nonempty");
    if (c.threads == 0) problems.push_back("'threads' must be >= 1");
    const std::size_t n = c.cloud.path.empty() ? c.cloud.n_interior : 0;
    for (auto& p : c.sampler.problems(n)) problems.push_back(p);

    if (!problems.empty()) throw ConfigError(problems);
    return c;
}

inline RunConfig load_config(const std::string& path, const std::map<std::string, std::string>& env = {}) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
    std::ifstream in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    return parse_config(std::move(j), env);
}

/// Canonical JSON of the effective configuration (used for hashing and manifests).
inline json to_json(const RunConfig& c) {
    return json{
        {"problem", {{"name", c.problem}, {"reynolds", c.reynolds}, {"w_interior", c.weights.interior}, {"w_boundary", c.weights.boundary}}},
        {"cloud", {{"path", c.cloud.path}, {"n_interior", c.cloud.n_interior}, {"n_boundary", c.cloud.n_boundary}, {"seed", c.cloud.seed}}},
        {"graph", {{"k", c.graph.k}, {"weight_scheme", to_string(c.graph.scheme)}, {"eps", c.graph.eps}, {"output_scale", c.output_scale}}},
        {"lrd", {{"levels", c.lrd_levels}, {"diam_scale", c.lrd_diam_scale}, {"er_vectors", c.er_vectors}, {"er_steps", c.er_steps}}},
        {"isr", {{"k", c.isr_k}}},
        {"sampler", {{"mode", c.sampler_mode}, {"batch_size", c.sampler.batch_size}, {"probe_fraction", c.sampler.probe_fraction},
                     {"tau_e", c.sampler.tau_e}, {"tau_g", c.sampler.tau_g}, {"p_min", c.sampler.p_min}, {"p_max", c.sampler.p_max},
                     {"epoch_target", c.sampler.epoch_target}, {"mis_seeds", c.sampler.mis_seeds}, {"seed", c.sampler.seed}}},
        {"network", {{"width", c.network.width}, {"depth", c.network.depth}, {"encoder", c.network.encoder},
                     {"fourier_features", c.network.fourier_features}, {"fourier_scale", c.network.fourier_scale},
                     {"init_gain", c.network.init_gain}}},
        {"optimizer", {{"kind", c.optimizer.kind}, {"lr", c.optimizer.lr}, {"gamma", c.optimizer.gamma}, {"decay_steps", c.optimizer.decay_steps}}},
        {"train", {{"eval_every", c.train.eval_every}, {"boundary_batch", c.train.boundary_batch},
                   {"eval_resolution", c.train.eval_resolution}, {"divergence_threshold", c.train.divergence_threshold},
                   {"record_wall_time", c.train.record_wall_time}, {"stop_at_error", c.train.stop_at_error}}},
        {"steps", c.train.steps},
        {"seeds", c.seeds},
        {"methods", c.methods},
        {"output", c.output},
        {"threads", c.threads},
    };
}

}  // namespace sgm
