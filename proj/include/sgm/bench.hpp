#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgm/config.hpp"
#include "sgm/pointcloud.hpp"
#include "sgm/trainer.hpp"

namespace sgm {

inline constexpr const char* version = "0.1.0";

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

/// Point cloud described by a run configuration (loaded or generated).
inline PointCloud make_cloud(const RunConfig& c) {
    if (!c.cloud.path.empty()) return load(c.cloud.path);
    return generate(c.make_problem().domain(), c.cloud.n_interior, c.cloud.n_boundary, c.cloud.seed);
}

struct RunOutcome {
    std::string method;
    std::uint64_t seed = 0;
    std::string trajectory_path, checkpoint_path;
    TrainResult result;
};

/// One training run (method x seed) writing its trajectory CSV and final checkpoint.
inline RunOutcome run_one(const RunConfig& c, const PointCloud& pc, const std::string& method, std::uint64_t seed,
                          const std::string& out_dir) {
    const Problem pb = c.make_problem();
    const TrainingData data(pb, pc);
    Sampler sampler(c.sampler_for(method, seed), c.pipeline(), data.features);
    Network net(c.network_shape(), seed);
    Optimizer opt = c.make_optimizer();
    TrainOptions o = c.train;
    o.seed = seed;
    RunOutcome r;
    r.method = method;
    r.seed = seed;
    r.result = train(pb, net, data, sampler, opt, o);
    std::filesystem::create_directories(out_dir);
    const std::string stem = method + "_seed" + std::to_string(seed);
    r.trajectory_path = (std::filesystem::path(out_dir) / (stem + ".csv")).string();
    r.checkpoint_path = (std::filesystem::path(out_dir) / (stem + ".net")).string();
    save_trajectory(r.result, r.trajectory_path);
    net.save(r.checkpoint_path);
    return r;
}

/// First trajectory row whose error k is at or below `threshold`.
inline std::optional<TrajectoryRow> first_reach(const TrainResult& r, std::size_t k, double threshold) {
    for (const auto& row : r.trajectory)
        if (row.errors.at(k) <= threshold) return row;
    return std::nullopt;
}

struct Stat {
    double mean = 0.0, std = 0.0;
};

inline Stat mean_std(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) s.std += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(s.std / static_cast<double>(v.size() - 1));
    }
    return s;
}

/// Time (and iterations) for a method's seed-averaged curve to reach a threshold.
/// DNF marks a method with a diverged run.
struct ReachCell {
    bool dnf = false;
    bool reached = false;
    double seconds = 0.0, iterations = 0.0;

    std::string text(bool iters = false) const {
        if (dnf) return "DNF";
        if (!reached) return "";
        std::ostringstream os;
        os << std::setprecision(6) << (iters ? iterations : seconds);
        return os.str();
    }
};

/// Row-wise mean of several trajectories (rows aligned by position, truncated to the shortest).
inline TrainResult mean_trajectory(const std::vector<TrainResult>& runs) {
    TrainResult m;
    if (runs.empty()) return m;
    m.error_names = runs.front().error_names;
    std::size_t rows = runs.front().trajectory.size();
    for (const auto& r : runs) rows = std::min(rows, r.trajectory.size());
    const auto n = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < rows; ++i) {
        TrajectoryRow row;
        row.iteration = runs.front().trajectory[i].iteration;
        row.errors.assign(m.error_names.size(), 0.0);
        for (const auto& r : runs) {
            const auto& x = r.trajectory[i];
            row.wall_time_s += x.wall_time_s / n;
            row.loss_total += x.loss_total / n;
            row.loss_interior += x.loss_interior / n;
            row.loss_boundary += x.loss_boundary / n;
            for (std::size_t k = 0; k < row.errors.size(); ++k) row.errors[k] += x.errors.at(k) / n;
        }
        m.trajectory.push_back(std::move(row));
    }
    for (const auto& r : runs) m.diverged = m.diverged || r.diverged;
    return m;
}

struct BenchReport {
    std::vector<std::string> methods, outputs;
    std::size_t seeds = 0;
    // [method][output]
    std::vector<std::vector<Stat>> min_error;
    // [output][target method][method]: time for `method` to reach Min(target)
    std::vector<std::vector<std::vector<ReachCell>>> matrix;
    // per output: the worst method's best value, and each method's time to reach it
    std::vector<double> common_threshold;
    std::vector<std::vector<ReachCell>> common_reach;  // [output][method]
    // speedup of each method over methods[0] at the common threshold ([output][method]); NaN if undefined
    std::vector<std::vector<double>> speedup_time, speedup_iter;
};

/// Aggregates per-method run results (all methods must share error outputs). Each method
/// is summarized by its seed-averaged error curve: Min(j) is that curve's minimum and
/// time-to-threshold is the first evaluation where it reaches the threshold.
inline BenchReport aggregate(const std::vector<std::string>& methods,
                             const std::map<std::string, std::vector<TrainResult>>& runs) {
    if (methods.size() < 2) throw ConfigError("bench needs at least 2 methods");
    BenchReport rep;
    rep.methods = methods;
    rep.outputs = runs.at(methods[0]).at(0).error_names;
    rep.seeds = runs.at(methods[0]).size();
    const std::size_t nm = methods.size(), no = rep.outputs.size();
    std::vector<TrainResult> mean(nm);
    for (std::size_t m = 0; m < nm; ++m) mean[m] = mean_trajectory(runs.at(methods[m]));
    auto reach = [&](std::size_t m, std::size_t k, double thr) {
        ReachCell c;
        if (mean[m].diverged) {
            c.dnf = true;
            return c;
        }
        if (const auto row = first_reach(mean[m], k, thr)) {
            c.reached = true;
            c.seconds = row->wall_time_s;
            c.iterations = static_cast<double>(row->iteration);
        }
        return c;
    };

    rep.min_error.assign(nm, std::vector<Stat>(no));
    for (std::size_t m = 0; m < nm; ++m)
        for (std::size_t k = 0; k < no; ++k) {
            const auto& tr = mean[m].trajectory;
            if (tr.empty()) {
                rep.min_error[m][k].mean = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            std::size_t best = 0;
            for (std::size_t i = 1; i < tr.size(); ++i)
                if (tr[i].errors[k] < tr[best].errors[k]) best = i;
            std::vector<double> at_best;
            for (const auto& r : runs.at(methods[m])) at_best.push_back(r.trajectory[best].errors.at(k));
            rep.min_error[m][k] = {tr[best].errors[k], mean_std(at_best).std};
        }
    rep.matrix.assign(no, std::vector<std::vector<ReachCell>>(nm, std::vector<ReachCell>(nm)));
    rep.common_threshold.assign(no, 0.0);
    rep.common_reach.assign(no, std::vector<ReachCell>(nm));
    rep.speedup_time.assign(no, std::vector<double>(nm, std::numeric_limits<double>::quiet_NaN()));
    rep.speedup_iter = rep.speedup_time;
    for (std::size_t k = 0; k < no; ++k) {
        for (std::size_t target = 0; target < nm; ++target)
            for (std::size_t m = 0; m < nm; ++m) rep.matrix[k][target][m] = reach(m, k, rep.min_error[target][k].mean);
        double worst = 0.0;
        for (std::size_t m = 0; m < nm; ++m)
            if (!mean[m].diverged && std::isfinite(rep.min_error[m][k].mean)) worst = std::max(worst, rep.min_error[m][k].mean);
        rep.common_threshold[k] = worst;
        for (std::size_t m = 0; m < nm; ++m) rep.common_reach[k][m] = reach(m, k, worst);
        const auto& base = rep.common_reach[k][0];
        for (std::size_t m = 0; m < nm; ++m) {
            const auto& c = rep.common_reach[k][m];
            if (base.reached && c.reached) {
                if (c.seconds > 0) rep.speedup_time[k][m] = base.seconds / c.seconds;
                if (c.iterations > 0) rep.speedup_iter[k][m] = base.iterations / c.iterations;
            }
        }
    }
    return rep;
}

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace detail

/// Long-format CSV: one row per (output, method) with min error, common-threshold reach and speedups,
/// followed by the Min(target) time matrix.
inline std::string report_csv(const BenchReport& r) {
    using detail::num;
    std::ostringstream os;
    const bool sd = r.seeds > 1;
    os << "section,output,method,min_error" << (sd ? ",min_error_std" : "")
       << ",threshold,time_s,iterations,speedup_time,speedup_iter\n";
    for (std::size_t k = 0; k < r.outputs.size(); ++k)
        for (std::size_t m = 0; m < r.methods.size(); ++m) {
            const auto& c = r.common_reach[k][m];
            os << "summary," << r.outputs[k] << "," << r.methods[m] << "," << num(r.min_error[m][k].mean);
            if (sd) os << "," << num(r.min_error[m][k].std);
            os << "," << num(r.common_threshold[k]) << "," << c.text() << "," << c.text(true) << ","
               << num(r.speedup_time[k][m]) << "," << num(r.speedup_iter[k][m]) << "\n";
        }
    os << "\nsection,output,target,threshold";
    for (const auto& m : r.methods) os << ",T(" << m << ")";
    os << "\n";
    for (std::size_t k = 0; k < r.outputs.size(); ++k)
        for (std::size_t t = 0; t < r.methods.size(); ++t) {
            os << "matrix," << r.outputs[k] << "," << r.methods[t] << "," << num(r.min_error[t][k].mean);
            for (std::size_t m = 0; m < r.methods.size(); ++m) os << "," << r.matrix[k][t][m].text();
            os << "\n";
        }
    return os.str();
}

inline json report_json(const BenchReport& r) {
    json j;
    j["methods"] = r.methods;
    j["outputs"] = r.outputs;
    j["seeds"] = r.seeds;
    auto cell = [](const ReachCell& c) -> json {
        if (c.dnf) return "DNF";
        if (!c.reached) return nullptr;
        return json{{"time_s", c.seconds}, {"iterations", c.iterations}};
    };
    auto opt_num = [](double v) -> json { return std::isnan(v) ? json(nullptr) : json(v); };
    for (std::size_t k = 0; k < r.outputs.size(); ++k) {
        json o;
        o["common_threshold"] = r.common_threshold[k];
        for (std::size_t m = 0; m < r.methods.size(); ++m) {
            json e{{"min_error", r.min_error[m][k].mean}};
            if (r.seeds > 1) e["min_error_std"] = r.min_error[m][k].std;
            e["reach"] = cell(r.common_reach[k][m]);
            e["speedup_time"] = opt_num(r.speedup_time[k][m]);
            e["speedup_iter"] = opt_num(r.speedup_iter[k][m]);
            json row;
            for (std::size_t t = 0; t < r.methods.size(); ++t) row[r.methods[t]] = cell(r.matrix[k][t][m]);
            e["time_to_min_of"] = row;
            o["methods"][r.methods[m]] = e;
        }
        j["per_output"][r.outputs[k]] = o;
    }
    return j;
}

/// Markdown table in the shape of a min-error / time-to-threshold summary.
inline std::string report_markdown(const BenchReport& r) {
    using detail::num;
    std::ostringstream os;
    os << "# Benchmark report\n\n" << r.seeds << " seed(s) per method. Blank: threshold not reached; DNF: diverged.\n";
    for (std::size_t k = 0; k < r.outputs.size(); ++k) {
        const auto& out = r.outputs[k];
        os << "\n## Output " << out << "\n\n| method | Min(" << out << ")";
        if (r.seeds > 1) os << " | std";
        for (const auto& t : r.methods) os << " | T(" << t << "_" << out << ") [s]";
        os << " |\n|---|---" << (r.seeds > 1 ? "|---" : "");
        for (std::size_t t = 0; t < r.methods.size(); ++t) os << "|---";
        os << "|\n";
        for (std::size_t m = 0; m < r.methods.size(); ++m) {
            os << "| " << r.methods[m] << " | " << num(r.min_error[m][k].mean);
            if (r.seeds > 1) os << " | " << num(r.min_error[m][k].std);
            for (std::size_t t = 0; t < r.methods.size(); ++t) os << " | " << r.matrix[k][t][m].text();
            os << " |\n";
        }
        os << "\nAt the common threshold " << num(r.common_threshold[k]) << " (worst method's best value):\n\n";
        for (std::size_t m = 1; m < r.methods.size(); ++m) {
            os << "- " << r.methods[m] << " vs " << r.methods[0] << ": ";
            if (std::isnan(r.speedup_time[k][m])) os << "n/a\n";
            else
                os << num(r.speedup_time[k][m]) << "x runtime improvement in " << out << " (" << num(r.speedup_iter[k][m])
                   << "x in iterations)\n";
        }
    }
    return os.str();
}

/// Self-contained SVG line plot with a logarithmic y axis.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series) {
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& [name, pts] : series)
        for (auto [x, y] : pts) {
            if (!(y > 0) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, std::log10(y)), y1 = std::max(y1, std::log10(y));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = -1, y1 = 0;
    if (x1 <= x0) x1 = x0 + 1;
    y0 = std::floor(y0), y1 = std::ceil(y1);
    if (y1 <= y0) y1 = y0 + 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return T + (y1 - std::log10(y)) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
        const double y = py(std::pow(10.0, e));
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double x = x0 + (x1 - x0) * i / 4.0;
        os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << detail::num(x) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
       << ")\">" << ylabel << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = colors[s % 6];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : series[s].second)
            if (y > 0 && std::isfinite(y)) os << px(x) << "," << py(y) << " ";
        os << "\"/>\n";
        const double ly = T + 16 + 18 * static_cast<double>(s);
        os << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << series[s].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

struct BenchArtifacts {
    BenchReport report;
    std::vector<RunOutcome> runs;
    std::vector<std::string> files;  // every artifact, relative to the output directory
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    auto out = text::open_out(p.string());
    out << s;
}

/// Writes manifest.json listing every artifact with its SHA-256 and the configuration hash.
inline void write_manifest(const std::string& out_dir, const RunConfig& c, const std::vector<std::string>& files) {
    const std::string cfg = to_json(c).dump();
    json m{{"version", version}, {"config", to_json(c)}, {"config_sha256", sha256_hex(cfg)}};
    m["artifacts"] = json::array();
    for (const auto& f : files) {
        const auto p = std::filesystem::path(out_dir) / f;
        m["artifacts"].push_back({{"path", f}, {"sha256", sha256_file(p.string())}, {"bytes", std::filesystem::file_size(p)}});
    }
    write_text(std::filesystem::path(out_dir) / "manifest.json", m.dump(2) + "\n");
}

/// Runs every (method x seed), aggregates and writes CSV/JSON/Markdown reports, SVG plots
/// and a manifest. Runs are sequential; each owns its network, sampler and RNG streams.
inline BenchArtifacts bench(const RunConfig& c, std::ostream* log = nullptr) {
    if (c.methods.size() < 2) throw ConfigError("bench needs at least 2 methods in 'methods'");
    const PointCloud pc = make_cloud(c);
    BenchArtifacts a;
    std::map<std::string, std::vector<TrainResult>> by_method;
    const std::filesystem::path out(c.output);
    std::filesystem::create_directories(out);
    for (const auto& m : c.methods)
        for (auto seed : c.seeds) {
            auto r = run_one(c, pc, m, seed, c.output);
            if (log) {
                *log << m << " seed " << seed << ": " << r.result.steps_done << " steps, " << r.result.train_seconds << " s";
                if (r.result.diverged) *log << " (" << r.result.message << ")";
                *log << "\n";
            }
            a.files.push_back(std::filesystem::path(r.trajectory_path).filename().string());
            a.files.push_back(std::filesystem::path(r.checkpoint_path).filename().string());
            by_method[m].push_back(r.result);
            a.runs.push_back(std::move(r));
        }
    a.report = aggregate(c.methods, by_method);
    write_text(out / "report.csv", report_csv(a.report));
    write_text(out / "report.json", report_json(a.report).dump(2) + "\n");
    write_text(out / "report.md", report_markdown(a.report));
    for (auto f : {"report.csv", "report.json", "report.md"}) a.files.emplace_back(f);
    for (std::size_t k = 0; k < a.report.outputs.size(); ++k) {
        const auto& o = a.report.outputs[k];
        for (bool by_time : {true, false}) {
            std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
            for (const auto& r : a.runs) {
                std::vector<std::pair<double, double>> pts;
                for (const auto& row : r.result.trajectory)
                    pts.emplace_back(by_time ? row.wall_time_s : static_cast<double>(row.iteration), row.errors[k]);
                series.emplace_back(r.method + " s" + std::to_string(r.seed), std::move(pts));
            }
            const std::string name = std::string("error_") + o + (by_time ? "_vs_time.svg" : "_vs_iteration.svg");
            write_text(out / name, svg_plot("L2 relative error of " + o, by_time ? "wall time [s]" : "iteration",
                                            "error", series));
            a.files.push_back(name);
        }
    }
    write_manifest(c.output, c, a.files);
    return a;
}

}  // namespace sgm
