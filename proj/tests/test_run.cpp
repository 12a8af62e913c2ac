#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "sgm/bench.hpp"
#include "sgm/config.hpp"
#include "sgm/trainer.hpp"

using namespace sgm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sgm_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig small_config(const std::string& out) {
    json j = json::parse(R"({
        "steps": 400,
        "cloud": {"n_interior": 3000, "n_boundary": 300, "seed": 1},
        "network": {"width": 16, "depth": 2},
        "sampler": {"batch_size": 64, "tau_e": 100, "tau_g": 200},
        "train": {"eval_every": 50, "eval_resolution": 33, "boundary_batch": 32}
    })");
    j["output"] = out;
    return parse_config(j);
}

TrainResult run_mode(const RunConfig& c, const std::string& mode, std::uint64_t seed, bool wall = true) {
    RunConfig cc = c;
    cc.train.record_wall_time = wall;
    const auto pc = make_cloud(cc);
    const Problem pb = cc.make_problem();
    const TrainingData data(pb, pc);
    Sampler s(cc.sampler_for(mode, seed), cc.pipeline(), data.features);
    Network net(cc.network_shape(), seed);
    Optimizer opt = cc.make_optimizer();
    TrainOptions o = cc.train;
    o.seed = seed;
    return train(pb, net, data, s, opt, o);
}

std::string csv_of(const TrainResult& r) {
    std::ostringstream os;
    write_trajectory(os, r);
    return os.str();
}

}  // namespace

TEST(Config, DefaultsAreValid) {
    const auto c = parse_config(json::object());
    EXPECT_EQ(c.problem, "poisson2d");
    EXPECT_EQ(c.sampler.batch_size, 256u);
    EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
}

TEST(Config, ErrorsAreExhaustive) {
    json j = json::parse(R"({"sampler": {"mode": "fast", "p_min": 0.9, "p_max": 0.1, "extra": 1},
                            "network": {"width": "wide"}, "seeds": [], "mystery": {}})");
    try {
        parse_config(j);
        FAIL();
    } catch (const ConfigError& e) {
        const auto& p = e.problems();
        auto has = [&](const std::string& s) {
            return std::any_of(p.begin(), p.end(), [&](const std::string& x) { return x.find(s) != std::string::npos; });
        };
        EXPECT_TRUE(has("unknown sampler mode 'fast' (valid: uniform, mis, sgm, sgm_s)"));
        EXPECT_TRUE(has("p_min <= p_max"));
        EXPECT_TRUE(has("'sampler.extra'"));
        EXPECT_TRUE(has("'network.width' has the wrong type"));
        EXPECT_TRUE(has("'seeds' must be nonempty"));
        EXPECT_TRUE(has("unknown section 'mystery'"));
        EXPECT_EQ(p.size(), 6u);
    }
}

TEST(Config, EnvironmentOverrides) {
    const auto c = parse_config(json::object(), {{"SGM_SAMPLER_TAU_E", "123"},
                                                 {"SGM_SAMPLER_MODE", "sgm_s"},
                                                 {"SGM_RUN_SEEDS", "4,5"},
                                                 {"SGM_NETWORK_ENCODER", "fourier"},
                                                 {"SGM_RUN_STEPS", "77"}});
    EXPECT_EQ(c.sampler.tau_e, 123u);
    EXPECT_EQ(c.sampler.mode, SamplerMode::sgm_s);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
    EXPECT_EQ(c.network.encoder, "fourier");
    EXPECT_EQ(c.train.steps, 77u);
    EXPECT_THROW(parse_config(json::object(), {{"SGM_BOGUS_KEY", "1"}}), ConfigError);
    EXPECT_THROW(parse_config(json::object(), {{"SGM_SAMPLER_TAU_E", "-3"}}), ConfigError);
}

TEST(Config, RoundTripsThroughJson) {
    auto c = parse_config(json::parse(R"({"sampler": {"mode": "mis", "mis_seeds": 50}, "seeds": [1, 2]})"));
    const auto d = parse_config(to_json(c));
    EXPECT_EQ(to_json(c), to_json(d));
}

TEST(Train, ZeroStepsLeavesNetworkUnchanged) {
    auto c = small_config(scratch("zero").string());
    const auto pc = make_cloud(c);
    const Problem pb = c.make_problem();
    const TrainingData data(pb, pc);
    Sampler s(c.sampler_for("uniform", 0), c.pipeline(), data.features);
    Network net(c.network_shape(), 0);
    const Eigen::VectorXd before = net.params();
    Optimizer opt = c.make_optimizer();
    TrainOptions o = c.train;
    o.steps = 0;
    const auto r = train(pb, net, data, s, opt, o);
    EXPECT_EQ(net.params(), before);
    EXPECT_EQ(r.steps_done, 0u);
}

TEST(Train, TrajectoriesAreBitReproducible) {
    const auto c = small_config(scratch("det").string());
    for (auto mode : {"uniform", "mis", "sgm", "sgm_s"}) {
        const auto a = run_mode(c, mode, 3, false), b = run_mode(c, mode, 3, false);
        EXPECT_EQ(csv_of(a), csv_of(b)) << mode;
        EXPECT_NE(csv_of(a), csv_of(run_mode(c, mode, 4, false))) << mode;
    }
}

TEST(Train, LossDecreasesForEverySampler) {
    auto c = small_config(scratch("loss").string());
    c.train.steps = 2000;
    c.train.eval_every = 1000;
    for (auto mode : {"uniform", "mis", "sgm", "sgm_s"}) {
        const auto r = run_mode(c, mode, 1);
        ASSERT_EQ(r.step_losses.size(), 2000u);
        auto median = [&](std::size_t a, std::size_t b) {
            std::vector<double> w(r.step_losses.begin() + a, r.step_losses.begin() + b);
            std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
            return w[w.size() / 2];
        };
        EXPECT_LT(median(1000, 2000), median(0, 1000)) << mode;
    }
}

TEST(Train, DivergenceAbortsWithTrajectory) {
    auto c = small_config(scratch("div").string());
    c.optimizer.lr = 10.0;
    c.train.divergence_threshold = 1e3;
    const auto r = run_mode(c, "uniform", 0);
    EXPECT_TRUE(r.diverged);
    EXPECT_LT(r.steps_done, c.train.steps);
    EXPECT_FALSE(r.trajectory.empty());
}

TEST(Train, TrajectoryCsvRoundTrip) {
    const auto dir = scratch("csv");
    auto c = small_config(dir.string());
    c.train.steps = 100;
    const auto r = run_mode(c, "uniform", 0);
    save_trajectory(r, (dir / "t.csv").string());
    const auto back = load_trajectory((dir / "t.csv").string());
    EXPECT_EQ(csv_of(back), csv_of(r));
    EXPECT_EQ(text::split(csv_of(r).substr(0, csv_of(r).find('\n')), ',').size(), 6u);
}

namespace {

TrainResult synthetic(std::vector<std::pair<double, double>> time_err, bool diverged = false) {
    TrainResult r;
    r.error_names = {"u"};
    std::size_t it = 0;
    for (auto [t, e] : time_err) {
        TrajectoryRow row;
        row.iteration = (it += 100);
        row.wall_time_s = t;
        row.errors = {e};
        r.trajectory.push_back(row);
    }
    r.diverged = diverged;
    return r;
}

}  // namespace

TEST(Bench, MatrixBlanksAndDnf) {
    std::map<std::string, std::vector<TrainResult>> runs;
    runs["uniform"] = {synthetic({{1, 0.5}, {2, 0.2}, {3, 0.1}})};
    runs["sgm"] = {synthetic({{1, 0.3}, {2, 0.05}, {3, 0.04}})};
    runs["mis"] = {synthetic({{1, 0.9}, {2, 1e9}}, true)};
    const auto r = aggregate({"uniform", "sgm", "mis"}, runs);
    // uniform never reaches Min(sgm) = 0.04: blank; sgm reaches Min(uniform) = 0.1 at t = 2
    EXPECT_FALSE(r.matrix[0][1][0].reached);
    EXPECT_EQ(r.matrix[0][1][0].text(), "");
    EXPECT_TRUE(r.matrix[0][0][1].reached);
    EXPECT_DOUBLE_EQ(r.matrix[0][0][1].seconds, 2.0);
    EXPECT_EQ(r.matrix[0][0][2].text(), "DNF");
    // common threshold: worst non-diverged best value (uniform's 0.1); speedup 3/2
    EXPECT_DOUBLE_EQ(r.common_threshold[0], 0.1);
    EXPECT_DOUBLE_EQ(r.speedup_time[0][1], 1.5);
    const auto csv = report_csv(r);
    EXPECT_EQ(csv.find("min_error_std"), std::string::npos);  // single seed: no std columns
    EXPECT_NE(report_markdown(r).find("1.5x runtime improvement in u"), std::string::npos);
}

TEST(Bench, ReportArithmeticMatchesRawCsvsAndManifestIsComplete) {
    const auto dir = scratch("bench");
    auto c = small_config(dir.string());
    c.train.steps = 300;
    c.methods = {"uniform", "sgm"};
    c.seeds = {0, 1};
    const auto art = bench(c);
    // recompute every speedup from the trajectory CSVs on disk
    std::map<std::string, std::vector<TrainResult>> from_disk;
    for (const auto& m : c.methods)
        for (auto s : c.seeds) from_disk[m].push_back(load_trajectory((dir / (m + "_seed" + std::to_string(s) + ".csv")).string()));
    const auto again = aggregate(c.methods, from_disk);
    for (std::size_t m = 0; m < 2; ++m) {
        const auto& base = again.common_reach[0][0];
        const auto& cell = again.common_reach[0][m];
        ASSERT_TRUE(base.reached && cell.reached);
        EXPECT_DOUBLE_EQ(art.report.speedup_time[0][m], base.seconds / cell.seconds);
        EXPECT_DOUBLE_EQ(art.report.speedup_iter[0][m], base.iterations / cell.iterations);
    }
    EXPECT_NE(report_csv(art.report).find("min_error_std"), std::string::npos);

    const json man = json::parse(read_file((dir / "manifest.json").string()));
    std::set<std::string> listed;
    for (const auto& a : man["artifacts"]) {
        listed.insert(a["path"].get<std::string>());
        EXPECT_EQ(a["sha256"].get<std::string>(), sha256_file((dir / a["path"].get<std::string>()).string()));
    }
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename() != "manifest.json") { EXPECT_TRUE(listed.count(e.path().filename().string())) << e.path(); }
    EXPECT_EQ(man["config_sha256"].get<std::string>(), sha256_hex(to_json(c).dump()));
}

TEST(Bench, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
