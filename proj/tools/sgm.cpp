#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "sgm/bench.hpp"
#include "sgm/config.hpp"
#include "sgm/graph.hpp"
#include "sgm/lrd.hpp"
#include "sgm/pointcloud.hpp"
#include "sgm/resistance.hpp"
#include "sgm/trainer.hpp"

namespace {

using namespace sgm;

struct GenArgs {
    std::string domain = "unit-square", out = "cloud.txt";
    std::size_t n_interior = 20000, n_boundary = 2000;
    std::uint64_t seed = 0;
    bool lhs = false;
};

struct GraphArgs {
    std::string cloud, out = "graph.txt", scheme = "inverse_distance";
    std::size_t k = 10;
};

struct ClusterArgs {
    std::string graph, out = "clusters.txt", er = "krylov";
    int levels = 10;
    double diam_scale = 64.0, diam_budget = 0.0;
    std::uint64_t seed = 0;
};

struct OracleArgs {
    std::string graph, out = "er.txt";
};

struct RunArgs {
    std::string config, mode, output;
    std::vector<std::uint64_t> seeds;
};

RunConfig resolve(const RunArgs& a) {
    RunConfig c = a.config.empty() ? parse_config(json::object(), process_environment())
                                   : load_config(a.config, process_environment());
    if (!a.mode.empty()) {
        c.sampler_mode = a.mode;
        c.sampler.mode = sampler_mode_from_name(a.mode);
    }
    if (!a.seeds.empty()) c.seeds = a.seeds;
    if (!a.output.empty()) c.output = a.output;
    return c;
}

int cmd_gen(const GenArgs& a) {
    auto d = DomainSpec::from_name(a.domain);
    d.latin_hypercube = a.lhs;
    const auto pc = generate(d, a.n_interior, a.n_boundary, a.seed);
    save(pc, a.out);
    std::cout << "wrote " << pc.size() << " points to " << a.out << "\n";
    return exit_code::ok;
}

int cmd_graph(const GraphArgs& a) {
    const auto pc = load(a.cloud);
    const auto g = build_knn(pc, pc.schema().spatial_and_params(), {a.k, weight_scheme_from_name(a.scheme), 1e-12});
    save_edge_list(g, a.out);
    std::cout << "wrote " << g.edge_count() << " edges over " << g.n() << " nodes to " << a.out << "\n";
    return exit_code::ok;
}

int cmd_cluster(const ClusterArgs& a) {
    const auto g = load_edge_list(a.graph);
    const Laplacian lap(g);
    KrylovOptions ko;
    ko.seed = a.seed;
    const auto er = er_method_from_name(a.er) == ErMethod::exact ? er_exact(lap) : er_krylov(lap, ko);
    const double budget = a.diam_budget > 0 ? a.diam_budget : default_diam_budget(g, a.diam_scale);
    const auto c = decompose(g, er, a.levels, budget);
    save_clusters(c, a.out);
    std::cout << "wrote " << c.cluster_count() << " clusters (budget " << budget << ", " << c.levels_used
              << " levels) to " << a.out << "\n";
    return exit_code::ok;
}

int cmd_er_oracle(const OracleArgs& a) {
    const auto g = load_edge_list(a.graph);
    const auto er = er_exact(Laplacian(g));
    auto out = text::open_out(a.out);
    out << "p,q,w,er\n";
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto& ed = g.edges()[e];
        out << ed.p << "," << ed.q << "," << text::format_double(ed.w) << "," << text::format_double(er.r[e]) << "\n";
    }
    std::cout << "wrote exact resistances of " << g.edge_count() << " edges to " << a.out << "\n";
    return exit_code::ok;
}

int cmd_train(const RunArgs& a) {
    const RunConfig c = resolve(a);
    const PointCloud pc = make_cloud(c);
    int code = exit_code::ok;
    std::vector<std::string> files;
    for (auto seed : c.seeds) {
        const auto r = run_one(c, pc, c.sampler_mode, seed, c.output);
        const auto e = r.result.final_errors();
        std::cout << c.sampler_mode << " seed " << seed << ": " << r.result.steps_done << " steps in "
                  << r.result.train_seconds << " s";
        for (std::size_t k = 0; k < e.size(); ++k) std::cout << ", err_" << r.result.error_names[k] << " " << e[k];
        std::cout << "\n";
        for (const auto& w : r.result.warnings) std::cerr << "warning: " << w << "\n";
        files.push_back(std::filesystem::path(r.trajectory_path).filename().string());
        files.push_back(std::filesystem::path(r.checkpoint_path).filename().string());
        if (r.result.diverged) {
            std::cerr << r.result.message << "\n";
            code = exit_code::divergence;
        }
    }
    write_manifest(c.output, c, files);
    return code;
}

int cmd_bench(const RunArgs& a) {
    const RunConfig c = resolve(a);
    const auto art = bench(c, &std::cout);
    std::cout << report_markdown(art.report);
    for (const auto& r : art.runs)
        if (r.result.diverged) return exit_code::divergence;
    return exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-based importance sampling for physics-informed training"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a tagged collocation point cloud");
    g->add_option("--domain", gen.domain, "unit-square, unit-square-param or annulus-lite")->capture_default_str();
    g->add_option("--n-interior", gen.n_interior, "Interior points")->capture_default_str();
    g->add_option("--n-boundary", gen.n_boundary, "Boundary points")->capture_default_str();
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_flag("--lhs", gen.lhs, "Latin-hypercube interior sampling");
    g->add_option("-o,--out", gen.out, "Output cloud file")->capture_default_str();

    GraphArgs graph;
    auto* gr = app.add_subcommand("graph", "Build the kNN graph of a point cloud");
    gr->add_option("--cloud", graph.cloud, "Input cloud file")->required();
    gr->add_option("-k,--k", graph.k, "Neighbours per node")->capture_default_str();
    gr->add_option("--weight-scheme", graph.scheme, "inverse_distance or inverse_square")->capture_default_str();
    gr->add_option("-o,--out", graph.out, "Output edge list")->capture_default_str();

    ClusterArgs cl;
    auto* c = app.add_subcommand("cluster", "Low-resistance-diameter decomposition of a graph");
    c->add_option("--graph", cl.graph, "Input edge list")->required();
    c->add_option("--er", cl.er, "krylov or exact")->capture_default_str();
    c->add_option("--levels", cl.levels, "Contraction levels")->capture_default_str();
    c->add_option("--diam-scale", cl.diam_scale, "Budget = scale / average weighted degree")->capture_default_str();
    c->add_option("--diam-budget", cl.diam_budget, "Explicit diameter budget (overrides --diam-scale)");
    c->add_option("--seed", cl.seed, "Krylov seed")->capture_default_str();
    c->add_option("-o,--out", cl.out, "Output cluster file")->capture_default_str();

    OracleArgs orc;
    auto* o = app.add_subcommand("er-oracle", "Exact effective resistances of every edge (small graphs)");
    o->add_option("--graph", orc.graph, "Input edge list")->required();
    o->add_option("-o,--out", orc.out, "Output CSV")->capture_default_str();

    RunArgs run;
    auto* t = app.add_subcommand("train", "Train one sampler mode for every configured seed");
    auto* b = app.add_subcommand("bench", "Benchmark the configured methods and write reports");
    for (auto* sc : {t, b}) {
        sc->add_option("--config", run.config, "JSON run configuration");
        sc->add_option("--seeds", run.seeds, "Override seeds");
        sc->add_option("--output", run.output, "Override output directory");
    }
    t->add_option("--mode", run.mode, "Override sampler mode (uniform, mis, sgm, sgm_s)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_code::ok : exit_code::config;
    }
    try {
        if (*g) return cmd_gen(gen);
        if (*gr) return cmd_graph(graph);
        if (*c) return cmd_cluster(cl);
        if (*o) return cmd_er_oracle(orc);
        if (*t) return cmd_train(run);
        if (*b) return cmd_bench(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
    return exit_code::ok;
}
