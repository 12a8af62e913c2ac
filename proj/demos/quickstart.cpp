// Walks through the pipeline on a small unit-square cloud: kNN graph, Krylov effective
// resistances, low-resistance-diameter clusters, and a short uniform-vs-sgm training race.

#include <iomanip>
#include <iostream>

#include "sgm/bench.hpp"
#include "sgm/config.hpp"

using namespace sgm;

int main() {
    const RunConfig c = parse_config(json::parse(R"({
        "steps": 1500,
        "cloud": {"n_interior": 5000, "n_boundary": 500, "seed": 0},
        "train": {"eval_every": 250, "record_wall_time": false}
    })"));
    const auto pc = make_cloud(c);
    const Problem pb = c.make_problem();
    const TrainingData data(pb, pc);

    const auto g = build_knn(data.features, c.pipeline().knn);
    const auto clusters = cluster_points(g, c.pipeline());
    const auto sizes = clusters.sizes();
    std::cout << "graph: " << g.n() << " nodes, " << g.edge_count() << " edges\n"
              << "clusters: " << clusters.cluster_count() << " (largest "
              << *std::max_element(sizes.begin(), sizes.end()) << " points)\n\n";

    std::cout << std::setw(10) << "iteration" << std::setw(14) << "uniform" << std::setw(14) << "sgm" << "\n";
    std::vector<TrainResult> runs;
    for (const std::string mode : {"uniform", "sgm"}) {
        Sampler s(c.sampler_for(mode, 0), c.pipeline(), data.features);
        Network net(c.network_shape(), 0);
        Optimizer opt = c.make_optimizer();
        runs.push_back(train(pb, net, data, s, opt, c.train));
    }
    for (std::size_t r = 0; r < runs[0].trajectory.size(); ++r)
        std::cout << std::setw(10) << runs[0].trajectory[r].iteration << std::setw(14)
                  << runs[0].trajectory[r].errors[0] << std::setw(14) << runs[1].trajectory[r].errors[0] << "\n";
    std::cout << "\nsgm loss evaluations for scoring: " << runs[1].sampler_stats.loss_evaluations << " over "
              << runs[1].sampler_stats.refreshes << " refreshes\n";
    return 0;
}
