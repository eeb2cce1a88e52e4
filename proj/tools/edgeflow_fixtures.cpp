// SPDX-License-Identifier: Apache-2.0
//
// Writes the benchmark model files plus default hardware and cluster
// descriptors, for CLI runs and the acceptance suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "edgeflow/graph_io.hpp"
#include "edgeflow/zoo.hpp"

namespace fs = std::filesystem;
using namespace edgeflow;

int main(int argc, char** argv) {
    CLI::App app{"emit benchmark model and descriptor files"};
    std::string outDir = "fixtures";
    app.add_option("--out", outDir, "output directory");
    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(outDir);
        for (const auto& m : zoo::benchmarkSuite()) {
            std::ofstream f(fs::path(outDir) / (m.name + ".json"), std::ios::binary);
            f << emitGraph(m.graph);
        }
        {
            std::ofstream f(fs::path(outDir) / "worked_example.json", std::ios::binary);
            f << emitGraph(zoo::workedExample());
        }
        HardwareDescriptor hw;
        {
            std::ofstream f(fs::path(outDir) / "hw_tms_like.json", std::ios::binary);
            f << hardwareToJson(hw).dump(2) << "\n";
        }
        ClusterDescriptor cluster;
        cluster.deviceCount = 4;
        {
            std::ofstream f(fs::path(outDir) / "cluster_n4_ring.json", std::ios::binary);
            f << clusterToJson(cluster).dump(2) << "\n";
        }
        std::printf("wrote fixtures to %s\n", outDir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
