// SPDX-License-Identifier: Apache-2.0
//
// edgeflow command line: optimize a graph for a device profile, execute and
// compare plans on the simulator, and run multi-device partition planning.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "edgeflow/edgeflow.hpp"

namespace fs = std::filesystem;
using namespace edgeflow;

namespace {

int logLevel() {
    const char* env = std::getenv("EDGEFLOW_LOG");
    if (!env) return 0;
    std::string v = env;
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void logInfo(const std::string& msg) {
    if (logLevel() >= 1) std::cerr << "[edgeflow] " << msg << "\n";
}

struct CommonArgs {
    std::string graphPath, hwPath, clusterPath, outDir = ".";
    uint64_t seed = 1;
    int repeat = 1;
    bool noFuse = false, noLink = false, noSplit = false, noPartition = false, noLayout = false;
    std::string sync = "ring";

    PassOptions options() const {
        PassOptions o;
        o.fuse = !noFuse;
        o.link = !noLink;
        o.split = !noSplit;
        o.partition = !noPartition;
        o.layout = !noLayout;
        return o;
    }
};

void addAblationFlags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_flag("--no-fuse", a.noFuse, "disable operator fusion");
    cmd->add_flag("--no-link", a.noLink, "disable operator linking");
    cmd->add_flag("--no-split", a.noSplit, "disable parameter split");
    cmd->add_flag("--no-partition", a.noPartition, "disable feature-map partition");
    cmd->add_flag("--no-layout", a.noLayout, "disable dataflow restructuring");
}

void writeFile(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

// Timestamps live only in this sidecar so every other artifact is
// byte-reproducible.
void writeRunMeta(const fs::path& dir, const std::string& command) {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    nlohmann::json meta = {
        {"command", command},
        {"timestamp_ns", std::chrono::duration_cast<std::chrono::nanoseconds>(now).count()}};
    writeFile(dir / "run_meta.json", meta.dump(2) + "\n");
}

ExecutionPlan loadPlanFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open plan file " + path);
    nlohmann::json j;
    in >> j;
    fs::path planDir = fs::path(path).parent_path();
    std::string graphRef = j.value("graph_ref", "");
    if (graphRef.empty()) throw ParseError("plan has no graph_ref");
    fs::path graphPath = fs::path(graphRef).is_absolute() ? fs::path(graphRef)
                                                          : planDir / graphRef;
    ComputationGraph graph = loadGraphFile(graphPath.string());
    return planFromJson(j, graph);
}

int cmdOptimize(const CommonArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    ComputationGraph graph = loadGraphFile(a.graphPath);
    HardwareDescriptor hw = loadHardwareFile(a.hwPath);
    logInfo("loaded graph " + a.graphPath + " (" + std::to_string(graph.nodes.size()) +
            " nodes), device P=" + std::to_string(hw.unitCount));
    std::vector<FusedGroup> fused;
    std::vector<PatternMatch> matches;
    ExecutionPlan plan = buildPlan(graph, hw, a.options(), a.seed, &fused, &matches);
    plan.graphRef = "optimized_graph.json";

    fs::path dir(a.outDir);
    writeFile(dir / "optimized_graph.json", emitGraph(plan.graph));
    writeFile(dir / "plan.json", planToJson(plan).dump(2) + "\n");
    writeFile(dir / "pass_report.json",
              passReportJson(fused, matches, plan.annotations, hw.l2Bytes).dump(2) + "\n");
    writeRunMeta(dir, "optimize");
    auto t1 = std::chrono::steady_clock::now();
    double seconds = std::chrono::duration<double>(t1 - t0).count();
    std::printf("optimized %zu nodes -> %zu layers in %.3f s\n", graph.nodes.size(),
                plan.layers.size(), seconds);
    std::printf("plan: %s\n", (dir / "plan.json").string().c_str());
    return 0;
}

int cmdRun(const CommonArgs& a, const std::string& planPath) {
    ExecutionPlan plan = loadPlanFile(planPath);
    logInfo("executing " + std::to_string(plan.layers.size()) + " layers, " +
            std::to_string(std::max(1, a.repeat)) + " repeat(s)");
    fs::path dir(a.outDir);
    nlohmann::json outputsJson = nlohmann::json::array();
    ProfileReport lastReport;
    for (int r = 0; r < std::max(1, a.repeat); ++r) {
        uint64_t seed = a.seed + static_cast<uint64_t>(r);
        auto inputs = makeRandomInputs(plan.graph, seed);
        ExecutionResult res = executePlan(plan, inputs);
        nlohmann::json row;
        row["seed"] = seed;
        row["output_checksums"] = nlohmann::json::array();
        for (const auto& t : res.outputs) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(tensorChecksum(t)));
            row["output_checksums"].push_back(buf);
        }
        outputsJson.push_back(row);
        lastReport = std::move(res.report);
    }
    writeFile(dir / "profile.json", profileToJson(lastReport).dump(2) + "\n");
    writeFile(dir / "profile.csv", profileToCsv(lastReport));
    writeFile(dir / "outputs.json", outputsJson.dump(2) + "\n");
    writeRunMeta(dir, "run");
    std::printf("simulated_cycles %lld\n", static_cast<long long>(lastReport.simulatedCycles));
    return 0;
}

int cmdCompare(const CommonArgs& a, const std::string& planA, const std::string& planB) {
    ExecutionPlan base = loadPlanFile(planA);
    ExecutionPlan opt = loadPlanFile(planB);
    if (base.originalHash != opt.originalHash)
        throw UsageError("plans were built from different graphs");
    double speedupSum = 0;
    CompareResult last;
    for (int r = 0; r < std::max(1, a.repeat); ++r) {
        uint64_t seed = a.seed + static_cast<uint64_t>(r);
        auto inputs = makeRandomInputs(base.graph, seed);
        last = comparePlans(base, opt, inputs);
        speedupSum += last.speedup;
    }
    double speedup = speedupSum / std::max(1, a.repeat);
    // file names only: keeps the CSV byte-reproducible across directories
    std::string csv = "plan_a,plan_b,base_cycles,opt_cycles,speedup,max_abs_diff\n";
    char row[512];
    std::snprintf(row, sizeof(row), "%s,%s,%lld,%lld,%.6f,%.3e\n",
                  fs::path(planA).filename().string().c_str(),
                  fs::path(planB).filename().string().c_str(),
                  static_cast<long long>(last.baseReport.simulatedCycles),
                  static_cast<long long>(last.optReport.simulatedCycles), speedup,
                  last.maxAbsDifference);
    csv += row;
    fs::path dir(a.outDir);
    writeFile(dir / "compare.csv", csv);
    nlohmann::json j = {{"base_cycles", last.baseReport.simulatedCycles},
                        {"opt_cycles", last.optReport.simulatedCycles},
                        {"speedup", speedup},
                        {"max_abs_diff", last.maxAbsDifference},
                        {"repeats", std::max(1, a.repeat)}};
    writeFile(dir / "compare.json", j.dump(2) + "\n");
    writeRunMeta(dir, "compare");
    std::printf("base_cycles %lld  opt_cycles %lld  speedup %.3fx  max_abs_diff %.3e\n",
                static_cast<long long>(last.baseReport.simulatedCycles),
                static_cast<long long>(last.optReport.simulatedCycles), speedup,
                last.maxAbsDifference);
    return 0;
}

int cmdDistplan(const CommonArgs& a) {
    ComputationGraph graph = loadGraphFile(a.graphPath);
    ClusterDescriptor cluster = loadClusterFile(a.clusterPath);
    cluster.sync = syncMethodFromName(a.sync);
    PlannerResult result = selectBestScheme(graph, cluster);
    fs::path dir(a.outDir);
    writeFile(dir / "distplan.json", plannerToJson(result, cluster).dump(2) + "\n");
    writeFile(dir / "distplan.csv", plannerToCsv(result));
    writeRunMeta(dir, "distplan");
    std::printf("%-24s %-8s %12s %12s %12s\n", "node", "dim", "compute", "sync_ring", "sync_ps");
    for (const auto& row : result.rows)
        std::printf("%-24s %-8s %12.0f %12.0f %12.0f\n", row.nodeId.c_str(),
                    row.chosenDim.c_str(), row.computeCycles, row.syncRing, row.syncPs);
    std::printf("selected total %.0f cycles (compute %.0f + comm %.0f), single device %.0f\n",
                result.estimate.totalCycles(), result.estimate.computeCycles,
                result.estimate.commCycles, result.singleDeviceEstimate.totalCycles());
    return 0;
}

int cmdReport(const std::string& profilePath) {
    std::ifstream in(profilePath);
    if (!in) throw ParseError("cannot open profile " + profilePath);
    nlohmann::json j;
    in >> j;
    std::printf("%-24s %12s %12s %10s %10s\n", "layer", "compute", "stall", "hits", "misses");
    for (const auto& l : j.at("per_layer"))
        std::printf("%-24s %12lld %12lld %10lld %10lld\n",
                    l.at("node").get<std::string>().c_str(),
                    static_cast<long long>(l.at("compute_cycles").get<int64_t>()),
                    static_cast<long long>(l.at("stall_cycles").get<int64_t>()),
                    static_cast<long long>(l.at("hits").get<int64_t>()),
                    static_cast<long long>(l.at("misses").get<int64_t>()));
    std::printf("simulated cycles: %lld\n",
                static_cast<long long>(j.at("simulated_cycles").get<int64_t>()));
    const auto& mem = j.at("memory");
    std::printf("peak shared %lld B, peak ddr %lld B, pool reuse %lld/%lld\n",
                static_cast<long long>(mem.at("peak_shared_bytes").get<int64_t>()),
                static_cast<long long>(mem.at("peak_ddr_bytes").get<int64_t>()),
                static_cast<long long>(mem.at("pool").at("reuse_hits").get<int64_t>()),
                static_cast<long long>(mem.at("pool").at("fresh_allocs").get<int64_t>()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dataflow-centric inference graph optimizer and simulator"};
    app.require_subcommand(1);

    CommonArgs a;
    std::string planPath, planAPath, planBPath, profilePath;

    CLI::App* optimize = app.add_subcommand("optimize", "run the pass pipeline, emit a plan");
    optimize->add_option("--graph", a.graphPath, "graph JSON")->required();
    optimize->add_option("--hw", a.hwPath, "hardware descriptor JSON")->required();
    optimize->add_option("--seed", a.seed, "random seed");
    optimize->add_option("--out", a.outDir, "output directory");
    addAblationFlags(optimize, a);

    CLI::App* run = app.add_subcommand("run", "execute a plan on the simulator");
    run->add_option("--plan", planPath, "plan JSON")->required();
    run->add_option("--seed", a.seed, "input seed");
    run->add_option("--repeat", a.repeat, "input variations to run");
    run->add_option("--out", a.outDir, "output directory");

    CLI::App* compare = app.add_subcommand("compare", "compare two plan variants");
    compare->add_option("--plan-a", planAPath, "baseline plan JSON")->required();
    compare->add_option("--plan-b", planBPath, "optimized plan JSON")->required();
    compare->add_option("--seed", a.seed, "input seed");
    compare->add_option("--repeat", a.repeat, "input variations to verify");
    compare->add_option("--out", a.outDir, "output directory");

    CLI::App* distplan = app.add_subcommand("distplan", "multi-device partition planning");
    distplan->add_option("--graph", a.graphPath, "graph JSON")->required();
    distplan->add_option("--cluster", a.clusterPath, "cluster descriptor JSON")->required();
    distplan->add_option("--sync", a.sync, "synchronization method: ring|ps");
    distplan->add_option("--out", a.outDir, "output directory");

    CLI::App* report = app.add_subcommand("report", "render a profile report");
    report->add_option("--profile", profilePath, "profile JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (optimize->parsed()) return cmdOptimize(a);
        if (run->parsed()) return cmdRun(a, planPath);
        if (compare->parsed()) return cmdCompare(a, planAPath, planBPath);
        if (distplan->parsed()) return cmdDistplan(a);
        if (report->parsed()) return cmdReport(profilePath);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const EquivalenceFailureError& e) {
        std::cerr << "equivalence failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    logInfo("no subcommand executed");
    return 2;
}
