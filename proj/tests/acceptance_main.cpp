// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Run via `ctest -R acceptance` or directly.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edgeflow/edgeflow.hpp"
#include "edgeflow/zoo.hpp"

namespace fs = std::filesystem;
using namespace edgeflow;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

template <class F>
void criterion(int index, const std::string& name, F&& body) {
    try {
        std::string detail;
        bool ok = body(detail);
        report(index, name, ok, detail);
    } catch (const std::exception& e) {
        report(index, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------

bool equivalenceSuite(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    HardwareDescriptor hw;
    double worst = 0.0;
    int runs = 0;
    for (const auto& m : zoo::benchmarkSuite()) {
        ExecutionPlan plan = buildPlan(m.graph, hw, PassOptions{}, 1);
        for (uint64_t seed = 1; seed <= 25; ++seed) {
            // parameters belong to the plan (seed 1); the 25 seeds vary inputs
            auto inputs = makeRandomInputs(m.graph, seed);
            auto ref = executeReference(m.graph, inputs, plan.seed);
            auto res = executePlan(plan, inputs);
            if (res.outputs.size() != ref.size()) {
                detail = m.name + ": output arity mismatch";
                return false;
            }
            for (size_t i = 0; i < ref.size(); ++i)
                worst = std::max(worst, maxAbsDiff(ref[i], res.outputs[i]));
            ++runs;
            if (worst > 1e-5) {
                detail = fmt("%s seed %llu: max abs diff %.3e > 1e-5", m.name.c_str(),
                             static_cast<unsigned long long>(seed), worst);
                return false;
            }
        }
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail = fmt("6 models x 25 seeds (%d runs), worst diff %.2e, %.1f s", runs, worst, seconds);
    return seconds < 120.0;
}

bool workedExampleFidelity(std::string& detail) {
    ComputationGraph g = zoo::workedExample();
    HardwareDescriptor hw; // P=8, L2=512 KB
    const OperatorNode& node = g.node("cbra0");
    SplitPlan plan = makeSplitPlan(node, hw);
    int64_t kernelShare = node.params[0].shape.byteSize() / hw.unitCount;
    int64_t biasShare = node.params[1].shape.byteSize() / hw.unitCount;
    bool ok = kernelShare == 524288 && biasShare == 25088 && plan.stage1Parts == 8 &&
              plan.perUnitParamBytes == kernelShare + biasShare && plan.stage2PartsPerUnit == 2;
    detail = fmt("kernel share %lld B, bias share %lld B, stage-2 factor %d",
                 static_cast<long long>(kernelShare), static_cast<long long>(biasShare),
                 plan.stage2PartsPerUnit);
    return ok;
}

bool localityProperty(std::string& detail) {
    // every linked pattern in the catalog, shapes up to 64x64x32
    const CacheGeometry defaultGeom{64, 256, 4};
    const CacheGeometry streamGeom{16, 1, 1}; // single-line streaming window
    const int64_t spatial[] = {1, 2, 3, 4, 5, 7, 8, 16, 64};
    const int64_t channels[] = {1, 2, 4, 32};

    struct Consumer {
        const char* name;
        OperatorNode node;
    };
    std::vector<Consumer> consumers;
    {
        OperatorNode conv1;
        conv1.id = "conv1x1";
        conv1.kind = OpKind::Conv;
        conv1.params.push_back({kernelShape(4, 1, 1, 1), ParamRole::Weight, {}});
        consumers.push_back({"conv1x1", conv1});
        OperatorNode conv3;
        conv3.id = "conv3x3";
        conv3.kind = OpKind::Conv;
        conv3.attrs["stride"] = int64_t{1};
        conv3.params.push_back({kernelShape(4, 1, 3, 3), ParamRole::Weight, {}});
        consumers.push_back({"conv3x3", conv3});
        OperatorNode avg;
        avg.id = "avgpool2";
        avg.kind = OpKind::AvgPool;
        avg.attrs["window"] = int64_t{2};
        avg.attrs["stride"] = int64_t{2};
        consumers.push_back({"avgpool2x2", avg});
        OperatorNode mp;
        mp.id = "maxpool3";
        mp.kind = OpKind::MaxPool;
        mp.attrs["window"] = int64_t{3};
        mp.attrs["stride"] = int64_t{2};
        consumers.push_back({"maxpool3x3s2", mp});
        OperatorNode fc;
        fc.id = "matmul";
        fc.kind = OpKind::FullyConnected;
        fc.params.push_back({TensorShape({{Axis::C, 4}, {Axis::K, 4}}), ParamRole::Weight, {}});
        consumers.push_back({"matmul", fc});
        OperatorNode join;
        join.id = "join";
        join.kind = OpKind::Add;
        join.attrs["arity"] = int64_t{2};
        consumers.push_back({"shortcut-join", join});
    }

    int64_t checked = 0, strictChecked = 0;
    for (const auto& consumer : consumers) {
        for (int64_t C : channels)
            for (int64_t H : spatial)
                for (int64_t W : spatial) {
                    TensorShape shape = featureMapShape(C, H, W);
                    OperatorNode node = consumer.node;
                    if (node.kind == OpKind::Conv) {
                        // kernel geometry must fit the map
                        ConvGeometry cg = convGeometry(node);
                        if (H < cg.fullKernelH || W < cg.fullKernelW) continue;
                        node.params[0] = {kernelShape(4, C, cg.fullKernelH, cg.fullKernelW),
                                          ParamRole::Weight,
                                          {}};
                    }
                    if (node.kind == OpKind::FullyConnected)
                        node.params[0] = {TensorShape({{Axis::C, C * H * W}, {Axis::K, 4}}),
                                          ParamRole::Weight,
                                          {}};
                    AccessPattern pattern = deriveAccessPattern(node, shape);
                    LayoutDescriptor ld = buildLayout("producer", shape, pattern);

                    // strictly increasing restructured offsets, by replay
                    auto restructured = consumerTraceRestructured(ld);
                    for (size_t i = 1; i < restructured.size(); ++i)
                        if (restructured[i] <= restructured[i - 1]) {
                            detail = fmt("%s %lldx%lldx%lld: offsets not strictly increasing",
                                         consumer.name, C, H, W);
                            return false;
                        }
                    // bijectivity when replication-free
                    if (ld.pattern.replicationRows == 0 &&
                        ld.bufferElements != ld.elementCount) {
                        detail = fmt("%s %lldx%lldx%lld: replication-free layout not bijective",
                                     consumer.name, C, H, W);
                        return false;
                    }

                    for (const CacheGeometry& geom : {defaultGeom, streamGeom}) {
                        auto opt = simulateCacheTrace(restructured, geom);
                        int64_t expect =
                            (ld.readBytes() + geom.lineBytes - 1) / geom.lineBytes;
                        if (opt.misses() != expect || opt.capacityConflictMisses != 0) {
                            detail = fmt("%s %lldx%lldx%lld: misses %lld != ceil(%lld/%lld)",
                                         consumer.name, C, H, W,
                                         static_cast<long long>(opt.misses()),
                                         static_cast<long long>(ld.readBytes()),
                                         static_cast<long long>(geom.lineBytes));
                            return false;
                        }
                    }

                    // a C=1 sliding strip trades re-reads for duplicated rows
                    // one for one; the optimizer never emits that layout, so
                    // the miss comparison applies to the emitted patterns
                    bool emitted = !(ld.pattern.replicationRows > 0 && C == 1);
                    auto baselineTrace = consumerTraceRowMajor(pattern);
                    auto base = simulateCacheTrace(baselineTrace, streamGeom);
                    auto opt = simulateCacheTrace(restructured, streamGeom);
                    if (emitted && opt.misses() > base.misses()) {
                        detail = fmt("%s %lldx%lldx%lld: restructured misses exceed baseline",
                                     consumer.name, C, H, W);
                        return false;
                    }
                    bool strictApplies = emitted && !ld.isIdentity &&
                                         ld.readBytes() > streamGeom.lineBytes;
                    if (strictApplies) {
                        ++strictChecked;
                        if (!(opt.misses() < base.misses())) {
                            detail = fmt("%s %lldx%lldx%lld: no strict miss reduction (%lld vs %lld)",
                                         consumer.name, C, H, W,
                                         static_cast<long long>(opt.misses()),
                                         static_cast<long long>(base.misses()));
                            return false;
                        }
                    }
                    ++checked;
                }
    }
    detail = fmt("%lld shape/pattern combos, %lld with strict miss reduction", checked,
                 strictChecked);
    return strictChecked > 0;
}

bool partitionCoverage(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(0x5eed);
    for (int trial = 0; trial < 1000; ++trial) {
        WorkDomain d;
        d.outC = 1 + static_cast<int64_t>(rng.below(64));
        d.outH = 1 + static_cast<int64_t>(rng.below(32));
        d.outW = 1 + static_cast<int64_t>(rng.below(32));
        d.macsPerElement = 1.0 + static_cast<double>(rng.below(8));
        int P = 1 + static_cast<int>(rng.below(16));
        PartitionScheme s = partitionWorkload("n", d, P, rng.next());

        std::vector<uint8_t> owned(static_cast<size_t>(d.elements()), 0);
        for (const auto& regions : s.perUnit)
            for (const auto& r : regions)
                for (int64_t k = r.kLo; k < r.kHi; ++k)
                    for (int64_t h = r.hLo; h < r.hHi; ++h)
                        for (int64_t w = r.wLo; w < r.wHi; ++w) {
                            size_t idx =
                                static_cast<size_t>((k * d.outH + h) * d.outW + w);
                            if (owned[idx]++) {
                                detail = fmt("trial %d: element covered twice", trial);
                                return false;
                            }
                        }
        for (uint8_t o : owned)
            if (!o) {
                detail = fmt("trial %d: element missed", trial);
                return false;
            }

        if (d.outC >= P && d.outH >= P && d.outW >= P) {
            int64_t maxE = 0, minE = INT64_MAX;
            for (int u = 0; u < P; ++u) {
                int64_t e = s.unitElements(u);
                maxE = std::max(maxE, e);
                minE = std::min(minE, e);
            }
            int64_t kRem = d.outC % P, hRem = d.outH % P;
            int64_t columnWork = kRem * hRem; // one remainder column's elements
            if (maxE - minE > columnWork) {
                detail = fmt("trial %d: imbalance %lld exceeds one column (%lld)", trial,
                             static_cast<long long>(maxE - minE),
                             static_cast<long long>(columnWork));
                return false;
            }
        }
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail = fmt("1000 randomized instances, %.2f s", seconds);
    return seconds < 60.0;
}

bool directionalSpeedups(std::string& detail) {
    HardwareDescriptor hw; // P=8, L2=512 KB, shared=4 MB
    std::string summary;
    for (const auto& m : zoo::benchmarkSuite()) {
        auto inputs = makeRandomInputs(m.graph, 1);
        ExecutionPlan vanilla =
            buildPlan(m.graph, hw, PassOptions{false, false, false, false, false}, 1);
        ExecutionPlan ho = buildPlan(m.graph, hw, PassOptions{false, false, true, true, false}, 1);
        ExecutionPlan full = buildPlan(m.graph, hw, PassOptions{}, 1);

        CompareResult hoVsVanilla = comparePlans(vanilla, ho, inputs);
        if (!(hoVsVanilla.speedup > 1.0)) {
            detail = m.name + ": HO vs vanilla speedup " + fmt("%.3f", hoVsVanilla.speedup);
            return false;
        }
        bool linkable = !identifyPatterns(fusePass(m.graph)).empty();
        if (linkable) {
            CompareResult fullVsHo = comparePlans(ho, full, inputs);
            if (!(fullVsHo.speedup > 1.0)) {
                detail = m.name + ": HO+VO vs HO speedup " + fmt("%.3f", fullVsHo.speedup);
                return false;
            }
            summary += fmt("%s HO %.2fx VO %.2fx; ", m.name.c_str(), hoVsVanilla.speedup,
                           fullVsHo.speedup);
        } else {
            summary += fmt("%s HO %.2fx VO n/a; ", m.name.c_str(), hoVsVanilla.speedup);
        }
    }
    detail = summary;
    return true;
}

bool allocatorProperties(std::string& detail) {
    // randomized 10,000-event traces: no overlap, conservation
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        MemoryPoolGroup pool(16 << 20);
        std::vector<int> live;
        int events = 0;
        while (events < 10000) {
            bool doAlloc = live.empty() || rng.below(100) < 55;
            if (doAlloc) {
                try {
                    live.push_back(pool.allocate(1 + static_cast<int64_t>(rng.below(512 * 1024))));
                } catch (const OutOfSharedMemoryError&) {
                    if (live.empty()) break;
                    size_t pick = static_cast<size_t>(rng.below(live.size()));
                    pool.release(live[pick]);
                    live.erase(live.begin() + static_cast<long>(pick));
                }
            } else {
                size_t pick = static_cast<size_t>(rng.below(live.size()));
                pool.release(live[pick]);
                live.erase(live.begin() + static_cast<long>(pick));
            }
            ++events;
            std::vector<std::pair<int64_t, int64_t>> ranges;
            for (int id : live) {
                const auto& c = pool.chunk(id);
                ranges.push_back({c.baseAddr, c.baseAddr + c.sizeBytes});
            }
            std::sort(ranges.begin(), ranges.end());
            for (size_t i = 1; i < ranges.size(); ++i)
                if (ranges[i].first < ranges[i - 1].second) {
                    detail = fmt("seed %llu: live chunks overlap",
                                 static_cast<unsigned long long>(seed));
                    return false;
                }
            if (pool.reservedBytes() != pool.freeBytes() + pool.liveBytes()) {
                detail = fmt("seed %llu: conservation violated",
                             static_cast<unsigned long long>(seed));
                return false;
            }
        }
    }

    // inference-shaped trace: steady state allocates nothing new
    Rng rng(77);
    std::vector<int64_t> layerSizes;
    for (int i = 0; i < 64; ++i)
        layerSizes.push_back((1 + static_cast<int64_t>(rng.below(16))) * 16 * 1024);
    auto pool = MemoryPoolGroup::warmPool(layerSizes, 64 << 20);
    std::set<int64_t> distinct;
    for (int64_t s : layerSizes) distinct.insert(MemoryPoolGroup::roundSize(s));
    for (int epoch = 0; epoch < 40; ++epoch) {
        int input = pool.allocate(layerSizes[0]);
        for (size_t layer = 1; layer < layerSizes.size(); ++layer) {
            int output = pool.allocate(layerSizes[layer]);
            pool.release(input);
            input = output;
        }
        pool.release(input);
    }
    if (pool.stats().freshAllocations > static_cast<int64_t>(distinct.size())) {
        detail = fmt("steady state carved %lld > %zu distinct sizes",
                     static_cast<long long>(pool.stats().freshAllocations), distinct.size());
        return false;
    }
    detail = fmt("3 x 10k random events; inference trace fresh=%lld <= %zu classes",
                 static_cast<long long>(pool.stats().freshAllocations), distinct.size());
    return true;
}

bool distributedPlanner(std::string& detail) {
    if (enumerateSchemes({PartDim::OutC, PartDim::InH, PartDim::InW}).size() != 6) {
        detail = "convolution enumeration is not 3! = 6";
        return false;
    }
    for (int n = 2; n <= 16; ++n) {
        double ring = dist_detail::syncCycles(SyncMethod::RingAllReduce, n, 8 << 20, 16.0);
        double ps = dist_detail::syncCycles(SyncMethod::ParameterServer, n, 8 << 20, 16.0);
        if (!(ring < ps)) {
            detail = fmt("ring !< ps at n=%d", n);
            return false;
        }
    }
    ClusterDescriptor c4;
    c4.deviceCount = 4;
    ClusterDescriptor c1 = c4;
    c1.deviceCount = 1;
    std::string summary;
    for (const auto& m : zoo::benchmarkSuite()) {
        PlannerResult hybrid = selectBestScheme(m.graph, c4);
        // uniform single-dimension schemes
        ShapeMap shapes = inferShapes(m.graph);
        for (PartDim dim : {PartDim::OutC, PartDim::InH, PartDim::InW}) {
            SchemeChoice uni;
            uni.syncMethod = c4.sync;
            for (const auto& id : topologicalOrder(m.graph)) {
                const OperatorNode& node = m.graph.node(id);
                if (!isPartitionable(node.kind)) continue;
                auto in = m.graph.inEdges(id);
                WorkDomain d = workDomain(node, in.empty() ? TensorShape{} : shapes.at(in[0]->from),
                                          shapes.at({id, 0}));
                auto dims = dist_detail::allowedDims(node, d);
                uni.perOperator[id] =
                    std::find(dims.begin(), dims.end(), dim) != dims.end() ? dim : dims[0];
            }
            CostEstimate uniCost = profileScheme(m.graph, uni, c4);
            if (hybrid.estimate.totalCycles() > uniCost.totalCycles() + 1e-9) {
                detail = fmt("%s: hybrid %.0f > uniform-%s %.0f", m.name.c_str(),
                             hybrid.estimate.totalCycles(), partDimName(dim),
                             uniCost.totalCycles());
                return false;
            }
        }
        PlannerResult single = selectBestScheme(m.graph, c1);
        if (!(hybrid.estimate.totalCycles() < single.estimate.totalCycles())) {
            detail = m.name + ": n=4 not faster than n=1";
            return false;
        }
        summary += fmt("%s %.2fx; ", m.name.c_str(),
                       single.estimate.totalCycles() / hybrid.estimate.totalCycles());
    }
    detail = "n=4 vs n=1: " + summary;
    return true;
}

int runCommand(const std::string& cmd) {
    int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool determinism(std::string& detail) {
    fs::path base = fs::temp_directory_path() / "edgeflow_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);
    std::string cli = EDGEFLOW_CLI_PATH;
    std::string fixtures = EDGEFLOW_FIXTURES_PATH;
    if (runCommand(fixtures + " --out " + (base / "fx").string()) != 0) {
        detail = "fixture generation failed";
        return false;
    }
    std::string graph = (base / "fx" / "mobilenet_block.json").string();
    std::string hw = (base / "fx" / "hw_tms_like.json").string();
    std::string cluster = (base / "fx" / "cluster_n4_ring.json").string();

    for (const char* runDir : {"r1", "r2"}) {
        fs::path dir = base / runDir;
        if (runCommand(cli + " optimize --graph " + graph + " --hw " + hw + " --seed 9 --out " +
                       (dir / "opt").string()) != 0 ||
            runCommand(cli + " optimize --graph " + graph + " --hw " + hw +
                       " --seed 9 --no-fuse --no-link --no-layout --out " + (dir / "ho").string()) !=
                0 ||
            runCommand(cli + " run --plan " + (dir / "opt" / "plan.json").string() +
                       " --seed 9 --out " + (dir / "run").string()) != 0 ||
            runCommand(cli + " compare --plan-a " + (dir / "ho" / "plan.json").string() +
                       " --plan-b " + (dir / "opt" / "plan.json").string() + " --seed 9 --out " +
                       (dir / "cmp").string()) != 0 ||
            runCommand(cli + " distplan --graph " + graph + " --cluster " + cluster + " --out " +
                       (dir / "dist").string()) != 0) {
            detail = std::string("CLI run failed in ") + runDir;
            return false;
        }
    }
    const char* artifacts[] = {"opt/plan.json",     "opt/optimized_graph.json",
                               "opt/pass_report.json", "ho/plan.json",
                               "run/profile.json",  "run/profile.csv",
                               "run/outputs.json",  "cmp/compare.csv",
                               "cmp/compare.json",  "dist/distplan.json",
                               "dist/distplan.csv"};
    int compared = 0;
    for (const char* a : artifacts) {
        std::string s1 = slurp(base / "r1" / a);
        std::string s2 = slurp(base / "r2" / a);
        if (s1.empty() || s1 != s2) {
            detail = fmt("artifact %s differs between runs", a);
            return false;
        }
        ++compared;
    }
    fs::remove_all(base);
    detail = fmt("%d artifacts byte-identical across two CLI runs", compared);
    return true;
}

} // namespace

int main() {
    std::printf("acceptance suite: TMS-like profile (P=8, L2=512 KB, shared=4 MB)\n");
    criterion(1, "equivalence suite (6 models x 25 seeds, 1e-5)", equivalenceSuite);
    criterion(2, "worked-example split fidelity (524288 / 25088 / factor 2)",
              workedExampleFidelity);
    criterion(3, "locality property (increasing offsets, compulsory-only misses)",
              localityProperty);
    criterion(4, "partition exact-once coverage oracle (1000 instances)", partitionCoverage);
    criterion(5, "directional speedups (HO > vanilla, HO+VO > HO on linkable models)",
              directionalSpeedups);
    criterion(6, "allocator properties (overlap, conservation, steady-state reuse)",
              allocatorProperties);
    criterion(7, "distributed planner (d!, ring < ps, hybrid <= uniform, n4 < n1)",
              distributedPlanner);
    criterion(8, "byte-identical CLI artifacts across reruns", determinism);
    if (g_failures == 0) {
        std::printf("all 8 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
