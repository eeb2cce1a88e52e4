// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/cache.hpp"
#include "edgeflow/interp.hpp"
#include "edgeflow/plan.hpp"

namespace edgeflow {

struct LayerProfile {
    std::string nodeId;
    std::vector<int64_t> unitCycles;
    int64_t computeCycles = 0; // summed over units
    int64_t stallCycles = 0;
    int64_t hits = 0;
    int64_t misses = 0;
};

// Cycle contract: per-unit cycles = ceil(MACs / macPerCycle) + parameter
// stalls + a work-proportional share of the layer's read/write stalls. Layers
// synchronize with a barrier (max over units); stalls add linearly with no
// compute overlap; per-unit caches reset at layer boundaries and writes do
// not allocate.
struct ProfileReport {
    std::vector<LayerProfile> perLayer;
    int64_t simulatedCycles = 0;
    PoolStats pool;
    int64_t peakL2Bytes = 0;
    int64_t peakSharedBytes = 0;
    int64_t peakDdrBytes = 0;
    int64_t replicationBytes = 0; // layout + halo memory sacrifice
    double speedupVsBaseline = 0.0;

    int64_t totalComputeCycles() const {
        int64_t n = 0;
        for (const auto& l : perLayer) n += l.computeCycles;
        return n;
    }
};

namespace detail {

inline int64_t latencyOf(const HardwareDescriptor& hw, Placement p) {
    switch (p) {
        case Placement::L2: return hw.latL2;
        case Placement::Shared: return hw.latShared;
        case Placement::Ddr: return hw.latDdr;
    }
    return hw.latDdr;
}

inline bool isMovementKind(OpKind k) {
    return k == OpKind::Transpose || k == OpKind::Concat || k == OpKind::Split;
}

} // namespace detail

struct ExecutionResult {
    std::vector<Tensor> outputs;
    ProfileReport report;
};

// Executes the plan: numerics follow the optimized graph's operator
// semantics; cycle and cache accounting follow the plan metadata.
inline ExecutionResult executePlan(const ExecutionPlan& plan,
                                   const std::map<std::string, Tensor>& inputs) {
    const HardwareDescriptor& hw = plan.hw;
    const ComputationGraph& g = plan.graph;
    ShapeMap shapes = inferShapes(g);
    std::vector<std::string> order = topologicalOrder(g);
    if (order.size() != plan.layers.size())
        throw PlanValidationError("plan layer count does not match graph");
    for (size_t i = 0; i < order.size(); ++i)
        if (plan.layers[i].nodeId != order[i])
            throw PlanValidationError("plan layer order does not match graph topology");

    CacheGeometry geom = CacheGeometry::fromHardware(hw);
    ExecutionResult result;
    ProfileReport& report = result.report;

    // tensor placements as planned
    std::map<std::string, Placement> placementOf;
    auto tensorName = [](const PortRef& r) {
        return r.port == 0 ? r.node : r.node + ":" + std::to_string(r.port);
    };
    for (size_t i = 0; i < plan.bootEvents.size() && i < plan.bootPlacements.size(); ++i)
        for (const auto& t : plan.bootEvents[i].tensors) placementOf[t] = plan.bootPlacements[i];

    // allocator replay for pool statistics
    MemoryPoolGroup pool(hw.sharedBytes);
    int64_t bumpCursor = 0, bumpPeak = 0, ddrCursor = 0;
    std::map<std::string, int> liveChunks;
    if (plan.pooledAllocation) {
        std::vector<int64_t> warmSizes;
        for (size_t li = 0; li < plan.layers.size(); ++li) {
            const OperatorNode& node = g.node(plan.layers[li].nodeId);
            for (int port = 0; port < nodeOutputCount(node); ++port) {
                int64_t bytes = shapes.at({plan.layers[li].nodeId, port}).byteSize();
                if (port == 0 && plan.layers[li].outputLayout)
                    bytes = plan.layers[li].outputLayout->bufferBytes();
                warmSizes.push_back(bytes);
            }
        }
        try {
            pool = MemoryPoolGroup::warmPool(warmSizes, hw.sharedBytes);
        } catch (const CapacityExceededError&) {
            pool = MemoryPoolGroup(hw.sharedBytes);
        }
    }
    auto replayEvent = [&](const AllocEvent& ev) {
        switch (ev.kind) {
            case AllocEvent::Kind::Alloc:
            case AllocEvent::Kind::BatchAlloc: {
                if (!plan.pooledAllocation) {
                    for (size_t i = 0; i < ev.tensors.size(); ++i) {
                        int64_t b = ev.bytes[i];
                        if (bumpCursor + b <= hw.sharedBytes)
                            bumpCursor += b;
                        else
                            ddrCursor += b;
                        bumpPeak = std::max(bumpPeak, bumpCursor);
                    }
                    return;
                }
                if (ev.kind == AllocEvent::Kind::BatchAlloc) {
                    try {
                        auto [id, offsets] = pool.batchAllocate(ev.bytes);
                        for (const auto& t : ev.tensors) liveChunks[t] = id;
                    } catch (const OutOfSharedMemoryError&) {
                        for (int64_t b : ev.bytes) ddrCursor += b;
                    }
                    return;
                }
                for (size_t i = 0; i < ev.tensors.size(); ++i) {
                    try {
                        liveChunks[ev.tensors[i]] = pool.allocate(ev.bytes[i]);
                    } catch (const OutOfSharedMemoryError&) {
                        ddrCursor += ev.bytes[i];
                        if (ddrCursor > hw.ddrBytes)
                            throw OutOfSharedMemoryError("DDR capacity exceeded");
                    }
                }
                return;
            }
            case AllocEvent::Kind::Release: {
                if (!plan.pooledAllocation) return;
                std::map<int, int> chunkRefs;
                for (const auto& [t, id] : liveChunks) chunkRefs[id]++;
                for (const auto& t : ev.tensors) {
                    auto it = liveChunks.find(t);
                    if (it == liveChunks.end()) continue;
                    int id = it->second;
                    liveChunks.erase(it);
                    if (--chunkRefs[id] == 0) pool.release(id);
                }
                return;
            }
        }
    };
    for (const auto& ev : plan.bootEvents) replayEvent(ev);

    // numerics
    std::map<PortRef, Tensor> tensors;
    for (const auto& gi : g.inputs) {
        auto it = inputs.find(gi.id);
        if (it == inputs.end()) throw ShapeMismatchError("missing graph input " + gi.id);
        tensors[{gi.id, 0}] = it->second;
    }

    // which layer's layout feeds a given consumer
    std::map<std::string, const LayoutDescriptor*> layoutForConsumer;
    for (const auto& layer : plan.layers)
        if (layer.outputLayout) layoutForConsumer[layer.outputLayout->consumerId] = &*layer.outputLayout;

    for (size_t li = 0; li < plan.layers.size(); ++li) {
        const LayerPlan& layer = plan.layers[li];
        const OperatorNode& node = g.node(layer.nodeId);
        auto incoming = g.inEdges(layer.nodeId);

        std::vector<Tensor> ins;
        for (const Edge* e : incoming) ins.push_back(tensors.at(e->from));
        auto outs = evalNode(node, ins, plan.seed);
        for (size_t port = 0; port < outs.size(); ++port)
            tensors[{layer.nodeId, static_cast<int>(port)}] = std::move(outs[port]);

        LayerProfile prof;
        prof.nodeId = layer.nodeId;
        const int P = hw.unitCount;
        prof.unitCycles.assign(static_cast<size_t>(P), 0);

        // MAC accounting
        std::vector<double> unitMacs(static_cast<size_t>(P), 0.0);
        double totalMacs = 0.0;
        if (layer.partition && !detail::isMovementKind(node.kind)) {
            for (int u = 0; u < P; ++u) {
                unitMacs[static_cast<size_t>(u)] = layer.partition->unitMacs(u);
                totalMacs += unitMacs[static_cast<size_t>(u)];
            }
        } else if (!detail::isMovementKind(node.kind)) {
            TensorShape inShape = incoming.empty() ? TensorShape{} : shapes.at(incoming[0]->from);
            WorkDomain d = workDomain(node, inShape, shapes.at({layer.nodeId, 0}));
            unitMacs[0] = static_cast<double>(d.elements()) * d.macsPerElement;
            totalMacs = unitMacs[0];
        }
        if (layer.split) {
            bool reduces = false;
            for (Axis a : layer.split->splitAxisSequence)
                if (a == Axis::C || a == Axis::R || a == Axis::S) reduces = true;
            if (reduces) {
                double extra = static_cast<double>(shapes.at({layer.nodeId, 0}).elementCount()) *
                               (layer.split->stage1Parts - 1);
                for (int u = 0; u < P; ++u) unitMacs[static_cast<size_t>(u)] += extra / P;
                totalMacs += extra;
            }
        }
        for (int u = 0; u < P; ++u) {
            int64_t c = static_cast<int64_t>(
                std::ceil(unitMacs[static_cast<size_t>(u)] / static_cast<double>(hw.macPerCycle)));
            prof.unitCycles[static_cast<size_t>(u)] = c;
            prof.computeCycles += c;
        }

        // parameter traffic
        ParamProfile pp = paramProfile(node);
        if (pp.hasParams) {
            int64_t totalParams = paramByteSize(node);
            Placement backing = totalParams <= hw.sharedBytes ? Placement::Shared : Placement::Ddr;
            for (int u = 0; u < P; ++u) {
                int64_t touched;
                int64_t rowPasses = 1;
                if (layer.partition) {
                    int64_t kernels = unitKernelCount(*layer.partition, u);
                    touched = static_cast<int64_t>(kernels * pp.bytesPerKernel) + pp.fixedBytes;
                    int64_t rows = 0;
                    for (const auto& r : layer.partition->perUnit[static_cast<size_t>(u)])
                        rows += r.hHi - r.hLo;
                    rowPasses = std::max<int64_t>(rows, 1);
                } else {
                    touched = u == 0 ? totalParams : 0;
                    rowPasses = 1;
                }
                if (touched == 0) continue;
                int64_t stall = 0;
                if (layer.paramPlacement == Placement::L2) {
                    int g2 = layer.split ? layer.split->stage2PartsPerUnit : 1;
                    if (g2 > 1)
                        stall = detail::linesOf(touched, hw.cacheLineBytes) *
                                detail::latencyOf(hw, backing);
                } else {
                    // streamed per output-row pass
                    stall = detail::linesOf(touched * rowPasses, hw.cacheLineBytes) *
                            detail::latencyOf(hw, layer.paramPlacement);
                }
                prof.unitCycles[static_cast<size_t>(u)] += stall;
                prof.stallCycles += stall;
            }
        }

        // feature-map reads
        int64_t sharedStall = 0;
        if (!incoming.empty()) {
            TensorShape inShape = shapes.at(incoming[0]->from);
            Placement inPlace = Placement::Shared;
            auto pit = placementOf.find(tensorName(incoming[0]->from));
            if (pit != placementOf.end()) inPlace = pit->second;
            const LayoutDescriptor* feedLayout = nullptr;
            auto lit = layoutForConsumer.find(layer.nodeId);
            if (lit != layoutForConsumer.end()) feedLayout = lit->second;
            CacheState::Counters counters;
            if (feedLayout) {
                counters = simulateCacheTrace(consumerTraceRestructured(*feedLayout), geom);
            } else {
                AccessPattern pattern = accessPatternOrIdentity(node, inShape);
                counters = simulateCacheTrace(consumerTraceRowMajor(pattern), geom);
            }
            prof.hits += counters.hits;
            prof.misses += counters.misses();
            sharedStall += counters.misses() * detail::latencyOf(hw, inPlace);
            // secondary operands stream row-major
            for (size_t s = 1; s < incoming.size(); ++s) {
                int64_t bytes = shapes.at(incoming[s]->from).byteSize();
                int64_t lines = detail::linesOf(bytes, hw.cacheLineBytes);
                Placement p = Placement::Shared;
                auto pit2 = placementOf.find(tensorName(incoming[s]->from));
                if (pit2 != placementOf.end()) p = pit2->second;
                prof.misses += lines;
                prof.hits += bytes / 4 - lines;
                sharedStall += lines * detail::latencyOf(hw, p);
            }
        }

        // compound internal handoff (conv phase -> pool phase)
        if (node.kind == OpKind::Cbra || node.kind == OpKind::Cbrm) {
            TensorShape inShape = shapes.at(incoming[0]->from);
            ConvGeometry cg = convGeometry(node);
            int64_t convH = (inShape.extent(Axis::H) + 2 * cg.padH - cg.fullKernelH) / cg.strideH + 1;
            int64_t convW = (inShape.extent(Axis::W) + 2 * cg.padW - cg.fullKernelW) / cg.strideW + 1;
            TensorShape convOut = featureMapShape(node.params[0].shape.extent(Axis::K), convH, convW);
            CacheState::Counters counters;
            int64_t writeBytes;
            if (layer.internalLayout) {
                writeBytes = layer.internalLayout->bufferBytes();
                counters = simulateCacheTrace(consumerTraceRestructured(*layer.internalLayout), geom);
                report.replicationBytes += layer.internalLayout->bufferBytes() -
                                           layer.internalLayout->elementBytes();
            } else {
                writeBytes = convOut.byteSize();
                OperatorNode poolView;
                poolView.id = layer.nodeId + ":pool";
                poolView.kind = node.kind == OpKind::Cbra ? OpKind::AvgPool : OpKind::MaxPool;
                poolView.attrs["windowH"] = node.attrInt("poolWindowH", 1);
                poolView.attrs["windowW"] = node.attrInt("poolWindowW", 1);
                poolView.attrs["strideH"] = node.attrInt("poolStrideH", 1);
                poolView.attrs["strideW"] = node.attrInt("poolStrideW", 1);
                poolView.attrs["ceilMode"] = node.attrBool("poolCeilMode", true);
                AccessPattern pattern = accessPatternOrIdentity(poolView, convOut);
                counters = simulateCacheTrace(consumerTraceRowMajor(pattern), geom);
            }
            prof.hits += counters.hits;
            prof.misses += counters.misses();
            sharedStall += detail::linesOf(writeBytes, hw.cacheLineBytes) * hw.latShared +
                           counters.misses() * hw.latShared;
        }

        // feature-map writes
        for (int port = 0; port < nodeOutputCount(node); ++port) {
            int64_t bytes = shapes.at({layer.nodeId, port}).byteSize();
            if (port == 0 && layer.outputLayout) {
                bytes = layer.outputLayout->bufferBytes();
                report.replicationBytes +=
                    layer.outputLayout->bufferBytes() - layer.outputLayout->elementBytes();
            }
            Placement p = port < static_cast<int>(layer.outputPlacements.size())
                              ? layer.outputPlacements[static_cast<size_t>(port)]
                              : Placement::Shared;
            placementOf[tensorName({layer.nodeId, port})] = p;
            sharedStall += detail::linesOf(bytes, hw.cacheLineBytes) * detail::latencyOf(hw, p);
        }

        // halo replication accounting for spatial partition phases
        if (layer.partition && layer.partition->rowHalo.haloExtent > 0 && !incoming.empty()) {
            TensorShape inShape = shapes.at(incoming[0]->from);
            int64_t rowBytes = inShape.extentOr(Axis::W, 1) * inShape.extentOr(Axis::C, 1) * 4;
            for (const auto& regions : layer.partition->perUnit)
                for (const auto& r : regions)
                    if (r.phase >= 2 && r.hHi - r.hLo < layer.partition->domain.outH)
                        report.replicationBytes += layer.partition->rowHalo.haloExtent * rowBytes;
        }

        // distribute shared stalls by work share
        if (sharedStall > 0) {
            if (totalMacs > 0) {
                for (int u = 0; u < P; ++u) {
                    int64_t share = static_cast<int64_t>(
                        std::llround(static_cast<double>(sharedStall) *
                                     unitMacs[static_cast<size_t>(u)] / totalMacs));
                    prof.unitCycles[static_cast<size_t>(u)] += share;
                    prof.stallCycles += share;
                }
            } else {
                prof.unitCycles[0] += sharedStall;
                prof.stallCycles += sharedStall;
            }
        }

        for (const auto& ev : layer.allocEvents) replayEvent(ev);

        int64_t layerCycles = 0;
        for (int64_t c : prof.unitCycles) layerCycles = std::max(layerCycles, c);
        report.simulatedCycles += layerCycles;
        if (layer.paramPlacement == Placement::L2) {
            int64_t resident = layer.split ? layer.split->perPartParamBytes
                                           : paramByteSize(node) / std::max(1, hw.unitCount);
            report.peakL2Bytes = std::max(report.peakL2Bytes, resident);
        }
        report.perLayer.push_back(std::move(prof));
    }

    report.pool = pool.stats();
    report.peakSharedBytes = plan.pooledAllocation ? pool.stats().peakBytesReserved : bumpPeak;
    report.peakDdrBytes = ddrCursor;

    for (const auto& o : g.outputs) result.outputs.push_back(tensors.at(o));
    return result;
}

struct CompareResult {
    double speedup = 1.0;
    double maxAbsDifference = 0.0;
    ProfileReport baseReport;
    ProfileReport optReport;
};

// Asserts output equality first, then reports base/opt cycle ratio.
inline CompareResult comparePlans(const ExecutionPlan& base, const ExecutionPlan& opt,
                                  const std::map<std::string, Tensor>& inputs,
                                  double tolerance = 1e-5) {
    if (base.originalHash != opt.originalHash)
        throw UsageError("plans were built from different graphs");
    ExecutionResult rb = executePlan(base, inputs);
    ExecutionResult ro = executePlan(opt, inputs);
    CompareResult cr;
    if (rb.outputs.size() != ro.outputs.size())
        throw EquivalenceFailureError("plans produce different output arity");
    for (size_t i = 0; i < rb.outputs.size(); ++i)
        cr.maxAbsDifference = std::max(cr.maxAbsDifference, maxAbsDiff(rb.outputs[i], ro.outputs[i]));
    if (!(cr.maxAbsDifference <= tolerance))
        throw EquivalenceFailureError("plan outputs differ by " +
                                      std::to_string(cr.maxAbsDifference));
    cr.speedup = static_cast<double>(rb.report.simulatedCycles) /
                 static_cast<double>(std::max<int64_t>(ro.report.simulatedCycles, 1));
    rb.report.speedupVsBaseline = 1.0;
    ro.report.speedupVsBaseline = cr.speedup;
    cr.baseReport = std::move(rb.report);
    cr.optReport = std::move(ro.report);
    return cr;
}

inline nlohmann::json profileToJson(const ProfileReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : r.perLayer)
        layers.push_back({{"node", l.nodeId},
                          {"unit_cycles", l.unitCycles},
                          {"compute_cycles", l.computeCycles},
                          {"stall_cycles", l.stallCycles},
                          {"hits", l.hits},
                          {"misses", l.misses}});
    nlohmann::json j;
    j["model"] = "layer-barrier max-over-units; stalls additive, no compute overlap";
    j["per_layer"] = layers;
    j["simulated_cycles"] = r.simulatedCycles;
    j["memory"] = {{"pool", poolStatsToJson(r.pool)},
                   {"peak_l2_bytes", r.peakL2Bytes},
                   {"peak_shared_bytes", r.peakSharedBytes},
                   {"peak_ddr_bytes", r.peakDdrBytes},
                   {"replication_bytes", r.replicationBytes}};
    if (r.speedupVsBaseline > 0) j["speedup_vs_baseline"] = r.speedupVsBaseline;
    return j;
}

// layer,unit,cycles,hits,misses rows for plotting.
inline std::string profileToCsv(const ProfileReport& r) {
    std::string csv = "layer,unit,cycles,hits,misses\n";
    for (const auto& l : r.perLayer) {
        int64_t totalCycles = 0;
        for (int64_t c : l.unitCycles) totalCycles += c;
        for (size_t u = 0; u < l.unitCycles.size(); ++u) {
            int64_t h = 0, m = 0;
            if (totalCycles > 0) {
                h = l.hits * l.unitCycles[u] / std::max<int64_t>(totalCycles, 1);
                m = l.misses * l.unitCycles[u] / std::max<int64_t>(totalCycles, 1);
            }
            if (u == 0) {
                int64_t hRest = 0, mRest = 0;
                for (size_t v = 1; v < l.unitCycles.size(); ++v) {
                    hRest += l.hits * l.unitCycles[v] / std::max<int64_t>(totalCycles, 1);
                    mRest += l.misses * l.unitCycles[v] / std::max<int64_t>(totalCycles, 1);
                }
                h = l.hits - hRest;
                m = l.misses - mRest;
            }
            csv += l.nodeId + "," + std::to_string(u) + "," + std::to_string(l.unitCycles[u]) +
                   "," + std::to_string(h) + "," + std::to_string(m) + "\n";
        }
    }
    return csv;
}

} // namespace edgeflow
