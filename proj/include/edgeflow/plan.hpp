// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/fuse_link.hpp"
#include "edgeflow/graph_io.hpp"
#include "edgeflow/layout.hpp"
#include "edgeflow/mempool.hpp"
#include "edgeflow/partition.hpp"
#include "edgeflow/split.hpp"

namespace edgeflow {

// Ablation switches; the Vanilla / HO / HO+VO arms are flag combinations.
struct PassOptions {
    bool fuse = true;
    bool link = true;
    bool split = true;
    bool partition = true;
    bool layout = true;

    bool any() const { return fuse || link || split || partition || layout; }
};

enum class Placement : uint8_t { L2, Shared, Ddr };

inline const char* placementName(Placement p) {
    switch (p) {
        case Placement::L2: return "l2";
        case Placement::Shared: return "shared";
        case Placement::Ddr: return "ddr";
    }
    return "?";
}

inline Placement placementFromName(const std::string& s) {
    if (s == "l2") return Placement::L2;
    if (s == "shared") return Placement::Shared;
    if (s == "ddr") return Placement::Ddr;
    throw ParseError("unknown placement: " + s);
}

struct AllocEvent {
    enum class Kind : uint8_t { Alloc, BatchAlloc, Release };
    Kind kind = Kind::Alloc;
    std::vector<std::string> tensors;
    std::vector<int64_t> bytes; // parallel to tensors for alloc events
};

// Per-kernel-slice parameter byte profile (the outC-role axis).
struct ParamProfile {
    double bytesPerKernel = 0.0;
    int64_t fixedBytes = 0;
    int64_t kernelExtent = 1;
    bool hasParams = false;
};

inline ParamProfile paramProfile(const OperatorNode& node) {
    ParamProfile p;
    if (node.params.empty()) return p;
    p.hasParams = true;
    Axis kernelAxis;
    switch (node.kind) {
        case OpKind::Conv:
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra:
        case OpKind::Matmul:
        case OpKind::FullyConnected: kernelAxis = Axis::K; break;
        case OpKind::LstmCell: {
            int64_t hidden = node.params[1].shape.extent(Axis::C);
            p.kernelExtent = hidden;
            for (const auto& ps : node.params)
                p.bytesPerKernel +=
                    static_cast<double>(ps.shape.byteSize()) / static_cast<double>(hidden);
            return p;
        }
        default: kernelAxis = node.params[0].shape.dims[0].label; break;
    }
    p.kernelExtent = node.params[0].shape.extent(kernelAxis);
    for (const auto& ps : node.params) {
        if (ps.shape.hasAxis(kernelAxis))
            p.bytesPerKernel += static_cast<double>(ps.shape.byteSize()) /
                                static_cast<double>(ps.shape.extent(kernelAxis));
        else
            p.fixedBytes += ps.shape.byteSize();
    }
    return p;
}

// Distinct kernels a unit owns under a scheme (k-ranges unioned).
inline int64_t unitKernelCount(const PartitionScheme& s, int unit) {
    std::vector<std::pair<int64_t, int64_t>> ranges;
    for (const auto& r : s.perUnit[static_cast<size_t>(unit)]) ranges.push_back({r.kLo, r.kHi});
    std::sort(ranges.begin(), ranges.end());
    int64_t count = 0, cursor = -1;
    for (const auto& [lo, hi] : ranges) {
        int64_t from = std::max(lo, cursor);
        if (hi > from) count += hi - from;
        cursor = std::max(cursor, hi);
    }
    return count;
}

struct LayerPlan {
    std::string nodeId;
    std::optional<SplitPlan> split;
    std::optional<PartitionScheme> partition;
    std::string partitionPolicy = "none"; // "fmp" | "naive" | "none"
    std::optional<LayoutDescriptor> outputLayout;   // write order for the linked consumer
    std::optional<LayoutDescriptor> internalLayout; // compound conv->pool handoff
    Placement paramPlacement = Placement::Shared;
    std::vector<Placement> outputPlacements; // per output port
    std::vector<AllocEvent> allocEvents;
};

struct ExecutionPlan {
    int formatVersion = kFormatVersion;
    std::string graphRef; // path of the graph document this plan executes
    uint64_t originalHash = 0;
    HardwareDescriptor hw;
    PassOptions options;
    uint64_t seed = 0;
    bool pooledAllocation = true;
    std::vector<AllocEvent> bootEvents; // graph-input allocations
    std::vector<Placement> bootPlacements;
    std::vector<LayerPlan> layers;
    std::vector<LinkAnnotation> annotations;
    ComputationGraph graph; // the optimized graph the plan executes
};

inline uint64_t graphContentHash(const ComputationGraph& g) {
    return hashTag(emitGraph(g));
}

namespace detail {

inline int64_t linesOf(int64_t bytes, int64_t lineBytes) {
    return (bytes + lineBytes - 1) / lineBytes;
}

// Replays allocation for plan construction: decides placements and records
// the event script. Pooled mode uses the EMPG pool; the vanilla baseline
// bump-allocates and never releases.
struct AllocationPlanner {
    bool pooled;
    MemoryPoolGroup pool;
    int64_t bumpCursor = 0;
    int64_t ddrCursor = 0;
    int64_t sharedCapacity = 0;
    int64_t ddrCapacity = 0;
    std::map<std::string, int> liveChunks; // tensor -> chunk id (pooled, shared only)

    Placement place(const std::string& tensor, int64_t bytes) {
        if (pooled) {
            try {
                int id = pool.allocate(bytes);
                liveChunks[tensor] = id;
                return Placement::Shared;
            } catch (const OutOfSharedMemoryError&) {
                if (ddrCursor + bytes > ddrCapacity)
                    throw OutOfSharedMemoryError("tensor " + tensor + " exceeds DDR capacity");
                ddrCursor += bytes;
                return Placement::Ddr;
            }
        }
        if (bumpCursor + bytes <= sharedCapacity) {
            bumpCursor += bytes;
            return Placement::Shared;
        }
        if (ddrCursor + bytes > ddrCapacity)
            throw OutOfSharedMemoryError("tensor " + tensor + " exceeds DDR capacity");
        ddrCursor += bytes;
        return Placement::Ddr;
    }

    void release(const std::string& tensor) {
        if (!pooled) return;
        auto it = liveChunks.find(tensor);
        if (it == liveChunks.end()) return; // spilled to DDR
        pool.release(it->second);
        liveChunks.erase(it);
    }
};

} // namespace detail

// Runs fuse -> link -> split -> partition -> layout (minus ablated passes)
// and assembles the ExecutionPlan. Pass report pieces are returned through
// the optional out-parameters.
inline ExecutionPlan buildPlan(const ComputationGraph& original, const HardwareDescriptor& hw,
                               const PassOptions& options, uint64_t seed,
                               std::vector<FusedGroup>* fusedOut = nullptr,
                               std::vector<PatternMatch>* matchesOut = nullptr) {
    hw.validate();
    validateGraph(original);
    ExecutionPlan plan;
    plan.hw = hw;
    plan.options = options;
    plan.seed = seed;
    plan.originalHash = graphContentHash(original);
    plan.pooledAllocation = options.any();

    ComputationGraph g = original;
    std::vector<FusedGroup> fused;
    if (options.fuse) g = fusePass(g, &fused);
    std::vector<LinkAnnotation> annotations;
    if (options.link) {
        auto [linked, ann] = linkPass(g, hw);
        g = std::move(linked);
        annotations = std::move(ann);
    }
    if (fusedOut) *fusedOut = fused;
    if (matchesOut) *matchesOut = identifyPatterns(g);
    plan.annotations = annotations;
    plan.graph = g;

    ShapeMap shapes = inferShapes(g);
    std::vector<std::string> order = topologicalOrder(g);

    // last consumer position per tensor, for release scheduling
    std::map<std::string, size_t> lastUse;
    std::map<std::string, size_t> layerIndex;
    for (size_t i = 0; i < order.size(); ++i) layerIndex[order[i]] = i;
    auto tensorName = [](const PortRef& r) {
        return r.port == 0 ? r.node : r.node + ":" + std::to_string(r.port);
    };
    for (const auto& e : g.edges) {
        size_t pos = layerIndex.at(e.to.node);
        auto& slot = lastUse[tensorName(e.from)];
        slot = std::max(slot, pos);
    }
    std::set<std::string> graphOutputs;
    for (const auto& o : g.outputs) graphOutputs.insert(tensorName(o));

    // annotation lookup: producer -> (consumer, pattern)
    std::map<std::string, const LinkAnnotation*> annotationByProducer;
    for (const auto& a : annotations)
        if (a.mergedInto.empty() && g.nodes.count(a.producerId) && g.nodes.count(a.consumerId))
            annotationByProducer[a.producerId] = &a;

    // allocator replay
    detail::AllocationPlanner alloc;
    alloc.pooled = plan.pooledAllocation;
    alloc.sharedCapacity = hw.sharedBytes;
    alloc.ddrCapacity = hw.ddrBytes;
    if (alloc.pooled) {
        std::vector<int64_t> warmSizes;
        for (const auto& id : order)
            for (int port = 0; port < nodeOutputCount(g.node(id)); ++port)
                warmSizes.push_back(shapes.at({id, port}).byteSize());
        try {
            alloc.pool = MemoryPoolGroup::warmPool(warmSizes, hw.sharedBytes);
        } catch (const CapacityExceededError&) {
            alloc.pool = MemoryPoolGroup(hw.sharedBytes); // carve on demand
        }
    } else {
        alloc.pool = MemoryPoolGroup(hw.sharedBytes);
    }

    for (const auto& gi : g.inputs) {
        AllocEvent ev;
        ev.kind = AllocEvent::Kind::Alloc;
        ev.tensors.push_back(gi.id);
        ev.bytes.push_back(gi.shape.byteSize());
        plan.bootEvents.push_back(ev);
        plan.bootPlacements.push_back(alloc.place(gi.id, gi.shape.byteSize()));
    }

    for (size_t li = 0; li < order.size(); ++li) {
        const std::string& id = order[li];
        const OperatorNode& node = g.node(id);
        LayerPlan layer;
        layer.nodeId = id;

        auto incoming = g.inEdges(id);
        TensorShape inShape = incoming.empty() ? TensorShape{} : shapes.at(incoming[0]->from);
        TensorShape outShape = shapes.at({id, 0});

        // partition
        if (isPartitionable(node.kind)) {
            WorkDomain domain = workDomain(node, inShape, outShape);
            if (options.partition) {
                uint64_t nodeSeed = Rng::splitmix(seed ^ hashTag(id));
                layer.partition = partitionWorkload(id, domain, hw.unitCount, nodeSeed);
                layer.partition->rowHalo = haloPolicyFor(node, HaloMode::ReplicateRows);
                layer.partition->colHalo = haloPolicyFor(node, HaloMode::ReplicateCols);
                layer.partitionPolicy = "fmp";
            } else {
                layer.partition = naiveRowBandPartition(id, domain, hw.unitCount);
                layer.partitionPolicy = "naive";
            }
        }

        // split
        ParamProfile pp = paramProfile(node);
        if (options.split && pp.hasParams &&
            (isConvFamily(node.kind) || isMatmulFamily(node.kind) ||
             node.kind == OpKind::LstmCell))
            layer.split = makeSplitPlan(node, hw);

        // parameter placement: a unit's share must fit L2 to be resident
        if (pp.hasParams) {
            int64_t totalParams = paramByteSize(node);
            int64_t maxUnitTouched = totalParams;
            if (layer.partition) {
                int64_t maxKernels = 0;
                for (int u = 0; u < layer.partition->unitCount; ++u)
                    maxKernels = std::max(maxKernels, unitKernelCount(*layer.partition, u));
                maxUnitTouched =
                    static_cast<int64_t>(maxKernels * pp.bytesPerKernel) + pp.fixedBytes;
            }
            int64_t residencyBytes = layer.split ? layer.split->perPartParamBytes : maxUnitTouched;
            if (residencyBytes <= hw.l2Bytes && (layer.split || maxUnitTouched <= hw.l2Bytes))
                layer.paramPlacement = Placement::L2;
            else if (totalParams <= hw.sharedBytes)
                layer.paramPlacement = Placement::Shared;
            else
                layer.paramPlacement = Placement::Ddr;
        }

        // layout for the linked consumer of this producer
        if (options.layout) {
            auto it = annotationByProducer.find(id);
            if (it != annotationByProducer.end()) {
                const LinkAnnotation& a = *it->second;
                const OperatorNode& consumer = g.node(a.consumerId);
                AccessPattern pattern = deriveAccessPattern(consumer, outShape);
                LayoutDescriptor ld = buildLayout(node, outShape, pattern);
                // a single-channel sliding window has no interleave to fix:
                // duplicated rows would cost exactly the re-reads they save
                bool pointless = ld.pattern.replicationRows > 0 && ld.pattern.C == 1;
                if (!ld.isIdentity && !pointless) layer.outputLayout = std::move(ld);
            }
            // compound handoff: conv phase writes for the pool phase
            if (node.kind == OpKind::Cbra || node.kind == OpKind::Cbrm) {
                OperatorNode poolView;
                poolView.id = id + ":pool";
                poolView.kind = node.kind == OpKind::Cbra ? OpKind::AvgPool : OpKind::MaxPool;
                poolView.attrs["windowH"] = node.attrInt("poolWindowH", 1);
                poolView.attrs["windowW"] = node.attrInt("poolWindowW", 1);
                poolView.attrs["strideH"] = node.attrInt("poolStrideH", 1);
                poolView.attrs["strideW"] = node.attrInt("poolStrideW", 1);
                poolView.attrs["ceilMode"] = node.attrBool("poolCeilMode", true);
                ConvGeometry cg = convGeometry(node);
                int64_t convH =
                    (inShape.extent(Axis::H) + 2 * cg.padH - cg.fullKernelH) / cg.strideH + 1;
                int64_t convW =
                    (inShape.extent(Axis::W) + 2 * cg.padW - cg.fullKernelW) / cg.strideW + 1;
                TensorShape convOut =
                    featureMapShape(node.params[0].shape.extent(Axis::K), convH, convW);
                AccessPattern pattern = deriveAccessPattern(poolView, convOut);
                LayoutDescriptor ld = buildLayout(id + ":conv", convOut, pattern);
                ld.consumerId = poolView.id;
                if (!ld.isIdentity) layer.internalLayout = std::move(ld);
            }
        }

        // allocation script: outputs first (batching the small ones), then
        // releases of tensors last consumed here
        std::vector<std::pair<std::string, int64_t>> bigs;
        AllocEvent batch;
        batch.kind = AllocEvent::Kind::BatchAlloc;
        int outPorts = nodeOutputCount(node);
        layer.outputPlacements.assign(static_cast<size_t>(outPorts), Placement::Shared);
        for (int port = 0; port < outPorts; ++port) {
            std::string tname = tensorName({id, port});
            int64_t bytes = shapes.at({id, port}).byteSize();
            if (port == 0 && layer.outputLayout) bytes = layer.outputLayout->bufferBytes();
            if (alloc.pooled && bytes <= MemoryPoolGroup::kSmallThreshold && outPorts > 1) {
                batch.tensors.push_back(tname);
                batch.bytes.push_back(bytes);
            } else {
                bigs.push_back({tname, bytes});
            }
        }
        if (!batch.tensors.empty()) {
            int64_t packed = 0;
            for (int64_t b : batch.bytes)
                packed += (b + MemoryPoolGroup::kBatchAlignment - 1) /
                          MemoryPoolGroup::kBatchAlignment * MemoryPoolGroup::kBatchAlignment;
            Placement p = alloc.place(batch.tensors.front(), packed);
            for (int port = 0; port < outPorts; ++port) {
                std::string tname = tensorName({id, port});
                if (std::find(batch.tensors.begin(), batch.tensors.end(), tname) !=
                    batch.tensors.end())
                    layer.outputPlacements[static_cast<size_t>(port)] = p;
            }
            layer.allocEvents.push_back(batch);
        }
        for (const auto& [tname, bytes] : bigs) {
            AllocEvent ev;
            ev.kind = AllocEvent::Kind::Alloc;
            ev.tensors.push_back(tname);
            ev.bytes.push_back(bytes);
            Placement p = alloc.place(tname, bytes);
            for (int port = 0; port < outPorts; ++port)
                if (tensorName({id, port}) == tname)
                    layer.outputPlacements[static_cast<size_t>(port)] = p;
            layer.allocEvents.push_back(ev);
        }
        if (alloc.pooled) {
            AllocEvent rel;
            rel.kind = AllocEvent::Kind::Release;
            for (const Edge* e : incoming) {
                std::string tname = tensorName(e->from);
                auto lu = lastUse.find(tname);
                if (lu != lastUse.end() && lu->second == li && !graphOutputs.count(tname)) {
                    // a batched sibling may still be live; chunk-level release
                    rel.tensors.push_back(tname);
                }
            }
            if (!rel.tensors.empty()) {
                std::sort(rel.tensors.begin(), rel.tensors.end());
                rel.tensors.erase(std::unique(rel.tensors.begin(), rel.tensors.end()),
                                  rel.tensors.end());
                for (const auto& t : rel.tensors) alloc.release(t);
                layer.allocEvents.push_back(rel);
            }
        }

        plan.layers.push_back(std::move(layer));
    }
    return plan;
}

// --------------------------- plan (de)serialization ------------------------

inline nlohmann::json passOptionsToJson(const PassOptions& o) {
    return {{"fuse", o.fuse},
            {"link", o.link},
            {"split", o.split},
            {"partition", o.partition},
            {"layout", o.layout}};
}

inline PassOptions passOptionsFromJson(const nlohmann::json& j) {
    PassOptions o;
    o.fuse = j.value("fuse", true);
    o.link = j.value("link", true);
    o.split = j.value("split", true);
    o.partition = j.value("partition", true);
    o.layout = j.value("layout", true);
    return o;
}

inline nlohmann::json allocEventToJson(const AllocEvent& e) {
    nlohmann::json j;
    j["kind"] = e.kind == AllocEvent::Kind::Alloc
                    ? "alloc"
                    : (e.kind == AllocEvent::Kind::BatchAlloc ? "batch" : "release");
    j["tensors"] = e.tensors;
    if (!e.bytes.empty()) j["bytes"] = e.bytes;
    return j;
}

inline AllocEvent allocEventFromJson(const nlohmann::json& j) {
    AllocEvent e;
    std::string k = j.at("kind").get<std::string>();
    e.kind = k == "alloc" ? AllocEvent::Kind::Alloc
                          : (k == "batch" ? AllocEvent::Kind::BatchAlloc : AllocEvent::Kind::Release);
    e.tensors = j.at("tensors").get<std::vector<std::string>>();
    if (j.contains("bytes")) e.bytes = j.at("bytes").get<std::vector<int64_t>>();
    return e;
}

inline nlohmann::json planToJson(const ExecutionPlan& plan) {
    nlohmann::json j;
    j["format_version"] = plan.formatVersion;
    j["graph_ref"] = plan.graphRef;
    j["original_hash"] = plan.originalHash;
    j["hw"] = hardwareToJson(plan.hw);
    j["options"] = passOptionsToJson(plan.options);
    j["seed"] = plan.seed;
    j["pooled_allocation"] = plan.pooledAllocation;
    j["boot_events"] = nlohmann::json::array();
    for (const auto& e : plan.bootEvents) j["boot_events"].push_back(allocEventToJson(e));
    j["boot_placements"] = nlohmann::json::array();
    for (Placement p : plan.bootPlacements) j["boot_placements"].push_back(placementName(p));
    j["annotations"] = nlohmann::json::array();
    for (const auto& a : plan.annotations) {
        nlohmann::json ja = {{"producer", a.producerId},
                             {"consumer", a.consumerId},
                             {"pattern", a.patternName},
                             {"threshold_bytes", a.thresholdBytes}};
        if (!a.mergedInto.empty()) ja["merged_into"] = a.mergedInto;
        j["annotations"].push_back(ja);
    }
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : plan.layers) {
        nlohmann::json jl;
        jl["node"] = layer.nodeId;
        if (layer.split) jl["split"] = splitPlanToJson(*layer.split);
        if (layer.partition) jl["partition"] = partitionToJson(*layer.partition);
        jl["partition_policy"] = layer.partitionPolicy;
        if (layer.outputLayout) jl["layout"] = layoutToJson(*layer.outputLayout);
        if (layer.internalLayout) jl["internal_layout"] = layoutToJson(*layer.internalLayout);
        nlohmann::json placements;
        placements["params"] = placementName(layer.paramPlacement);
        placements["outputs"] = nlohmann::json::array();
        for (Placement p : layer.outputPlacements) placements["outputs"].push_back(placementName(p));
        jl["placements"] = placements;
        jl["alloc_events"] = nlohmann::json::array();
        for (const auto& e : layer.allocEvents) jl["alloc_events"].push_back(allocEventToJson(e));
        j["layers"].push_back(jl);
    }
    return j;
}

inline ExecutionPlan planFromJson(const nlohmann::json& j, const ComputationGraph& graph) {
    ExecutionPlan plan;
    plan.formatVersion = j.at("format_version").get<int>();
    if (plan.formatVersion != kFormatVersion)
        throw ParseError("unsupported plan format_version");
    plan.graphRef = j.value("graph_ref", "");
    plan.originalHash = j.at("original_hash").get<uint64_t>();
    plan.hw = hardwareFromJson(j.at("hw"));
    plan.options = passOptionsFromJson(j.at("options"));
    plan.seed = j.at("seed").get<uint64_t>();
    plan.pooledAllocation = j.value("pooled_allocation", true);
    for (const auto& e : j.value("boot_events", nlohmann::json::array()))
        plan.bootEvents.push_back(allocEventFromJson(e));
    for (const auto& p : j.value("boot_placements", nlohmann::json::array()))
        plan.bootPlacements.push_back(placementFromName(p.get<std::string>()));
    for (const auto& ja : j.value("annotations", nlohmann::json::array())) {
        LinkAnnotation a;
        a.producerId = ja.at("producer").get<std::string>();
        a.consumerId = ja.at("consumer").get<std::string>();
        a.patternName = ja.at("pattern").get<std::string>();
        a.thresholdBytes = ja.at("threshold_bytes").get<int64_t>();
        a.mergedInto = ja.value("merged_into", "");
        plan.annotations.push_back(a);
    }
    for (const auto& jl : j.at("layers")) {
        LayerPlan layer;
        layer.nodeId = jl.at("node").get<std::string>();
        if (jl.contains("split")) layer.split = splitPlanFromJson(jl["split"]);
        if (jl.contains("partition")) layer.partition = partitionFromJson(jl["partition"]);
        layer.partitionPolicy = jl.value("partition_policy", "none");
        if (jl.contains("layout")) layer.outputLayout = layoutFromJson(jl["layout"]);
        if (jl.contains("internal_layout"))
            layer.internalLayout = layoutFromJson(jl["internal_layout"]);
        layer.paramPlacement = placementFromName(jl.at("placements").at("params").get<std::string>());
        for (const auto& p : jl.at("placements").at("outputs"))
            layer.outputPlacements.push_back(placementFromName(p.get<std::string>()));
        for (const auto& e : jl.value("alloc_events", nlohmann::json::array()))
            layer.allocEvents.push_back(allocEventFromJson(e));
        plan.layers.push_back(std::move(layer));
    }
    plan.graph = graph;
    validateGraph(plan.graph);
    return plan;
}

} // namespace edgeflow
