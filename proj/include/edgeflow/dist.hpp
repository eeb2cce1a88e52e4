// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/graph.hpp"
#include "edgeflow/hardware.hpp"
#include "edgeflow/partition.hpp"

namespace edgeflow {

// Partition dimensions the multi-device planner may choose. Matmul-family
// operators use n (columns, the outC analogue) and m (rows, the inH
// analogue); inC/k reduction dimensions are never partitioned.
enum class PartDim : uint8_t { OutC, InH, InW };

inline const char* partDimName(PartDim d) {
    switch (d) {
        case PartDim::OutC: return "outC";
        case PartDim::InH: return "inH";
        case PartDim::InW: return "inW";
    }
    return "?";
}

inline PartDim partDimFromName(const std::string& s) {
    if (s == "outC" || s == "n") return PartDim::OutC;
    if (s == "inH" || s == "m") return PartDim::InH;
    if (s == "inW") return PartDim::InW;
    throw ParseError("unknown partition dimension: " + s);
}

// partDim display for matmul family ("n"/"m")
inline std::string partDimDisplay(PartDim d, bool matmulFamily) {
    if (!matmulFamily) return partDimName(d);
    return d == PartDim::OutC ? "n" : (d == PartDim::InH ? "m" : "?");
}

struct SchemeChoice {
    std::map<std::string, PartDim> perOperator;
    SyncMethod syncMethod = SyncMethod::RingAllReduce;
};

struct CostEstimate {
    double computeCycles = 0.0; // sum over layers of max-over-devices
    double commCycles = 0.0;
    double totalCycles() const { return computeCycles + commCycles; }
};

// Deterministic lexicographic enumeration of the dimension-set permutations;
// |result| = d! exactly.
inline std::vector<std::vector<PartDim>> enumerateSchemes(std::vector<PartDim> dset) {
    if (dset.empty()) throw ValidationError("dimension set must be nonempty");
    std::sort(dset.begin(), dset.end());
    dset.erase(std::unique(dset.begin(), dset.end()), dset.end());
    std::vector<std::vector<PartDim>> result;
    do {
        result.push_back(dset);
    } while (std::next_permutation(dset.begin(), dset.end()));
    return result;
}

namespace dist_detail {

// Allowed dimensions per operator family. Operators whose workload is a
// plain vector (fc heads, lstm state) only support the kernel dimension.
inline std::vector<PartDim> allowedDims(const OperatorNode&, const WorkDomain& d) {
    std::vector<PartDim> dims{PartDim::OutC};
    if (d.outH > 1) dims.push_back(PartDim::InH);
    if (d.outW > 1) dims.push_back(PartDim::InW);
    return dims;
}

// Max per-device element share when the operator is partitioned along the
// ordering's primary dimension. Devices do not share memory, so one operator
// is cut along a single dimension; a scarce dimension (extent below the ceil
// balance) shows up as imbalance cost, which is what the profiling trades
// against halo overhead. Later ordering positions only break ties.
inline int64_t maxDeviceElements(const WorkDomain& d, int n, const std::vector<PartDim>& order) {
    int64_t ext[3] = {d.outC, d.outH, d.outW};
    auto indexOf = [](PartDim p) {
        return p == PartDim::OutC ? 0 : (p == PartDim::InH ? 1 : 2);
    };
    int idx = indexOf(order[0]);
    int64_t e = ext[idx];
    int64_t maxSlice = (e + n - 1) / n;
    int64_t others = 1;
    for (int i = 0; i < 3; ++i)
        if (i != idx) others *= ext[i];
    return maxSlice * others;
}

inline double syncCycles(SyncMethod m, int n, double bytes, double bandwidth) {
    if (n <= 1) return 0.0;
    if (m == SyncMethod::RingAllReduce) return 2.0 * (n - 1) / n * bytes / bandwidth;
    return 2.0 * bytes * (n - 1) / bandwidth; // server link is the bottleneck
}

inline double haloCycles(const OperatorNode& node, const TensorShape& inShape, PartDim dim,
                         int n, double bandwidth) {
    if (n <= 1 || dim == PartDim::OutC) return 0.0;
    HaloPolicy hp = haloPolicyFor(node, dim == PartDim::InH ? HaloMode::ReplicateRows
                                                            : HaloMode::ReplicateCols);
    if (hp.haloExtent == 0) return 0.0;
    int64_t c = inShape.extentOr(Axis::C, 1);
    int64_t lineElems = dim == PartDim::InH ? inShape.extentOr(Axis::W, 1)
                                            : inShape.extentOr(Axis::H, 1);
    // two boundaries per interior device
    double bytes = 2.0 * static_cast<double>(hp.haloExtent) * static_cast<double>(lineElems) *
                   static_cast<double>(c) * 4.0;
    return bytes / bandwidth;
}

struct LayerCost {
    std::string nodeId;
    bool matmulFamily = false;
    std::vector<PartDim> allowed;
    // per ordering (indexed like enumerateSchemes(allowed)): cycles
    std::vector<double> computeByOrdering;
    std::vector<double> haloByOrdering;
    double syncRing = 0.0, syncPs = 0.0;
    double serialCompute = 0.0; // movement layers and the n=1 view
};

inline std::vector<LayerCost> layerCosts(const ComputationGraph& g, const ClusterDescriptor& c) {
    std::vector<LayerCost> costs;
    ShapeMap shapes = inferShapes(g);
    double deviceMacsPerCycle =
        static_cast<double>(c.device.macPerCycle) * static_cast<double>(c.device.unitCount);
    for (const auto& id : topologicalOrder(g)) {
        const OperatorNode& node = g.node(id);
        LayerCost lc;
        lc.nodeId = id;
        lc.matmulFamily = isMatmulFamily(node.kind) || node.kind == OpKind::LstmCell;
        auto incoming = g.inEdges(id);
        TensorShape inShape = incoming.empty() ? TensorShape{} : shapes.at(incoming[0]->from);
        TensorShape outShape = shapes.at({id, 0});
        if (!isPartitionable(node.kind)) {
            costs.push_back(std::move(lc));
            continue;
        }
        WorkDomain d = workDomain(node, inShape, outShape);
        lc.allowed = allowedDims(node, d);
        lc.serialCompute = static_cast<double>(d.elements()) * d.macsPerElement / deviceMacsPerCycle;
        double outBytes = static_cast<double>(outShape.byteSize());
        lc.syncRing = syncCycles(SyncMethod::RingAllReduce, c.deviceCount, outBytes,
                                 c.bandwidthBytesPerCycle);
        lc.syncPs = syncCycles(SyncMethod::ParameterServer, c.deviceCount, outBytes,
                               c.bandwidthBytesPerCycle);
        for (const auto& ordering : enumerateSchemes(lc.allowed)) {
            int64_t share = maxDeviceElements(d, c.deviceCount, ordering);
            lc.computeByOrdering.push_back(static_cast<double>(share) * d.macsPerElement /
                                           deviceMacsPerCycle);
            lc.haloByOrdering.push_back(
                haloCycles(node, inShape, ordering[0], c.deviceCount, c.bandwidthBytesPerCycle));
        }
        costs.push_back(std::move(lc));
    }
    return costs;
}

} // namespace dist_detail

// Analytic cost of one scheme choice over the whole graph.
inline CostEstimate profileScheme(const ComputationGraph& graph, const SchemeChoice& scheme,
                                  const ClusterDescriptor& cluster) {
    cluster.validate();
    CostEstimate est;
    auto costs = dist_detail::layerCosts(graph, cluster);
    for (const auto& lc : costs) {
        if (lc.allowed.empty()) {
            est.computeCycles += lc.serialCompute;
            continue;
        }
        auto it = scheme.perOperator.find(lc.nodeId);
        PartDim dim = it != scheme.perOperator.end() ? it->second : PartDim::OutC;
        if (std::find(lc.allowed.begin(), lc.allowed.end(), dim) == lc.allowed.end())
            throw InvalidDimensionError("dimension " + std::string(partDimName(dim)) +
                                        " is not partitionable for " + lc.nodeId);
        // ordering with the chosen primary dimension, rest in canonical order
        auto orderings = enumerateSchemes(lc.allowed);
        size_t pick = 0;
        for (size_t i = 0; i < orderings.size(); ++i)
            if (orderings[i][0] == dim) {
                pick = i;
                break;
            }
        est.computeCycles += lc.computeByOrdering[pick];
        est.commCycles += lc.haloByOrdering[pick];
        est.commCycles += scheme.syncMethod == SyncMethod::RingAllReduce ? lc.syncRing : lc.syncPs;
    }
    return est;
}

struct PlannerRow {
    std::string nodeId;
    std::string chosenDim; // display name (n/m for matmul family)
    std::vector<std::pair<std::string, double>> orderingTotals; // "outC>inH>inW" -> cycles
    double computeCycles = 0.0;
    double haloCycles = 0.0;
    double syncRing = 0.0;
    double syncPs = 0.0;
};

struct PlannerResult {
    SchemeChoice choice;
    CostEstimate estimate;
    std::vector<PlannerRow> rows;
    CostEstimate singleDeviceEstimate; // n = 1 comparison point
};

// Per-operator argmin over every enumerated ordering (the hybrid / ring-mix
// scheme). Ties break toward outC < inH < inW via lexicographic enumeration.
inline PlannerResult selectBestScheme(const ComputationGraph& graph,
                                      const ClusterDescriptor& cluster) {
    cluster.validate();
    PlannerResult result;
    result.choice.syncMethod = cluster.sync;
    auto costs = dist_detail::layerCosts(graph, cluster);
    for (const auto& lc : costs) {
        if (lc.allowed.empty()) {
            result.estimate.computeCycles += lc.serialCompute;
            result.singleDeviceEstimate.computeCycles += lc.serialCompute;
            continue;
        }
        double sync = cluster.sync == SyncMethod::RingAllReduce ? lc.syncRing : lc.syncPs;
        auto orderings = enumerateSchemes(lc.allowed);
        size_t best = 0;
        double bestTotal = HUGE_VAL;
        PlannerRow row;
        row.nodeId = lc.nodeId;
        for (size_t i = 0; i < orderings.size(); ++i) {
            double total = lc.computeByOrdering[i] + lc.haloByOrdering[i] + sync;
            std::string key;
            for (size_t d = 0; d < orderings[i].size(); ++d) {
                if (d) key += ">";
                key += partDimDisplay(orderings[i][d], lc.matmulFamily);
            }
            row.orderingTotals.push_back({key, total});
            if (total < bestTotal) {
                bestTotal = total;
                best = i;
            }
        }
        result.choice.perOperator[lc.nodeId] = orderings[best][0];
        row.chosenDim = partDimDisplay(orderings[best][0], lc.matmulFamily);
        row.computeCycles = lc.computeByOrdering[best];
        row.haloCycles = lc.haloByOrdering[best];
        row.syncRing = lc.syncRing;
        row.syncPs = lc.syncPs;
        result.rows.push_back(std::move(row));
        result.estimate.computeCycles += lc.computeByOrdering[best];
        result.estimate.commCycles += lc.haloByOrdering[best] + sync;
        result.singleDeviceEstimate.computeCycles += lc.serialCompute;
    }
    return result;
}

inline nlohmann::json plannerToJson(const PlannerResult& r, const ClusterDescriptor& cluster) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json costs = nlohmann::json::object();
        for (const auto& [key, total] : row.orderingTotals) costs[key] = total;
        rows.push_back({{"node", row.nodeId},
                        {"chosen_dim", row.chosenDim},
                        {"ordering_totals", costs},
                        {"compute_cycles", row.computeCycles},
                        {"halo_cycles", row.haloCycles},
                        {"sync_ring_cycles", row.syncRing},
                        {"sync_ps_cycles", row.syncPs}});
    }
    return {{"device_count", cluster.deviceCount},
            {"sync", syncMethodName(cluster.sync)},
            {"rows", rows},
            {"selected",
             {{"compute_cycles", r.estimate.computeCycles},
              {"comm_cycles", r.estimate.commCycles},
              {"total_cycles", r.estimate.totalCycles()}}},
            {"single_device_total_cycles", r.singleDeviceEstimate.totalCycles()}};
}

inline std::string plannerToCsv(const PlannerResult& r) {
    std::string csv = "node,chosen_dim,compute_cycles,halo_cycles,sync_ring_cycles,sync_ps_cycles\n";
    for (const auto& row : r.rows)
        csv += row.nodeId + "," + row.chosenDim + "," + std::to_string(row.computeCycles) + "," +
               std::to_string(row.haloCycles) + "," + std::to_string(row.syncRing) + "," +
               std::to_string(row.syncPs) + "\n";
    return csv;
}

} // namespace edgeflow
