// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/graph.hpp"
#include "edgeflow/hardware.hpp"
#include "edgeflow/rng.hpp"

namespace edgeflow {

// Workload domain of one operator: output channels x output rows x output
// columns. Everything the partitioner slices lives in this space; exact-once
// coverage is then a property of output elements, which is what the coverage
// oracle checks.
struct WorkDomain {
    int64_t outC = 1;
    int64_t outH = 1;
    int64_t outW = 1;
    double macsPerElement = 1.0;
    int64_t elements() const { return outC * outH * outW; }
};

inline bool isPartitionable(OpKind k) {
    return isConvFamily(k) || isPoolKind(k) || isMatmulFamily(k) || k == OpKind::LstmCell ||
           isElementwiseKind(k);
}

// Derives the work domain from the operator and its inferred output shape.
// inputShape is the primary input (for MAC weights).
inline WorkDomain workDomain(const OperatorNode& node, const TensorShape& inputShape,
                             const TensorShape& outputShape) {
    WorkDomain d;
    if (outputShape.rank() == 3) {
        d.outC = outputShape.dims[0].extent;
        d.outH = outputShape.dims[1].extent;
        d.outW = outputShape.dims[2].extent;
    } else if (outputShape.rank() == 2) {
        d.outC = outputShape.dims[1].extent; // matmul columns are the kernel dim
        d.outH = outputShape.dims[0].extent;
        d.outW = 1;
    } else {
        d.outC = outputShape.dims[0].extent;
        d.outH = 1;
        d.outW = 1;
    }
    switch (node.kind) {
        case OpKind::Conv:
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra: {
            if (node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul") {
                d.macsPerElement = static_cast<double>(node.params[0].shape.extent(Axis::C));
                break;
            }
            const TensorShape& w = node.params[0].shape;
            ConvGeometry g = convGeometry(node);
            double macs = static_cast<double>(w.extent(Axis::C)) *
                          static_cast<double>(g.fullKernelH) * static_cast<double>(g.fullKernelW);
            int stages = (node.attrBool("hasBn", false) ? 1 : 0) +
                         (node.attrBool("hasBias", false) ? 1 : 0) +
                         (node.attrBool("hasRelu", false) ? 1 : 0) +
                         (node.attrBool("hasAddConstant", false) ? 1 : 0);
            macs += stages;
            if (node.kind == OpKind::Cbrm || node.kind == OpKind::Cbra) {
                // per pooled output element: its share of the conv work plus
                // the pooling reduction itself
                int64_t convH = (inputShape.extent(Axis::H) + 2 * g.padH - g.fullKernelH) /
                                    g.strideH + 1;
                int64_t convW = (inputShape.extent(Axis::W) + 2 * g.padW - g.fullKernelW) /
                                    g.strideW + 1;
                double ratio = static_cast<double>(convH * convW) /
                               static_cast<double>(d.outH * d.outW);
                macs = ratio * (macs + 1.0);
            }
            d.macsPerElement = macs;
            break;
        }
        case OpKind::Matmul:
        case OpKind::FullyConnected:
            d.macsPerElement = static_cast<double>(node.params[0].shape.extent(Axis::C));
            break;
        case OpKind::LstmCell: {
            const TensorShape& wx = node.params[0].shape;
            const TensorShape& wh = node.params[1].shape;
            d.macsPerElement =
                4.0 * static_cast<double>(wx.extent(Axis::C) + wh.extent(Axis::C)) + 8.0;
            break;
        }
        case OpKind::MaxPool:
        case OpKind::AvgPool: {
            PoolGeometry p = poolGeometry(node);
            d.macsPerElement = static_cast<double>(p.windowH * p.windowW);
            break;
        }
        case OpKind::GlobalPool:
            d.macsPerElement = static_cast<double>(inputShape.extentOr(Axis::H, 1) *
                                                   inputShape.extentOr(Axis::W, 1));
            break;
        case OpKind::ReduceAdd: d.macsPerElement = 1.0; break;
        default: d.macsPerElement = 1.0; break;
    }
    return d;
}

// One rectangular block of output work: kernels x rows x columns, half-open.
struct FmRegion {
    int64_t kLo = 0, kHi = 0;
    int64_t hLo = 0, hHi = 0;
    int64_t wLo = 0, wHi = 0;
    int phase = 1; // 1 outC, 2 inH, 3 inW, 4 random

    int64_t elements() const { return (kHi - kLo) * (hHi - hLo) * (wHi - wLo); }
};

enum class HaloMode : uint8_t { ReplicateRows, ReplicateCols };

struct HaloPolicy {
    HaloMode mode = HaloMode::ReplicateRows;
    int64_t haloExtent = 0; // rows (or cols) replicated per boundary
};

inline HaloPolicy haloPolicyFor(const OperatorNode& node, HaloMode mode) {
    HaloPolicy hp;
    hp.mode = mode;
    if (isConvFamily(node.kind) &&
        !(node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul")) {
        ConvGeometry g = convGeometry(node);
        hp.haloExtent = mode == HaloMode::ReplicateRows ? std::max<int64_t>(0, g.fullKernelH - g.strideH)
                                                        : std::max<int64_t>(0, g.fullKernelW - g.strideW);
    } else if (node.kind == OpKind::MaxPool || node.kind == OpKind::AvgPool) {
        PoolGeometry p = poolGeometry(node);
        hp.haloExtent = mode == HaloMode::ReplicateRows ? std::max<int64_t>(0, p.windowH - p.strideH)
                                                        : std::max<int64_t>(0, p.windowW - p.strideW);
    }
    return hp;
}

struct PartitionScheme {
    std::string nodeId;
    int unitCount = 1;
    uint64_t seed = 0;
    WorkDomain domain;
    int64_t sliceByC = 0, sliceByH = 0, sliceByW = 0;
    std::vector<std::vector<FmRegion>> perUnit;
    std::vector<std::pair<int64_t, int>> remainderAssignments; // (column, unit)
    HaloPolicy rowHalo, colHalo;

    int64_t unitElements(int unit) const {
        int64_t n = 0;
        for (const auto& r : perUnit[static_cast<size_t>(unit)]) n += r.elements();
        return n;
    }
    double unitMacs(int unit) const {
        return static_cast<double>(unitElements(unit)) * domain.macsPerElement;
    }
};

// The triple outC -> rows -> columns partition with a seeded random phase for
// what is left. Work that a skipped phase (extent < P) would have taken flows
// to the next phase; the random phase hands each leftover column to a
// distinct unit drawn from a seeded permutation.
inline PartitionScheme partitionWorkload(const std::string& nodeId, const WorkDomain& domain,
                                         int unitCount, uint64_t seed) {
    PartitionScheme s;
    s.nodeId = nodeId;
    s.unitCount = unitCount;
    s.seed = seed;
    s.domain = domain;
    s.perUnit.assign(static_cast<size_t>(unitCount), {});

    const int64_t P = unitCount;
    s.sliceByC = domain.outC / P;
    for (int64_t i = 0; i < P && s.sliceByC > 0; ++i)
        s.perUnit[static_cast<size_t>(i)].push_back(
            {i * s.sliceByC, (i + 1) * s.sliceByC, 0, domain.outH, 0, domain.outW, 1});
    int64_t kRemLo = s.sliceByC * P;
    if (kRemLo >= domain.outC) return s;

    int64_t rowsLo = 0;
    s.sliceByH = domain.outH >= P ? domain.outH / P : 0;
    if (s.sliceByH > 0) {
        for (int64_t i = 0; i < P; ++i)
            s.perUnit[static_cast<size_t>(i)].push_back(
                {kRemLo, domain.outC, i * s.sliceByH, (i + 1) * s.sliceByH, 0, domain.outW, 2});
        rowsLo = s.sliceByH * P;
    }
    if (rowsLo >= domain.outH) return s;

    int64_t colsLo = 0;
    s.sliceByW = domain.outW >= P ? domain.outW / P : 0;
    if (s.sliceByW > 0) {
        for (int64_t i = 0; i < P; ++i)
            s.perUnit[static_cast<size_t>(i)].push_back(
                {kRemLo, domain.outC, rowsLo, domain.outH, i * s.sliceByW, (i + 1) * s.sliceByW, 3});
        colsLo = s.sliceByW * P;
    }
    if (colsLo >= domain.outW) return s;

    // remaining columns are always fewer than P
    std::vector<int> perm(static_cast<size_t>(P));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (int64_t i = P - 1; i > 0; --i)
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.below(
                                                     static_cast<uint64_t>(i + 1)))]);
    size_t next = 0;
    for (int64_t w = colsLo; w < domain.outW; ++w) {
        int unit = perm[next++ % perm.size()];
        s.perUnit[static_cast<size_t>(unit)].push_back(
            {kRemLo, domain.outC, rowsLo, domain.outH, w, w + 1, 4});
        s.remainderAssignments.push_back({w, unit});
    }
    return s;
}

inline PartitionScheme partitionFeatureMap(const OperatorNode& node, const TensorShape& inputShape,
                                           const TensorShape& outputShape,
                                           const HardwareDescriptor& hw, uint64_t seed) {
    if (!isPartitionable(node.kind))
        throw ValidationError("operator " + node.id + " is not partitionable");
    PartitionScheme s =
        partitionWorkload(node.id, workDomain(node, inputShape, outputShape), hw.unitCount, seed);
    s.rowHalo = haloPolicyFor(node, HaloMode::ReplicateRows);
    s.colHalo = haloPolicyFor(node, HaloMode::ReplicateCols);
    return s;
}

// (max - min) / mean MACs across units; 0 when every unit carries the same
// load or the scheme is trivial.
inline double loadImbalance(const PartitionScheme& scheme) {
    if (scheme.unitCount <= 1) return 0.0;
    double maxM = 0.0, minM = HUGE_VAL, total = 0.0;
    for (int u = 0; u < scheme.unitCount; ++u) {
        double m = scheme.unitMacs(u);
        maxM = std::max(maxM, m);
        minM = std::min(minM, m);
        total += m;
    }
    double mean = total / scheme.unitCount;
    if (mean <= 0.0) return 0.0;
    return (maxM - minM) / mean;
}

inline nlohmann::json partitionToJson(const PartitionScheme& s) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& regions : s.perUnit) {
        nlohmann::json ju = nlohmann::json::array();
        for (const auto& r : regions)
            ju.push_back({{"k", {r.kLo, r.kHi}},
                          {"h", {r.hLo, r.hHi}},
                          {"w", {r.wLo, r.wHi}},
                          {"phase", r.phase}});
        per.push_back(ju);
    }
    nlohmann::json rem = nlohmann::json::array();
    for (const auto& [col, unit] : s.remainderAssignments) rem.push_back({col, unit});
    return {{"node", s.nodeId},
            {"unit_count", s.unitCount},
            {"seed", s.seed},
            {"domain", {{"outC", s.domain.outC}, {"outH", s.domain.outH}, {"outW", s.domain.outW},
                        {"macs_per_element", s.domain.macsPerElement}}},
            {"slice_by", {{"c", s.sliceByC}, {"h", s.sliceByH}, {"w", s.sliceByW}}},
            {"per_unit", per},
            {"remainder", rem},
            {"halo", {{"rows", s.rowHalo.haloExtent}, {"cols", s.colHalo.haloExtent}}}};
}

inline PartitionScheme partitionFromJson(const nlohmann::json& j) {
    PartitionScheme s;
    s.nodeId = j.at("node").get<std::string>();
    s.unitCount = j.at("unit_count").get<int>();
    s.seed = j.at("seed").get<uint64_t>();
    s.domain.outC = j.at("domain").at("outC").get<int64_t>();
    s.domain.outH = j.at("domain").at("outH").get<int64_t>();
    s.domain.outW = j.at("domain").at("outW").get<int64_t>();
    s.domain.macsPerElement = j.at("domain").at("macs_per_element").get<double>();
    s.sliceByC = j.at("slice_by").at("c").get<int64_t>();
    s.sliceByH = j.at("slice_by").at("h").get<int64_t>();
    s.sliceByW = j.at("slice_by").at("w").get<int64_t>();
    for (const auto& ju : j.at("per_unit")) {
        std::vector<FmRegion> regions;
        for (const auto& jr : ju) {
            FmRegion r;
            r.kLo = jr.at("k")[0].get<int64_t>();
            r.kHi = jr.at("k")[1].get<int64_t>();
            r.hLo = jr.at("h")[0].get<int64_t>();
            r.hHi = jr.at("h")[1].get<int64_t>();
            r.wLo = jr.at("w")[0].get<int64_t>();
            r.wHi = jr.at("w")[1].get<int64_t>();
            r.phase = jr.at("phase").get<int>();
            regions.push_back(r);
        }
        s.perUnit.push_back(std::move(regions));
    }
    for (const auto& jr : j.at("remainder"))
        s.remainderAssignments.push_back({jr[0].get<int64_t>(), jr[1].get<int>()});
    s.rowHalo.haloExtent = j.at("halo").at("rows").get<int64_t>();
    s.colHalo.mode = HaloMode::ReplicateCols;
    s.colHalo.haloExtent = j.at("halo").at("cols").get<int64_t>();
    return s;
}

// Naive hardware-oblivious partition used by the vanilla baseline: equal row
// bands, the entire remainder lumped onto the last unit, every unit holding
// all kernels.
inline PartitionScheme naiveRowBandPartition(const std::string& nodeId, const WorkDomain& domain,
                                             int unitCount) {
    PartitionScheme s;
    s.nodeId = nodeId;
    s.unitCount = unitCount;
    s.seed = 0;
    s.domain = domain;
    s.perUnit.assign(static_cast<size_t>(unitCount), {});
    const int64_t P = unitCount;
    int64_t band = domain.outH / P;
    if (band == 0) {
        // all rows on the last unit
        s.perUnit.back().push_back({0, domain.outC, 0, domain.outH, 0, domain.outW, 2});
        return s;
    }
    for (int64_t i = 0; i < P; ++i) {
        int64_t hLo = i * band;
        int64_t hHi = (i == P - 1) ? domain.outH : (i + 1) * band;
        s.perUnit[static_cast<size_t>(i)].push_back({0, domain.outC, hLo, hHi, 0, domain.outW, 2});
    }
    return s;
}

} // namespace edgeflow
