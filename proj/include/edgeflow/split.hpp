// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/fuse_link.hpp"
#include "edgeflow/graph.hpp"
#include "edgeflow/hardware.hpp"

namespace edgeflow {

// Two-stage memory-aware parameter split. Stage 1 distributes parameters
// across the P units; stage 2 further divides each unit's share into
// sequential partitions until one partition fits private L2. Axis priority is
// K, then C, then R, then S: K-slices join by concatenation, the others need
// a reduction.
struct SplitPlan {
    std::string nodeId;
    int stage1Parts = 1;
    int stage2PartsPerUnit = 1;
    std::vector<Axis> splitAxisSequence;
    std::vector<std::string> glueNodes;
    int64_t perPartParamBytes = 0; // after both stages
    int64_t perUnitParamBytes = 0; // after stage 1
    Axis stage1Axis = Axis::K;
    Axis stage2Axis = Axis::K;
    std::vector<std::pair<int64_t, int64_t>> stage1Ranges; // along stage1Axis
};

namespace detail {

struct SplittableAxis {
    Axis axis;
    int64_t extent;
    double bytesPerSlice; // summed over params carrying the axis
    int64_t fixedBytes;   // params not carrying the axis
};

// Axis menu in priority order for one node's parameter set. The axis named K
// here is whatever plays the output-channel role (matmul columns, lstm
// hidden units).
inline std::vector<SplittableAxis> splittableAxes(const OperatorNode& node) {
    std::vector<SplittableAxis> axes;
    auto addAxis = [&](Axis a, int64_t extent) {
        SplittableAxis sa{a, extent, 0.0, 0};
        for (const auto& p : node.params) {
            int64_t bytes = p.shape.byteSize();
            if (p.shape.hasAxis(a))
                sa.bytesPerSlice += static_cast<double>(bytes) / static_cast<double>(p.shape.extent(a));
            else
                sa.fixedBytes += bytes;
        }
        axes.push_back(sa);
    };
    if (node.params.empty()) return axes;
    switch (node.kind) {
        case OpKind::Conv:
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra: {
            const TensorShape& w = node.params[0].shape;
            if (node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul") {
                addAxis(Axis::K, w.extent(Axis::K));
                addAxis(Axis::C, w.extent(Axis::C));
                break;
            }
            addAxis(Axis::K, w.extent(Axis::K));
            addAxis(Axis::C, w.extent(Axis::C));
            addAxis(Axis::R, w.extent(Axis::R));
            addAxis(Axis::S, w.extent(Axis::S));
            break;
        }
        case OpKind::Matmul:
        case OpKind::FullyConnected: {
            const TensorShape& w = node.params[0].shape;
            addAxis(Axis::K, w.extent(Axis::K));
            addAxis(Axis::C, w.extent(Axis::C));
            break;
        }
        case OpKind::LstmCell: {
            // hidden-unit slices carry their 4 gate rows; reduction-free like K
            int64_t hidden = node.params[1].shape.extent(Axis::C);
            SplittableAxis sa{Axis::HiddenDim, hidden, 0.0, 0};
            for (const auto& p : node.params)
                sa.bytesPerSlice += static_cast<double>(p.shape.byteSize()) / static_cast<double>(hidden);
            axes.push_back(sa);
            break;
        }
        default: {
            // per-channel parameter tensors (bn/bias standalone)
            const TensorShape& p0 = node.params[0].shape;
            addAxis(p0.dims[0].label, p0.dims[0].extent);
            break;
        }
    }
    return axes;
}

inline int64_t ceilDiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

} // namespace detail

// Plan-only split computation; works for every parameter-bearing kind.
// Throws InfeasibleSplitError when even a single-slice part along every
// splittable axis exceeds L2.
inline SplitPlan makeSplitPlan(const OperatorNode& node, const HardwareDescriptor& hw) {
    if (node.params.empty())
        throw ValidationError("node " + node.id + " has no parameters to split");
    SplitPlan plan;
    plan.nodeId = node.id;
    auto axes = detail::splittableAxes(node);
    const int64_t P = hw.unitCount;

    // feasibility: one slice along every axis
    {
        double atom = static_cast<double>(paramByteSize(node));
        for (const auto& a : axes) atom /= static_cast<double>(a.extent);
        if (atom > static_cast<double>(hw.l2Bytes))
            throw InfeasibleSplitError("node " + node.id +
                                       ": a single parameter slice exceeds L2 on every axis");
    }

    // stage 1: first axis in priority order that can feed all P units
    size_t s1 = 0;
    while (s1 + 1 < axes.size() && axes[s1].extent < P) ++s1;
    const auto& a1 = axes[s1];
    plan.stage1Axis = a1.axis;
    plan.stage1Parts = static_cast<int>(std::min<int64_t>(P, a1.extent));
    plan.splitAxisSequence.push_back(a1.axis);
    int64_t maxSlice = detail::ceilDiv(a1.extent, plan.stage1Parts);
    for (int i = 0; i < plan.stage1Parts; ++i) {
        int64_t lo = a1.extent * i / plan.stage1Parts;
        int64_t hi = a1.extent * (i + 1) / plan.stage1Parts;
        plan.stage1Ranges.push_back({lo, hi});
    }
    plan.perUnitParamBytes =
        static_cast<int64_t>(maxSlice * a1.bytesPerSlice) + a1.fixedBytes;

    // stage 2: sequential partitions within one unit's share
    plan.perPartParamBytes = plan.perUnitParamBytes;
    plan.stage2Axis = a1.axis;
    if (plan.perUnitParamBytes > hw.l2Bytes) {
        int64_t factor = detail::ceilDiv(plan.perUnitParamBytes, hw.l2Bytes);
        if (maxSlice >= factor) {
            plan.stage2PartsPerUnit = static_cast<int>(factor);
            int64_t subSlice = detail::ceilDiv(maxSlice, factor);
            plan.perPartParamBytes =
                static_cast<int64_t>(subSlice * a1.bytesPerSlice) + a1.fixedBytes;
            while (plan.perPartParamBytes > hw.l2Bytes && subSlice > 1) {
                ++plan.stage2PartsPerUnit;
                subSlice = detail::ceilDiv(maxSlice, plan.stage2PartsPerUnit);
                plan.perPartParamBytes =
                    static_cast<int64_t>(subSlice * a1.bytesPerSlice) + a1.fixedBytes;
            }
        }
        if (plan.perPartParamBytes > hw.l2Bytes) {
            // cascade down the priority list (e.g. one kernel is itself too big)
            bool fit = false;
            for (size_t s2 = s1 + 1; s2 < axes.size() && !fit; ++s2) {
                const auto& a2 = axes[s2];
                double perSliceWithin =
                    (maxSlice * a1.bytesPerSlice + a1.fixedBytes) / static_cast<double>(a2.extent);
                for (int64_t g = 2; g <= a2.extent; ++g) {
                    int64_t sub = detail::ceilDiv(a2.extent, g);
                    int64_t bytes = static_cast<int64_t>(sub * perSliceWithin);
                    if (bytes <= hw.l2Bytes) {
                        plan.stage2Axis = a2.axis;
                        plan.stage2PartsPerUnit = static_cast<int>(g);
                        plan.perPartParamBytes = bytes;
                        plan.splitAxisSequence.push_back(a2.axis);
                        fit = true;
                        break;
                    }
                }
            }
            if (!fit)
                throw InfeasibleSplitError("node " + node.id + ": cannot fit L2 after cascade");
        } else if (plan.stage2PartsPerUnit > 1 && plan.stage2Axis != plan.stage1Axis) {
            plan.splitAxisSequence.push_back(plan.stage2Axis);
        }
    }
    return plan;
}

struct SplitResult {
    SplitPlan plan;
    ComputationGraph rewritten; // the full graph with the node materialized as parts + glue
};

namespace detail {

inline ParamSpec sliceParam(const OperatorNode& node, size_t index, Axis axis, int64_t lo,
                            int64_t hi) {
    ParamSpec p = carriedParam(node, index);
    if (!p.shape.hasAxis(axis)) return p; // replicated into each part
    int d = p.shape.axisIndex(axis);
    p.shape.dims[static_cast<size_t>(d)].extent = hi - lo;
    p.origin->sliceLo[static_cast<size_t>(d)] += lo;
    p.origin->sliceHi[static_cast<size_t>(d)] =
        p.origin->sliceLo[static_cast<size_t>(d)] + (hi - lo);
    return p;
}

} // namespace detail

// Materializes the split as a subgraph rewrite: part nodes plus concat glue
// for K slices or reduceAdd glue for C/R/S slices. Conv and matmul families
// only; the compound kinds support the reduction-free K form.
inline SplitResult splitOperator(const ComputationGraph& graph, const std::string& nodeId,
                                 const HardwareDescriptor& hw) {
    const OperatorNode node = graph.node(nodeId);
    bool convLike = isConvFamily(node.kind) &&
                    !(node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul");
    bool matmulLike = isMatmulFamily(node.kind);
    if (!convLike && !matmulLike)
        throw UnsupportedError("splitOperator rewrite supports conv/matmul families, got " +
                               std::string(opKindName(node.kind)));

    SplitResult result;
    result.plan = makeSplitPlan(node, hw);
    SplitPlan& plan = result.plan;
    bool hasStages = node.attrBool("hasBn", false) || node.attrBool("hasBias", false) ||
                     node.attrBool("hasRelu", false) || node.attrBool("hasAddConstant", false) ||
                     node.kind == OpKind::Cbrm || node.kind == OpKind::Cbra ||
                     node.kind == OpKind::FullyConnected;
    bool reduces = plan.stage1Axis != Axis::K || plan.stage2Axis != Axis::K;
    if (node.kind == OpKind::LstmCell) reduces = false;
    if (reduces && hasStages)
        throw UnsupportedError("node " + nodeId +
                               ": reduction split of a compound with nonlinear stages");

    ComputationGraph g = graph;
    auto shapes = inferShapes(graph);
    auto inEdgesOfNode = graph.inEdges(nodeId);
    if (inEdgesOfNode.size() != 1)
        throw UnsupportedError("splitOperator expects a single-input node");
    PortRef source = inEdgesOfNode[0]->from;
    TensorShape inputShape = shapes.at(source);
    TensorShape outputShape = shapes.at({nodeId, 0});

    // flatten stage1 x stage2 into concrete slice ranges
    struct PartSlice {
        int64_t lo1, hi1; // stage1 axis
        int64_t lo2 = 0, hi2 = 0; // stage2 axis when it differs
    };
    std::vector<PartSlice> parts;
    bool nested = plan.stage2PartsPerUnit > 1 && plan.stage2Axis != plan.stage1Axis;
    int64_t stage2Extent = 0;
    if (nested) {
        for (const auto& a : detail::splittableAxes(node))
            if (a.axis == plan.stage2Axis) stage2Extent = a.extent;
    }
    for (const auto& [lo, hi] : plan.stage1Ranges) {
        if (plan.stage2PartsPerUnit <= 1) {
            parts.push_back({lo, hi});
        } else if (!nested) {
            int64_t extent = hi - lo, g2 = plan.stage2PartsPerUnit;
            for (int64_t j = 0; j < g2; ++j) {
                int64_t subLo = lo + extent * j / g2;
                int64_t subHi = lo + extent * (j + 1) / g2;
                if (subHi > subLo) parts.push_back({subLo, subHi});
            }
        } else {
            int64_t g2 = plan.stage2PartsPerUnit;
            for (int64_t j = 0; j < g2; ++j) {
                int64_t subLo = stage2Extent * j / g2;
                int64_t subHi = stage2Extent * (j + 1) / g2;
                if (subHi > subLo) parts.push_back({lo, hi, subLo, subHi});
            }
        }
    }

    // the glue that joins the part outputs
    Axis joinAxis = outputShape.rank() >= 2 && convLike ? Axis::C : Axis::K;
    OperatorNode glue;
    glue.id = nodeId + (reduces ? "#radd" : "#concat");
    glue.kind = reduces ? OpKind::ReduceAdd : OpKind::Concat;
    glue.attrs["arity"] = static_cast<int64_t>(parts.size());
    if (!reduces) glue.attrs["axis"] = std::string(axisName(joinAxis));
    plan.glueNodes.push_back(glue.id);

    // C-splits slice the operator input through an explicit split node
    bool sliceInput = reduces && plan.stage1Axis == Axis::C;
    std::string splitId;
    if (sliceInput) {
        OperatorNode sp;
        sp.id = nodeId + "#split";
        sp.kind = OpKind::Split;
        Axis inAxis = matmulLike
                          ? inputShape.dims[static_cast<size_t>(inputShape.rank() - 1)].label
                          : Axis::C;
        sp.attrs["axis"] = std::string(axisName(inAxis));
        std::vector<int64_t> sizes;
        for (const auto& p : parts) sizes.push_back(p.hi1 - p.lo1);
        sp.attrs["sizes"] = sizes;
        splitId = sp.id;
        plan.glueNodes.push_back(sp.id);
        g.nodes[sp.id] = std::move(sp);
        g.edges.push_back({source, {splitId, 0}, inputShape});
    }

    for (size_t i = 0; i < parts.size(); ++i) {
        OperatorNode part = node;
        part.id = nodeId + "#p" + std::to_string(i);
        part.params.clear();
        for (size_t pi = 0; pi < node.params.size(); ++pi) {
            ParamSpec sliced = detail::sliceParam(node, pi, plan.stage1Axis, parts[i].lo1,
                                                  parts[i].hi1);
            if (nested) {
                // apply the stage2 slice on top
                if (sliced.shape.hasAxis(plan.stage2Axis)) {
                    int d = sliced.shape.axisIndex(plan.stage2Axis);
                    sliced.shape.dims[static_cast<size_t>(d)].extent = parts[i].hi2 - parts[i].lo2;
                    sliced.origin->sliceLo[static_cast<size_t>(d)] += parts[i].lo2;
                    sliced.origin->sliceHi[static_cast<size_t>(d)] =
                        sliced.origin->sliceLo[static_cast<size_t>(d)] +
                        (parts[i].hi2 - parts[i].lo2);
                }
            }
            part.params.push_back(std::move(sliced));
        }
        Axis effAxis = plan.stage1Axis;
        int64_t effLo = parts[i].lo1;
        if (nested && plan.stage2Axis == Axis::R) {
            part.attrs["fullKernelH"] = convGeometry(node).fullKernelH;
            part.attrs["kernelRowOffset"] = convGeometry(node).kernelRowOffset + parts[i].lo2;
        } else if (nested && plan.stage2Axis == Axis::S) {
            part.attrs["fullKernelW"] = convGeometry(node).fullKernelW;
            part.attrs["kernelColOffset"] = convGeometry(node).kernelColOffset + parts[i].lo2;
        }
        if (convLike && effAxis == Axis::R) {
            part.attrs["fullKernelH"] = convGeometry(node).fullKernelH;
            part.attrs["kernelRowOffset"] = convGeometry(node).kernelRowOffset + effLo;
        } else if (convLike && effAxis == Axis::S) {
            part.attrs["fullKernelW"] = convGeometry(node).fullKernelW;
            part.attrs["kernelColOffset"] = convGeometry(node).kernelColOffset + effLo;
        }
        if (sliceInput)
            g.edges.push_back({{splitId, static_cast<int>(i)},
                               {part.id, 0},
                               TensorShape{}});
        else
            g.edges.push_back({source, {part.id, 0}, inputShape});
        g.edges.push_back({{part.id, 0}, {glue.id, static_cast<int>(i)}, TensorShape{}});
        g.nodes[part.id] = std::move(part);
    }

    // rewire consumers of the original node to the glue output
    for (auto& e : g.edges)
        if (e.from.node == nodeId) e.from.node = glue.id;
    for (auto& o : g.outputs)
        if (o.node == nodeId) o.node = glue.id;
    g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                 [&](const Edge& e) { return e.to.node == nodeId; }),
                  g.edges.end());
    g.nodes.erase(nodeId);
    g.nodes[glue.id] = std::move(glue);

    validateGraph(g);
    result.rewritten = std::move(g);
    return result;
}

inline nlohmann::json splitPlanToJson(const SplitPlan& p) {
    nlohmann::json axes = nlohmann::json::array();
    for (Axis a : p.splitAxisSequence) axes.push_back(axisName(a));
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& [lo, hi] : p.stage1Ranges) ranges.push_back({lo, hi});
    return {{"node", p.nodeId},
            {"stage1_parts", p.stage1Parts},
            {"stage2_parts_per_unit", p.stage2PartsPerUnit},
            {"axes", axes},
            {"glue_nodes", p.glueNodes},
            {"per_part_param_bytes", p.perPartParamBytes},
            {"per_unit_param_bytes", p.perUnitParamBytes},
            {"stage1_axis", axisName(p.stage1Axis)},
            {"stage2_axis", axisName(p.stage2Axis)},
            {"stage1_ranges", ranges}};
}

inline SplitPlan splitPlanFromJson(const nlohmann::json& j) {
    SplitPlan p;
    p.nodeId = j.at("node").get<std::string>();
    p.stage1Parts = j.at("stage1_parts").get<int>();
    p.stage2PartsPerUnit = j.at("stage2_parts_per_unit").get<int>();
    for (const auto& a : j.at("axes")) p.splitAxisSequence.push_back(axisFromName(a.get<std::string>()));
    p.glueNodes = j.at("glue_nodes").get<std::vector<std::string>>();
    p.perPartParamBytes = j.at("per_part_param_bytes").get<int64_t>();
    p.perUnitParamBytes = j.at("per_unit_param_bytes").get<int64_t>();
    p.stage1Axis = axisFromName(j.at("stage1_axis").get<std::string>());
    p.stage2Axis = axisFromName(j.at("stage2_axis").get<std::string>());
    for (const auto& r : j.at("stage1_ranges"))
        p.stage1Ranges.push_back({r[0].get<int64_t>(), r[1].get<int64_t>()});
    return p;
}

} // namespace edgeflow
