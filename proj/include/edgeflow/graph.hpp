// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "edgeflow/errors.hpp"
#include "edgeflow/shape.hpp"

namespace edgeflow {

enum class OpKind : uint8_t {
    Conv,
    Matmul,
    Bn,
    Bias,
    Relu,
    Add,
    Mul,
    Mac,
    MaxPool,
    AvgPool,
    GlobalPool,
    Transpose,
    Concat,
    Split,
    FullyConnected,
    LstmCell,
    Cbr,
    Cbrm,
    Cbra,
    ReduceAdd,
};

inline const char* opKindName(OpKind k) {
    switch (k) {
        case OpKind::Conv: return "conv";
        case OpKind::Matmul: return "matmul";
        case OpKind::Bn: return "bn";
        case OpKind::Bias: return "bias";
        case OpKind::Relu: return "relu";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Mac: return "mac";
        case OpKind::MaxPool: return "maxpool";
        case OpKind::AvgPool: return "avgpool";
        case OpKind::GlobalPool: return "globalpool";
        case OpKind::Transpose: return "transpose";
        case OpKind::Concat: return "concat";
        case OpKind::Split: return "split";
        case OpKind::FullyConnected: return "fullyconnected";
        case OpKind::LstmCell: return "lstmCell";
        case OpKind::Cbr: return "cbr";
        case OpKind::Cbrm: return "cbrm";
        case OpKind::Cbra: return "cbra";
        case OpKind::ReduceAdd: return "reduceAdd";
    }
    return "?";
}

inline OpKind opKindFromName(const std::string& s) {
    static const std::map<std::string, OpKind> table = {
        {"conv", OpKind::Conv},
        {"matmul", OpKind::Matmul},
        {"bn", OpKind::Bn},
        {"bias", OpKind::Bias},
        {"relu", OpKind::Relu},
        {"add", OpKind::Add},
        {"mul", OpKind::Mul},
        {"mac", OpKind::Mac},
        {"maxpool", OpKind::MaxPool},
        {"avgpool", OpKind::AvgPool},
        {"globalpool", OpKind::GlobalPool},
        {"transpose", OpKind::Transpose},
        {"concat", OpKind::Concat},
        {"split", OpKind::Split},
        {"fullyconnected", OpKind::FullyConnected},
        {"lstmCell", OpKind::LstmCell},
        {"cbr", OpKind::Cbr},
        {"cbrm", OpKind::Cbrm},
        {"cbra", OpKind::Cbra},
        {"reduceAdd", OpKind::ReduceAdd},
    };
    auto it = table.find(s);
    if (it == table.end()) throw ValidationError("unknown operator kind: " + s);
    return it->second;
}

inline bool isConvFamily(OpKind k) {
    return k == OpKind::Conv || k == OpKind::Cbr || k == OpKind::Cbrm || k == OpKind::Cbra;
}

inline bool isPoolKind(OpKind k) {
    return k == OpKind::MaxPool || k == OpKind::AvgPool || k == OpKind::GlobalPool;
}

inline bool isMatmulFamily(OpKind k) {
    return k == OpKind::Matmul || k == OpKind::FullyConnected;
}

inline bool isElementwiseKind(OpKind k) {
    return k == OpKind::Bn || k == OpKind::Bias || k == OpKind::Relu || k == OpKind::Add ||
           k == OpKind::Mul || k == OpKind::Mac || k == OpKind::ReduceAdd;
}

using AttrValue = std::variant<int64_t, double, std::string, bool, std::vector<int64_t>>;
using AttrMap = std::map<std::string, AttrValue>;

// Where a parameter tensor's values come from. Rewrites (fusion, split) carry
// the origin forward so a derived node regenerates exactly the slice of the
// source tensor it owns, for any seed.
struct ParamOrigin {
    std::string tag;              // value-stream identity, "<nodeId>:<index>" for source nodes
    std::vector<Dim> fullDims;    // extents of the full source tensor
    std::vector<int64_t> sliceLo; // half-open slice of the source, one pair per axis
    std::vector<int64_t> sliceHi;

    bool operator==(const ParamOrigin&) const = default;
};

enum class ParamRole : uint8_t { Weight, BnScale, BnShift, BiasValue };

inline const char* paramRoleName(ParamRole r) {
    switch (r) {
        case ParamRole::Weight: return "weight";
        case ParamRole::BnScale: return "bnScale";
        case ParamRole::BnShift: return "bnShift";
        case ParamRole::BiasValue: return "bias";
    }
    return "?";
}

inline ParamRole paramRoleFromName(const std::string& s) {
    if (s == "weight") return ParamRole::Weight;
    if (s == "bnScale") return ParamRole::BnScale;
    if (s == "bnShift") return ParamRole::BnShift;
    if (s == "bias") return ParamRole::BiasValue;
    throw ParseError("unknown param role: " + s);
}

struct ParamSpec {
    TensorShape shape;
    ParamRole role = ParamRole::Weight;
    std::optional<ParamOrigin> origin; // absent: the param is its own source

    bool operator==(const ParamSpec&) const = default;
};

struct OperatorNode {
    std::string id;
    OpKind kind = OpKind::Relu;
    AttrMap attrs;
    std::vector<ParamSpec> params;

    bool operator==(const OperatorNode&) const = default;

    int64_t attrInt(const std::string& name, int64_t fallback) const {
        auto it = attrs.find(name);
        if (it == attrs.end()) return fallback;
        if (const auto* v = std::get_if<int64_t>(&it->second)) return *v;
        throw ValidationError("attr " + name + " of node " + id + " is not an integer");
    }

    double attrDouble(const std::string& name, double fallback) const {
        auto it = attrs.find(name);
        if (it == attrs.end()) return fallback;
        if (const auto* v = std::get_if<double>(&it->second)) return *v;
        if (const auto* v = std::get_if<int64_t>(&it->second)) return static_cast<double>(*v);
        throw ValidationError("attr " + name + " of node " + id + " is not a number");
    }

    std::string attrString(const std::string& name, const std::string& fallback) const {
        auto it = attrs.find(name);
        if (it == attrs.end()) return fallback;
        if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
        throw ValidationError("attr " + name + " of node " + id + " is not a string");
    }

    bool attrBool(const std::string& name, bool fallback) const {
        auto it = attrs.find(name);
        if (it == attrs.end()) return fallback;
        if (const auto* v = std::get_if<bool>(&it->second)) return *v;
        throw ValidationError("attr " + name + " of node " + id + " is not a bool");
    }

    bool hasAttr(const std::string& name) const { return attrs.count(name) > 0; }
};

// Exact byte count of all parameters of one node.
inline int64_t paramByteSize(const OperatorNode& node) {
    int64_t total = 0;
    for (const auto& p : node.params) total += p.shape.byteSize();
    return total;
}

struct PortRef {
    std::string node; // node id or graph-input id
    int port = 0;

    bool operator==(const PortRef&) const = default;
    auto operator<=>(const PortRef&) const = default;
};

struct Edge {
    PortRef from; // producer node output port, or a graph input (port 0)
    PortRef to;   // consumer node input slot
    TensorShape shape;

    bool operator==(const Edge&) const = default;
};

struct GraphInput {
    std::string id;
    TensorShape shape;

    bool operator==(const GraphInput&) const = default;
};

// Directed acyclic operator graph. Immutable after validate(); passes build
// new graphs rather than mutating.
struct ComputationGraph {
    std::map<std::string, OperatorNode> nodes;
    std::vector<Edge> edges;
    std::vector<GraphInput> inputs;
    std::vector<PortRef> outputs;

    bool operator==(const ComputationGraph&) const = default;

    bool isInput(const std::string& id) const {
        for (const auto& gi : inputs)
            if (gi.id == id) return true;
        return false;
    }

    const TensorShape& inputShape(const std::string& id) const {
        for (const auto& gi : inputs)
            if (gi.id == id) return gi.shape;
        throw ValidationError("unknown graph input: " + id);
    }

    const OperatorNode& node(const std::string& id) const {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw ValidationError("unknown node: " + id);
        return it->second;
    }

    // Incoming edges of a node ordered by input slot.
    std::vector<const Edge*> inEdges(const std::string& id) const {
        std::vector<const Edge*> result;
        for (const auto& e : edges)
            if (e.to.node == id) result.push_back(&e);
        std::sort(result.begin(), result.end(),
                  [](const Edge* a, const Edge* b) { return a->to.port < b->to.port; });
        return result;
    }

    std::vector<const Edge*> outEdges(const std::string& id) const {
        std::vector<const Edge*> result;
        for (const auto& e : edges)
            if (e.from.node == id) result.push_back(&e);
        return result;
    }

    int consumerCount(const std::string& id, int port = 0) const {
        int n = 0;
        for (const auto& e : edges)
            if (e.from.node == id && e.from.port == port) ++n;
        for (const auto& o : outputs)
            if (o.node == id && o.port == port) ++n;
        return n;
    }
};

namespace detail {

inline int64_t convOutExtent(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
    int64_t out = (in + 2 * pad - kernel) / stride + 1;
    if (out < 1)
        throw ShapeMismatchError("convolution window does not fit input (in=" +
                                 std::to_string(in) + ", kernel=" + std::to_string(kernel) + ")");
    return out;
}

inline int64_t poolOutExtent(int64_t in, int64_t window, int64_t stride, bool ceilMode) {
    if (window > in) window = in;
    int64_t span = in - window;
    int64_t out = ceilMode ? (span + stride - 1) / stride + 1 : span / stride + 1;
    return std::max<int64_t>(out, 1);
}

} // namespace detail

struct ConvGeometry {
    int64_t strideH = 1, strideW = 1;
    int64_t padH = 0, padW = 0;
    int64_t fullKernelH = 1, fullKernelW = 1; // geometry of the unsplit kernel
    int64_t kernelRowOffset = 0, kernelColOffset = 0;
};

inline ConvGeometry convGeometry(const OperatorNode& node) {
    ConvGeometry g;
    int64_t stride = node.attrInt("stride", 1);
    g.strideH = node.attrInt("strideH", stride);
    g.strideW = node.attrInt("strideW", stride);
    int64_t pad = node.attrInt("pad", 0);
    g.padH = node.attrInt("padH", pad);
    g.padW = node.attrInt("padW", pad);
    if (node.params.empty()) throw ValidationError("conv node " + node.id + " has no kernel");
    const TensorShape& w = node.params[0].shape;
    g.fullKernelH = node.attrInt("fullKernelH", w.extent(Axis::R));
    g.fullKernelW = node.attrInt("fullKernelW", w.extent(Axis::S));
    g.kernelRowOffset = node.attrInt("kernelRowOffset", 0);
    g.kernelColOffset = node.attrInt("kernelColOffset", 0);
    return g;
}

struct PoolGeometry {
    int64_t windowH = 1, windowW = 1;
    int64_t strideH = 1, strideW = 1;
    bool ceilMode = true;
};

inline PoolGeometry poolGeometry(const OperatorNode& node, const std::string& prefix = "") {
    auto key = [&prefix](const char* name) {
        if (prefix.empty()) return std::string(name);
        std::string k = prefix + name;
        k[prefix.size()] = static_cast<char>(std::toupper(k[prefix.size()]));
        return k;
    };
    PoolGeometry g;
    int64_t window = node.attrInt(key("window"), 1);
    g.windowH = node.attrInt(key("windowH"), window);
    g.windowW = node.attrInt(key("windowW"), window);
    int64_t stride = node.attrInt(key("stride"), g.windowH);
    g.strideH = node.attrInt(key("strideH"), stride);
    g.strideW = node.attrInt(key("strideW"), stride);
    g.ceilMode = node.attrBool(key("ceilMode"), true);
    return g;
}

// How many input slots a node consumes.
inline int nodeArity(const OperatorNode& node) {
    switch (node.kind) {
        case OpKind::Add:
        case OpKind::Mul:
            return node.hasAttr("constant") ? 1 : 2;
        case OpKind::Mac: return 3;
        case OpKind::LstmCell: return 3;
        case OpKind::Concat:
        case OpKind::ReduceAdd:
            return static_cast<int>(node.attrInt("arity", 2));
        default: return 1;
    }
}

inline int nodeOutputCount(const OperatorNode& node) {
    if (node.kind == OpKind::Split) {
        auto it = node.attrs.find("sizes");
        if (it == node.attrs.end()) throw ValidationError("split node " + node.id + " lacks sizes");
        return static_cast<int>(std::get<std::vector<int64_t>>(it->second).size());
    }
    if (node.kind == OpKind::LstmCell) return 2;
    return 1;
}

// Shape inference for one node. Pure; throws ShapeMismatchError/
// ValidationError on inconsistent inputs, UnsupportedError for int8 compute.
inline std::vector<TensorShape> inferOutputShapes(const OperatorNode& node,
                                                  const std::vector<TensorShape>& in) {
    auto require = [&](bool cond, const std::string& msg) {
        if (!cond) throw ShapeMismatchError("node " + node.id + ": " + msg);
    };
    for (const auto& s : in)
        if (s.elementType == ElementType::Int8 && node.kind != OpKind::Concat &&
            node.kind != OpKind::Split && node.kind != OpKind::Transpose)
            throw UnsupportedError("node " + node.id + ": int8 path not supported for kind " +
                                   opKindName(node.kind));

    switch (node.kind) {
        case OpKind::Conv:
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra: {
            if (node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul") {
                // fused matmul + elementwise stages
                require(in.size() == 1, "expects one input");
                require(!node.params.empty(), "missing weight");
                const TensorShape& w = node.params[0].shape;
                int64_t flat = in[0].elementCount();
                require(w.extent(Axis::C) == flat, "weight input dim mismatch");
                return {vectorShape(Axis::K, w.extent(Axis::K))};
            }
            require(in.size() == 1 && in[0].rank() == 3, "expects one C,H,W input");
            require(!node.params.empty(), "missing kernel");
            const TensorShape& w = node.params[0].shape;
            require(w.rank() == 4, "kernel must be K,C,R,S");
            ConvGeometry g = convGeometry(node);
            require(w.extent(Axis::C) == in[0].dims[0].extent, "kernel C mismatch");
            int64_t outH = detail::convOutExtent(in[0].dims[1].extent, g.fullKernelH, g.strideH, g.padH);
            int64_t outW = detail::convOutExtent(in[0].dims[2].extent, g.fullKernelW, g.strideW, g.padW);
            if (node.kind == OpKind::Cbrm || node.kind == OpKind::Cbra) {
                PoolGeometry p = poolGeometry(node, "pool");
                outH = detail::poolOutExtent(outH, p.windowH, p.strideH, p.ceilMode);
                outW = detail::poolOutExtent(outW, p.windowW, p.strideW, p.ceilMode);
            }
            return {featureMapShape(w.extent(Axis::K), outH, outW)};
        }
        case OpKind::Matmul: {
            require(in.size() == 1, "expects one input");
            require(in[0].rank() == 1 || in[0].rank() == 2, "input must be a vector or matrix");
            require(!node.params.empty(), "missing weight");
            const TensorShape& w = node.params[0].shape;
            require(w.rank() == 2, "weight must be C,K");
            int64_t k = in[0].rank() == 2 ? in[0].dims[1].extent : in[0].dims[0].extent;
            require(w.extent(Axis::C) == k, "weight rows must match input columns");
            if (in[0].rank() == 1) return {vectorShape(Axis::K, w.extent(Axis::K))};
            require(in[0].dims[0].label != Axis::K, "matrix row axis may not be labeled K");
            return {TensorShape({{in[0].dims[0].label, in[0].dims[0].extent},
                                 {Axis::K, w.extent(Axis::K)}})};
        }
        case OpKind::FullyConnected: {
            require(in.size() == 1, "expects one input");
            require(!node.params.empty(), "missing weight");
            const TensorShape& w = node.params[0].shape;
            require(w.rank() == 2, "weight must be C,K");
            require(w.extent(Axis::C) == in[0].elementCount(), "weight rows must match flattened input");
            return {vectorShape(Axis::K, w.extent(Axis::K))};
        }
        case OpKind::Bn: {
            require(in.size() == 1, "expects one input");
            require(node.params.size() >= 2, "bn needs scale and shift");
            require(node.params[0].shape.elementCount() == in[0].dims[0].extent,
                    "bn scale extent must match leading axis");
            return {in[0]};
        }
        case OpKind::Bias: {
            require(in.size() == 1, "expects one input");
            require(!node.params.empty(), "bias needs a value tensor");
            const TensorShape& b = node.params[0].shape;
            bool elementwise = b.elementCount() == in[0].elementCount();
            bool channel = b.rank() == 1 && b.dims[0].extent == in[0].dims[0].extent;
            require(elementwise || channel, "bias must match input or its leading axis");
            return {in[0]};
        }
        case OpKind::Relu: {
            require(in.size() == 1, "expects one input");
            return {in[0]};
        }
        case OpKind::Add:
        case OpKind::Mul: {
            if (node.hasAttr("constant")) {
                require(in.size() == 1, "constant form expects one input");
                return {in[0]};
            }
            require(in.size() == 2, "expects two inputs");
            require(in[0].elementCount() == in[1].elementCount(), "operand size mismatch");
            return {in[0]};
        }
        case OpKind::Mac: {
            require(in.size() == 3, "expects three inputs");
            require(in[0].elementCount() == in[1].elementCount() &&
                        in[0].elementCount() == in[2].elementCount(),
                    "operand size mismatch");
            return {in[0]};
        }
        case OpKind::MaxPool:
        case OpKind::AvgPool: {
            require(in.size() == 1 && in[0].rank() == 3, "expects one C,H,W input");
            PoolGeometry p = poolGeometry(node);
            return {featureMapShape(in[0].dims[0].extent,
                                    detail::poolOutExtent(in[0].dims[1].extent, p.windowH,
                                                          p.strideH, p.ceilMode),
                                    detail::poolOutExtent(in[0].dims[2].extent, p.windowW,
                                                          p.strideW, p.ceilMode))};
        }
        case OpKind::GlobalPool: {
            require(in.size() == 1 && in[0].rank() == 3, "expects one C,H,W input");
            return {featureMapShape(in[0].dims[0].extent, 1, 1)};
        }
        case OpKind::Transpose: {
            require(in.size() == 1, "expects one input");
            std::string mode = node.attrString("mode", "matrix");
            if (mode == "channelShuffle") {
                require(in[0].rank() == 3, "channelShuffle expects C,H,W");
                int64_t groups = node.attrInt("groups", 1);
                require(groups >= 1 && in[0].dims[0].extent % groups == 0,
                        "channel count must divide by groups");
                return {in[0]};
            }
            require(mode == "matrix", "unknown transpose mode " + mode);
            require(in[0].rank() == 2, "matrix transpose expects rank-2 input");
            return {TensorShape({in[0].dims[1], in[0].dims[0]})};
        }
        case OpKind::Concat: {
            require(!in.empty(), "expects inputs");
            Axis axis = axisFromName(node.attrString("axis", "C"));
            TensorShape out = in[0];
            int idx = out.axisIndex(axis);
            int64_t total = 0;
            for (const auto& s : in) {
                require(s.rank() == out.rank(), "rank mismatch");
                for (int d = 0; d < s.rank(); ++d) {
                    if (d == idx) continue;
                    require(s.dims[static_cast<size_t>(d)].extent ==
                                out.dims[static_cast<size_t>(d)].extent,
                            "non-concat extents must match");
                }
                total += s.dims[static_cast<size_t>(idx)].extent;
            }
            out.dims[static_cast<size_t>(idx)].extent = total;
            return {out};
        }
        case OpKind::Split: {
            require(in.size() == 1, "expects one input");
            Axis axis = axisFromName(node.attrString("axis", "C"));
            auto it = node.attrs.find("sizes");
            require(it != node.attrs.end(), "split needs sizes");
            const auto& sizes = std::get<std::vector<int64_t>>(it->second);
            int idx = in[0].axisIndex(axis);
            int64_t total = 0;
            std::vector<TensorShape> out;
            for (int64_t s : sizes) {
                require(s >= 1, "split sizes must be positive");
                TensorShape piece = in[0];
                piece.dims[static_cast<size_t>(idx)].extent = s;
                out.push_back(piece);
                total += s;
            }
            require(total == in[0].dims[static_cast<size_t>(idx)].extent,
                    "split sizes must cover the axis exactly");
            return out;
        }
        case OpKind::LstmCell: {
            require(in.size() == 3, "expects x, h, c");
            require(node.params.size() >= 3, "lstmCell needs Wx, Wh, b");
            const TensorShape& wx = node.params[0].shape;
            const TensorShape& wh = node.params[1].shape;
            int64_t hidden = wh.extent(Axis::C);
            require(wx.extent(Axis::K) == 4 * hidden && wh.extent(Axis::K) == 4 * hidden,
                    "gate rows must be 4*hidden");
            require(wx.extent(Axis::C) == in[0].elementCount(), "Wx input dim mismatch");
            require(in[1].elementCount() == hidden && in[2].elementCount() == hidden,
                    "state size mismatch");
            TensorShape state = vectorShape(Axis::HiddenDim, hidden);
            return {state, state};
        }
        case OpKind::ReduceAdd: {
            require(in.size() >= 2, "expects at least two inputs");
            for (const auto& s : in)
                require(s.elementCount() == in[0].elementCount(), "operand size mismatch");
            return {in[0]};
        }
    }
    throw ValidationError("unreachable kind");
}

// Deterministic topological order, ties broken by node id.
inline std::vector<std::string> topologicalOrder(const ComputationGraph& graph) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::set<std::string>> successors;
    for (const auto& [id, node] : graph.nodes) indegree[id] = 0;
    for (const auto& e : graph.edges) {
        if (graph.isInput(e.from.node)) continue;
        if (successors[e.from.node].insert(e.to.node).second) indegree[e.to.node]++;
    }
    std::set<std::string> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.insert(id);
    std::vector<std::string> order;
    order.reserve(graph.nodes.size());
    while (!ready.empty()) {
        std::string id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        auto it = successors.find(id);
        if (it == successors.end()) continue;
        for (const auto& next : it->second)
            if (--indegree[next] == 0) ready.insert(next);
    }
    if (order.size() != graph.nodes.size())
        throw CycleError("computation graph contains a cycle");
    return order;
}

// Inferred shape of every (node, port), keyed for pass use.
using ShapeMap = std::map<PortRef, TensorShape>;

inline ShapeMap inferShapes(const ComputationGraph& graph) {
    ShapeMap shapes;
    for (const auto& gi : graph.inputs) shapes[{gi.id, 0}] = gi.shape;
    for (const auto& id : topologicalOrder(graph)) {
        const OperatorNode& node = graph.node(id);
        std::vector<TensorShape> in;
        auto incoming = graph.inEdges(id);
        int arity = nodeArity(node);
        if (static_cast<int>(incoming.size()) != arity)
            throw ValidationError("node " + id + " expects " + std::to_string(arity) +
                                  " inputs, has " + std::to_string(incoming.size()));
        for (int slot = 0; slot < arity; ++slot) {
            const Edge* e = incoming[static_cast<size_t>(slot)];
            if (e->to.port != slot)
                throw ValidationError("node " + id + " input slots must be contiguous");
            auto it = shapes.find(e->from);
            if (it == shapes.end())
                throw ValidationError("edge into " + id + " references unknown tensor " +
                                      e->from.node);
            // A declared edge shape must agree with the producer.
            if (!(e->shape.dims.empty()) && !(e->shape == it->second))
                throw ShapeMismatchError("edge " + e->from.node + " -> " + id +
                                         " declares shape " + e->shape.toString() +
                                         " but producer has " + it->second.toString());
            in.push_back(it->second);
        }
        auto out = inferOutputShapes(node, in);
        if (static_cast<int>(out.size()) != nodeOutputCount(node))
            throw ValidationError("node " + id + " output count mismatch");
        for (size_t port = 0; port < out.size(); ++port)
            shapes[{id, static_cast<int>(port)}] = out[port];
    }
    return shapes;
}

// Full structural validation. Returns the shape map so callers can reuse it.
inline ShapeMap validateGraph(const ComputationGraph& graph) {
    if (graph.outputs.empty()) throw ValidationError("graph has no outputs");
    std::set<std::string> inputIds;
    for (const auto& gi : graph.inputs) {
        if (!inputIds.insert(gi.id).second)
            throw ValidationError("duplicate graph input id " + gi.id);
        if (graph.nodes.count(gi.id))
            throw ValidationError("graph input id collides with node id " + gi.id);
        gi.shape.validate();
    }
    for (const auto& [id, node] : graph.nodes) {
        if (node.id != id) throw ValidationError("node map key mismatch for " + id);
        for (const auto& p : node.params) p.shape.validate();
    }
    for (const auto& e : graph.edges) {
        if (!graph.nodes.count(e.to.node))
            throw ValidationError("edge consumer is not a node: " + e.to.node);
        if (!graph.nodes.count(e.from.node) && !graph.isInput(e.from.node))
            throw ValidationError("dangling edge producer: " + e.from.node);
        if (graph.isInput(e.from.node) && e.from.port != 0)
            throw ValidationError("graph inputs have a single port");
    }
    ShapeMap shapes = inferShapes(graph); // also checks cycles and arity
    for (const auto& e : graph.edges) {
        if (!graph.isInput(e.from.node)) {
            const OperatorNode& producer = graph.node(e.from.node);
            if (e.from.port < 0 || e.from.port >= nodeOutputCount(producer))
                throw ValidationError("edge from " + e.from.node + " references port " +
                                      std::to_string(e.from.port));
        }
    }
    for (const auto& o : graph.outputs) {
        if (!shapes.count(o))
            throw ValidationError("graph output references unknown tensor " + o.node + ":" +
                                  std::to_string(o.port));
    }
    return shapes;
}

} // namespace edgeflow
