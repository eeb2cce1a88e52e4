// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "edgeflow/graph.hpp"

namespace edgeflow {

// Desk-scale benchmark models. Shapes are analogues of the networks they are
// named after, sized so the whole suite runs in seconds while still hitting
// the interesting regimes (parameters above L2, spatial extents below the
// unit count, linkable chains, shortcut joins).
namespace zoo {

class GraphBuilder {
public:
    GraphBuilder& input(const std::string& id, TensorShape shape) {
        g_.inputs.push_back({id, std::move(shape)});
        return *this;
    }

    OperatorNode& add(const std::string& id, OpKind kind) {
        OperatorNode n;
        n.id = id;
        n.kind = kind;
        g_.nodes[id] = std::move(n);
        return g_.nodes[id];
    }

    GraphBuilder& edge(const std::string& from, const std::string& to, int toPort = 0,
                       int fromPort = 0) {
        g_.edges.push_back({{from, fromPort}, {to, toPort}, TensorShape{}});
        return *this;
    }

    GraphBuilder& output(const std::string& node, int port = 0) {
        g_.outputs.push_back({node, port});
        return *this;
    }

    ComputationGraph build() {
        validateGraph(g_);
        return g_;
    }

private:
    ComputationGraph g_;
};

inline OperatorNode& addConv(GraphBuilder& b, const std::string& id, int64_t inC, int64_t outC,
                             int64_t kernel, int64_t stride = 1, int64_t pad = 0) {
    OperatorNode& n = b.add(id, OpKind::Conv);
    n.attrs["stride"] = stride;
    n.attrs["pad"] = pad;
    n.params.push_back({kernelShape(outC, inC, kernel, kernel), ParamRole::Weight, {}});
    return n;
}

inline OperatorNode& addBn(GraphBuilder& b, const std::string& id, int64_t channels) {
    OperatorNode& n = b.add(id, OpKind::Bn);
    n.params.push_back({vectorShape(Axis::C, channels), ParamRole::BnScale, {}});
    n.params.push_back({vectorShape(Axis::C, channels), ParamRole::BnShift, {}});
    return n;
}

inline OperatorNode& addBias(GraphBuilder& b, const std::string& id, int64_t channels) {
    OperatorNode& n = b.add(id, OpKind::Bias);
    n.params.push_back({vectorShape(Axis::C, channels), ParamRole::BiasValue, {}});
    return n;
}

inline OperatorNode& addPool(GraphBuilder& b, const std::string& id, OpKind kind, int64_t window,
                             int64_t stride) {
    OperatorNode& n = b.add(id, kind);
    n.attrs["window"] = window;
    n.attrs["stride"] = stride;
    n.attrs["ceilMode"] = true;
    return n;
}

// MobileNet tail analogue: a linkable small conv chain through average
// pooling, then a pointwise convolution past L2 capacity that needs the
// two-stage split.
inline ComputationGraph mobilenetBlock() {
    GraphBuilder b;
    b.input("x", featureMapShape(256, 7, 7));
    addConv(b, "a_conv", 256, 256, 1);
    addBn(b, "a_bn", 256);
    addBias(b, "a_bias", 256);
    b.add("a_relu", OpKind::Relu);
    addPool(b, "pool", OpKind::AvgPool, 2, 2);
    addConv(b, "c_conv", 256, 1040, 1);
    b.add("c_relu", OpKind::Relu);
    addConv(b, "d_conv", 1040, 1024, 1);
    addBias(b, "d_bias", 1024);
    b.add("d_relu", OpKind::Relu);
    b.add("tail", OpKind::GlobalPool);
    b.edge("x", "a_conv")
        .edge("a_conv", "a_bn")
        .edge("a_bn", "a_bias")
        .edge("a_bias", "a_relu")
        .edge("a_relu", "pool")
        .edge("pool", "c_conv")
        .edge("c_conv", "c_relu")
        .edge("c_relu", "d_conv")
        .edge("d_conv", "d_bias")
        .edge("d_bias", "d_relu")
        .edge("d_relu", "tail")
        .output("tail");
    return b.build();
}

// SqueezeNet fire analogue: squeeze/expand with concat, then a linked
// pool-to-conv chain (cbrm forms, the final conv reads row strips).
inline ComputationGraph squeezenetFire() {
    GraphBuilder b;
    b.input("x", featureMapShape(64, 13, 13));
    addConv(b, "squeeze", 64, 16, 1);
    b.add("squeeze_relu", OpKind::Relu);
    addConv(b, "expand1", 16, 64, 1);
    b.add("expand1_relu", OpKind::Relu);
    addConv(b, "expand3", 16, 64, 3, 1, 1);
    b.add("expand3_relu", OpKind::Relu);
    OperatorNode& cat = b.add("cat", OpKind::Concat);
    cat.attrs["axis"] = std::string("C");
    cat.attrs["arity"] = int64_t{2};
    addConv(b, "head", 128, 64, 1);
    b.add("head_relu", OpKind::Relu);
    addPool(b, "mpool", OpKind::MaxPool, 2, 2);
    addConv(b, "final", 64, 64, 3, 1, 1);
    b.add("final_relu", OpKind::Relu);
    b.edge("x", "squeeze")
        .edge("squeeze", "squeeze_relu")
        .edge("squeeze_relu", "expand1")
        .edge("expand1", "expand1_relu")
        .edge("squeeze_relu", "expand3")
        .edge("expand3", "expand3_relu")
        .edge("expand1_relu", "cat", 0)
        .edge("expand3_relu", "cat", 1)
        .edge("cat", "head")
        .edge("head", "head_relu")
        .edge("head_relu", "mpool")
        .edge("mpool", "final")
        .edge("final", "final_relu")
        .output("final_relu");
    return b.build();
}

// ShuffleNet unit analogue: pointwise, channel shuffle, 3x3, pointwise,
// identity shortcut.
inline ComputationGraph shufflenetUnit() {
    GraphBuilder b;
    b.input("x", featureMapShape(48, 14, 14));
    addConv(b, "c1", 48, 24, 1);
    addBn(b, "c1_bn", 24);
    b.add("c1_relu", OpKind::Relu);
    OperatorNode& shuf = b.add("shuf", OpKind::Transpose);
    shuf.attrs["mode"] = std::string("channelShuffle");
    shuf.attrs["groups"] = int64_t{4};
    addConv(b, "c2", 24, 24, 3, 1, 1);
    addBn(b, "c2_bn", 24);
    addConv(b, "c3", 24, 48, 1);
    addBn(b, "c3_bn", 48);
    OperatorNode& join = b.add("join", OpKind::Add);
    join.attrs["arity"] = int64_t{2};
    b.add("out_relu", OpKind::Relu);
    b.edge("x", "c1")
        .edge("c1", "c1_bn")
        .edge("c1_bn", "c1_relu")
        .edge("c1_relu", "shuf")
        .edge("shuf", "c2")
        .edge("c2", "c2_bn")
        .edge("c2_bn", "c3")
        .edge("c3", "c3_bn")
        .edge("x", "join", 0)
        .edge("c3_bn", "join", 1)
        .edge("join", "out_relu")
        .output("out_relu");
    return b.build();
}

// ResNet18 late-stage basic block analogue: two 3x3 convolutions above L2
// capacity on a 7x7 map, identity shortcut.
inline ComputationGraph resnetBlock() {
    GraphBuilder b;
    b.input("x", featureMapShape(256, 7, 7));
    addConv(b, "r1", 256, 256, 3, 1, 1);
    addBn(b, "r1_bn", 256);
    b.add("r1_relu", OpKind::Relu);
    addConv(b, "r2", 256, 256, 3, 1, 1);
    addBn(b, "r2_bn", 256);
    OperatorNode& join = b.add("join", OpKind::Add);
    join.attrs["arity"] = int64_t{2};
    b.add("out_relu", OpKind::Relu);
    b.edge("x", "r1")
        .edge("r1", "r1_bn")
        .edge("r1_bn", "r1_relu")
        .edge("r1_relu", "r2")
        .edge("r2", "r2_bn")
        .edge("x", "join", 0)
        .edge("r2_bn", "join", 1)
        .edge("join", "out_relu")
        .output("out_relu");
    return b.build();
}

// Three chained LSTM cells with a fully-connected head.
inline ComputationGraph lstmChain() {
    GraphBuilder b;
    const int64_t inDim = 256, hidden = 256;
    b.input("x0", vectorShape(Axis::C, inDim));
    b.input("x1", vectorShape(Axis::C, inDim));
    b.input("x2", vectorShape(Axis::C, inDim));
    b.input("h0", vectorShape(Axis::HiddenDim, hidden));
    b.input("c0", vectorShape(Axis::HiddenDim, hidden));
    for (int step = 1; step <= 3; ++step) {
        OperatorNode& cell = b.add("cell" + std::to_string(step), OpKind::LstmCell);
        cell.params.push_back(
            {TensorShape({{Axis::K, 4 * hidden}, {Axis::C, inDim}}), ParamRole::Weight, {}});
        cell.params.push_back(
            {TensorShape({{Axis::K, 4 * hidden}, {Axis::C, hidden}}), ParamRole::Weight, {}});
        cell.params.push_back({vectorShape(Axis::K, 4 * hidden), ParamRole::BiasValue, {}});
    }
    OperatorNode& head = b.add("head", OpKind::FullyConnected);
    head.params.push_back(
        {TensorShape({{Axis::C, hidden}, {Axis::K, 1000}}), ParamRole::Weight, {}});
    head.params.push_back({vectorShape(Axis::K, 1000), ParamRole::BiasValue, {}});
    b.edge("x0", "cell1", 0).edge("h0", "cell1", 1).edge("c0", "cell1", 2);
    b.edge("x1", "cell2", 0).edge("cell1", "cell2", 1, 0).edge("cell1", "cell2", 2, 1);
    b.edge("x2", "cell3", 0).edge("cell2", "cell3", 1, 0).edge("cell2", "cell3", 2, 1);
    b.edge("cell3", "head", 0, 0);
    b.output("head");
    return b.build();
}

// CentreNet-style detection head: 3x3 backbone convolutions (the middle one
// above L2) into linked 1x1 heads.
inline ComputationGraph centrenetHead() {
    GraphBuilder b;
    b.input("x", featureMapShape(64, 16, 16));
    addConv(b, "h1", 64, 128, 3, 1, 1);
    b.add("h1_relu", OpKind::Relu);
    addConv(b, "h2", 128, 128, 3, 1, 1);
    b.add("h2_relu", OpKind::Relu);
    addConv(b, "h3", 128, 64, 1);
    b.add("h3_relu", OpKind::Relu);
    addConv(b, "hm", 64, 10, 1);
    b.edge("x", "h1")
        .edge("h1", "h1_relu")
        .edge("h1_relu", "h2")
        .edge("h2", "h2_relu")
        .edge("h2_relu", "h3")
        .edge("h3", "h3_relu")
        .edge("h3_relu", "hm")
        .output("hm");
    return b.build();
}

// The worked-example operator: a cbra authored directly with the 4 MB
// pointwise kernel and the spatially-broadcast 1024x7x7 bias.
inline ComputationGraph workedExample() {
    GraphBuilder b;
    b.input("x", featureMapShape(1024, 7, 7));
    OperatorNode& n = b.add("cbra0", OpKind::Cbra);
    n.attrs["stride"] = int64_t{1};
    n.attrs["pad"] = int64_t{0};
    n.attrs["hasBias"] = true;
    n.attrs["hasRelu"] = true;
    n.attrs["poolWindowH"] = int64_t{2};
    n.attrs["poolWindowW"] = int64_t{2};
    n.attrs["poolStrideH"] = int64_t{2};
    n.attrs["poolStrideW"] = int64_t{2};
    n.attrs["poolCeilMode"] = true;
    n.params.push_back({kernelShape(1024, 1024, 1, 1), ParamRole::Weight, {}});
    n.params.push_back(
        {TensorShape({{Axis::K, 1024}, {Axis::H, 7}, {Axis::W, 7}}), ParamRole::BiasValue, {}});
    b.edge("x", "cbra0").output("cbra0");
    return b.build();
}

struct NamedModel {
    std::string name;
    ComputationGraph graph;
};

inline std::vector<NamedModel> benchmarkSuite() {
    return {{"mobilenet_block", mobilenetBlock()},   {"squeezenet_fire", squeezenetFire()},
            {"shufflenet_unit", shufflenetUnit()},   {"resnet18_block", resnetBlock()},
            {"lstm_chain", lstmChain()},             {"centrenet_head", centrenetHead()}};
}

} // namespace zoo
} // namespace edgeflow
