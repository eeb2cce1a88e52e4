// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "edgeflow/graph.hpp"
#include "edgeflow/rng.hpp"
#include "edgeflow/tensor.hpp"

namespace edgeflow {

// Deterministic parameter/input value synthesis. Graph documents carry shapes
// only; values are a pure function of (seed, tag). Derived nodes reference the
// source tensor through ParamOrigin so a rewritten graph sees exactly the same
// numbers as the original.
namespace values {

inline double weightScale(const TensorShape& full) {
    // ~1/sqrt(fanIn) keeps activations O(1) through deep fixtures
    int64_t fanIn = 1;
    for (const auto& d : full.dims)
        if (d.label != Axis::K) fanIn *= d.extent;
    if (fanIn < 1) fanIn = 1;
    return 1.0 / std::sqrt(static_cast<double>(fanIn));
}

inline void fillValues(Tensor& t, ParamRole role, uint64_t seed, const std::string& tag) {
    Rng rng = taggedRng(seed, tag);
    double lo = -1.0, hi = 1.0;
    switch (role) {
        case ParamRole::Weight: {
            double s = weightScale(t.shape());
            lo = -s;
            hi = s;
            break;
        }
        case ParamRole::BnScale: lo = 0.75; hi = 1.25; break;
        case ParamRole::BnShift:
        case ParamRole::BiasValue: lo = -0.1; hi = 0.1; break;
    }
    for (int64_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<float>(rng.uniform(lo, hi));
}

} // namespace values

// Materializes parameter values, honoring origin slices.
inline Tensor materializeParam(const OperatorNode& node, size_t index, uint64_t seed) {
    const ParamSpec& spec = node.params[index];
    if (!spec.origin) {
        Tensor t(spec.shape);
        values::fillValues(t, spec.role, seed, node.id + ":" + std::to_string(index));
        return t;
    }
    const ParamOrigin& o = *spec.origin;
    TensorShape full(o.fullDims, spec.shape.elementType);
    Tensor source(full);
    values::fillValues(source, spec.role, seed, o.tag);
    if (o.sliceLo.size() != o.fullDims.size() || o.sliceHi.size() != o.fullDims.size())
        throw ValidationError("param origin slice rank mismatch on node " + node.id);
    Tensor out(spec.shape);
    // generic strided slice copy
    size_t rank = o.fullDims.size();
    std::vector<int64_t> idx(rank, 0);
    std::vector<int64_t> extents(rank);
    for (size_t d = 0; d < rank; ++d) {
        extents[d] = o.sliceHi[d] - o.sliceLo[d];
        if (extents[d] != spec.shape.dims[d].extent)
            throw ValidationError("param origin slice extent mismatch on node " + node.id);
    }
    int64_t n = out.size();
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t rem = flat, srcOff = 0;
        for (size_t d = rank; d-- > 0;) {
            idx[d] = rem % extents[d];
            rem /= extents[d];
        }
        for (size_t d = 0; d < rank; ++d)
            srcOff = srcOff * o.fullDims[d].extent + (o.sliceLo[d] + idx[d]);
        out.at(flat) = source.at(srcOff);
    }
    return out;
}

inline Tensor makeInputTensor(const GraphInput& gi, uint64_t seed) {
    Tensor t(gi.shape);
    Rng rng = taggedRng(seed, "input:" + gi.id);
    for (int64_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Core convolution with support for split-part geometry: the node's kernel
// may be a row/column slice of the full kernel (kernelRowOffset /
// fullKernelH attrs shift the window while output geometry stays that of the
// unsplit operator). Out-of-range taps read zero (padding).
inline Tensor evalConvCore(const OperatorNode& node, const Tensor& x, const Tensor& w) {
    ConvGeometry g = convGeometry(node);
    int64_t C = x.shape().dims[0].extent;
    int64_t H = x.shape().dims[1].extent;
    int64_t W = x.shape().dims[2].extent;
    int64_t K = w.shape().dims[0].extent;
    int64_t R = w.shape().dims[2].extent;
    int64_t S = w.shape().dims[3].extent;
    int64_t outH = (H + 2 * g.padH - g.fullKernelH) / g.strideH + 1;
    int64_t outW = (W + 2 * g.padW - g.fullKernelW) / g.strideW + 1;
    Tensor y(featureMapShape(K, outH, outW));
    for (int64_t k = 0; k < K; ++k)
        for (int64_t oh = 0; oh < outH; ++oh)
            for (int64_t ow = 0; ow < outW; ++ow) {
                double acc = 0.0;
                int64_t baseH = oh * g.strideH - g.padH + g.kernelRowOffset;
                int64_t baseW = ow * g.strideW - g.padW + g.kernelColOffset;
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t r = 0; r < R; ++r) {
                        int64_t ih = baseH + r;
                        if (ih < 0 || ih >= H) continue;
                        for (int64_t s = 0; s < S; ++s) {
                            int64_t iw = baseW + s;
                            if (iw < 0 || iw >= W) continue;
                            acc += static_cast<double>(w.at4(k, c, r, s)) *
                                   static_cast<double>(x.at3(c, ih, iw));
                        }
                    }
                y.at3(k, oh, ow) = static_cast<float>(acc);
            }
    return y;
}

inline Tensor evalPoolCore(const Tensor& x, const PoolGeometry& p, bool isMax) {
    int64_t C = x.shape().dims[0].extent;
    int64_t H = x.shape().dims[1].extent;
    int64_t W = x.shape().dims[2].extent;
    int64_t outH = poolOutExtent(H, p.windowH, p.strideH, p.ceilMode);
    int64_t outW = poolOutExtent(W, p.windowW, p.strideW, p.ceilMode);
    Tensor y(featureMapShape(C, outH, outW));
    for (int64_t c = 0; c < C; ++c)
        for (int64_t oh = 0; oh < outH; ++oh)
            for (int64_t ow = 0; ow < outW; ++ow) {
                int64_t h0 = oh * p.strideH, w0 = ow * p.strideW;
                int64_t h1 = std::min(h0 + p.windowH, H), w1 = std::min(w0 + p.windowW, W);
                double acc = isMax ? -HUGE_VAL : 0.0;
                int64_t count = 0;
                for (int64_t h = h0; h < h1; ++h)
                    for (int64_t w = w0; w < w1; ++w) {
                        double v = x.at3(c, h, w);
                        if (isMax)
                            acc = std::max(acc, v);
                        else
                            acc += v;
                        ++count;
                    }
                y.at3(c, oh, ow) = static_cast<float>(isMax ? acc : acc / count);
            }
    return y;
}

} // namespace detail

// Evaluates one node given its input tensors and a seed for parameter values.
// Returns one tensor per output port.
inline std::vector<Tensor> evalNode(const OperatorNode& node, const std::vector<Tensor>& in,
                                    uint64_t seed) {
    auto param = [&](size_t i) { return materializeParam(node, i, seed); };
    switch (node.kind) {
        case OpKind::Conv:
            return {detail::evalConvCore(node, in[0], param(0))};
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra: {
            bool matmulRoot =
                node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul";
            Tensor y;
            if (matmulRoot) {
                Tensor w = param(0);
                int64_t kIn = w.shape().dims[0].extent, n = w.shape().dims[1].extent;
                y = Tensor(vectorShape(Axis::K, n));
                for (int64_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < kIn; ++k)
                        acc += static_cast<double>(in[0].at(k)) * static_cast<double>(w.at2(k, j));
                    y.at(j) = static_cast<float>(acc);
                }
            } else {
                y = detail::evalConvCore(node, in[0], param(0));
            }
            size_t next = 1;
            int64_t channels = y.shape().dims[0].extent;
            int64_t perChannel = y.size() / channels;
            if (node.attrBool("hasBn", false)) {
                Tensor scale = param(next), shift = param(next + 1);
                next += 2;
                for (int64_t c = 0; c < channels; ++c)
                    for (int64_t i = 0; i < perChannel; ++i) {
                        float& v = y.at(c * perChannel + i);
                        v = static_cast<float>(static_cast<double>(v) * scale.at(c) + shift.at(c));
                    }
            }
            if (node.attrBool("hasBias", false)) {
                Tensor b = param(next);
                ++next;
                if (b.size() == y.size()) {
                    for (int64_t i = 0; i < y.size(); ++i) y.at(i) += b.at(i);
                } else {
                    for (int64_t c = 0; c < channels; ++c)
                        for (int64_t i = 0; i < perChannel; ++i) y.at(c * perChannel + i) += b.at(c);
                }
            }
            if (node.attrBool("hasAddConstant", false)) {
                float c = static_cast<float>(node.attrDouble("biasConstant", 0.0));
                for (int64_t i = 0; i < y.size(); ++i) y.at(i) += c;
            }
            if (node.attrBool("hasRelu", false))
                for (int64_t i = 0; i < y.size(); ++i) y.at(i) = std::max(0.0f, y.at(i));
            if (node.kind == OpKind::Cbrm || node.kind == OpKind::Cbra)
                y = detail::evalPoolCore(y, poolGeometry(node, "pool"), node.kind == OpKind::Cbrm);
            return {y};
        }
        case OpKind::Matmul: {
            Tensor w = param(0);
            int64_t kIn = w.shape().dims[0].extent, n = w.shape().dims[1].extent;
            if (in[0].shape().rank() == 1) {
                Tensor y(vectorShape(Axis::K, n));
                for (int64_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < kIn; ++k)
                        acc += static_cast<double>(in[0].at(k)) * static_cast<double>(w.at2(k, j));
                    y.at(j) = static_cast<float>(acc);
                }
                return {y};
            }
            int64_t m = in[0].shape().dims[0].extent;
            Tensor y(TensorShape({{in[0].shape().dims[0].label, m}, {Axis::K, n}}));
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < kIn; ++k)
                        acc += static_cast<double>(in[0].at2(i, k)) * static_cast<double>(w.at2(k, j));
                    y.at2(i, j) = static_cast<float>(acc);
                }
            return {y};
        }
        case OpKind::FullyConnected: {
            Tensor w = param(0);
            int64_t kIn = w.shape().dims[0].extent, n = w.shape().dims[1].extent;
            Tensor y(vectorShape(Axis::K, n));
            for (int64_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int64_t k = 0; k < kIn; ++k)
                    acc += static_cast<double>(in[0].at(k)) * static_cast<double>(w.at2(k, j));
                y.at(j) = static_cast<float>(acc);
            }
            if (node.params.size() > 1) {
                Tensor b = param(1);
                for (int64_t j = 0; j < n; ++j) y.at(j) += b.at(j);
            }
            return {y};
        }
        case OpKind::Bn: {
            Tensor scale = param(0), shift = param(1);
            Tensor y = in[0];
            int64_t channels = y.shape().dims[0].extent;
            int64_t perChannel = y.size() / channels;
            for (int64_t c = 0; c < channels; ++c)
                for (int64_t i = 0; i < perChannel; ++i) {
                    float& v = y.at(c * perChannel + i);
                    v = static_cast<float>(static_cast<double>(v) * scale.at(c) + shift.at(c));
                }
            return {y};
        }
        case OpKind::Bias: {
            Tensor b = param(0);
            Tensor y = in[0];
            if (b.size() == y.size()) {
                for (int64_t i = 0; i < y.size(); ++i) y.at(i) += b.at(i);
            } else {
                int64_t channels = y.shape().dims[0].extent;
                int64_t perChannel = y.size() / channels;
                for (int64_t c = 0; c < channels; ++c)
                    for (int64_t i = 0; i < perChannel; ++i) y.at(c * perChannel + i) += b.at(c);
            }
            return {y};
        }
        case OpKind::Relu: {
            Tensor y = in[0];
            for (int64_t i = 0; i < y.size(); ++i) y.at(i) = std::max(0.0f, y.at(i));
            return {y};
        }
        case OpKind::Add:
        case OpKind::Mul: {
            Tensor y = in[0];
            bool isAdd = node.kind == OpKind::Add;
            if (node.hasAttr("constant")) {
                float c = static_cast<float>(node.attrDouble("constant", 0.0));
                for (int64_t i = 0; i < y.size(); ++i) y.at(i) = isAdd ? y.at(i) + c : y.at(i) * c;
            } else {
                for (int64_t i = 0; i < y.size(); ++i)
                    y.at(i) = isAdd ? y.at(i) + in[1].at(i) : y.at(i) * in[1].at(i);
            }
            return {y};
        }
        case OpKind::Mac: {
            Tensor y = in[0];
            for (int64_t i = 0; i < y.size(); ++i)
                y.at(i) = static_cast<float>(static_cast<double>(in[0].at(i)) *
                                                 static_cast<double>(in[1].at(i)) +
                                             static_cast<double>(in[2].at(i)));
            return {y};
        }
        case OpKind::MaxPool:
            return {detail::evalPoolCore(in[0], poolGeometry(node), true)};
        case OpKind::AvgPool:
            return {detail::evalPoolCore(in[0], poolGeometry(node), false)};
        case OpKind::GlobalPool: {
            int64_t C = in[0].shape().dims[0].extent;
            int64_t plane = in[0].size() / C;
            Tensor y(featureMapShape(C, 1, 1));
            for (int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int64_t i = 0; i < plane; ++i) acc += in[0].at(c * plane + i);
                y.at(c) = static_cast<float>(acc / plane);
            }
            return {y};
        }
        case OpKind::Transpose: {
            if (node.attrString("mode", "matrix") == "channelShuffle") {
                int64_t g = node.attrInt("groups", 1);
                int64_t C = in[0].shape().dims[0].extent;
                int64_t plane = in[0].size() / C;
                int64_t per = C / g;
                Tensor y(in[0].shape());
                for (int64_t c = 0; c < C; ++c) {
                    int64_t dst = (c % g) * per + c / g;
                    for (int64_t i = 0; i < plane; ++i) y.at(dst * plane + i) = in[0].at(c * plane + i);
                }
                return {y};
            }
            int64_t a = in[0].shape().dims[0].extent, b = in[0].shape().dims[1].extent;
            Tensor y(TensorShape({in[0].shape().dims[1], in[0].shape().dims[0]}));
            for (int64_t i = 0; i < a; ++i)
                for (int64_t j = 0; j < b; ++j) y.at2(j, i) = in[0].at2(i, j);
            return {y};
        }
        case OpKind::Concat: {
            auto shapes = std::vector<TensorShape>();
            for (const auto& t : in) shapes.push_back(t.shape());
            TensorShape outShape = inferOutputShapes(node, shapes)[0];
            int idx = outShape.axisIndex(axisFromName(node.attrString("axis", "C")));
            Tensor y(outShape);
            // outer = product of dims before axis, inner = after
            int64_t outer = 1, inner = 1;
            for (int d = 0; d < idx; ++d) outer *= outShape.dims[static_cast<size_t>(d)].extent;
            for (int d = idx + 1; d < outShape.rank(); ++d)
                inner *= outShape.dims[static_cast<size_t>(d)].extent;
            int64_t outAxis = outShape.dims[static_cast<size_t>(idx)].extent;
            int64_t axisOffset = 0;
            for (const auto& t : in) {
                int64_t tAxis = t.shape().dims[static_cast<size_t>(idx)].extent;
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t a = 0; a < tAxis; ++a)
                        for (int64_t i = 0; i < inner; ++i)
                            y.at((o * outAxis + axisOffset + a) * inner + i) =
                                t.at((o * tAxis + a) * inner + i);
                axisOffset += tAxis;
            }
            return {y};
        }
        case OpKind::Split: {
            TensorShape inShape = in[0].shape();
            int idx = inShape.axisIndex(axisFromName(node.attrString("axis", "C")));
            const auto& sizes = std::get<std::vector<int64_t>>(node.attrs.at("sizes"));
            int64_t outer = 1, inner = 1;
            for (int d = 0; d < idx; ++d) outer *= inShape.dims[static_cast<size_t>(d)].extent;
            for (int d = idx + 1; d < inShape.rank(); ++d)
                inner *= inShape.dims[static_cast<size_t>(d)].extent;
            int64_t inAxis = inShape.dims[static_cast<size_t>(idx)].extent;
            std::vector<Tensor> out;
            int64_t axisOffset = 0;
            for (int64_t s : sizes) {
                TensorShape piece = inShape;
                piece.dims[static_cast<size_t>(idx)].extent = s;
                Tensor t(piece);
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t a = 0; a < s; ++a)
                        for (int64_t i = 0; i < inner; ++i)
                            t.at((o * s + a) * inner + i) =
                                in[0].at((o * inAxis + axisOffset + a) * inner + i);
                out.push_back(std::move(t));
                axisOffset += s;
            }
            return out;
        }
        case OpKind::LstmCell: {
            Tensor wx = param(0), wh = param(1), b = param(2);
            int64_t hidden = wh.shape().dims[1].extent;
            int64_t inDim = wx.shape().dims[1].extent;
            // z = Wx x + Wh h + b, gates [i f g o] stacked along rows
            std::vector<double> z(static_cast<size_t>(4 * hidden), 0.0);
            for (int64_t row = 0; row < 4 * hidden; ++row) {
                double acc = b.at(row);
                for (int64_t k = 0; k < inDim; ++k)
                    acc += static_cast<double>(wx.at2(row, k)) * static_cast<double>(in[0].at(k));
                for (int64_t k = 0; k < hidden; ++k)
                    acc += static_cast<double>(wh.at2(row, k)) * static_cast<double>(in[1].at(k));
                z[static_cast<size_t>(row)] = acc;
            }
            Tensor hOut(vectorShape(Axis::HiddenDim, hidden));
            Tensor cOut(vectorShape(Axis::HiddenDim, hidden));
            for (int64_t j = 0; j < hidden; ++j) {
                double i = detail::sigmoid(z[static_cast<size_t>(j)]);
                double f = detail::sigmoid(z[static_cast<size_t>(hidden + j)]);
                double g = std::tanh(z[static_cast<size_t>(2 * hidden + j)]);
                double o = detail::sigmoid(z[static_cast<size_t>(3 * hidden + j)]);
                double c = f * static_cast<double>(in[2].at(j)) + i * g;
                cOut.at(j) = static_cast<float>(c);
                hOut.at(j) = static_cast<float>(o * std::tanh(c));
            }
            return {hOut, cOut};
        }
        case OpKind::ReduceAdd: {
            Tensor y = in[0];
            for (size_t t = 1; t < in.size(); ++t)
                for (int64_t i = 0; i < y.size(); ++i) y.at(i) += in[t].at(i);
            return {y};
        }
    }
    throw ValidationError("unreachable kind");
}

// Straightforward single-threaded evaluation in topological order.
// The equivalence oracle every optimized plan is checked against.
inline std::map<PortRef, Tensor> executeReferenceAll(const ComputationGraph& graph,
                                                     const std::map<std::string, Tensor>& inputs,
                                                     uint64_t seed) {
    std::map<PortRef, Tensor> tensors;
    for (const auto& gi : graph.inputs) {
        auto it = inputs.find(gi.id);
        if (it == inputs.end()) throw ShapeMismatchError("missing graph input " + gi.id);
        if (it->second.size() != Tensor(gi.shape).size())
            throw ShapeMismatchError("input " + gi.id + " size mismatch");
        tensors[{gi.id, 0}] = it->second;
    }
    for (const auto& id : topologicalOrder(graph)) {
        const OperatorNode& node = graph.node(id);
        std::vector<Tensor> in;
        for (const Edge* e : graph.inEdges(id)) in.push_back(tensors.at(e->from));
        auto out = evalNode(node, in, seed);
        for (size_t port = 0; port < out.size(); ++port)
            tensors[{id, static_cast<int>(port)}] = std::move(out[port]);
    }
    return tensors;
}

inline std::vector<Tensor> executeReference(const ComputationGraph& graph,
                                            const std::map<std::string, Tensor>& inputs,
                                            uint64_t seed) {
    auto all = executeReferenceAll(graph, inputs, seed);
    std::vector<Tensor> out;
    for (const auto& o : graph.outputs) out.push_back(all.at(o));
    return out;
}

inline std::map<std::string, Tensor> makeRandomInputs(const ComputationGraph& graph, uint64_t seed) {
    std::map<std::string, Tensor> inputs;
    for (const auto& gi : graph.inputs) inputs[gi.id] = makeInputTensor(gi, seed);
    return inputs;
}

} // namespace edgeflow
