// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/graph.hpp"
#include "edgeflow/tensor.hpp"

namespace edgeflow {

// Canonical read orders of the linkable operators, expressed over the
// producer's output map (C x H x W):
//   Identity         - row-major single pass (matmul row panels, elementwise)
//   ChannelInnermost - per pixel, all channels (1x1 convolution)
//   TileZigzag       - per pooling tile, pixels row-major in the tile,
//                      channels innermost per pixel
//   RowStrip         - per output-row strip, its kernel rows in full,
//                      channels innermost; rows shared by adjacent strips
//                      are visited once per strip (sliding window)
enum class PatternKind : uint8_t { Identity, ChannelInnermost, TileZigzag, RowStrip };

inline const char* patternKindName(PatternKind k) {
    switch (k) {
        case PatternKind::Identity: return "identity";
        case PatternKind::ChannelInnermost: return "channelInnermost";
        case PatternKind::TileZigzag: return "tileZigzag";
        case PatternKind::RowStrip: return "rowStrip";
    }
    return "?";
}

inline PatternKind patternKindFromName(const std::string& s) {
    if (s == "identity") return PatternKind::Identity;
    if (s == "channelInnermost") return PatternKind::ChannelInnermost;
    if (s == "tileZigzag") return PatternKind::TileZigzag;
    if (s == "rowStrip") return PatternKind::RowStrip;
    throw ParseError("unknown pattern kind: " + s);
}

struct AccessPattern {
    std::string nodeId; // consumer
    PatternKind kind = PatternKind::Identity;
    int64_t C = 1, H = 1, W = 1; // logical input map
    int64_t tileH = 1, tileW = 1; // pool tile or strip kernel rows
    int64_t strideH = 1, strideW = 1;
    int64_t replicationRows = 0; // rows revisited per strip boundary

    int64_t elementCount() const { return C * H * W; }
};

// Visits every coordinate the consumer reads, in read order.
template <class F>
inline void forEachVisit(const AccessPattern& p, F&& fn) {
    switch (p.kind) {
        case PatternKind::Identity:
            for (int64_t c = 0; c < p.C; ++c)
                for (int64_t h = 0; h < p.H; ++h)
                    for (int64_t w = 0; w < p.W; ++w) fn(c, h, w);
            return;
        case PatternKind::ChannelInnermost: {
            int64_t outH = (p.H - 1) / p.strideH + 1;
            int64_t outW = (p.W - 1) / p.strideW + 1;
            for (int64_t oh = 0; oh < outH; ++oh)
                for (int64_t ow = 0; ow < outW; ++ow)
                    for (int64_t c = 0; c < p.C; ++c) fn(c, oh * p.strideH, ow * p.strideW);
            return;
        }
        case PatternKind::TileZigzag: {
            int64_t tilesH = detail::poolOutExtent(p.H, p.tileH, p.strideH, true);
            int64_t tilesW = detail::poolOutExtent(p.W, p.tileW, p.strideW, true);
            for (int64_t tr = 0; tr < tilesH; ++tr)
                for (int64_t tc = 0; tc < tilesW; ++tc) {
                    int64_t h0 = tr * p.strideH, w0 = tc * p.strideW;
                    int64_t h1 = std::min(h0 + p.tileH, p.H), w1 = std::min(w0 + p.tileW, p.W);
                    for (int64_t h = h0; h < h1; ++h)
                        for (int64_t w = w0; w < w1; ++w)
                            for (int64_t c = 0; c < p.C; ++c) fn(c, h, w);
                }
            return;
        }
        case PatternKind::RowStrip: {
            int64_t strips = detail::poolOutExtent(p.H, p.tileH, p.strideH, false);
            if (p.tileH >= p.H) strips = 1;
            for (int64_t o = 0; o < strips; ++o) {
                int64_t h0 = o * p.strideH;
                int64_t h1 = std::min(h0 + p.tileH, p.H);
                for (int64_t h = h0; h < h1; ++h)
                    for (int64_t w = 0; w < p.W; ++w)
                        for (int64_t c = 0; c < p.C; ++c) fn(c, h, w);
            }
            return;
        }
    }
}

namespace detail {

inline void patternGeometry(const TensorShape& input, AccessPattern& p) {
    if (input.rank() == 3) {
        p.C = input.dims[0].extent;
        p.H = input.dims[1].extent;
        p.W = input.dims[2].extent;
    } else if (input.rank() == 2) {
        p.C = 1;
        p.H = input.dims[0].extent;
        p.W = input.dims[1].extent;
    } else {
        p.C = 1;
        p.H = 1;
        p.W = input.elementCount();
    }
}

} // namespace detail

// Canonical read order of a consumer over its (primary) input.
// Throws UnsupportedPatternError for kinds outside the linkable catalog.
inline AccessPattern deriveAccessPattern(const OperatorNode& consumer, const TensorShape& input) {
    AccessPattern p;
    p.nodeId = consumer.id;
    detail::patternGeometry(input, p);
    switch (consumer.kind) {
        case OpKind::Conv:
        case OpKind::Cbr:
        case OpKind::Cbrm:
        case OpKind::Cbra: {
            if (consumer.kind == OpKind::Cbr && consumer.attrString("root", "conv") == "matmul") {
                p.kind = PatternKind::Identity;
                return p;
            }
            ConvGeometry g = convGeometry(consumer);
            if (g.fullKernelH == 1 && g.fullKernelW == 1) {
                p.kind = PatternKind::ChannelInnermost;
                p.strideH = g.strideH;
                p.strideW = g.strideW;
            } else {
                p.kind = PatternKind::RowStrip;
                p.tileH = g.fullKernelH;
                p.strideH = g.strideH;
                p.replicationRows = std::max<int64_t>(0, g.fullKernelH - g.strideH);
            }
            return p;
        }
        case OpKind::MaxPool:
        case OpKind::AvgPool: {
            PoolGeometry g = poolGeometry(consumer);
            if (g.strideH == g.windowH && g.strideW == g.windowW) {
                p.kind = PatternKind::TileZigzag;
                p.tileH = g.windowH;
                p.tileW = g.windowW;
                p.strideH = g.strideH;
                p.strideW = g.strideW;
            } else {
                p.kind = PatternKind::RowStrip;
                p.tileH = g.windowH;
                p.strideH = g.strideH;
                p.replicationRows = std::max<int64_t>(0, g.windowH - g.strideH);
            }
            return p;
        }
        case OpKind::GlobalPool:
        case OpKind::Matmul:
        case OpKind::FullyConnected:
        case OpKind::Add:
        case OpKind::Mul:
        case OpKind::Mac:
        case OpKind::Bn:
        case OpKind::Bias:
        case OpKind::Relu:
        case OpKind::ReduceAdd:
            p.kind = PatternKind::Identity;
            return p;
        default:
            throw UnsupportedPatternError("no catalog access pattern for kind " +
                                          std::string(opKindName(consumer.kind)));
    }
}

// Non-throwing variant for the simulator: anything uncataloged streams
// row-major.
inline AccessPattern accessPatternOrIdentity(const OperatorNode& consumer,
                                             const TensorShape& input) {
    try {
        return deriveAccessPattern(consumer, input);
    } catch (const UnsupportedPatternError&) {
        AccessPattern p;
        p.nodeId = consumer.id;
        detail::patternGeometry(input, p);
        return p;
    }
}

// The producer-side result: buffer offsets in consumer visit order. When
// replication is zero the map is a bijection onto [0, elementCount);
// coordinates the consumer never reads are appended after the visited ones in
// row-major order so the buffer still holds the whole tensor.
struct LayoutDescriptor {
    std::string producerId;
    std::string consumerId;
    AccessPattern pattern; // formula id + params
    int64_t elementCount = 0;
    int64_t bufferElements = 0;
    int64_t readElements = 0; // prefix the consumer actually reads
    bool isIdentity = true;

    std::vector<int64_t> visitToLogical;      // buffer offset -> logical flat
    std::vector<int64_t> logicalToFirstOffset; // logical flat -> first buffer offset

    int64_t bufferBytes() const { return bufferElements * 4; }
    int64_t readBytes() const { return readElements * 4; }
    int64_t elementBytes() const { return elementCount * 4; }
};

// Builds the layout the producer writes so the consumer reads sequentially.
inline LayoutDescriptor buildLayout(const std::string& producerId, const TensorShape& producerOut,
                                    const AccessPattern& pattern) {
    AccessPattern check = pattern;
    LayoutDescriptor ld;
    detail::patternGeometry(producerOut, check);
    if (check.C != pattern.C || check.H != pattern.H || check.W != pattern.W)
        throw ShapeMismatchError("producer " + producerId + " output " + producerOut.toString() +
                                 " does not match the consumer pattern geometry");
    ld.producerId = producerId;
    ld.consumerId = pattern.nodeId;
    ld.pattern = pattern;
    ld.elementCount = pattern.elementCount();
    ld.logicalToFirstOffset.assign(static_cast<size_t>(ld.elementCount), -1);
    ld.visitToLogical.reserve(static_cast<size_t>(ld.elementCount));
    const int64_t HW = pattern.H * pattern.W;
    forEachVisit(pattern, [&](int64_t c, int64_t h, int64_t w) {
        int64_t logical = c * HW + h * pattern.W + w;
        if (ld.logicalToFirstOffset[static_cast<size_t>(logical)] < 0)
            ld.logicalToFirstOffset[static_cast<size_t>(logical)] =
                static_cast<int64_t>(ld.visitToLogical.size());
        ld.visitToLogical.push_back(logical);
    });
    ld.readElements = static_cast<int64_t>(ld.visitToLogical.size());
    // unread coordinates keep their data at the tail
    for (int64_t logical = 0; logical < ld.elementCount; ++logical)
        if (ld.logicalToFirstOffset[static_cast<size_t>(logical)] < 0) {
            ld.logicalToFirstOffset[static_cast<size_t>(logical)] =
                static_cast<int64_t>(ld.visitToLogical.size());
            ld.visitToLogical.push_back(logical);
        }
    ld.bufferElements = static_cast<int64_t>(ld.visitToLogical.size());
    ld.isIdentity = true;
    for (int64_t i = 0; i < ld.bufferElements; ++i)
        if (ld.visitToLogical[static_cast<size_t>(i)] != i) {
            ld.isIdentity = false;
            break;
        }
    return ld;
}

inline LayoutDescriptor buildLayout(const OperatorNode& producer, const TensorShape& producerOut,
                                    const AccessPattern& pattern) {
    return buildLayout(producer.id, producerOut, pattern);
}

// b[indexMap(x)] = tensor[x]; replicated coordinates are duplicated.
inline std::vector<float> applyLayout(const Tensor& tensor, const LayoutDescriptor& layout) {
    if (tensor.size() != layout.elementCount)
        throw ShapeMismatchError("tensor does not match layout element count");
    std::vector<float> buffer(static_cast<size_t>(layout.bufferElements));
    for (int64_t i = 0; i < layout.bufferElements; ++i)
        buffer[static_cast<size_t>(i)] = tensor.at(layout.visitToLogical[static_cast<size_t>(i)]);
    return buffer;
}

// Recovers the logical tensor from a restructured buffer.
inline Tensor inverseRead(const std::vector<float>& buffer, const LayoutDescriptor& layout,
                          const TensorShape& shape) {
    Tensor t(shape);
    if (t.size() != layout.elementCount)
        throw ShapeMismatchError("shape does not match layout element count");
    for (int64_t logical = 0; logical < layout.elementCount; ++logical)
        t.at(logical) =
            buffer[static_cast<size_t>(layout.logicalToFirstOffset[static_cast<size_t>(logical)])];
    return t;
}

// Closed-form offset for the divisible zigzag case (pool tiles aligned,
// stride == tile): offset(c,h,w) = tile*(tileH*tileW*C) + zig*C + c.
inline int64_t zigzagClosedForm(const AccessPattern& p, int64_t c, int64_t h, int64_t w) {
    int64_t tilesW = p.W / p.tileW;
    int64_t tile = (h / p.tileH) * tilesW + (w / p.tileW);
    int64_t zig = (h % p.tileH) * p.tileW + (w % p.tileW);
    return tile * (p.tileH * p.tileW * p.C) + zig * p.C + c;
}

// Byte-offset trace of the consumer reading its input. With a layout the
// reads are sequential over the restructured buffer; without, each visit
// lands at its row-major address.
inline std::vector<int64_t> consumerTraceRestructured(const LayoutDescriptor& layout) {
    std::vector<int64_t> trace;
    trace.reserve(static_cast<size_t>(layout.readElements));
    for (int64_t i = 0; i < layout.readElements; ++i) trace.push_back(i * 4);
    return trace;
}

inline std::vector<int64_t> consumerTraceRowMajor(const AccessPattern& pattern) {
    std::vector<int64_t> trace;
    const int64_t HW = pattern.H * pattern.W;
    forEachVisit(pattern, [&](int64_t c, int64_t h, int64_t w) {
        trace.push_back((c * HW + h * pattern.W + w) * 4);
    });
    return trace;
}

inline nlohmann::json layoutToJson(const LayoutDescriptor& ld) {
    return {{"producer", ld.producerId},
            {"consumer", ld.consumerId},
            {"kind", patternKindName(ld.pattern.kind)},
            {"params",
             {{"C", ld.pattern.C},
              {"H", ld.pattern.H},
              {"W", ld.pattern.W},
              {"tileH", ld.pattern.tileH},
              {"tileW", ld.pattern.tileW},
              {"strideH", ld.pattern.strideH},
              {"strideW", ld.pattern.strideW},
              {"replication_rows", ld.pattern.replicationRows}}},
            {"buffer_bytes", ld.bufferBytes()},
            {"identity", ld.isIdentity}};
}

inline LayoutDescriptor layoutFromJson(const nlohmann::json& j) {
    AccessPattern p;
    p.nodeId = j.at("consumer").get<std::string>();
    p.kind = patternKindFromName(j.at("kind").get<std::string>());
    const auto& params = j.at("params");
    p.C = params.at("C").get<int64_t>();
    p.H = params.at("H").get<int64_t>();
    p.W = params.at("W").get<int64_t>();
    p.tileH = params.at("tileH").get<int64_t>();
    p.tileW = params.at("tileW").get<int64_t>();
    p.strideH = params.at("strideH").get<int64_t>();
    p.strideW = params.at("strideW").get<int64_t>();
    p.replicationRows = params.at("replication_rows").get<int64_t>();
    LayoutDescriptor ld = buildLayout(j.at("producer").get<std::string>(),
                                      featureMapShape(p.C, p.H, p.W), p);
    return ld;
}

} // namespace edgeflow
