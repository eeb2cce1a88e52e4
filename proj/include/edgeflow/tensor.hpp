// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "edgeflow/shape.hpp"

namespace edgeflow {

// Dense float32 tensor, row-major in the shape's axis order. Accumulation in
// the interpreter happens in double; storage is always float32.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(TensorShape shape)
        : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.elementCount()), 0.0f) {}

    const TensorShape& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
    float at(int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 3-D accessors for C,H,W feature maps.
    float& at3(int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(offset3(c, h, w))];
    }
    float at3(int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(offset3(c, h, w))];
    }
    int64_t offset3(int64_t c, int64_t h, int64_t w) const {
        int64_t H = shape_.dims[1].extent, W = shape_.dims[2].extent;
        return (c * H + h) * W + w;
    }

    // 4-D accessor for K,C,R,S kernels.
    float at4(int64_t k, int64_t c, int64_t r, int64_t s) const {
        int64_t C = shape_.dims[1].extent, R = shape_.dims[2].extent, S = shape_.dims[3].extent;
        return data_[static_cast<size_t>(((k * C + c) * R + r) * S + s)];
    }
    float& at4(int64_t k, int64_t c, int64_t r, int64_t s) {
        int64_t C = shape_.dims[1].extent, R = shape_.dims[2].extent, S = shape_.dims[3].extent;
        return data_[static_cast<size_t>(((k * C + c) * R + r) * S + s)];
    }

    // 2-D accessor for matrices (axis0 x axis1).
    float at2(int64_t i, int64_t j) const {
        return data_[static_cast<size_t>(i * shape_.dims[1].extent + j)];
    }
    float& at2(int64_t i, int64_t j) {
        return data_[static_cast<size_t>(i * shape_.dims[1].extent + j)];
    }

    bool sameShapeExtents(const Tensor& o) const {
        if (shape_.dims.size() != o.shape_.dims.size()) return false;
        for (size_t i = 0; i < shape_.dims.size(); ++i)
            if (shape_.dims[i].extent != o.shape_.dims[i].extent) return false;
        return true;
    }

private:
    TensorShape shape_;
    std::vector<float> data_;
};

inline double maxAbsDiff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    if (a.size() != b.size()) return HUGE_VAL;
    for (int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.at(i)) - static_cast<double>(b.at(i))));
    return m;
}

// Order-stable content checksum for golden-value tests and run artifacts.
inline uint64_t tensorChecksum(const Tensor& t) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int64_t i = 0; i < t.size(); ++i) {
        uint32_t bits;
        float v = t.at(i);
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        h ^= bits;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace edgeflow
