// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeflow/errors.hpp"

namespace edgeflow {

// Semantic axis labels. Partition and split passes address dimensions by
// name (outC is K, kernel height is R, ...), never by position.
enum class Axis : uint8_t { N, C, H, W, K, R, S, HiddenDim, SeqLen };

inline const char* axisName(Axis a) {
    switch (a) {
        case Axis::N: return "N";
        case Axis::C: return "C";
        case Axis::H: return "H";
        case Axis::W: return "W";
        case Axis::K: return "K";
        case Axis::R: return "R";
        case Axis::S: return "S";
        case Axis::HiddenDim: return "hiddenDim";
        case Axis::SeqLen: return "seqLen";
    }
    return "?";
}

inline Axis axisFromName(const std::string& s) {
    if (s == "N") return Axis::N;
    if (s == "C") return Axis::C;
    if (s == "H") return Axis::H;
    if (s == "W") return Axis::W;
    if (s == "K") return Axis::K;
    if (s == "R") return Axis::R;
    if (s == "S") return Axis::S;
    if (s == "hiddenDim") return Axis::HiddenDim;
    if (s == "seqLen") return Axis::SeqLen;
    throw ParseError("unknown axis label: " + s);
}

enum class ElementType : uint8_t { Float32, Int8 };

inline int elementWidth(ElementType t) { return t == ElementType::Float32 ? 4 : 1; }

inline const char* elementTypeName(ElementType t) {
    return t == ElementType::Float32 ? "float32" : "int8";
}

inline ElementType elementTypeFromName(const std::string& s) {
    if (s == "float32") return ElementType::Float32;
    if (s == "int8") return ElementType::Int8;
    throw ParseError("unknown element type: " + s);
}

struct Dim {
    Axis label;
    int64_t extent = 1;

    bool operator==(const Dim&) const = default;
};

// An ordered list of labeled extents plus an element type. Labels are unique
// within one shape; every extent is >= 1; byte size must fit in 64 bits.
struct TensorShape {
    std::vector<Dim> dims;
    ElementType elementType = ElementType::Float32;

    TensorShape() = default;
    TensorShape(std::vector<Dim> d, ElementType t = ElementType::Float32)
        : dims(std::move(d)), elementType(t) {
        validate();
    }

    bool operator==(const TensorShape&) const = default;

    void validate() const {
        uint32_t seen = 0;
        for (const auto& d : dims) {
            if (d.extent < 1)
                throw ValidationError("axis " + std::string(axisName(d.label)) +
                                      " has non-positive extent");
            uint32_t bit = 1u << static_cast<int>(d.label);
            if (seen & bit)
                throw ValidationError("duplicate axis label " + std::string(axisName(d.label)));
            seen |= bit;
        }
        (void)byteSize(); // overflow check
    }

    int rank() const { return static_cast<int>(dims.size()); }

    bool hasAxis(Axis a) const {
        for (const auto& d : dims)
            if (d.label == a) return true;
        return false;
    }

    int axisIndex(Axis a) const {
        for (size_t i = 0; i < dims.size(); ++i)
            if (dims[i].label == a) return static_cast<int>(i);
        throw ValidationError("shape has no axis " + std::string(axisName(a)));
    }

    int64_t extent(Axis a) const { return dims[static_cast<size_t>(axisIndex(a))].extent; }

    int64_t extentOr(Axis a, int64_t fallback) const {
        for (const auto& d : dims)
            if (d.label == a) return d.extent;
        return fallback;
    }

    int64_t elementCount() const {
        int64_t n = 1;
        for (const auto& d : dims) {
            if (d.extent != 0 && n > INT64_MAX / d.extent)
                throw ValidationError("tensor element count overflows 64-bit arithmetic");
            n *= d.extent;
        }
        return n;
    }

    int64_t byteSize() const {
        int64_t n = elementCount();
        int w = elementWidth(elementType);
        if (n > INT64_MAX / w)
            throw ValidationError("tensor byte size overflows 64-bit arithmetic");
        return n * w;
    }

    std::string toString() const {
        std::string s;
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += "x";
            s += axisName(dims[i].label);
            s += std::to_string(dims[i].extent);
        }
        s += ":";
        s += elementTypeName(elementType);
        return s;
    }
};

inline TensorShape featureMapShape(int64_t c, int64_t h, int64_t w) {
    return TensorShape({{Axis::C, c}, {Axis::H, h}, {Axis::W, w}});
}

inline TensorShape kernelShape(int64_t k, int64_t c, int64_t r, int64_t s) {
    return TensorShape({{Axis::K, k}, {Axis::C, c}, {Axis::R, r}, {Axis::S, s}});
}

inline TensorShape vectorShape(Axis a, int64_t n) { return TensorShape({{a, n}}); }

} // namespace edgeflow
