// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "edgeflow/hardware.hpp"

namespace edgeflow {

struct CacheGeometry {
    int64_t lineBytes = 64;
    int64_t sets = 256;
    int64_t ways = 4;

    static CacheGeometry fromHardware(const HardwareDescriptor& hw) {
        return {hw.cacheLineBytes, hw.cacheSets, hw.cacheWays};
    }
};

// Set-associative LRU cache over byte offsets; per-unit view of the shared
// feature-map space. First-touch misses are compulsory, the rest capacity or
// conflict.
class CacheState {
public:
    struct Counters {
        int64_t hits = 0;
        int64_t compulsoryMisses = 0;
        int64_t capacityConflictMisses = 0;
        int64_t misses() const { return compulsoryMisses + capacityConflictMisses; }
        int64_t accesses() const { return hits + misses(); }
    };

    explicit CacheState(CacheGeometry g = {})
        : geom_(g), tags_(static_cast<size_t>(g.sets * g.ways), -1),
          stamps_(static_cast<size_t>(g.sets * g.ways), 0) {}

    void access(int64_t byteOffset) {
        int64_t line = byteOffset / geom_.lineBytes;
        int64_t set = line % geom_.sets;
        size_t base = static_cast<size_t>(set * geom_.ways);
        ++clock_;
        for (int64_t w = 0; w < geom_.ways; ++w) {
            if (tags_[base + static_cast<size_t>(w)] == line) {
                stamps_[base + static_cast<size_t>(w)] = clock_;
                ++counters_.hits;
                return;
            }
        }
        if (seen_.insert(line).second)
            ++counters_.compulsoryMisses;
        else
            ++counters_.capacityConflictMisses;
        // evict LRU way
        size_t victim = base;
        for (int64_t w = 1; w < geom_.ways; ++w)
            if (stamps_[base + static_cast<size_t>(w)] < stamps_[victim])
                victim = base + static_cast<size_t>(w);
        tags_[victim] = line;
        stamps_[victim] = clock_;
    }

    const Counters& counters() const { return counters_; }
    const CacheGeometry& geometry() const { return geom_; }

private:
    CacheGeometry geom_;
    std::vector<int64_t> tags_;
    std::vector<uint64_t> stamps_;
    std::unordered_set<int64_t> seen_;
    uint64_t clock_ = 0;
    Counters counters_;
};

inline CacheState::Counters simulateCacheTrace(const std::vector<int64_t>& byteOffsets,
                                               CacheGeometry geometry) {
    CacheState cache(geometry);
    for (int64_t off : byteOffsets) cache.access(off);
    return cache.counters();
}

} // namespace edgeflow
