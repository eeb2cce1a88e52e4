// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/errors.hpp"

namespace edgeflow {

// Shared-memory pool group: chunks pre-sized to typical layer footprints,
// recycled producer-consumer style, small requests batched into one chunk.
// A pool instance is single-owner; the simulator serializes events on the
// plan timeline.
class MemoryPoolGroup {
public:
    static constexpr int64_t kSmallThreshold = 4 * 1024;
    static constexpr int64_t kBatchAlignment = 64; // one cache line

    struct Chunk {
        int id = 0;
        int64_t sizeBytes = 0;
        int64_t baseAddr = 0;
        bool inUse = false;
    };

    struct Stats {
        int64_t peakBytesReserved = 0;
        int64_t liveBytesAtPeak = 0;
        int64_t reuseHits = 0;
        int64_t freshAllocations = 0;
        int64_t batchedCount = 0;
    };

    // Size classes: 4 KB granularity below 64 KB, next power of two above.
    static int64_t roundSize(int64_t bytes) {
        if (bytes <= 0) throw ValidationError("allocation request must be positive");
        constexpr int64_t kGranule = 4 * 1024;
        constexpr int64_t kPow2Floor = 64 * 1024;
        if (bytes <= kPow2Floor) return (bytes + kGranule - 1) / kGranule * kGranule;
        int64_t p = kPow2Floor;
        while (p < bytes) p <<= 1;
        return p;
    }

    MemoryPoolGroup() = default;
    explicit MemoryPoolGroup(int64_t capacityBytes) : capacity_(capacityBytes) {}

    // One free chunk per distinct rounded layer size.
    static MemoryPoolGroup warmPool(const std::vector<int64_t>& layerSizes, int64_t capacityBytes) {
        MemoryPoolGroup pool(capacityBytes);
        std::map<int64_t, bool> distinct;
        for (int64_t s : layerSizes) distinct[roundSize(s)] = true;
        int64_t total = 0;
        for (const auto& [size, _] : distinct) total += size;
        if (total > capacityBytes)
            throw CapacityExceededError("warm pool classes exceed shared capacity");
        for (const auto& [size, _] : distinct) {
            int id = pool.carve(size);
            pool.chunks_[static_cast<size_t>(id)].inUse = false;
            pool.liveBytes_ -= size;
            pool.freeByClass_[size].push_back(id);
        }
        pool.stats_.liveBytesAtPeak = 0;
        return pool;
    }

    // Smallest free chunk with capacity >= request, else a fresh carve.
    int allocate(int64_t requestBytes) {
        if (requestBytes <= 0) throw ValidationError("allocation request must be positive");
        auto it = freeByClass_.lower_bound(requestBytes);
        while (it != freeByClass_.end() && it->second.empty()) ++it;
        if (it != freeByClass_.end()) {
            int id = it->second.back();
            it->second.pop_back();
            chunks_[static_cast<size_t>(id)].inUse = true;
            liveBytes_ += it->first;
            ++stats_.reuseHits;
            return id;
        }
        int64_t rounded = roundSize(requestBytes);
        if (reserved_ + rounded > capacity_)
            throw OutOfSharedMemoryError("allocation of " + std::to_string(requestBytes) +
                                         " bytes exceeds shared memory");
        int id = carve(rounded);
        ++stats_.freshAllocations;
        return id;
    }

    void release(int chunkId) {
        if (chunkId < 0 || chunkId >= static_cast<int>(chunks_.size()))
            throw DoubleFreeError("release of unknown chunk " + std::to_string(chunkId));
        Chunk& c = chunks_[static_cast<size_t>(chunkId)];
        if (!c.inUse) throw DoubleFreeError("release of free chunk " + std::to_string(chunkId));
        c.inUse = false;
        liveBytes_ -= c.sizeBytes;
        freeByClass_[c.sizeBytes].push_back(chunkId);
    }

    // Packs small requests contiguously (cache-line aligned) into one chunk.
    std::pair<int, std::vector<int64_t>> batchAllocate(const std::vector<int64_t>& requests) {
        if (requests.empty()) throw ValidationError("batchAllocate needs at least one request");
        std::vector<int64_t> offsets;
        int64_t cursor = 0;
        for (int64_t r : requests) {
            if (r <= 0 || r > kSmallThreshold)
                throw ValidationError("batchAllocate request outside (0, smallThreshold]");
            offsets.push_back(cursor);
            cursor += (r + kBatchAlignment - 1) / kBatchAlignment * kBatchAlignment;
        }
        int id = allocate(cursor);
        // the batch counts once per member; the chunk allocation above counted
        // once as a hit or fresh carve
        stats_.batchedCount += static_cast<int64_t>(requests.size());
        return {id, offsets};
    }

    const Chunk& chunk(int id) const { return chunks_.at(static_cast<size_t>(id)); }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Stats& stats() const { return stats_; }
    int64_t reservedBytes() const { return reserved_; }
    int64_t liveBytes() const { return liveBytes_; }
    int64_t capacityBytes() const { return capacity_; }

    int64_t freeBytes() const {
        int64_t f = 0;
        for (const auto& [size, ids] : freeByClass_) f += size * static_cast<int64_t>(ids.size());
        return f;
    }

    int classCount() const {
        std::map<int64_t, int> sizes;
        for (const auto& c : chunks_) sizes[c.sizeBytes]++;
        return static_cast<int>(sizes.size());
    }

private:
    int carve(int64_t rounded) {
        if (reserved_ + rounded > capacity_)
            throw OutOfSharedMemoryError("pool capacity exceeded");
        Chunk c;
        c.id = static_cast<int>(chunks_.size());
        c.sizeBytes = rounded;
        c.baseAddr = reserved_;
        c.inUse = true;
        reserved_ += rounded;
        liveBytes_ += rounded;
        chunks_.push_back(c);
        if (reserved_ > stats_.peakBytesReserved) {
            stats_.peakBytesReserved = reserved_;
            stats_.liveBytesAtPeak = liveBytes_;
        }
        return c.id;
    }

    int64_t capacity_ = 0;
    int64_t reserved_ = 0;
    int64_t liveBytes_ = 0;
    std::vector<Chunk> chunks_;
    std::map<int64_t, std::vector<int>> freeByClass_;
    Stats stats_;
};

using PoolStats = MemoryPoolGroup::Stats;

inline nlohmann::json poolStatsToJson(const PoolStats& s) {
    return {{"peak_bytes", s.peakBytesReserved},
            {"live_at_peak", s.liveBytesAtPeak},
            {"reuse_hits", s.reuseHits},
            {"fresh_allocs", s.freshAllocations},
            {"batched", s.batchedCount}};
}

} // namespace edgeflow
