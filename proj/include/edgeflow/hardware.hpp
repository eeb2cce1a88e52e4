// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "edgeflow/errors.hpp"

namespace edgeflow {

// Simulated device model: P identical units, each with private L2 for
// parameters, plus shared on-chip memory and external DDR for feature maps.
struct HardwareDescriptor {
    int unitCount = 8;
    int64_t l2Bytes = 512 * 1024;
    int64_t sharedBytes = 4 * 1024 * 1024;
    int64_t ddrBytes = 512ll * 1024 * 1024;
    int64_t cacheLineBytes = 64;
    int64_t cacheSets = 256;
    int64_t cacheWays = 4;
    int64_t latL2 = 2;
    int64_t latShared = 12;
    int64_t latDdr = 120;
    int64_t macPerCycle = 8;

    void validate() const {
        if (unitCount < 1) throw ValidationError("unit_count must be >= 1");
        if (l2Bytes <= 0 || sharedBytes <= 0 || ddrBytes <= 0)
            throw ValidationError("memory sizes must be positive");
        if (!(l2Bytes < sharedBytes && sharedBytes < ddrBytes))
            throw ValidationError("expected l2_bytes < shared_bytes < ddr_bytes");
        if (cacheLineBytes <= 0 || (cacheLineBytes & (cacheLineBytes - 1)) != 0)
            throw ValidationError("cache_line_bytes must be a power of two");
        if (cacheSets < 1 || cacheWays < 1) throw ValidationError("cache geometry must be positive");
        if (latL2 < 0 || latShared < 0 || latDdr < 0) throw ValidationError("latencies must be >= 0");
        if (macPerCycle < 1) throw ValidationError("mac_per_cycle must be >= 1");
    }
};

enum class Topology : uint8_t { Ring, Star };

inline const char* topologyName(Topology t) { return t == Topology::Ring ? "ring" : "star"; }

inline Topology topologyFromName(const std::string& s) {
    if (s == "ring") return Topology::Ring;
    if (s == "star") return Topology::Star;
    throw ParseError("unknown topology: " + s);
}

enum class SyncMethod : uint8_t { RingAllReduce, ParameterServer };

inline const char* syncMethodName(SyncMethod m) {
    return m == SyncMethod::RingAllReduce ? "ring" : "ps";
}

inline SyncMethod syncMethodFromName(const std::string& s) {
    if (s == "ring") return SyncMethod::RingAllReduce;
    if (s == "ps") return SyncMethod::ParameterServer;
    throw ParseError("unknown sync method: " + s);
}

// Homogeneous multi-device cluster for distributed planning.
struct ClusterDescriptor {
    int deviceCount = 2;
    HardwareDescriptor device;
    double bandwidthBytesPerCycle = 64.0;
    Topology topology = Topology::Ring;
    SyncMethod sync = SyncMethod::RingAllReduce;

    void validate() const {
        if (deviceCount < 1) throw ValidationError("device_count must be >= 1");
        if (bandwidthBytesPerCycle <= 0) throw ValidationError("bandwidth must be positive");
        device.validate();
    }
};

} // namespace edgeflow
