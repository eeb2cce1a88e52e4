// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "edgeflow/partition.hpp"
#include "edgeflow/rng.hpp"
#include "edgeflow/zoo.hpp"

using namespace edgeflow;

namespace {

// Brute-force exact-once oracle: every output element must be owned by
// exactly one unit.
bool coversExactlyOnce(const PartitionScheme& s) {
    std::vector<uint8_t> owned(static_cast<size_t>(s.domain.elements()), 0);
    for (const auto& regions : s.perUnit)
        for (const auto& r : regions)
            for (int64_t k = r.kLo; k < r.kHi; ++k)
                for (int64_t h = r.hLo; h < r.hHi; ++h)
                    for (int64_t w = r.wLo; w < r.wHi; ++w) {
                        size_t idx = static_cast<size_t>((k * s.domain.outH + h) * s.domain.outW + w);
                        if (owned[idx]) return false;
                        owned[idx] = 1;
                    }
    for (uint8_t o : owned)
        if (!o) return false;
    return true;
}

int64_t bruteForceUnitElements(const PartitionScheme& s, int unit) {
    int64_t n = 0;
    for (const auto& r : s.perUnit[static_cast<size_t>(unit)]) n += r.elements();
    return n;
}

} // namespace

TEST_CASE("evenly divisible channels: one slice per unit, no remainder phases") {
    WorkDomain d{1024, 7, 7, 1.0};
    PartitionScheme s = partitionWorkload("n", d, 8, 1);
    CHECK(s.sliceByC == 128);
    for (int u = 0; u < 8; ++u) {
        REQUIRE(s.perUnit[static_cast<size_t>(u)].size() == 1);
        const FmRegion& r = s.perUnit[static_cast<size_t>(u)][0];
        CHECK(r.kHi - r.kLo == 128);
        CHECK(r.hLo == 0);
        CHECK(r.hHi == 7);
        CHECK(r.phase == 1);
    }
    CHECK(s.remainderAssignments.empty());
    CHECK(coversExactlyOnce(s));
    CHECK(loadImbalance(s) == 0.0);
}

TEST_CASE("outC=10, P=8: kernel remainder flows to the row phase") {
    WorkDomain d{10, 16, 16, 1.0};
    PartitionScheme s = partitionWorkload("n", d, 8, 5);
    CHECK(s.sliceByC == 1);
    CHECK(s.sliceByH == 2); // 16 rows over 8 units for the 2 leftover kernels
    CHECK(s.sliceByW == 0); // no row remainder, width phase skipped
    CHECK(s.remainderAssignments.empty());
    for (int u = 0; u < 8; ++u) {
        REQUIRE(s.perUnit[static_cast<size_t>(u)].size() == 2);
        CHECK(s.perUnit[static_cast<size_t>(u)][1].phase == 2);
        CHECK(s.perUnit[static_cast<size_t>(u)][1].kLo == 8);
        CHECK(s.perUnit[static_cast<size_t>(u)][1].kHi == 10);
    }
    CHECK(coversExactlyOnce(s));
    // every unit: 1 kernel x 256 + 2 kernels x 2 rows x 16 = 320 elements
    for (int u = 0; u < 8; ++u) CHECK(bruteForceUnitElements(s, u) == 320);
    CHECK(loadImbalance(s) == 0.0);
}

TEST_CASE("outC=8, P=8: phases 2-4 are no-ops") {
    WorkDomain d{8, 5, 5, 1.0};
    PartitionScheme s = partitionWorkload("n", d, 8, 9);
    CHECK(s.sliceByC == 1);
    CHECK(s.sliceByH == 0);
    CHECK(s.sliceByW == 0);
    CHECK(s.remainderAssignments.empty());
    for (int u = 0; u < 8; ++u) CHECK(s.perUnit[static_cast<size_t>(u)].size() == 1);
    CHECK(coversExactlyOnce(s));
}

TEST_CASE("P=1 puts the whole workload on unit 0") {
    WorkDomain d{3, 9, 11, 2.0};
    PartitionScheme s = partitionWorkload("n", d, 1, 2);
    CHECK(bruteForceUnitElements(s, 0) == d.elements());
    CHECK(coversExactlyOnce(s));
    CHECK(loadImbalance(s) == 0.0);
}

TEST_CASE("small extents flow through to the random phase on distinct units") {
    // outC < P, outH < P, outW < P: whole map ends up column-scattered
    WorkDomain d{3, 5, 6, 1.0};
    PartitionScheme s = partitionWorkload("n", d, 8, 77);
    CHECK(coversExactlyOnce(s));
    CHECK(s.remainderAssignments.size() == 6);
    std::set<int> units;
    for (const auto& [col, unit] : s.remainderAssignments) units.insert(unit);
    CHECK(units.size() == s.remainderAssignments.size()); // distinct units
}

TEST_CASE("randomized exact-once coverage with bounded imbalance") {
    Rng rng(20260810);
    for (int trial = 0; trial < 300; ++trial) {
        WorkDomain d;
        d.outC = 1 + static_cast<int64_t>(rng.below(64));
        d.outH = 1 + static_cast<int64_t>(rng.below(32));
        d.outW = 1 + static_cast<int64_t>(rng.below(32));
        d.macsPerElement = 1.0;
        int P = 1 + static_cast<int>(rng.below(16));
        uint64_t seed = rng.next();
        PartitionScheme s = partitionWorkload("n", d, P, seed);
        REQUIRE(coversExactlyOnce(s));
        // imbalance bounded by one remainder column's work whenever the
        // extents can feed every unit
        if (d.outC >= P && d.outH >= P && d.outW >= P) {
            int64_t maxE = 0, minE = INT64_MAX;
            for (int u = 0; u < P; ++u) {
                int64_t e = bruteForceUnitElements(s, u);
                maxE = std::max(maxE, e);
                minE = std::min(minE, e);
            }
            int64_t kRem = d.outC - (d.outC / P) * P;
            int64_t hRem = d.outH - (d.outH / P) * P;
            int64_t columnWork = kRem * hRem; // one random-phase column
            CHECK(maxE - minE <= std::max<int64_t>(columnWork, 0));
        }
    }
}

TEST_CASE("identical seeds give bit-identical schemes, different seeds may differ") {
    WorkDomain d{5, 3, 13, 1.0}; // forces the random phase
    PartitionScheme a = partitionWorkload("n", d, 8, 1234);
    PartitionScheme b = partitionWorkload("n", d, 8, 1234);
    CHECK(partitionToJson(a).dump() == partitionToJson(b).dump());
    CHECK(a.seed == 1234);

    PartitionScheme c = partitionWorkload("n", d, 8, 99);
    CHECK(coversExactlyOnce(c));
}

TEST_CASE("loadImbalance equals the brute-force MAC ratio") {
    WorkDomain d{10, 16, 16, 3.0};
    PartitionScheme s = partitionWorkload("n", d, 8, 5);
    double maxM = 0, minM = 1e300, total = 0;
    for (int u = 0; u < 8; ++u) {
        double m = static_cast<double>(bruteForceUnitElements(s, u)) * d.macsPerElement;
        maxM = std::max(maxM, m);
        minM = std::min(minM, m);
        total += m;
    }
    double expected = (maxM - minM) / (total / 8);
    CHECK(loadImbalance(s) == Catch::Approx(expected));
}

TEST_CASE("halo policy derives from kernel geometry") {
    OperatorNode conv;
    conv.id = "c";
    conv.kind = OpKind::Conv;
    conv.attrs["stride"] = int64_t{1};
    conv.params.push_back({kernelShape(4, 4, 3, 3), ParamRole::Weight, {}});
    CHECK(haloPolicyFor(conv, HaloMode::ReplicateRows).haloExtent == 2); // R - stride

    conv.attrs["stride"] = int64_t{2};
    CHECK(haloPolicyFor(conv, HaloMode::ReplicateRows).haloExtent == 1);

    OperatorNode point;
    point.id = "p";
    point.kind = OpKind::Conv;
    point.params.push_back({kernelShape(4, 4, 1, 1), ParamRole::Weight, {}});
    CHECK(haloPolicyFor(point, HaloMode::ReplicateRows).haloExtent == 0); // 1x1 kernels
}

TEST_CASE("partition scheme JSON round-trips") {
    WorkDomain d{10, 16, 16, 2.5};
    PartitionScheme s = partitionWorkload("node7", d, 8, 5);
    PartitionScheme back = partitionFromJson(partitionToJson(s));
    CHECK(partitionToJson(back) == partitionToJson(s));
}

TEST_CASE("partitionFeatureMap wires geometry, halo and seed together") {
    zoo::GraphBuilder b;
    b.input("x", featureMapShape(16, 20, 20));
    zoo::addConv(b, "c", 16, 24, 3, 1, 1);
    b.edge("x", "c").output("c");
    ComputationGraph g = b.build();
    ShapeMap shapes = inferShapes(g);
    HardwareDescriptor hw;
    PartitionScheme s =
        partitionFeatureMap(g.node("c"), shapes.at({"x", 0}), shapes.at({"c", 0}), hw, 42);
    CHECK(s.unitCount == 8);
    CHECK(s.seed == 42);
    CHECK(s.rowHalo.haloExtent == 2); // 3x3 kernel, stride 1
    CHECK(coversExactlyOnce(s));
    CHECK(s.domain.macsPerElement == 16.0 * 9.0);

    OperatorNode t;
    t.id = "t";
    t.kind = OpKind::Transpose;
    CHECK_THROWS_AS(partitionFeatureMap(t, shapes.at({"x", 0}), shapes.at({"x", 0}), hw, 1),
                    ValidationError);
}
