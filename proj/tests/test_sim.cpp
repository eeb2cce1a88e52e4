// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "edgeflow/edgeflow.hpp"
#include "edgeflow/zoo.hpp"

using namespace edgeflow;

namespace {

ComputationGraph linkedConvPoolGraph() {
    // raw conv1x1 -> avgpool -> conv1x1 chain: the pair gets an annotation and
    // a layout but no compound merge (no fusion stage present)
    zoo::GraphBuilder b;
    b.input("x", featureMapShape(8, 8, 8));
    zoo::addConv(b, "front", 8, 8, 1);
    zoo::addPool(b, "apool", OpKind::AvgPool, 2, 2);
    zoo::addConv(b, "back", 8, 4, 1);
    b.edge("x", "front").edge("front", "apool").edge("apool", "back").output("back");
    return b.build();
}

} // namespace

TEST_CASE("conv with an identity kernel leaves the input unchanged") {
    OperatorNode conv;
    conv.id = "c";
    conv.kind = OpKind::Conv;
    conv.params.push_back({kernelShape(3, 3, 1, 1), ParamRole::Weight, {}});
    Tensor w(kernelShape(3, 3, 1, 1));
    for (int64_t k = 0; k < 3; ++k) w.at4(k, k, 0, 0) = 1.0f;
    Tensor x(featureMapShape(3, 5, 5));
    Rng rng(3);
    for (int64_t i = 0; i < x.size(); ++i) x.at(i) = static_cast<float>(rng.uniform(-1, 1));
    Tensor y = detail::evalConvCore(conv, x, w);
    CHECK(maxAbsDiff(x, y) == 0.0);
}

TEST_CASE("reference interpreter is deterministic and pinned") {
    ComputationGraph g = zoo::mobilenetBlock();
    auto out = executeReference(g, makeRandomInputs(g, 1), 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0].size() == 1024);
    // golden value computed at first implementation, frozen thereafter
    CHECK(tensorChecksum(out[0]) == 0x9960710fd6ee0687ull);
}

TEST_CASE("P=1 plan without passes: computeCycles is the analytic MAC count") {
    zoo::GraphBuilder b;
    b.input("x", featureMapShape(16, 12, 12));
    zoo::addConv(b, "c", 16, 32, 3, 1, 1);
    b.edge("x", "c").output("c");
    ComputationGraph g = b.build();

    HardwareDescriptor hw;
    hw.unitCount = 1;
    ExecutionPlan plan = buildPlan(g, hw, PassOptions{false, false, false, false, false}, 1);
    auto res = executePlan(plan, makeRandomInputs(g, 1));
    int64_t macs = 32ll * 12 * 12 * 16 * 3 * 3;
    CHECK(res.report.perLayer[0].computeCycles == (macs + hw.macPerCycle - 1) / hw.macPerCycle);
}

TEST_CASE("linked pair: consumer misses are compulsory-only over the buffer") {
    ComputationGraph g = linkedConvPoolGraph();
    HardwareDescriptor hw;
    ExecutionPlan plan = buildPlan(g, hw, PassOptions{false, true, true, true, true}, 1);

    const LayerPlan* front = nullptr;
    for (const auto& l : plan.layers)
        if (l.nodeId == "front") front = &l;
    REQUIRE(front != nullptr);
    REQUIRE(front->outputLayout.has_value());
    REQUIRE(front->outputLayout->consumerId == "apool");

    auto res = executePlan(plan, makeRandomInputs(g, 1));
    const LayerProfile* poolProf = nullptr;
    for (const auto& l : res.report.perLayer)
        if (l.nodeId == "apool") poolProf = &l;
    REQUIRE(poolProf != nullptr);
    int64_t expect = (front->outputLayout->bufferBytes() + hw.cacheLineBytes - 1) / hw.cacheLineBytes;
    CHECK(poolProf->misses == expect);
}

TEST_CASE("monotone locality: restructured consumer misses never exceed row-major") {
    ComputationGraph g = linkedConvPoolGraph();
    HardwareDescriptor hw;
    ExecutionPlan withLayout = buildPlan(g, hw, PassOptions{false, true, true, true, true}, 1);
    ExecutionPlan without = buildPlan(g, hw, PassOptions{false, true, true, true, false}, 1);
    auto inputs = makeRandomInputs(g, 1);
    auto a = executePlan(withLayout, inputs);
    auto b = executePlan(without, inputs);
    auto missesOf = [](const ProfileReport& r, const std::string& node) {
        for (const auto& l : r.perLayer)
            if (l.nodeId == node) return l.misses;
        return int64_t{-1};
    };
    CHECK(missesOf(a.report, "apool") <= missesOf(b.report, "apool"));
}

TEST_CASE("plan outputs equal the reference interpreter for every option set") {
    HardwareDescriptor hw;
    const PassOptions variants[] = {
        {false, false, false, false, false}, {false, false, true, true, false},
        {true, false, true, true, false},    {true, true, true, true, false},
        {true, true, true, true, true},      {false, true, false, false, true},
    };
    for (const auto& m : zoo::benchmarkSuite()) {
        auto inputs = makeRandomInputs(m.graph, 23);
        auto ref = executeReference(m.graph, inputs, 23);
        for (const auto& opts : variants) {
            ExecutionPlan plan = buildPlan(m.graph, hw, opts, 23);
            auto res = executePlan(plan, inputs);
            REQUIRE(res.outputs.size() == ref.size());
            for (size_t i = 0; i < ref.size(); ++i)
                REQUIRE(maxAbsDiff(ref[i], res.outputs[i]) <= 1e-5);
        }
    }
}

TEST_CASE("comparePlans: identical plans give speedup 1.0") {
    ComputationGraph g = zoo::shufflenetUnit();
    HardwareDescriptor hw;
    ExecutionPlan plan = buildPlan(g, hw, PassOptions{}, 1);
    auto cr = comparePlans(plan, plan, makeRandomInputs(g, 1));
    CHECK(cr.speedup == 1.0);
    CHECK(cr.maxAbsDifference == 0.0);
}

TEST_CASE("comparePlans rejects plans from different graphs") {
    HardwareDescriptor hw;
    ExecutionPlan a = buildPlan(zoo::shufflenetUnit(), hw, PassOptions{}, 1);
    ExecutionPlan b = buildPlan(zoo::squeezenetFire(), hw, PassOptions{}, 1);
    CHECK_THROWS_AS(comparePlans(a, b, makeRandomInputs(zoo::shufflenetUnit(), 1)), UsageError);
}

TEST_CASE("parallel speedup sanity: P=8 beats P=1 when outC >= 8") {
    HardwareDescriptor hw8;
    HardwareDescriptor hw1 = hw8;
    hw1.unitCount = 1;
    for (const auto& m : zoo::benchmarkSuite()) {
        auto inputs = makeRandomInputs(m.graph, 2);
        auto r8 = executePlan(buildPlan(m.graph, hw8, PassOptions{}, 2), inputs);
        auto r1 = executePlan(buildPlan(m.graph, hw1, PassOptions{}, 2), inputs);
        CHECK(r8.report.simulatedCycles < r1.report.simulatedCycles);
    }
}

TEST_CASE("work conservation under outC-only partitions") {
    // the same MAC volume lands on the units regardless of the scheme; the
    // ceil per unit can wiggle by at most one cycle each
    ComputationGraph g = zoo::centrenetHead();
    HardwareDescriptor hw;
    auto inputs = makeRandomInputs(g, 3);
    auto fmp = executePlan(buildPlan(g, hw, PassOptions{false, false, false, true, false}, 3), inputs);
    auto naive = executePlan(buildPlan(g, hw, PassOptions{false, false, false, false, false}, 3), inputs);
    REQUIRE(fmp.report.perLayer.size() == naive.report.perLayer.size());
    for (size_t i = 0; i < fmp.report.perLayer.size(); ++i) {
        int64_t a = fmp.report.perLayer[i].computeCycles;
        int64_t b = naive.report.perLayer[i].computeCycles;
        CHECK(std::abs(a - b) <= hw.unitCount);
    }
}

TEST_CASE("reports and artifacts are byte-deterministic") {
    ComputationGraph g = zoo::squeezenetFire();
    HardwareDescriptor hw;
    ExecutionPlan p1 = buildPlan(g, hw, PassOptions{}, 5);
    ExecutionPlan p2 = buildPlan(g, hw, PassOptions{}, 5);
    CHECK(planToJson(p1).dump() == planToJson(p2).dump());
    auto r1 = executePlan(p1, makeRandomInputs(g, 5));
    auto r2 = executePlan(p2, makeRandomInputs(g, 5));
    CHECK(profileToJson(r1.report).dump() == profileToJson(r2.report).dump());
    CHECK(profileToCsv(r1.report) == profileToCsv(r2.report));
}

TEST_CASE("simulated cycles respect the work-conservation lower bound") {
    HardwareDescriptor hw;
    for (const auto& m : zoo::benchmarkSuite()) {
        auto res = executePlan(buildPlan(m.graph, hw, PassOptions{}, 9), makeRandomInputs(m.graph, 9));
        CHECK(res.report.simulatedCycles >= res.report.totalComputeCycles() / hw.unitCount);
    }
}

TEST_CASE("plan JSON round-trips through parse") {
    ComputationGraph g = zoo::mobilenetBlock();
    HardwareDescriptor hw;
    ExecutionPlan plan = buildPlan(g, hw, PassOptions{}, 5);
    nlohmann::json j = planToJson(plan);
    ExecutionPlan back = planFromJson(j, plan.graph);
    CHECK(planToJson(back).dump() == j.dump());
    auto inputs = makeRandomInputs(plan.graph, 5);
    auto a = executePlan(plan, inputs);
    auto b = executePlan(back, inputs);
    CHECK(profileToJson(a.report).dump() == profileToJson(b.report).dump());
}

TEST_CASE("the full pipeline plan carries cbra, stage-2 split and 8-unit partition") {
    ComputationGraph g = zoo::mobilenetBlock();
    HardwareDescriptor hw;
    ExecutionPlan plan = buildPlan(g, hw, PassOptions{}, 1);

    bool cbraLayer = false;
    bool splitFactorTwo = false;
    for (const auto& layer : plan.layers) {
        if (plan.graph.node(layer.nodeId).kind == OpKind::Cbra) cbraLayer = true;
        if (layer.split && layer.split->stage2PartsPerUnit == 2) splitFactorTwo = true;
        if (layer.partition) {
            CHECK(layer.partition->unitCount == 8);
            CHECK(layer.partitionPolicy == "fmp");
        }
    }
    CHECK(cbraLayer);
    CHECK(splitFactorTwo);
}

TEST_CASE("comparePlans flags output divergence as an equivalence failure") {
    ComputationGraph g = zoo::shufflenetUnit();
    HardwareDescriptor hw;
    // different seeds materialize different parameter values
    ExecutionPlan a = buildPlan(g, hw, PassOptions{}, 1);
    ExecutionPlan b = buildPlan(g, hw, PassOptions{}, 2);
    CHECK_THROWS_AS(comparePlans(a, b, makeRandomInputs(g, 1)), EquivalenceFailureError);
}
