// SPDX-License-Identifier: Apache-2.0
//
// Minimal library walkthrough: build a model, optimize it for a device
// profile, execute both the vanilla and the optimized plan, and print the
// simulated speedup.

#include <cstdio>

#include "edgeflow/edgeflow.hpp"
#include "edgeflow/zoo.hpp"

using namespace edgeflow;

int main() {
    ComputationGraph model = zoo::mobilenetBlock();
    HardwareDescriptor hw; // 8 units, 512 KB L2, 4 MB shared

    ExecutionPlan vanilla = buildPlan(model, hw, PassOptions{false, false, false, false, false}, 1);
    ExecutionPlan optimized = buildPlan(model, hw, PassOptions{}, 1);

    auto inputs = makeRandomInputs(model, 1);
    CompareResult result = comparePlans(vanilla, optimized, inputs);

    std::printf("vanilla:   %lld cycles\n",
                static_cast<long long>(result.baseReport.simulatedCycles));
    std::printf("optimized: %lld cycles\n",
                static_cast<long long>(result.optReport.simulatedCycles));
    std::printf("speedup:   %.2fx (outputs match within %.1e)\n", result.speedup,
                result.maxAbsDifference);

    for (const auto& layer : result.optReport.perLayer)
        std::printf("  %-24s misses=%lld\n", layer.nodeId.c_str(),
                    static_cast<long long>(layer.misses));
    return 0;
}
