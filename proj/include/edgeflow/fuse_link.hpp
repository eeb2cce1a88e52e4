// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeflow/graph.hpp"
#include "edgeflow/hardware.hpp"

namespace edgeflow {

// ---------------------------------------------------------------------------
// Fusion: collapse conv/matmul-rooted elementwise chains (bn, bias, relu,
// add-with-constant) into one compound node. A producer with more than one
// consumer is never fused into a consumer.
// ---------------------------------------------------------------------------

struct FusionRule {
    std::vector<OpKind> patternKinds;
    OpKind resultKind;
};

// The canonical stage order a compound supports. Chains are fused up to the
// longest prefix that fits this order; anything after a deviation is left in
// place.
inline const std::vector<FusionRule>& fusionRules() {
    static const std::vector<FusionRule> rules = {
        {{OpKind::Conv, OpKind::Bn, OpKind::Bias, OpKind::Relu}, OpKind::Cbr},
        {{OpKind::Matmul, OpKind::Bn, OpKind::Bias, OpKind::Relu}, OpKind::Cbr},
    };
    return rules;
}

namespace detail {

// Params that move to a derived node keep their value stream: fill in an
// origin pointing at the source tensor if the param was its own source.
inline ParamSpec carriedParam(const OperatorNode& from, size_t index) {
    ParamSpec p = from.params[index];
    if (!p.origin) {
        ParamOrigin o;
        o.tag = from.id + ":" + std::to_string(index);
        o.fullDims = p.shape.dims;
        for (const auto& d : p.shape.dims) {
            o.sliceLo.push_back(0);
            o.sliceHi.push_back(d.extent);
        }
        p.origin = std::move(o);
    }
    return p;
}

inline void redirectConsumers(ComputationGraph& g, const std::string& oldId,
                              const std::string& newId) {
    for (auto& e : g.edges)
        if (e.from.node == oldId) e.from.node = newId;
    for (auto& o : g.outputs)
        if (o.node == oldId) o.node = newId;
}

} // namespace detail

struct FusedGroup {
    std::vector<std::string> memberIds; // root first
    std::string compoundId;
};

// Rewrites the graph; input untouched. Non-matching graphs pass through.
inline ComputationGraph fusePass(const ComputationGraph& graph,
                                 std::vector<FusedGroup>* groupsOut = nullptr) {
    ComputationGraph g = graph;
    for (const auto& rootId : topologicalOrder(graph)) {
        auto rootIt = g.nodes.find(rootId);
        if (rootIt == g.nodes.end()) continue; // consumed by an earlier fusion
        const OperatorNode root = rootIt->second;
        if (root.kind != OpKind::Conv && root.kind != OpKind::Matmul) continue;

        // Walk the single-consumer chain, accepting stages in bn, bias, relu
        // order (add-with-constant counts as a bias-position stage).
        std::vector<std::string> chain;
        std::string cur = rootId;
        int stage = 0; // 0: before bn, 1: before bias, 2: before relu, 3: done
        while (stage < 3) {
            if (g.consumerCount(cur) != 1) break;
            const Edge* next = nullptr;
            for (const auto& e : g.edges)
                if (e.from.node == cur && e.from.port == 0) next = &e;
            if (!next) break;
            const OperatorNode& cand = g.node(next->to.node);
            int candStage;
            if (cand.kind == OpKind::Bn && cand.params.size() >= 2)
                candStage = 0;
            else if (cand.kind == OpKind::Bias ||
                     (cand.kind == OpKind::Add && cand.hasAttr("constant")))
                candStage = 1;
            else if (cand.kind == OpKind::Relu)
                candStage = 2;
            else
                break;
            if (candStage < stage) break;
            chain.push_back(cand.id);
            cur = cand.id;
            stage = candStage + 1;
        }
        if (chain.empty()) continue;

        OperatorNode compound;
        compound.id = rootId + "#cbr";
        compound.kind = OpKind::Cbr;
        compound.attrs = root.attrs;
        compound.attrs["root"] = std::string(root.kind == OpKind::Conv ? "conv" : "matmul");
        compound.params.push_back(detail::carriedParam(root, 0));
        // per-output-channel stage params adopt the kernel's K axis so K-splits
        // slice them alongside the weights
        auto carriedStageParam = [&](const OperatorNode& member, size_t index) {
            ParamSpec p = detail::carriedParam(member, index);
            if (!p.shape.dims.empty() && !p.shape.hasAxis(Axis::K))
                p.shape.dims[0].label = Axis::K;
            return p;
        };
        for (const auto& memberId : chain) {
            const OperatorNode& member = g.node(memberId);
            switch (member.kind) {
                case OpKind::Bn:
                    compound.attrs["hasBn"] = true;
                    compound.params.push_back(carriedStageParam(member, 0));
                    compound.params.push_back(carriedStageParam(member, 1));
                    break;
                case OpKind::Bias:
                    compound.attrs["hasBias"] = true;
                    compound.params.push_back(carriedStageParam(member, 0));
                    break;
                case OpKind::Add:
                    compound.attrs["biasConstant"] = member.attrDouble("constant", 0.0);
                    compound.attrs["hasAddConstant"] = true;
                    break;
                case OpKind::Relu: compound.attrs["hasRelu"] = true; break;
                default: break;
            }
        }

        // rewire: inputs of root feed the compound, consumers of the tail read it
        const std::string compoundId = compound.id;
        for (auto& e : g.edges)
            if (e.to.node == rootId) e.to.node = compoundId;
        detail::redirectConsumers(g, chain.back(), compoundId);
        g.nodes.erase(rootId);
        std::vector<std::string> members{rootId};
        for (const auto& memberId : chain) {
            g.nodes.erase(memberId);
            // drop the internal chain edges
            g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                         [&](const Edge& e) { return e.to.node == memberId; }),
                          g.edges.end());
            members.push_back(memberId);
        }
        g.nodes[compoundId] = std::move(compound);
        if (groupsOut) groupsOut->push_back({members, compoundId});
    }
    validateGraph(g);
    return g;
}

// ---------------------------------------------------------------------------
// Pattern catalog and identification.
// ---------------------------------------------------------------------------

enum class KindClass : uint8_t { ConvLike, Pool, MatmulLike };

inline bool matchesClass(const OperatorNode& node, KindClass c) {
    switch (c) {
        case KindClass::ConvLike:
            return (node.kind == OpKind::Conv || node.kind == OpKind::Cbrm ||
                    node.kind == OpKind::Cbra ||
                    (node.kind == OpKind::Cbr && node.attrString("root", "conv") == "conv"));
        case KindClass::Pool: return isPoolKind(node.kind);
        case KindClass::MatmulLike:
            return (node.kind == OpKind::Matmul || node.kind == OpKind::FullyConnected ||
                    (node.kind == OpKind::Cbr && node.attrString("root", "conv") == "matmul"));
    }
    return false;
}

struct PatternRule {
    std::string name;
    bool shortcut = false;
    std::vector<KindClass> chain; // empty for the shortcut form
};

// Static table; adding a catalog row needs no pass changes.
inline const std::vector<PatternRule>& patternCatalog() {
    static const std::vector<PatternRule> rules = {
        {"ConvX -> ConvY", false, {KindClass::ConvLike, KindClass::ConvLike}},
        {"ConvX -> ConvY -> ZPooling",
         false,
         {KindClass::ConvLike, KindClass::ConvLike, KindClass::Pool}},
        {"ConvX -> ZPooling -> ConvY",
         false,
         {KindClass::ConvLike, KindClass::Pool, KindClass::ConvLike}},
        {"Shortcut Connection", true, {}},
        {"MatmulX -> MatmulY", false, {KindClass::MatmulLike, KindClass::MatmulLike}},
    };
    return rules;
}

struct PatternMatch {
    std::string patternName;
    std::vector<std::string> nodeIds;
};

namespace detail {

inline void chainMatches(const ComputationGraph& g, const PatternRule& rule,
                         std::vector<PatternMatch>& out) {
    std::vector<std::string> order = topologicalOrder(g);
    // DFS over data edges, one path per match, overlapping matches included
    for (const auto& startId : order) {
        if (!matchesClass(g.node(startId), rule.chain[0])) continue;
        std::vector<std::vector<std::string>> paths{{startId}};
        for (size_t depth = 1; depth < rule.chain.size(); ++depth) {
            std::vector<std::vector<std::string>> next;
            for (const auto& path : paths)
                for (const Edge* e : g.outEdges(path.back())) {
                    if (e->from.port != 0) continue;
                    if (!matchesClass(g.node(e->to.node), rule.chain[depth])) continue;
                    auto extended = path;
                    extended.push_back(e->to.node);
                    next.push_back(std::move(extended));
                }
            paths = std::move(next);
        }
        for (auto& p : paths) out.push_back({rule.name, std::move(p)});
    }
}

// Walk producers through single-input nodes, collecting the ancestor path.
inline std::vector<std::string> ancestorPath(const ComputationGraph& g, std::string id,
                                             int maxDepth) {
    std::vector<std::string> path;
    for (int d = 0; d < maxDepth; ++d) {
        path.push_back(id);
        auto in = g.inEdges(id);
        if (in.size() != 1) break;
        if (g.isInput(in[0]->from.node)) {
            path.push_back(in[0]->from.node);
            break;
        }
        id = in[0]->from.node;
    }
    return path;
}

inline void shortcutMatches(const ComputationGraph& g, const PatternRule& rule,
                            std::vector<PatternMatch>& out) {
    for (const auto& [id, node] : g.nodes) {
        if (node.kind != OpKind::Add || node.hasAttr("constant")) continue;
        auto in = g.inEdges(id);
        if (in.size() != 2) continue;
        auto pathA = ancestorPath(g, in[0]->from.node, 8);
        auto pathB = ancestorPath(g, in[1]->from.node, 8);
        // earliest common ancestor = the fork the shortcut branches from
        std::string fork;
        for (const auto& a : pathA) {
            if (std::find(pathB.begin(), pathB.end(), a) != pathB.end()) {
                fork = a;
                break;
            }
        }
        if (fork.empty()) continue;
        // at least one branch must run through a convolution
        auto branchHasConv = [&](const std::vector<std::string>& path) {
            for (const auto& n : path) {
                if (n == fork) break;
                if (!g.isInput(n) && matchesClass(g.node(n), KindClass::ConvLike)) return true;
            }
            return false;
        };
        if (!branchHasConv(pathA) && !branchHasConv(pathB)) continue;
        std::vector<std::string> ids;
        ids.push_back(fork);
        auto collect = [&](const std::vector<std::string>& path) {
            for (const auto& n : path) {
                if (n == fork) break;
                ids.push_back(n);
            }
        };
        collect(pathA);
        collect(pathB);
        ids.push_back(id);
        out.push_back({rule.name, std::move(ids)});
    }
}

} // namespace detail

// Order-stable report of every catalog match, overlapping matches included.
inline std::vector<PatternMatch> identifyPatterns(const ComputationGraph& graph) {
    std::vector<PatternMatch> matches;
    for (const auto& rule : patternCatalog()) {
        if (rule.shortcut)
            detail::shortcutMatches(graph, rule, matches);
        else
            detail::chainMatches(graph, rule, matches);
    }
    return matches;
}

// ---------------------------------------------------------------------------
// Linking: annotate catalog pairs whose members' parameters each fit under
// the L2 threshold (strict <, unsplit sizes, per Algorithm "link"), and
// replace pairs that have a compound kind (cbr + avg/max pool).
// ---------------------------------------------------------------------------

struct LinkAnnotation {
    std::string producerId;
    std::string consumerId;
    std::string patternName;
    int64_t thresholdBytes = 0;
    std::string mergedInto; // compound node id when the pair was replaced
};

inline std::pair<ComputationGraph, std::vector<LinkAnnotation>> linkPass(
    const ComputationGraph& graph, const HardwareDescriptor& hw) {
    ComputationGraph g = graph;
    std::vector<LinkAnnotation> annotations;
    auto matches = identifyPatterns(g);

    auto alreadyAnnotated = [&](const std::string& p, const std::string& c) {
        for (const auto& a : annotations)
            if (a.producerId == p && a.consumerId == c) return true;
        return false;
    };

    for (const auto& m : matches) {
        if (m.patternName == "Shortcut Connection") {
            // the join reads both branches elementwise; annotate branch ends
            const std::string& addId = m.nodeIds.back();
            for (const Edge* e : g.inEdges(addId)) {
                if (g.isInput(e->from.node)) continue;
                const OperatorNode& producer = g.node(e->from.node);
                if (paramByteSize(producer) < hw.l2Bytes &&
                    paramByteSize(g.node(addId)) < hw.l2Bytes &&
                    !alreadyAnnotated(producer.id, addId))
                    annotations.push_back({producer.id, addId, m.patternName, hw.l2Bytes, ""});
            }
            continue;
        }
        for (size_t i = 0; i + 1 < m.nodeIds.size(); ++i) {
            const std::string& p = m.nodeIds[i];
            const std::string& c = m.nodeIds[i + 1];
            if (alreadyAnnotated(p, c)) continue;
            // one consumer only: the producer writes its output in one layout
            if (g.consumerCount(p) != 1) continue;
            if (paramByteSize(g.node(p)) >= hw.l2Bytes) continue;
            if (paramByteSize(g.node(c)) >= hw.l2Bytes) continue;
            annotations.push_back({p, c, m.patternName, hw.l2Bytes, ""});
        }
    }

    // merge annotated cbr + pool pairs into the named compounds
    for (auto& a : annotations) {
        auto pIt = g.nodes.find(a.producerId);
        auto cIt = g.nodes.find(a.consumerId);
        if (pIt == g.nodes.end() || cIt == g.nodes.end()) continue;
        const OperatorNode& producer = pIt->second;
        const OperatorNode& consumer = cIt->second;
        if (producer.kind != OpKind::Cbr || producer.attrString("root", "conv") != "conv")
            continue;
        if (consumer.kind != OpKind::AvgPool && consumer.kind != OpKind::MaxPool) continue;

        OperatorNode compound = producer;
        compound.id = producer.id + (consumer.kind == OpKind::AvgPool ? "#cbra" : "#cbrm");
        compound.kind = consumer.kind == OpKind::AvgPool ? OpKind::Cbra : OpKind::Cbrm;
        PoolGeometry pg = poolGeometry(consumer);
        compound.attrs["poolWindowH"] = pg.windowH;
        compound.attrs["poolWindowW"] = pg.windowW;
        compound.attrs["poolStrideH"] = pg.strideH;
        compound.attrs["poolStrideW"] = pg.strideW;
        compound.attrs["poolCeilMode"] = pg.ceilMode;

        const std::string compoundId = compound.id;
        const std::string consumerId = consumer.id;
        for (auto& e : g.edges)
            if (e.to.node == producer.id) e.to.node = compoundId;
        detail::redirectConsumers(g, consumerId, compoundId);
        g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                     [&](const Edge& e) { return e.to.node == consumerId; }),
                      g.edges.end());
        g.nodes.erase(a.producerId);
        g.nodes.erase(a.consumerId);
        g.nodes[compoundId] = std::move(compound);
        a.mergedInto = compoundId;

        // annotations touching the merged nodes now refer to the compound
        for (auto& other : annotations) {
            if (&other == &a) continue;
            if (other.producerId == a.consumerId || other.producerId == a.producerId)
                other.producerId = a.mergedInto;
            if (other.consumerId == a.producerId) other.consumerId = a.mergedInto;
        }
    }
    validateGraph(g);
    return {g, annotations};
}

// Pass report (External Interface of this module).
inline nlohmann::json passReportJson(const std::vector<FusedGroup>& fused,
                                     const std::vector<PatternMatch>& matches,
                                     const std::vector<LinkAnnotation>& annotations,
                                     int64_t thresholdBytes) {
    nlohmann::json j;
    j["threshold_bytes"] = thresholdBytes;
    j["fused_groups"] = nlohmann::json::array();
    for (const auto& fg : fused)
        j["fused_groups"].push_back({{"members", fg.memberIds}, {"compound", fg.compoundId}});
    j["pattern_matches"] = nlohmann::json::array();
    for (const auto& m : matches)
        j["pattern_matches"].push_back({{"pattern", m.patternName}, {"nodes", m.nodeIds}});
    j["link_annotations"] = nlohmann::json::array();
    for (const auto& a : annotations) {
        nlohmann::json ja = {{"producer", a.producerId},
                             {"consumer", a.consumerId},
                             {"pattern", a.patternName},
                             {"threshold_bytes", a.thresholdBytes}};
        if (!a.mergedInto.empty()) ja["merged_into"] = a.mergedInto;
        j["link_annotations"].push_back(ja);
    }
    return j;
}

} // namespace edgeflow
