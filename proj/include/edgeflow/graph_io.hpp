// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "edgeflow/graph.hpp"
#include "edgeflow/hardware.hpp"

namespace edgeflow {

inline constexpr int kFormatVersion = 1;

namespace io {

using nlohmann::json;

inline json shapeToJson(const TensorShape& s) {
    json axes = json::array();
    for (const auto& d : s.dims) axes.push_back({{"label", axisName(d.label)}, {"extent", d.extent}});
    return {{"axes", axes}, {"dtype", elementTypeName(s.elementType)}};
}

inline TensorShape shapeFromJson(const json& j) {
    TensorShape s;
    if (!j.contains("axes") || !j["axes"].is_array()) throw ParseError("shape needs an axes array");
    for (const auto& a : j["axes"])
        s.dims.push_back({axisFromName(a.at("label").get<std::string>()),
                          a.at("extent").get<int64_t>()});
    s.elementType = elementTypeFromName(j.value("dtype", "float32"));
    s.validate();
    return s;
}

inline json attrToJson(const AttrValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

inline AttrValue attrFromJson(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_array()) return j.get<std::vector<int64_t>>();
    throw ParseError("unsupported attr value: " + j.dump());
}

inline json paramToJson(const ParamSpec& p) {
    json j = shapeToJson(p.shape);
    j["role"] = paramRoleName(p.role);
    if (p.origin) {
        json o;
        o["tag"] = p.origin->tag;
        o["full"] = json::array();
        for (const auto& d : p.origin->fullDims)
            o["full"].push_back({{"label", axisName(d.label)}, {"extent", d.extent}});
        o["lo"] = p.origin->sliceLo;
        o["hi"] = p.origin->sliceHi;
        j["origin"] = o;
    }
    return j;
}

inline ParamSpec paramFromJson(const json& j) {
    ParamSpec p;
    p.shape = shapeFromJson(j);
    p.role = paramRoleFromName(j.value("role", "weight"));
    if (j.contains("origin")) {
        ParamOrigin o;
        const json& jo = j["origin"];
        o.tag = jo.at("tag").get<std::string>();
        for (const auto& a : jo.at("full"))
            o.fullDims.push_back({axisFromName(a.at("label").get<std::string>()),
                                  a.at("extent").get<int64_t>()});
        o.sliceLo = jo.at("lo").get<std::vector<int64_t>>();
        o.sliceHi = jo.at("hi").get<std::vector<int64_t>>();
        p.origin = std::move(o);
    }
    return p;
}

inline std::string portToString(const PortRef& r) {
    return r.port == 0 ? r.node : r.node + ":" + std::to_string(r.port);
}

inline PortRef portFromString(const std::string& s) {
    auto pos = s.rfind(':');
    if (pos == std::string::npos) return {s, 0};
    // ids may contain ':' only through this encoding; reject non-numeric tails
    std::string tail = s.substr(pos + 1);
    if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
        return {s, 0};
    return {s.substr(0, pos), std::stoi(tail)};
}

} // namespace io

inline nlohmann::json graphToJson(const ComputationGraph& graph) {
    using nlohmann::json;
    json j;
    j["format_version"] = kFormatVersion;
    j["nodes"] = json::array();
    for (const auto& [id, node] : graph.nodes) {
        json n;
        n["id"] = id;
        n["kind"] = opKindName(node.kind);
        n["attrs"] = json::object();
        for (const auto& [name, value] : node.attrs) n["attrs"][name] = io::attrToJson(value);
        n["params"] = json::array();
        for (const auto& p : node.params) n["params"].push_back(io::paramToJson(p));
        j["nodes"].push_back(n);
    }
    // canonical edge order keeps emitGraph deterministic
    std::vector<Edge> edges = graph.edges;
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.to.node, a.to.port, a.from.node, a.from.port) <
               std::tie(b.to.node, b.to.port, b.from.node, b.from.port);
    });
    j["edges"] = json::array();
    for (const auto& e : edges) {
        json je;
        je["from"] = e.from.node;
        if (e.from.port != 0) je["from_port"] = e.from.port;
        je["to"] = e.to.node;
        if (e.to.port != 0) je["to_port"] = e.to.port;
        je["shape"] = io::shapeToJson(e.shape);
        j["edges"].push_back(je);
    }
    j["inputs"] = nlohmann::json::array();
    for (const auto& gi : graph.inputs)
        j["inputs"].push_back({{"id", gi.id}, {"shape", io::shapeToJson(gi.shape)}});
    j["outputs"] = nlohmann::json::array();
    for (const auto& o : graph.outputs) j["outputs"].push_back(io::portToString(o));
    return j;
}

inline std::string emitGraph(const ComputationGraph& graph) { return graphToJson(graph).dump(2) + "\n"; }

inline ComputationGraph graphFromJson(const nlohmann::json& j) {
    ComputationGraph graph;
    if (!j.is_object()) throw ParseError("graph document must be a JSON object");
    int version = j.value("format_version", 0);
    if (version != kFormatVersion)
        throw ParseError("unsupported graph format_version " + std::to_string(version));
    if (!j.contains("nodes") || !j["nodes"].is_array()) throw ParseError("missing nodes array");
    for (const auto& n : j["nodes"]) {
        OperatorNode node;
        node.id = n.at("id").get<std::string>();
        node.kind = opKindFromName(n.at("kind").get<std::string>());
        if (n.contains("attrs"))
            for (const auto& [name, value] : n["attrs"].items())
                node.attrs[name] = io::attrFromJson(value);
        if (n.contains("params"))
            for (const auto& p : n["params"]) node.params.push_back(io::paramFromJson(p));
        if (graph.nodes.count(node.id)) throw ParseError("duplicate node id " + node.id);
        graph.nodes[node.id] = std::move(node);
    }
    if (j.contains("edges"))
        for (const auto& e : j["edges"]) {
            Edge edge;
            edge.from = {e.at("from").get<std::string>(), static_cast<int>(e.value("from_port", 0))};
            edge.to = {e.at("to").get<std::string>(), static_cast<int>(e.value("to_port", 0))};
            if (e.contains("shape")) edge.shape = io::shapeFromJson(e["shape"]);
            graph.edges.push_back(std::move(edge));
        }
    if (j.contains("inputs"))
        for (const auto& gi : j["inputs"])
            graph.inputs.push_back({gi.at("id").get<std::string>(), io::shapeFromJson(gi.at("shape"))});
    if (j.contains("outputs"))
        for (const auto& o : j["outputs"]) graph.outputs.push_back(io::portFromString(o.get<std::string>()));
    validateGraph(graph);
    return graph;
}

// Parses and validates a graph document (External Interfaces, format v1).
inline ComputationGraph loadGraph(const std::string& document) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed graph document: ") + e.what());
    }
    try {
        return graphFromJson(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed graph document: ") + e.what());
    }
}

inline ComputationGraph loadGraphFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return loadGraph(ss.str());
}

inline nlohmann::json hardwareToJson(const HardwareDescriptor& hw) {
    return {{"format_version", kFormatVersion},
            {"unit_count", hw.unitCount},
            {"l2_bytes", hw.l2Bytes},
            {"shared_bytes", hw.sharedBytes},
            {"ddr_bytes", hw.ddrBytes},
            {"cache_line_bytes", hw.cacheLineBytes},
            {"cache_sets", hw.cacheSets},
            {"cache_ways", hw.cacheWays},
            {"lat_l2", hw.latL2},
            {"lat_shared", hw.latShared},
            {"lat_ddr", hw.latDdr},
            {"mac_per_cycle", hw.macPerCycle}};
}

inline HardwareDescriptor hardwareFromJson(const nlohmann::json& j) {
    HardwareDescriptor hw;
    int version = j.value("format_version", 0);
    if (version != kFormatVersion)
        throw ParseError("unsupported hardware format_version " + std::to_string(version));
    hw.unitCount = j.at("unit_count").get<int>();
    hw.l2Bytes = j.at("l2_bytes").get<int64_t>();
    hw.sharedBytes = j.at("shared_bytes").get<int64_t>();
    hw.ddrBytes = j.at("ddr_bytes").get<int64_t>();
    hw.cacheLineBytes = j.value("cache_line_bytes", int64_t{64});
    hw.cacheSets = j.value("cache_sets", int64_t{256});
    hw.cacheWays = j.value("cache_ways", int64_t{4});
    hw.latL2 = j.value("lat_l2", int64_t{2});
    hw.latShared = j.value("lat_shared", int64_t{12});
    hw.latDdr = j.value("lat_ddr", int64_t{120});
    hw.macPerCycle = j.value("mac_per_cycle", int64_t{8});
    hw.validate();
    return hw;
}

inline HardwareDescriptor loadHardwareFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open hardware file " + path);
    nlohmann::json j;
    try {
        in >> j;
        return hardwareFromJson(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed hardware document: ") + e.what());
    }
}

inline nlohmann::json clusterToJson(const ClusterDescriptor& c) {
    return {{"format_version", kFormatVersion},
            {"device_count", c.deviceCount},
            {"device", hardwareToJson(c.device)},
            {"bandwidth_bytes_per_cycle", c.bandwidthBytesPerCycle},
            {"topology", topologyName(c.topology)},
            {"sync", syncMethodName(c.sync)}};
}

inline ClusterDescriptor clusterFromJson(const nlohmann::json& j) {
    ClusterDescriptor c;
    int version = j.value("format_version", 0);
    if (version != kFormatVersion)
        throw ParseError("unsupported cluster format_version " + std::to_string(version));
    c.deviceCount = j.at("device_count").get<int>();
    c.device = hardwareFromJson(j.at("device"));
    c.bandwidthBytesPerCycle = j.at("bandwidth_bytes_per_cycle").get<double>();
    c.topology = topologyFromName(j.value("topology", "ring"));
    c.sync = syncMethodFromName(j.value("sync", "ring"));
    c.validate();
    return c;
}

inline ClusterDescriptor loadClusterFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cluster file " + path);
    nlohmann::json j;
    try {
        in >> j;
        return clusterFromJson(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed cluster document: ") + e.what());
    }
}

inline void writeTextFile(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file " + path);
    out << content;
}

} // namespace edgeflow
