#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "asg/graph.hpp"

namespace asg {

// Canonical form: nodes sorted by id, edges in event-stream order. Two graphs
// that differ only in declaration order canonicalize to equal values.
inline AttackScenarioGraph canonicalize(const AttackScenarioGraph& g) {
    AttackScenarioGraph out = g;
    std::sort(out.nodes.begin(), out.nodes.end(),
              [](const Node& a, const Node& b) { return a.id < b.id; });
    out.edges = event_stream(g);
    return out;
}

// Compact canonical JSON. Key order is fixed (nodes, edges, provenance), so
// equal graphs serialize to identical bytes; the empty graph serializes to
// {"nodes":[],"edges":[]}.
inline std::string serialize(const AttackScenarioGraph& g) {
    const AttackScenarioGraph c = canonicalize(g);
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : c.nodes) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["kind"] = to_token(n.kind);
        if (n.label) jn["label"] = *n.label;
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : c.edges) {
        nlohmann::ordered_json je;
        je["subject"] = e.subject;
        je["object"] = e.object;
        je["kind"] = to_token(e.kind);
        je["seq"] = e.seq;
        j["edges"].push_back(std::move(je));
    }
    if (c.provenance) j["provenance"] = *c.provenance;
    return j.dump();
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                           const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(std::string("missing field '") + key + "'", 0, path + "." + key);
    return *it;
}

inline std::string require_string(const nlohmann::json& j, const char* key,
                                  const std::string& path) {
    const auto& v = require_field(j, key, path);
    if (!v.is_string())
        throw SchemaError(std::string("field '") + key + "' must be a string", 0,
                          path + "." + key);
    return v.get<std::string>();
}

inline std::uint64_t require_seq(const nlohmann::json& j, const char* key,
                                 const std::string& path) {
    const auto& v = require_field(j, key, path);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
        throw SchemaError(std::string("field '") + key + "' must be an integer >= 0", 0,
                          path + "." + key);
    return v.get<std::uint64_t>();
}

inline nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("JSON parse error: ") + e.what(), e.byte);
    }
}

}  // namespace detail

inline AttackScenarioGraph deserialize(const std::string& text) {
    nlohmann::json j = detail::parse_json(text);
    if (!j.is_object()) throw SchemaError("graph document must be an object");

    AttackScenarioGraph g;

    const auto& nodes = detail::require_field(j, "nodes", "");
    if (!nodes.is_array()) throw SchemaError("'nodes' must be an array", 0, "nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string path = "nodes[" + std::to_string(i) + "]";
        const auto& jn = nodes[i];
        if (!jn.is_object()) throw SchemaError("node must be an object", 0, path);
        Node n;
        n.id = detail::require_string(jn, "id", path);
        const std::string kind = detail::require_string(jn, "kind", path);
        auto ek = entity_kind_from_token(kind);
        if (!ek) throw SchemaError("unknown entity kind: " + kind, 0, path + ".kind");
        n.kind = *ek;
        if (jn.contains("label")) {
            if (!jn["label"].is_string())
                throw SchemaError("'label' must be a string", 0, path + ".label");
            n.label = jn["label"].get<std::string>();
        }
        g.nodes.push_back(std::move(n));
    }

    const auto& edges = detail::require_field(j, "edges", "");
    if (!edges.is_array()) throw SchemaError("'edges' must be an array", 0, "edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string path = "edges[" + std::to_string(i) + "]";
        const auto& je = edges[i];
        if (!je.is_object()) throw SchemaError("edge must be an object", 0, path);
        Edge e;
        e.subject = detail::require_string(je, "subject", path);
        e.object = detail::require_string(je, "object", path);
        const std::string kind = detail::require_string(je, "kind", path);
        auto rk = relation_kind_from_token(kind);
        if (!rk) throw SchemaError("unknown relation kind: " + kind, 0, path + ".kind");
        e.kind = *rk;
        e.seq = detail::require_seq(je, "seq", path);
        g.edges.push_back(std::move(e));
    }

    if (j.contains("provenance")) {
        if (!j["provenance"].is_string())
            throw SchemaError("'provenance' must be a string", 0, "provenance");
        g.provenance = j["provenance"].get<std::string>();
    }

    validate_graph(g);
    return g;
}

// FNV-1a over the canonical serialization. Pairs reports with the graph they
// were computed from.
inline std::uint64_t fingerprint(const AttackScenarioGraph& g) {
    const std::string bytes = serialize(g);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline const char* dot_shape(EntityKind k) {
    switch (entity_class(k)) {
        case EntityClass::Process: return "box";
        case EntityClass::File: return "ellipse";
        case EntityClass::Socket: return "diamond";
    }
    return "ellipse";
}

inline const char* dot_fill(EntityKind k) {
    switch (k) {
        case EntityKind::TP: return "lightblue";
        case EntityKind::MP: return "lightcoral";
        case EntityKind::SF: return "lightgrey";
        case EntityKind::TF: return "khaki";
        case EntityKind::MF: return "orange";
        case EntityKind::SO: return "palegreen";
    }
    return "white";
}

}  // namespace detail

// Graphviz rendering. `edge_color` may be empty or map an index in
// event-stream order to a color name (used for phase-banded output).
inline std::string to_dot(const AttackScenarioGraph& g,
                          const std::vector<std::string>& edge_color = {}) {
    const AttackScenarioGraph c = canonicalize(g);
    std::string out = "digraph asg {\n  rankdir=LR;\n";
    for (const auto& n : c.nodes) {
        out += "  \"" + detail::dot_escape(n.id) + "\" [shape=" + detail::dot_shape(n.kind) +
               ", style=filled, fillcolor=" + detail::dot_fill(n.kind) + ", label=\"" +
               detail::dot_escape(n.label ? *n.label + "\\n(" + to_token(n.kind) + ")"
                                          : n.id + "\\n(" + std::string(to_token(n.kind)) + ")") +
               "\"];\n";
    }
    for (std::size_t i = 0; i < c.edges.size(); ++i) {
        const auto& e = c.edges[i];
        out += "  \"" + detail::dot_escape(e.subject) + "\" -> \"" +
               detail::dot_escape(e.object) + "\" [label=\"" + to_token(e.kind) + "@" +
               std::to_string(e.seq) + "\"";
        if (i < edge_color.size() && !edge_color[i].empty())
            out += ", color=" + edge_color[i] + ", fontcolor=" + edge_color[i];
        out += "];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace asg
