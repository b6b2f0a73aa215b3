#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "asg/errors.hpp"

namespace asg {

// Entity kinds. Processes act, files and sockets are acted upon.
enum class EntityKind : std::uint8_t { TP, MP, SF, TF, MF, SO };

// Relation kinds. UKF/UKP are both "unlink", split by object class so the
// legality table stays a function of the relation kind alone.
enum class RelationKind : std::uint8_t { RD, WR, EX, CD, UKF, ST, RF, FR, IJ, UKP };

enum class EntityClass : std::uint8_t { Process, File, Socket };

constexpr int kEntityKindCount = 6;
constexpr int kRelationKindCount = 10;

constexpr const char* to_token(EntityKind k) {
    switch (k) {
        case EntityKind::TP: return "TP";
        case EntityKind::MP: return "MP";
        case EntityKind::SF: return "SF";
        case EntityKind::TF: return "TF";
        case EntityKind::MF: return "MF";
        case EntityKind::SO: return "SO";
    }
    return "?";
}

constexpr const char* to_token(RelationKind k) {
    switch (k) {
        case RelationKind::RD: return "RD";
        case RelationKind::WR: return "WR";
        case RelationKind::EX: return "EX";
        case RelationKind::CD: return "CD";
        case RelationKind::UKF: return "UKF";
        case RelationKind::ST: return "ST";
        case RelationKind::RF: return "RF";
        case RelationKind::FR: return "FR";
        case RelationKind::IJ: return "IJ";
        case RelationKind::UKP: return "UKP";
    }
    return "?";
}

inline std::optional<EntityKind> entity_kind_from_token(const std::string& s) {
    static const std::map<std::string, EntityKind> table = {
        {"TP", EntityKind::TP}, {"MP", EntityKind::MP}, {"SF", EntityKind::SF},
        {"TF", EntityKind::TF}, {"MF", EntityKind::MF}, {"SO", EntityKind::SO},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

inline std::optional<RelationKind> relation_kind_from_token(const std::string& s) {
    static const std::map<std::string, RelationKind> table = {
        {"RD", RelationKind::RD}, {"WR", RelationKind::WR}, {"EX", RelationKind::EX},
        {"CD", RelationKind::CD}, {"UKF", RelationKind::UKF}, {"ST", RelationKind::ST},
        {"RF", RelationKind::RF}, {"FR", RelationKind::FR}, {"IJ", RelationKind::IJ},
        {"UKP", RelationKind::UKP},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

constexpr EntityClass entity_class(EntityKind k) {
    switch (k) {
        case EntityKind::TP:
        case EntityKind::MP: return EntityClass::Process;
        case EntityKind::SF:
        case EntityKind::TF:
        case EntityKind::MF: return EntityClass::File;
        case EntityKind::SO: return EntityClass::Socket;
    }
    return EntityClass::Process;
}

// Object class each relation kind requires. Subjects are always processes.
constexpr EntityClass object_class(RelationKind k) {
    switch (k) {
        case RelationKind::RD:
        case RelationKind::WR:
        case RelationKind::EX:
        case RelationKind::CD:
        case RelationKind::UKF: return EntityClass::File;
        case RelationKind::ST:
        case RelationKind::RF: return EntityClass::Socket;
        case RelationKind::FR:
        case RelationKind::IJ:
        case RelationKind::UKP: return EntityClass::Process;
    }
    return EntityClass::File;
}

constexpr bool relation_legal(EntityKind subject, RelationKind k, EntityKind object) {
    return entity_class(subject) == EntityClass::Process &&
           entity_class(object) == object_class(k);
}

struct Node {
    std::string id;
    EntityKind kind = EntityKind::TP;
    std::optional<std::string> label;

    bool operator==(const Node&) const = default;
};

struct Edge {
    std::string subject;
    std::string object;
    RelationKind kind = RelationKind::RD;
    std::uint64_t seq = 0;

    bool operator==(const Edge&) const = default;
};

// Typed temporal multigraph. Treated as an immutable value: every operation
// that changes a graph returns a new one.
struct AttackScenarioGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::optional<std::string> provenance;

    bool operator==(const AttackScenarioGraph&) const = default;
};

// Seq window. Bounds are strict: before(s) is seq < s, after(s) is seq > s.
struct Window {
    enum class Mode : std::uint8_t { All, Before, After };

    Mode mode = Mode::All;
    std::uint64_t pivot = 0;

    static Window all() { return {Mode::All, 0}; }
    static Window before(std::uint64_t s) { return {Mode::Before, s}; }
    static Window after(std::uint64_t s) { return {Mode::After, s}; }

    bool contains(std::uint64_t seq) const {
        switch (mode) {
            case Mode::All: return true;
            case Mode::Before: return seq < pivot;
            case Mode::After: return seq > pivot;
        }
        return false;
    }
};

inline const Node* find_node(const AttackScenarioGraph& g, const std::string& id) {
    for (const auto& n : g.nodes)
        if (n.id == id) return &n;
    return nullptr;
}

inline const Node& require_node(const AttackScenarioGraph& g, const std::string& id) {
    const Node* n = find_node(g, id);
    if (!n) throw NodeNotFound(id);
    return *n;
}

// Edges ordered by seq; ties broken by (subject id, object id, kind token) so
// the stream is a total order regardless of input edge order.
inline std::vector<Edge> event_stream(const AttackScenarioGraph& g) {
    std::vector<Edge> out = g.edges;
    std::stable_sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
        if (a.seq != b.seq) return a.seq < b.seq;
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.object != b.object) return a.object < b.object;
        return std::string_view(to_token(a.kind)) < std::string_view(to_token(b.kind));
    });
    return out;
}

// Degree counts edge endpoints, so a self-loop contributes 2 (one in, one out).
inline int degree(const AttackScenarioGraph& g, const std::string& id,
                  Window w = Window::all()) {
    require_node(g, id);
    int d = 0;
    for (const auto& e : g.edges) {
        if (!w.contains(e.seq)) continue;
        if (e.subject == id) ++d;
        if (e.object == id) ++d;
    }
    return d;
}

inline int in_degree(const AttackScenarioGraph& g, const std::string& id,
                     Window w = Window::all()) {
    require_node(g, id);
    int d = 0;
    for (const auto& e : g.edges)
        if (w.contains(e.seq) && e.object == id) ++d;
    return d;
}

inline int out_degree(const AttackScenarioGraph& g, const std::string& id,
                      Window w = Window::all()) {
    require_node(g, id);
    int d = 0;
    for (const auto& e : g.edges)
        if (w.contains(e.seq) && e.subject == id) ++d;
    return d;
}

// Relation kinds appearing between a and b in the window, either direction.
inline std::set<RelationKind> interaction(const AttackScenarioGraph& g,
                                          const std::string& a,
                                          const std::string& b,
                                          Window w = Window::all()) {
    require_node(g, a);
    require_node(g, b);
    std::set<RelationKind> kinds;
    for (const auto& e : g.edges) {
        if (!w.contains(e.seq)) continue;
        bool forward = e.subject == a && e.object == b;
        bool reverse = e.subject == b && e.object == a;
        if (forward || reverse) kinds.insert(e.kind);
    }
    return kinds;
}

// Weakly connected components. Ordered by size descending, then by smallest
// member id; members sorted by id. Isolated nodes come out as singletons.
inline std::vector<std::vector<std::string>> fragments(const AttackScenarioGraph& g) {
    std::unordered_map<std::string, std::string> parent;
    for (const auto& n : g.nodes) parent[n.id] = n.id;

    auto find = [&](std::string x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](const std::string& a, const std::string& b) {
        std::string ra = find(a), rb = find(b);
        if (ra != rb) parent[ra] = rb;
    };

    for (const auto& e : g.edges) {
        if (parent.count(e.subject) && parent.count(e.object)) unite(e.subject, e.object);
    }

    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& n : g.nodes) groups[find(n.id)].push_back(n.id);

    std::vector<std::vector<std::string>> out;
    out.reserve(groups.size());
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return out;
}

inline std::vector<std::string> free_nodes(const AttackScenarioGraph& g) {
    std::set<std::string> touched;
    for (const auto& e : g.edges) {
        touched.insert(e.subject);
        touched.insert(e.object);
    }
    std::vector<std::string> out;
    for (const auto& n : g.nodes)
        if (!touched.count(n.id)) out.push_back(n.id);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::uint64_t max_seq(const AttackScenarioGraph& g) {
    std::uint64_t m = 0;
    for (const auto& e : g.edges) m = std::max(m, e.seq);
    return m;
}

// Structural validation used by deserialization and the builders: unique node
// ids, declared endpoints, legal relation kinds. `path_prefix` seeds the field
// path in raised SchemaErrors.
inline void validate_graph(const AttackScenarioGraph& g,
                           const std::string& path_prefix = {}) {
    std::unordered_map<std::string, EntityKind> kinds;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        if (n.id.empty())
            throw SchemaError("empty node id", 0,
                              path_prefix + "nodes[" + std::to_string(i) + "].id");
        if (!kinds.emplace(n.id, n.kind).second)
            throw SchemaError("duplicate node id: " + n.id, 0,
                              path_prefix + "nodes[" + std::to_string(i) + "].id");
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto& e = g.edges[i];
        const std::string where = path_prefix + "edges[" + std::to_string(i) + "]";
        auto s = kinds.find(e.subject);
        if (s == kinds.end())
            throw SchemaError("edge subject not declared: " + e.subject, 0,
                              where + ".subject");
        auto o = kinds.find(e.object);
        if (o == kinds.end())
            throw SchemaError("edge object not declared: " + e.object, 0,
                              where + ".object");
        if (!relation_legal(s->second, e.kind, o->second))
            throw SchemaError(std::string("illegal relation ") + to_token(e.kind) +
                                  " from " + to_token(s->second) + " to " +
                                  to_token(o->second),
                              0, where + ".kind");
    }
}

}  // namespace asg
