#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asg/graph.hpp"
#include "asg/graph_io.hpp"

namespace asg {

// Exchange format ("kx/1") produced by upstream entity/relation extraction.
// This adapter owns co-reference merging and temporal ordering; it does no
// language processing of its own.

struct Mention {
    std::string text;
    std::uint64_t sent = 0;
    std::uint64_t tok = 0;

    bool operator==(const Mention&) const = default;
};

struct ExtractedEntity {
    std::string id;
    EntityKind kind = EntityKind::TP;
    std::vector<Mention> mentions;
    std::optional<std::string> coref_of;

    bool operator==(const ExtractedEntity&) const = default;
};

struct ExtractedRelation {
    std::string subject;
    std::string object;
    RelationKind kind = RelationKind::RD;
    std::uint64_t sent = 0;  // order key: (sent, tok) of the governing mention
    std::uint64_t tok = 0;

    bool operator==(const ExtractedRelation&) const = default;
};

struct ExtractionDocument {
    std::string doc_id;
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;

    bool operator==(const ExtractionDocument&) const = default;
};

inline const ExtractedEntity* find_entity(const ExtractionDocument& d,
                                          const std::string& id) {
    for (const auto& e : d.entities)
        if (e.id == id) return &e;
    return nullptr;
}

namespace detail {

inline void validate_document(const ExtractionDocument& d) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < d.entities.size(); ++i) {
        const auto& e = d.entities[i];
        const std::string path = "entities[" + std::to_string(i) + "]";
        if (e.id.empty()) throw SchemaError("empty entity id", 0, path + ".id");
        if (!ids.insert(e.id).second)
            throw SchemaError("duplicate entity id: " + e.id, 0, path + ".id");
    }
    for (std::size_t i = 0; i < d.entities.size(); ++i) {
        const auto& e = d.entities[i];
        if (e.coref_of && !ids.count(*e.coref_of))
            throw SchemaError("coref_of references undeclared entity: " + *e.coref_of,
                              0, "entities[" + std::to_string(i) + "].coref_of");
    }
    for (std::size_t i = 0; i < d.relations.size(); ++i) {
        const auto& r = d.relations[i];
        const std::string path = "relations[" + std::to_string(i) + "]";
        if (!ids.count(r.subject))
            throw SchemaError("relation subject references undeclared entity: " + r.subject,
                              0, path + ".subject");
        if (!ids.count(r.object))
            throw SchemaError("relation object references undeclared entity: " + r.object,
                              0, path + ".object");
    }
}

}  // namespace detail

inline ExtractionDocument parse_exchange(const std::string& text) {
    nlohmann::json j = detail::parse_json(text);
    if (!j.is_object()) throw SchemaError("exchange document must be an object");

    const std::string format = detail::require_string(j, "format", "");
    if (format != "kx/1")
        throw SchemaError("unsupported exchange format: " + format, 0, "format");

    ExtractionDocument d;
    d.doc_id = detail::require_string(j, "doc_id", "");

    const auto& entities = detail::require_field(j, "entities", "");
    if (!entities.is_array()) throw SchemaError("'entities' must be an array", 0, "entities");
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const std::string path = "entities[" + std::to_string(i) + "]";
        const auto& je = entities[i];
        if (!je.is_object()) throw SchemaError("entity must be an object", 0, path);
        ExtractedEntity e;
        e.id = detail::require_string(je, "id", path);
        const std::string kind = detail::require_string(je, "kind", path);
        auto ek = entity_kind_from_token(kind);
        if (!ek) throw SchemaError("unknown entity kind: " + kind, 0, path + ".kind");
        e.kind = *ek;
        const auto& mentions = detail::require_field(je, "mentions", path);
        if (!mentions.is_array())
            throw SchemaError("'mentions' must be an array", 0, path + ".mentions");
        for (std::size_t m = 0; m < mentions.size(); ++m) {
            const std::string mpath = path + ".mentions[" + std::to_string(m) + "]";
            const auto& jm = mentions[m];
            if (!jm.is_object()) throw SchemaError("mention must be an object", 0, mpath);
            Mention mention;
            mention.text = detail::require_string(jm, "text", mpath);
            mention.sent = detail::require_seq(jm, "sent", mpath);
            mention.tok = detail::require_seq(jm, "tok", mpath);
            e.mentions.push_back(std::move(mention));
        }
        if (je.contains("coref_of")) {
            if (!je["coref_of"].is_string())
                throw SchemaError("'coref_of' must be a string", 0, path + ".coref_of");
            e.coref_of = je["coref_of"].get<std::string>();
        }
        d.entities.push_back(std::move(e));
    }

    const auto& relations = detail::require_field(j, "relations", "");
    if (!relations.is_array())
        throw SchemaError("'relations' must be an array", 0, "relations");
    for (std::size_t i = 0; i < relations.size(); ++i) {
        const std::string path = "relations[" + std::to_string(i) + "]";
        const auto& jr = relations[i];
        if (!jr.is_object()) throw SchemaError("relation must be an object", 0, path);
        ExtractedRelation r;
        r.subject = detail::require_string(jr, "subject", path);
        r.object = detail::require_string(jr, "object", path);
        const std::string kind = detail::require_string(jr, "kind", path);
        auto rk = relation_kind_from_token(kind);
        if (!rk) throw SchemaError("unknown relation kind: " + kind, 0, path + ".kind");
        r.kind = *rk;
        r.sent = detail::require_seq(jr, "sent", path);
        r.tok = detail::require_seq(jr, "tok", path);
        d.relations.push_back(std::move(r));
    }

    detail::validate_document(d);
    return d;
}

inline std::string serialize_exchange(const ExtractionDocument& d) {
    nlohmann::ordered_json j;
    j["format"] = "kx/1";
    j["doc_id"] = d.doc_id;
    j["entities"] = nlohmann::ordered_json::array();
    for (const auto& e : d.entities) {
        nlohmann::ordered_json je;
        je["id"] = e.id;
        je["kind"] = to_token(e.kind);
        je["mentions"] = nlohmann::ordered_json::array();
        for (const auto& m : e.mentions)
            je["mentions"].push_back({{"text", m.text}, {"sent", m.sent}, {"tok", m.tok}});
        if (e.coref_of) je["coref_of"] = *e.coref_of;
        j["entities"].push_back(std::move(je));
    }
    j["relations"] = nlohmann::ordered_json::array();
    for (const auto& r : d.relations) {
        nlohmann::ordered_json jr;
        jr["subject"] = r.subject;
        jr["object"] = r.object;
        jr["kind"] = to_token(r.kind);
        jr["sent"] = r.sent;
        jr["tok"] = r.tok;
        j["relations"].push_back(std::move(jr));
    }
    return j.dump();
}

struct CorefMerge {
    ExtractionDocument document;
    std::vector<std::string> conflicts;  // kind disagreements, for the audit log
};

// Collapses every coreference chain onto its root entity. The root's kind
// wins; disagreeing kinds are logged, never fatal. Mentions of merged
// entities are appended to the root in document order. Idempotent.
inline CorefMerge merge_coref(const ExtractionDocument& d) {
    detail::validate_document(d);

    std::map<std::string, const ExtractedEntity*> by_id;
    for (const auto& e : d.entities) by_id[e.id] = &e;

    // Chain resolution with explicit cycle detection.
    std::map<std::string, std::string> root_of;
    for (const auto& e : d.entities) {
        if (root_of.count(e.id)) continue;
        std::vector<std::string> path;
        std::set<std::string> on_path;
        const ExtractedEntity* cur = &e;
        while (true) {
            if (root_of.count(cur->id)) {
                for (const auto& id : path) root_of[id] = root_of[cur->id];
                break;
            }
            if (!on_path.insert(cur->id).second) {
                std::vector<std::string> cycle;
                auto it = std::find(path.begin(), path.end(), cur->id);
                cycle.assign(it, path.end());
                cycle.push_back(cur->id);
                throw CorefCycleError(cycle);
            }
            path.push_back(cur->id);
            if (!cur->coref_of) {
                for (const auto& id : path) root_of[id] = cur->id;
                break;
            }
            cur = by_id.at(*cur->coref_of);
        }
    }

    CorefMerge out;
    out.document.doc_id = d.doc_id;

    for (const auto& e : d.entities) {
        if (root_of.at(e.id) != e.id) continue;
        ExtractedEntity root = e;
        root.coref_of.reset();
        for (const auto& other : d.entities) {
            if (other.id == e.id || root_of.at(other.id) != e.id) continue;
            if (other.kind != e.kind)
                out.conflicts.push_back("entity '" + other.id + "' kind " +
                                        to_token(other.kind) + " folded into '" + e.id +
                                        "' which is " + to_token(e.kind));
            root.mentions.insert(root.mentions.end(), other.mentions.begin(),
                                 other.mentions.end());
        }
        out.document.entities.push_back(std::move(root));
    }

    for (const auto& r : d.relations) {
        ExtractedRelation moved = r;
        moved.subject = root_of.at(r.subject);
        moved.object = root_of.at(r.object);
        out.document.relations.push_back(std::move(moved));
    }
    return out;
}

struct BuildResult {
    AttackScenarioGraph graph;
    std::vector<std::string> warnings;  // one entry per dropped relation
};

// Emits the preliminary graph: one node per entity (label = first mention),
// one edge per legal relation, seq = dense rank of the (sent, tok) order key
// over the kept relations. Illegal subject/object pairings are dropped with
// a warning rather than failing the document.
inline BuildResult build_graph(const ExtractionDocument& d) {
    detail::validate_document(d);
    for (std::size_t i = 0; i < d.entities.size(); ++i)
        if (d.entities[i].coref_of)
            throw SchemaError("document still carries coreference links; merge first", 0,
                              "entities[" + std::to_string(i) + "].coref_of");

    BuildResult out;
    if (!d.doc_id.empty()) out.graph.provenance = d.doc_id;

    std::map<std::string, EntityKind> kind_of;
    for (const auto& e : d.entities) {
        Node n;
        n.id = e.id;
        n.kind = e.kind;
        if (!e.mentions.empty()) n.label = e.mentions.front().text;
        kind_of[e.id] = e.kind;
        out.graph.nodes.push_back(std::move(n));
    }

    std::vector<const ExtractedRelation*> kept;
    for (const auto& r : d.relations) {
        if (!relation_legal(kind_of.at(r.subject), r.kind, kind_of.at(r.object))) {
            out.warnings.push_back(std::string("dropped illegal relation ") +
                                   to_token(r.kind) + " from '" + r.subject + "' (" +
                                   to_token(kind_of.at(r.subject)) + ") to '" + r.object +
                                   "' (" + to_token(kind_of.at(r.object)) + ")");
            continue;
        }
        kept.push_back(&r);
    }

    std::set<std::pair<std::uint64_t, std::uint64_t>> keys;
    for (const auto* r : kept) keys.insert({r->sent, r->tok});
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> rank;
    std::uint64_t next = 0;
    for (const auto& k : keys) rank[k] = next++;

    for (const auto* r : kept) {
        Edge e;
        e.subject = r->subject;
        e.object = r->object;
        e.kind = r->kind;
        e.seq = rank.at({r->sent, r->tok});
        out.graph.edges.push_back(std::move(e));
    }

    validate_graph(out.graph);
    return out;
}

}  // namespace asg
