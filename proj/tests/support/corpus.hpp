#pragma once

// Synthetic rational corpus. Every graph walks the same four-phase arc:
// trusted reads, a malicious process reading a fresh file (phase I), fork
// abuse against trusted processes (phase II), a config change plus write by
// the forked helper (phase III), and an unlink that goes silent (phase IV).
// Variation is cosmetic: id suffixes, pre-attack noise reads, an optional
// mid-arc filler write, and stray isolated files.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asg/graph.hpp"
#include "asg/repair_logic.hpp"
#include "asg/verify.hpp"
#include "random_graph.hpp"

namespace testgen {

// The fixed arc with no variation. Segments: pre [0,1], I [2,2], II [3,6],
// III [7,8], IV [9,9].
inline asg::AttackScenarioGraph corpus_template() {
    using asg::EntityKind;
    using asg::RelationKind;
    asg::AttackScenarioGraph g;
    g.provenance = "corpus-template";
    const auto node = [&](const char* id, EntityKind k) {
        g.nodes.push_back({id, k, std::nullopt});
    };
    node("tp1", EntityKind::TP);
    node("tp2", EntityKind::TP);
    node("tp3", EntityKind::TP);
    node("mp1", EntityKind::MP);
    node("mp2", EntityKind::MP);
    node("sf0", EntityKind::SF);
    node("sf1", EntityKind::SF);
    node("sf2", EntityKind::SF);
    node("mf2", EntityKind::MF);
    const auto edge = [&](const char* s, RelationKind k, const char* o) {
        g.edges.push_back({s, o, k, g.edges.size()});
    };
    edge("tp1", RelationKind::RD, "sf0");
    edge("tp2", RelationKind::RD, "sf0");
    edge("mp1", RelationKind::RD, "mf2");
    edge("mp1", RelationKind::FR, "tp2");
    edge("tp3", RelationKind::RD, "sf0");
    edge("mp1", RelationKind::FR, "tp3");
    edge("mp1", RelationKind::FR, "mp2");
    edge("mp2", RelationKind::CD, "sf1");
    edge("mp2", RelationKind::WR, "sf1");
    edge("mp2", RelationKind::UKF, "sf2");
    return g;
}

// One corpus graph: the template arc with randomized ids and noise.
inline asg::AttackScenarioGraph corpus_graph(Rng& rng, const std::string& name) {
    using asg::EntityKind;
    using asg::RelationKind;
    asg::AttackScenarioGraph g;
    g.provenance = name;
    const std::string tag = "_" + std::to_string(rng.below(100000));
    const auto id = [&](const char* stem) { return stem + tag; };
    const auto node = [&](const std::string& nid, EntityKind k) {
        g.nodes.push_back({nid, k, std::nullopt});
    };
    node(id("tp1"), EntityKind::TP);
    node(id("tp2"), EntityKind::TP);
    node(id("tp3"), EntityKind::TP);
    node(id("mp1"), EntityKind::MP);
    node(id("mp2"), EntityKind::MP);
    node(id("sf0"), EntityKind::SF);
    node(id("sf1"), EntityKind::SF);
    node(id("sf2"), EntityKind::SF);
    node(id("mf2"), EntityKind::MF);

    const auto edge = [&](const std::string& s, RelationKind k, const std::string& o) {
        g.edges.push_back({s, o, k, g.edges.size()});
    };
    edge(id("tp1"), RelationKind::RD, id("sf0"));
    edge(id("tp2"), RelationKind::RD, id("sf0"));
    const int noise = rng.range(0, 2);
    for (int i = 0; i < noise; ++i) {
        const std::string extra = "tpn" + std::to_string(i) + tag;
        node(extra, EntityKind::TP);
        edge(extra, RelationKind::RD, id("sf0"));
    }
    edge(id("mp1"), RelationKind::RD, id("mf2"));
    edge(id("mp1"), RelationKind::FR, id("tp2"));
    edge(id("tp3"), RelationKind::RD, id("sf0"));
    edge(id("mp1"), RelationKind::FR, id("tp3"));
    edge(id("mp1"), RelationKind::FR, id("mp2"));
    if (rng.chance(0.5)) {
        const std::string filler = "mf3" + tag;
        node(filler, EntityKind::MF);
        edge(id("mp1"), RelationKind::WR, filler);
    }
    edge(id("mp2"), RelationKind::CD, id("sf1"));
    edge(id("mp2"), RelationKind::WR, id("sf1"));
    edge(id("mp2"), RelationKind::UKF, id("sf2"));

    const int stray = rng.range(0, 2);
    for (int i = 0; i < stray; ++i)
        node("mfx" + std::to_string(i) + tag, EntityKind::MF);
    return g;
}

inline std::vector<asg::AttackScenarioGraph> make_corpus(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<asg::AttackScenarioGraph> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(corpus_graph(rng, "corpus-" + std::to_string(i)));
    return out;
}

// Removes every edge inside the segmentation band of `phase` and re-ranks the
// survivors densely. Returns nothing when the graph has no band for it.
inline std::optional<asg::AttackScenarioGraph> delete_phase_band(
    const asg::AttackScenarioGraph& g, asg::Phase phase) {
    const auto rep = asg::verify(g);
    const asg::Segment* band = nullptr;
    for (const auto& s : rep.segmentation)
        if (s.phase == phase) { band = &s; break; }
    if (band == nullptr) return std::nullopt;
    asg::AttackScenarioGraph out = g;
    out.edges.clear();
    for (const auto& e : g.edges)
        if (e.seq < band->first || e.seq > band->last) out.edges.push_back(e);
    return asg::logic_fix(out).graph;
}

}  // namespace testgen
