#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "asg/errors.hpp"
#include "asg/graph.hpp"
#include "asg/model.hpp"
#include "asg/verify.hpp"

namespace asg {

// One edge accepted by relation repair or phase supplementation.
struct AddedEdge {
    std::string subject;
    std::string object;
    RelationKind kind = RelationKind::RD;
    std::uint64_t seq = 0;

    friend bool operator==(const AddedEdge&, const AddedEdge&) = default;
};

struct RelationRepairResult {
    AttackScenarioGraph graph;
    std::vector<AddedEdge> added;  // in acceptance order
    bool rational = false;         // verify verdict when repair stopped
};

struct SupplementResult {
    AttackScenarioGraph graph;
    std::vector<std::string> added_nodes;
    std::vector<AddedEdge> added_edges;
    // Verify verdict on `graph`. False doubles as the not-rational flag: the
    // budget ran out (or the model emitted STOP) before the phase appeared.
    bool rational = false;
};

namespace detail {

// Legal (subject, object) assignment of kind k between an earlier and a later
// node. Subjects must be processes; between two processes the earlier node
// subjects. No assignment means the kind is masked for this pair.
inline std::optional<std::pair<std::string, std::string>> legal_assignment(
    RelationKind k, const std::string& earlier_id, EntityKind earlier_kind,
    const std::string& later_id, EntityKind later_kind) {
    if (relation_legal(earlier_kind, k, later_kind))
        return std::make_pair(earlier_id, later_id);
    if (relation_legal(later_kind, k, earlier_kind))
        return std::make_pair(later_id, earlier_id);
    return std::nullopt;
}

inline std::map<std::string, int> fork_in_counts(const AttackScenarioGraph& g) {
    std::map<std::string, int> in;
    for (const auto& e : g.edges)
        if (e.kind == RelationKind::FR) ++in[e.object];
    return in;
}

// Best scoring round of the edge predictor for one focus node against a
// candidate list, honoring the legality mask, the single-fork mask, and the
// abstain threshold (a kind must outscore NO-EDGE in its own distribution).
// Ties break toward the lowest kind index, then the earliest candidate.
struct EdgeChoice {
    std::pair<std::string, std::string> placement;
    RelationKind kind = RelationKind::RD;
    double prob = -1.0;
};

inline std::optional<EdgeChoice> best_edge(
    const GeneratorModel& m, const FeatureVector& summary, const FeatureVector& focus,
    const std::string& focus_id, EntityKind focus_kind,
    const AttackScenarioGraph& context, const std::vector<Segment>& bands,
    const std::vector<std::string>& candidates,
    const std::map<std::string, int>& fork_in) {
    std::optional<EdgeChoice> best;
    for (const auto& cid : candidates) {
        const EntityKind ckind = require_node(context, cid).kind;
        const FeatureVector ce = node_embedding(context, bands, cid);
        const std::vector<double> p = m.edge_distribution(summary, focus, ce);
        for (int kc = 0; kc < kRelationKindCount; ++kc) {
            if (p[kc] <= p[kNoEdgeClass]) continue;
            const RelationKind rk = static_cast<RelationKind>(kc);
            const auto dir = legal_assignment(rk, cid, ckind, focus_id, focus_kind);
            if (!dir) continue;
            if (rk == RelationKind::FR) {
                const auto it = fork_in.find(dir->second);
                if (it != fork_in.end() && it->second > 0) continue;
            }
            const bool wins =
                !best || p[kc] > best->prob ||
                (p[kc] == best->prob && kc < static_cast<int>(best->kind));
            if (wins) best = EdgeChoice{*dir, rk, p[kc]};
        }
    }
    return best;
}

}  // namespace detail

// Attaches free nodes and reconnects fragments by asking the edge predictor
// for one relation per candidate. Candidates are the free nodes plus the
// highest-total-degree node of every fragment beyond the largest, processed
// in canonical order; each is scored at its canonical serialization position
// (prefix features, previous k nodes as partners) so repair mirrors the
// generative story the model was trained on. Accepted edges append to the end
// of the stream. Stops once verification turns rational.
inline RelationRepairResult repair_relations(const AttackScenarioGraph& g,
                                             const GeneratorModel& m) {
    if (!m.trained) throw ModelError("generator model is not trained");
    RelationRepairResult out;
    out.rational = verify(g).rational;

    std::set<std::string> cand_set;
    for (const auto& id : free_nodes(g)) cand_set.insert(id);
    const auto frags = fragments(g);
    for (std::size_t i = 1; i < frags.size(); ++i) {
        std::string best;
        int best_degree = -1;
        for (const auto& id : frags[i]) {  // members sorted, ties keep lowest id
            const int d = degree(g, id);
            if (d > best_degree) {
                best_degree = d;
                best = id;
            }
        }
        cand_set.insert(best);
    }

    AttackScenarioGraph work = g;
    if (cand_set.empty()) {
        out.graph = std::move(work);
        return out;
    }
    std::vector<std::string> cands;
    for (const auto& id : canonical_order(g))
        if (cand_set.count(id)) cands.push_back(id);

    auto fork_in = detail::fork_in_counts(work);
    for (const auto& fid : cands) {
        const std::vector<std::string> order = canonical_order(work);
        const std::size_t pos =
            std::find(order.begin(), order.end(), fid) - order.begin();
        AttackScenarioGraph prefix;
        const std::set<std::string> placed(order.begin(), order.begin() + pos);
        for (const auto& n : work.nodes)
            if (placed.count(n.id)) prefix.nodes.push_back(n);
        for (const auto& e : event_stream(work))
            if (placed.count(e.subject) && placed.count(e.object))
                prefix.edges.push_back(e);

        const auto bands = phase_bands(prefix);
        const FeatureVector summary = graph_summary(prefix, bands);
        const EntityKind fkind = require_node(work, fid).kind;
        prefix.nodes.push_back({fid, fkind, std::nullopt});
        const FeatureVector focus = node_embedding(prefix, bands, fid);

        const std::size_t lo =
            pos > static_cast<std::size_t>(m.k) ? pos - m.k : 0;
        const std::vector<std::string> partners(order.begin() + lo, order.begin() + pos);
        const auto choice = detail::best_edge(m, summary, focus, fid, fkind, prefix,
                                              bands, partners, fork_in);
        if (choice) {
            const std::uint64_t seq = work.edges.empty() ? 0 : max_seq(work) + 1;
            work.edges.push_back(
                {choice->placement.first, choice->placement.second, choice->kind, seq});
            if (choice->kind == RelationKind::FR) ++fork_in[choice->placement.second];
            out.added.push_back(
                {choice->placement.first, choice->placement.second, choice->kind, seq});
        }
        out.rational = verify(work).rational;
        if (out.rational) break;
    }
    out.graph = std::move(work);
    return out;
}

// Grows the graph until the missing phase verifies, by replaying the
// generator from the stream position just before the anchor of the next
// matched phase (or the end of the stream when no later phase matched). Each
// step places one argmax node, rounds its edges against the previous k nodes
// of the working prefix (legality and single-fork masked), re-ranks seq
// densely with the generated block in place, and re-verifies. Existing nodes
// and edges are never removed or re-typed. Budget counts generated nodes; on
// exhaustion (or a STOP prediction) the best-so-far graph returns with
// rational = false.
inline SupplementResult supplement_phase(const AttackScenarioGraph& g,
                                         const GeneratorModel& m, Phase missing,
                                         int budget = 50) {
    if (!m.trained) throw ModelError("generator model is not trained");
    SupplementResult out;
    out.graph = g;
    const auto rep = verify(g);
    out.rational = rep.rational;
    if (rep.phases_passed.count(missing) || budget <= 0) return out;

    const std::vector<Edge> base = event_stream(g);
    std::size_t insert_at = base.size();
    for (const Phase p : all_phases) {
        if (static_cast<int>(p) <= static_cast<int>(missing)) continue;
        const auto it = rep.anchors.find(p);
        if (it != rep.anchors.end()) {
            insert_at = it->second.stream_index;
            break;
        }
    }

    AttackScenarioGraph prefix;
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < insert_at; ++i) {
            seen.insert(base[i].subject);
            seen.insert(base[i].object);
        }
        for (const auto& n : g.nodes)
            if (seen.count(n.id)) prefix.nodes.push_back(n);
        prefix.edges.assign(base.begin(), base.begin() + insert_at);
    }
    // Forks anywhere in the graph bind the mask, including ones after the
    // insertion point: the block is inserted before them in the stream.
    auto fork_in = detail::fork_in_counts(g);

    std::set<std::string> used_ids;
    for (const auto& n : g.nodes) used_ids.insert(n.id);
    std::vector<Node> gen_nodes;
    std::vector<Edge> gen_edges;

    const auto assemble = [&] {
        AttackScenarioGraph full;
        full.provenance = g.provenance;
        full.nodes = g.nodes;
        full.nodes.insert(full.nodes.end(), gen_nodes.begin(), gen_nodes.end());
        std::uint64_t s = 0;
        const auto push = [&](Edge e) {
            e.seq = s++;
            full.edges.push_back(e);
        };
        for (std::size_t i = 0; i < insert_at; ++i) push(base[i]);
        for (const auto& e : gen_edges) push(e);
        for (std::size_t i = insert_at; i < base.size(); ++i) push(base[i]);
        return full;
    };

    int counter = 0;
    for (int step = 0; step < budget; ++step) {
        const auto bands = phase_bands(prefix);
        const FeatureVector summary = graph_summary(prefix, bands);
        const std::vector<double> dist = m.node_distribution(summary);
        int cls = 0;
        for (int c = 1; c < kNodeClasses; ++c)
            if (dist[c] > dist[cls]) cls = c;
        if (cls == kStopClass) break;  // the model sees nothing left to add

        std::string nid;
        do {
            nid = "gen" + std::to_string(counter++);
        } while (used_ids.count(nid));
        used_ids.insert(nid);
        const EntityKind nkind = static_cast<EntityKind>(cls);

        const std::vector<std::string> order = canonical_order(prefix);
        prefix.nodes.push_back({nid, nkind, std::nullopt});
        gen_nodes.push_back(prefix.nodes.back());
        out.added_nodes.push_back(nid);
        const FeatureVector focus = node_embedding(prefix, bands, nid);

        const std::size_t lo =
            order.size() > static_cast<std::size_t>(m.k) ? order.size() - m.k : 0;
        std::uint64_t next_seq = prefix.edges.empty() ? 0 : max_seq(prefix) + 1;
        for (std::size_t j = lo; j < order.size(); ++j) {
            const auto choice =
                detail::best_edge(m, summary, focus, nid, nkind, prefix, bands,
                                  {order[j]}, fork_in);
            if (!choice) continue;
            const Edge e{choice->placement.first, choice->placement.second,
                         choice->kind, next_seq++};
            prefix.edges.push_back(e);
            gen_edges.push_back(e);
            if (choice->kind == RelationKind::FR) ++fork_in[choice->placement.second];
            out.added_edges.push_back({e.subject, e.object, e.kind, 0});
        }

        if (verify(assemble()).phases_passed.count(missing)) break;
    }

    out.graph = assemble();
    for (std::size_t i = 0; i < out.added_edges.size(); ++i)
        out.added_edges[i].seq = insert_at + i;  // final stream positions
    out.rational = verify(out.graph).rational;
    return out;
}

}  // namespace asg
