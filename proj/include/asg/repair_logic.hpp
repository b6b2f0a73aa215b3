#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "asg/graph.hpp"

namespace asg {

// One rewrite applied by logic_fix, for the audit trail. `subject`/`object`
// name the touched edge's endpoints; both are empty for whole-graph fixes.
struct LogicFix {
    std::string rule;
    std::string subject;
    std::string object;
    std::string detail;

    bool operator==(const LogicFix&) const = default;
};

struct LogicFixResult {
    AttackScenarioGraph graph;
    std::vector<LogicFix> fixes;
};

// A process-lifecycle consistency rule. `violations` counts offending sites
// (the post-repair re-check expects zero everywhere); `fix` rewrites the graph
// in place and appends one LogicFix per semantic change it made. Fixers only
// mutate edge kinds and seqs: node set, edge count, and every edge's
// subject/object are preserved.
struct LogicRule {
    std::string name;
    std::function<int(const AttackScenarioGraph&)> violations;
    std::function<bool(AttackScenarioGraph&, std::vector<LogicFix>&)> fix;
};

namespace detail {

// Edge indices in event-stream order (same comparator as event_stream, with
// storage order as the final tie-break via stable_sort).
inline std::vector<std::size_t> stream_order(const AttackScenarioGraph& g) {
    std::vector<std::size_t> idx(g.edges.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t ia, std::size_t ib) {
        const Edge& a = g.edges[ia];
        const Edge& b = g.edges[ib];
        if (a.seq != b.seq) return a.seq < b.seq;
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.object != b.object) return a.object < b.object;
        return std::string_view(to_token(a.kind)) < std::string_view(to_token(b.kind));
    });
    return idx;
}

// position[i] = rank of edge i in the stream.
inline std::vector<std::size_t> stream_positions(const AttackScenarioGraph& g) {
    auto order = stream_order(g);
    std::vector<std::size_t> pos(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) pos[order[r]] = r;
    return pos;
}

// child id -> indices of its incoming Fork edges, earliest in stream first.
inline std::map<std::string, std::vector<std::size_t>> incoming_forks(
    const AttackScenarioGraph& g) {
    auto pos = stream_positions(g);
    std::map<std::string, std::vector<std::size_t>> forks;
    for (std::size_t i = 0; i < g.edges.size(); ++i)
        if (g.edges[i].kind == RelationKind::FR) forks[g.edges[i].object].push_back(i);
    for (auto& [child, list] : forks)
        std::sort(list.begin(), list.end(),
                  [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
    return forks;
}

// child id -> the fork edge that counts as its creation (earliest in stream).
// Only malicious processes are constrained: a trusted process is a system
// binary that exists before the attack, so a fork targeting it spawns a fresh
// instance and its earlier events are legitimate history (which several flag
// rules rely on as backward evidence). A malicious process cannot act before
// the fork that brings it into being.
inline std::unordered_map<std::string, std::size_t> creating_fork(
    const AttackScenarioGraph& g) {
    std::unordered_map<std::string, EntityKind> kinds;
    for (const auto& n : g.nodes) kinds.emplace(n.id, n.kind);
    std::unordered_map<std::string, std::size_t> out;
    for (const auto& [child, list] : incoming_forks(g)) {
        auto it = kinds.find(child);
        if (it != kinds.end() && it->second == EntityKind::MP)
            out.emplace(child, list.front());
    }
    return out;
}

// Cycles in the constrained child -> parent map (malicious children only;
// trusted processes never deadlock the ordering pass since their edges are
// unconstrained). Each node has at most one parent, so cycles are
// vertex-disjoint; returns the cycle-closing edge to re-type per cycle (the
// one latest in the stream).
inline std::vector<std::size_t> fork_cycle_victims(const AttackScenarioGraph& g) {
    auto fork = creating_fork(g);
    auto pos = stream_positions(g);
    std::map<std::string, int> state;  // 0 new, 1 on path, 2 done
    std::vector<std::size_t> victims;

    std::vector<std::string> children;
    children.reserve(fork.size());
    for (const auto& [child, _] : fork) children.push_back(child);
    std::sort(children.begin(), children.end());

    for (const auto& start : children) {
        if (state[start] != 0) continue;
        std::vector<std::string> path;
        std::string cur = start;
        while (true) {
            auto it = fork.find(cur);
            if (it == fork.end() || state[cur] == 2) break;  // roots out or merges into done
            if (state[cur] == 1) {
                auto at = std::find(path.begin(), path.end(), cur);
                std::size_t victim = fork.at(*at);
                for (auto jt = at; jt != path.end(); ++jt) {
                    std::size_t ei = fork.at(*jt);
                    if (pos[ei] >= pos[victim]) victim = ei;
                }
                victims.push_back(victim);
                break;
            }
            state[cur] = 1;
            path.push_back(cur);
            cur = g.edges[it->second].subject;
        }
        for (const auto& p : path) state[p] = 2;
    }
    return victims;
}

// Stream order with every edge whose subject is a forked child placed after
// that child's creating fork. Deferred edges land immediately after the fork,
// keeping their relative order; fork chains release depth-first. Edges whose
// fork never places (only possible with fork cycles, which acyclic_fork
// removes first) are appended in stream order.
inline std::vector<std::size_t> child_respecting_order(const AttackScenarioGraph& g) {
    auto order = stream_order(g);
    auto fork = creating_fork(g);
    std::vector<char> placed(g.edges.size(), 0);
    std::unordered_map<std::size_t, std::vector<std::size_t>> waiting;
    std::vector<std::size_t> result;
    result.reserve(order.size());

    std::function<void(std::size_t)> place = [&](std::size_t ei) {
        result.push_back(ei);
        placed[ei] = 1;
        auto w = waiting.find(ei);
        if (w == waiting.end()) return;
        auto released = std::move(w->second);
        waiting.erase(w);
        for (std::size_t d : released) place(d);
    };

    for (std::size_t ei : order) {
        auto it = fork.find(g.edges[ei].subject);
        if (it != fork.end() && it->second != ei && !placed[it->second]) {
            waiting[it->second].push_back(ei);
            continue;
        }
        place(ei);
    }
    for (std::size_t ei : order)
        if (!placed[ei]) result.push_back(ei);
    return result;
}

inline std::string seq_note(const Edge& e) {
    return "seq " + std::to_string(e.seq);
}

}  // namespace detail

// Consistency rules in the order logic_fix applies them.
inline const std::vector<LogicRule>& logic_rules() {
    static const std::vector<LogicRule> rules = {
        // A process is created at most once: of several incoming Fork edges the
        // earliest wins, the rest become Inject (same endpoint classes, so the
        // rewrite is always legal).
        {"single_fork",
         [](const AttackScenarioGraph& g) {
             int hits = 0;
             for (const auto& [child, list] : detail::incoming_forks(g))
                 hits += static_cast<int>(list.size()) - 1;
             return hits;
         },
         [](AttackScenarioGraph& g, std::vector<LogicFix>& fixes) {
             bool changed = false;
             for (const auto& [child, list] : detail::incoming_forks(g)) {
                 for (std::size_t i = 1; i < list.size(); ++i) {
                     Edge& e = g.edges[list[i]];
                     e.kind = RelationKind::IJ;
                     fixes.push_back({"single_fork", e.subject, e.object,
                                      "duplicate fork (" + detail::seq_note(e) +
                                          ") re-typed to inject"});
                     changed = true;
                 }
             }
             return changed;
         }},
        // Fork ancestry of malicious processes cannot loop (a process cannot
        // create its own creator). The latest fork in each ancestry cycle
        // becomes Inject, which also guarantees the ordering pass below always
        // finds a consistent placement.
        {"acyclic_fork",
         [](const AttackScenarioGraph& g) {
             return static_cast<int>(detail::fork_cycle_victims(g).size());
         },
         [](AttackScenarioGraph& g, std::vector<LogicFix>& fixes) {
             bool changed = false;
             for (std::size_t ei : detail::fork_cycle_victims(g)) {
                 Edge& e = g.edges[ei];
                 e.kind = RelationKind::IJ;
                 fixes.push_back({"acyclic_fork", e.subject, e.object,
                                  "cycle-closing fork (" + detail::seq_note(e) +
                                      ") re-typed to inject"});
                 changed = true;
             }
             return changed;
         }},
        // A forked malicious process only acts after its creation: edges it
        // subjects that precede its creating fork in the stream move to just
        // after the fork. Seqs are rewritten to stream positions of the
        // repaired order. Trusted processes are exempt (see creating_fork).
        {"child_after_fork",
         [](const AttackScenarioGraph& g) {
             auto fork = detail::creating_fork(g);
             auto pos = detail::stream_positions(g);
             int hits = 0;
             for (std::size_t i = 0; i < g.edges.size(); ++i) {
                 auto it = fork.find(g.edges[i].subject);
                 if (it != fork.end() && it->second != i && pos[i] < pos[it->second]) ++hits;
             }
             return hits;
         },
         [](AttackScenarioGraph& g, std::vector<LogicFix>& fixes) {
             auto fork = detail::creating_fork(g);
             auto pos = detail::stream_positions(g);
             auto order = detail::child_respecting_order(g);
             std::vector<std::size_t> rank(g.edges.size());
             for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
             bool moved = false;
             for (std::size_t i = 0; i < g.edges.size(); ++i) {
                 auto it = fork.find(g.edges[i].subject);
                 if (it == fork.end() || it->second == i) continue;
                 if (pos[i] >= pos[it->second] || rank[i] <= rank[it->second]) continue;
                 const Edge& e = g.edges[i];
                 fixes.push_back({"child_after_fork", e.subject, e.object,
                                  "first use at " + detail::seq_note(e) +
                                      " moved after the creating fork (" +
                                      detail::seq_note(g.edges[it->second]) + ")"});
                 moved = true;
             }
             if (!moved) return false;
             for (std::size_t r = 0; r < order.size(); ++r) g.edges[order[r]].seq = r;
             return true;
         }},
        // Seqs form a dense total order: after repair every edge's seq equals
        // its stream position, so ties are resolved and gaps closed.
        {"dense_seq",
         [](const AttackScenarioGraph& g) {
             auto order = detail::stream_order(g);
             int hits = 0;
             for (std::size_t r = 0; r < order.size(); ++r)
                 if (g.edges[order[r]].seq != r) ++hits;
             return hits;
         },
         [](AttackScenarioGraph& g, std::vector<LogicFix>& fixes) {
             auto order = detail::stream_order(g);
             int changed = 0;
             for (std::size_t r = 0; r < order.size(); ++r) {
                 if (g.edges[order[r]].seq != r) ++changed;
                 g.edges[order[r]].seq = r;
             }
             if (changed == 0) return false;
             fixes.push_back({"dense_seq", "", "",
                              "re-ranked sequence numbers (" + std::to_string(changed) +
                                  " changed)"});
             return true;
         }},
    };
    return rules;
}

// Applies the rule catalog to fixpoint. Converges in at most three sweeps:
// the first stabilizes the fork structure (re-typing can shift stream order,
// as the stream comparator includes the kind token), the second stabilizes
// ordering and numbering, the third observes no violations.
inline LogicFixResult logic_fix(AttackScenarioGraph g) {
    LogicFixResult out;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& rule : logic_rules())
            if (rule.violations(g) > 0) changed |= rule.fix(g, out.fixes);
    }
    out.graph = std::move(g);
    return out;
}

}  // namespace asg
