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
#include "asg/graph_io.hpp"
#include "asg/rule_catalog.hpp"
#include "asg/rules.hpp"

namespace asg {

// One rule matched at one anchor edge. stream_index disambiguates edges
// sharing a sequence number (position in event_stream of the graph).
struct FlagEventMatch {
    std::string rule;
    Phase phase = Phase::InitialIntrusion;
    std::uint64_t seq = 0;
    std::size_t stream_index = 0;
    std::string subject, object;

    friend bool operator==(const FlagEventMatch&, const FlagEventMatch&) = default;
};

// Inclusive seq band. No phase means the band precedes the first anchor.
struct Segment {
    std::uint64_t first = 0;
    std::uint64_t last = 0;
    std::optional<Phase> phase;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct VerificationReport {
    std::vector<FlagEventMatch> matches;      // by (seq, catalog order, stream index)
    std::set<Phase> phases_passed;
    std::map<Phase, FlagEventMatch> anchors;  // earliest match per passed phase
    bool rational = false;
    std::vector<Segment> segmentation;        // present when any phase passed
    std::uint64_t graph_fingerprint = 0;      // ties the report to its graph

    friend bool operator==(const VerificationReport&, const VerificationReport&) = default;
};

namespace detail {

// Per-graph indexes so constraint checks avoid rescanning the edge list.
class MatchContext {
  public:
    explicit MatchContext(const AttackScenarioGraph& g)
        : g_(&g), stream_(event_stream(g)) {
        for (const auto& n : g.nodes) kind_.emplace(n.id, n.kind);
        for (const auto& e : stream_) {
            pair_edges_[pair_key(e.subject, e.object)].push_back({e.seq, e.kind});
            incident_[e.subject].push_back(e.seq);
            if (e.object != e.subject) incident_[e.object].push_back(e.seq);
            in_[e.object].push_back(e.seq);
        }
    }

    const AttackScenarioGraph& graph() const { return *g_; }
    const std::vector<Edge>& stream() const { return stream_; }
    EntityKind kind_of(const std::string& id) const { return kind_.at(id); }

    bool any_incident(const std::string& id, Window w) const {
        return any_in_window(incident_, id, w);
    }

    bool any_inbound(const std::string& id, Window w) const {
        return any_in_window(in_, id, w);
    }

    bool pair_has_kind(const std::string& a, const std::string& b, RelationKind k,
                       Window w) const {
        const auto* v = pair_list(a, b);
        if (!v) return false;
        for (const auto& [seq, kind] : *v)
            if (kind == k && w.contains(seq)) return true;
        return false;
    }

    bool pair_has_all(const std::string& a, const std::string& b,
                      const std::vector<RelationKind>& ks, Window w) const {
        for (const auto k : ks)
            if (!pair_has_kind(a, b, k, w)) return false;
        return true;
    }

    bool pair_nonempty(const std::string& a, const std::string& b, Window w) const {
        const auto* v = pair_list(a, b);
        if (!v) return false;
        for (const auto& [seq, kind] : *v)
            if (w.contains(seq)) return true;
        return false;
    }

  private:
    static std::pair<std::string, std::string> pair_key(const std::string& a,
                                                        const std::string& b) {
        return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    const std::vector<std::pair<std::uint64_t, RelationKind>>* pair_list(
        const std::string& a, const std::string& b) const {
        const auto it = pair_edges_.find(pair_key(a, b));
        return it == pair_edges_.end() ? nullptr : &it->second;
    }

    static bool any_in_window(const std::map<std::string, std::vector<std::uint64_t>>& table,
                              const std::string& id, Window w) {
        const auto it = table.find(id);
        if (it == table.end() || it->second.empty()) return false;
        switch (w.mode) {  // seq lists are sorted ascending
            case Window::Mode::All: return true;
            case Window::Mode::Before: return it->second.front() < w.pivot;
            case Window::Mode::After: return it->second.back() > w.pivot;
        }
        return false;
    }

    const AttackScenarioGraph* g_;
    std::vector<Edge> stream_;
    std::map<std::string, EntityKind> kind_;
    std::map<std::pair<std::string, std::string>,
             std::vector<std::pair<std::uint64_t, RelationKind>>>
        pair_edges_;
    std::map<std::string, std::vector<std::uint64_t>> incident_;
    std::map<std::string, std::vector<std::uint64_t>> in_;
};

// Variable environment during clause evaluation; at most a handful deep.
using Env = std::vector<std::pair<std::string, std::string>>;

inline const std::string& env_lookup(const Env& env, const std::string& var) {
    for (const auto& [v, id] : env)
        if (v == var) return id;
    throw Error("unbound variable '" + var + "' in rule evaluation");
}

inline bool env_holds(const Env& env, const std::string& id) {
    for (const auto& [v, bound] : env)
        if (bound == id) return true;
    return false;
}

class RuleEvaluator {
  public:
    RuleEvaluator(const MatchContext& ctx, const RuleCatalog& cat,
                  const std::vector<std::vector<FlagEventMatch>>& per_rule)
        : ctx_(&ctx), cat_(&cat), per_rule_(&per_rule) {}

    bool matches_at(const FlagRule& r, const Edge& anchor) const {
        if (std::find(r.anchor_kinds.begin(), r.anchor_kinds.end(), anchor.kind) ==
            r.anchor_kinds.end())
            return false;
        const auto sk = ctx_->kind_of(anchor.subject);
        const auto ok = ctx_->kind_of(anchor.object);
        if (std::find(r.subject_kinds.begin(), r.subject_kinds.end(), sk) ==
            r.subject_kinds.end())
            return false;
        if (std::find(r.object_kinds.begin(), r.object_kinds.end(), ok) ==
            r.object_kinds.end())
            return false;
        Env env{{r.subject_var, anchor.subject}, {r.object_var, anchor.object}};
        for (const auto& cl : r.clauses)
            if (!eval(*cl.cond, env, cl.window, anchor.seq)) return false;
        return true;
    }

  private:
    static Window scope(ClauseWindow cw, std::uint64_t anchor_seq) {
        switch (cw) {
            case ClauseWindow::Plain: return Window::all();
            case ClauseWindow::Forward: return Window::after(anchor_seq);
            case ClauseWindow::Backward: return Window::before(anchor_seq);
        }
        return Window::all();
    }

    bool eval(const Cond& c, Env& env, ClauseWindow cw, std::uint64_t anchor_seq) const {
        const Window w = scope(cw, anchor_seq);
        switch (c.kind) {
            case CondKind::True:
                return true;
            case CondKind::Relation:
                return ctx_->pair_has_kind(env_lookup(env, c.x), env_lookup(env, c.y), c.rel, w);
            case CondKind::RelationAll:
                return ctx_->pair_has_all(env_lookup(env, c.x), env_lookup(env, c.y), c.rel_set,
                                          w);
            case CondKind::InterNonEmpty:
                return ctx_->pair_nonempty(env_lookup(env, c.x), env_lookup(env, c.y), w);
            case CondKind::InterEmpty:
                return !ctx_->pair_nonempty(env_lookup(env, c.x), env_lookup(env, c.y), w);
            case CondKind::DegreeEq0:
                return !ctx_->any_incident(env_lookup(env, c.x), w);
            case CondKind::DegreeNe0:
                return ctx_->any_incident(env_lookup(env, c.x), w);
            case CondKind::InDegreeNe0:
                return ctx_->any_inbound(env_lookup(env, c.x), w);
            case CondKind::And:
                for (const auto& ch : c.children)
                    if (!eval(*ch, env, cw, anchor_seq)) return false;
                return true;
            case CondKind::Or:
                for (const auto& ch : c.children)
                    if (eval(*ch, env, cw, anchor_seq)) return true;
                return false;
            case CondKind::ExistsFresh: {
                for (const auto& n : ctx_->graph().nodes) {
                    if (std::find(c.fresh_kinds.begin(), c.fresh_kinds.end(), n.kind) ==
                        c.fresh_kinds.end())
                        continue;
                    if (env_holds(env, n.id)) continue;
                    env.push_back({c.fresh_var, n.id});
                    const bool ok = eval(*c.children[0], env, cw, anchor_seq);
                    env.pop_back();
                    if (ok) return true;
                }
                return false;
            }
            case CondKind::ExistsEvent: {
                const auto& shared = env_lookup(env, c.x);
                std::vector<std::size_t> targets;
                if (c.event_rule.empty()) targets = cat_->of_phase(c.event_phase);
                else targets.push_back(cat_->index_of(c.event_rule));
                for (const auto t : targets)
                    for (const auto& m : (*per_rule_)[t]) {
                        // A plain-scoped event reference means "matched earlier".
                        const bool in_window = cw == ClauseWindow::Plain
                                                   ? m.seq < anchor_seq
                                                   : w.contains(m.seq);
                        if (!in_window || m.subject != shared) continue;
                        if (c.event_fresh_object && env_holds(env, m.object)) continue;
                        return true;
                    }
                return false;
            }
        }
        return false;
    }

    const MatchContext* ctx_;
    const RuleCatalog* cat_;
    const std::vector<std::vector<FlagEventMatch>>* per_rule_;
};

// Rules referenced through `event` conditions must be evaluated before their
// dependents. References were checked acyclic when the catalog was parsed.
inline std::vector<std::size_t> evaluation_order(const RuleCatalog& cat) {
    std::vector<std::vector<std::size_t>> deps(cat.rules.size());
    for (std::size_t i = 0; i < cat.rules.size(); ++i) {
        std::vector<const Cond*> stack;
        for (const auto& cl : cat.rules[i].clauses) stack.push_back(cl.cond.get());
        while (!stack.empty()) {
            const Cond* c = stack.back();
            stack.pop_back();
            for (const auto& ch : c->children) stack.push_back(ch.get());
            if (c->kind != CondKind::ExistsEvent) continue;
            if (c->event_rule.empty())
                for (const auto j : cat.of_phase(c->event_phase)) deps[i].push_back(j);
            else
                deps[i].push_back(cat.index_of(c->event_rule));
        }
    }
    std::vector<std::size_t> order;
    std::vector<int> state(cat.rules.size(), 0);
    for (std::size_t root = 0; root < cat.rules.size(); ++root) {
        if (state[root]) continue;
        std::vector<std::pair<std::size_t, std::size_t>> dfs{{root, 0}};
        state[root] = 1;
        while (!dfs.empty()) {
            auto& [n, next] = dfs.back();
            if (next < deps[n].size()) {
                const auto m = deps[n][next++];
                if (state[m] == 0) {
                    state[m] = 1;
                    dfs.push_back({m, 0});
                }
            } else {
                state[n] = 2;
                order.push_back(n);
                dfs.pop_back();
            }
        }
    }
    return order;  // post-order: dependencies first
}

inline std::vector<Segment> compute_segments(const std::map<Phase, FlagEventMatch>& anchors,
                                             std::uint64_t last_seq) {
    std::vector<std::pair<std::uint64_t, Phase>> points;
    for (const auto& [phase, m] : anchors) points.push_back({m.seq, phase});
    std::sort(points.begin(), points.end());

    std::vector<Segment> segs;
    if (points.front().first > 0) segs.push_back({0, points.front().first - 1, std::nullopt});
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto first = points[i].first;
        if (i + 1 < points.size()) {
            if (points[i + 1].first <= first) continue;  // simultaneous anchors: empty band
            segs.push_back({first, points[i + 1].first - 1, points[i].second});
        } else {
            segs.push_back({first, std::max(last_seq, first), points[i].second});
        }
    }
    return segs;
}

}  // namespace detail

// Tests every edge of the event stream as an anchor for every catalog rule.
// Matches are ordered by (seq, catalog order, stream index).
inline std::vector<FlagEventMatch> match_flag_events(const AttackScenarioGraph& g,
                                                     const RuleCatalog& cat = default_rules()) {
    validate_graph(g);
    detail::MatchContext ctx(g);
    std::vector<std::vector<FlagEventMatch>> per_rule(cat.rules.size());
    detail::RuleEvaluator eval(ctx, cat, per_rule);
    for (const auto idx : detail::evaluation_order(cat)) {
        const auto& rule = cat.rules[idx];
        for (std::size_t i = 0; i < ctx.stream().size(); ++i) {
            const auto& e = ctx.stream()[i];
            if (!eval.matches_at(rule, e)) continue;
            per_rule[idx].push_back({rule.name, rule.phase, e.seq, i, e.subject, e.object});
        }
    }
    std::vector<FlagEventMatch> all;
    for (const auto& list : per_rule)
        all.insert(all.end(), list.begin(), list.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.seq < b.seq; });
    return all;
}

// Full rationality verdict: all four phases matched, and the chosen anchors
// (earliest match per phase, catalog order breaking ties) are non-decreasing
// in phase order.
inline VerificationReport verify(const AttackScenarioGraph& g,
                                 const RuleCatalog& cat = default_rules()) {
    VerificationReport rep;
    rep.matches = match_flag_events(g, cat);
    rep.graph_fingerprint = fingerprint(g);
    for (const auto& m : rep.matches) {
        rep.phases_passed.insert(m.phase);
        rep.anchors.emplace(m.phase, m);  // first hit per phase is the earliest
    }
    rep.rational = rep.phases_passed.size() == all_phases.size();
    std::uint64_t prev = 0;
    for (const auto p : all_phases) {
        const auto it = rep.anchors.find(p);
        if (it == rep.anchors.end()) continue;
        if (it->second.seq < prev) rep.rational = false;
        prev = it->second.seq;
    }
    if (!rep.anchors.empty())
        rep.segmentation = detail::compute_segments(rep.anchors, max_seq(g));
    return rep;
}

// Recomputes the phase bands for a report produced from this same graph.
inline std::vector<Segment> segment_phases(const AttackScenarioGraph& g,
                                           const VerificationReport& rep) {
    if (fingerprint(g) != rep.graph_fingerprint)
        throw ReportMismatch("verification report does not belong to this graph");
    if (rep.anchors.empty()) return {};
    return detail::compute_segments(rep.anchors, max_seq(g));
}

}  // namespace asg
