#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "asg/errors.hpp"
#include "asg/graph.hpp"

namespace asg {

// Edge comparison regime. Typed keys on the exact entity and relation kinds;
// Generalized collapses entities to their class (process/file/socket) so a
// reconstruction naming the wrong concrete kind still scores.
enum class MatchMode { Typed, Generalized };

inline std::string to_token(MatchMode m) {
    return m == MatchMode::Typed ? "typed" : "generalized";
}

// Scores for one reconstructed-vs-truth comparison. similarity is filled by
// the caller from similarity(); edge_match leaves it at zero.
struct EvalResult {
    double precision = 1.0;
    double recall = 1.0;
    double similarity = 0.0;
    std::vector<std::pair<Edge, Edge>> matched_pairs;  // (reconstructed, truth)
};

struct GraphEmbedding {
    std::vector<double> vector;
    std::string scheme;

    friend bool operator==(const GraphEmbedding&, const GraphEmbedding&) = default;
};

inline constexpr const char* kDefaultScheme = "nrh-3x128";

namespace detail {

using MatchKey = std::tuple<int, int, int>;

inline MatchKey match_key(const AttackScenarioGraph& g, const Edge& e, MatchMode mode) {
    const EntityKind s = require_node(g, e.subject).kind;
    const EntityKind o = require_node(g, e.object).kind;
    if (mode == MatchMode::Typed)
        return {static_cast<int>(s), static_cast<int>(e.kind), static_cast<int>(o)};
    return {static_cast<int>(entity_class(s)), static_cast<int>(e.kind),
            static_cast<int>(entity_class(o))};
}

}  // namespace detail

// Greedy typed-triple matching: each truth edge is consumed at most once and
// instance names never participate. 0/0 ratios are defined as 1.
inline EvalResult edge_match(const AttackScenarioGraph& recon,
                             const AttackScenarioGraph& truth,
                             MatchMode mode = MatchMode::Typed) {
    std::map<detail::MatchKey, std::vector<std::size_t>> pool;
    for (std::size_t i = 0; i < truth.edges.size(); ++i)
        pool[detail::match_key(truth, truth.edges[i], mode)].push_back(i);
    for (auto& [key, idx] : pool) std::reverse(idx.begin(), idx.end());

    EvalResult out;
    for (const Edge& e : recon.edges) {
        const auto it = pool.find(detail::match_key(recon, e, mode));
        if (it == pool.end() || it->second.empty()) continue;
        out.matched_pairs.emplace_back(e, truth.edges[it->second.back()]);
        it->second.pop_back();
    }
    const double matched = static_cast<double>(out.matched_pairs.size());
    out.precision = recon.edges.empty() ? 1.0 : matched / recon.edges.size();
    out.recall = truth.edges.empty() ? 1.0 : matched / truth.edges.size();
    return out;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Scheme identifiers look like "nrh-<rounds>x<buckets>".
inline std::pair<int, int> parse_scheme(const std::string& scheme) {
    const std::string prefix = "nrh-";
    const auto fail = [&] {
        throw SchemeError("unknown embedding scheme: " + scheme);
    };
    if (scheme.rfind(prefix, 0) != 0) fail();
    const auto x = scheme.find('x', prefix.size());
    if (x == std::string::npos) fail();
    int rounds = 0, buckets = 0;
    try {
        std::size_t used = 0;
        rounds = std::stoi(scheme.substr(prefix.size(), x - prefix.size()), &used);
        if (used != x - prefix.size()) fail();
        buckets = std::stoi(scheme.substr(x + 1), &used);
        if (used != scheme.size() - x - 1) fail();
    } catch (const SchemeError&) {
        throw;
    } catch (const std::exception&) {
        fail();
    }
    if (rounds < 1 || buckets < 1) fail();
    return {rounds, buckets};
}

}  // namespace detail

// Iterated neighborhood-relabeling histogram. Each round relabels a node by
// hashing its kind together with the sorted multiset of (relation kind,
// neighbor label) over incident edges, then the per-round label counts are
// bucketed, concatenated, and L2-normalized. Ids never enter a hash, so the
// embedding is invariant under node renaming.
inline GraphEmbedding embed(const AttackScenarioGraph& g,
                            const std::string& scheme = kDefaultScheme) {
    const auto [rounds, buckets] = detail::parse_scheme(scheme);
    GraphEmbedding out;
    out.scheme = scheme;
    out.vector.assign(static_cast<std::size_t>(rounds) * buckets, 0.0);
    if (g.nodes.empty()) return out;

    std::map<std::string, std::uint64_t> label;
    for (const Node& n : g.nodes) label[n.id] = detail::fnv1a(to_token(n.kind));

    for (int r = 0; r < rounds; ++r) {
        std::map<std::string, std::uint64_t> next;
        for (const Node& n : g.nodes) {
            std::vector<std::pair<int, std::uint64_t>> neigh;
            for (const Edge& e : g.edges) {
                if (e.subject == n.id) neigh.emplace_back(static_cast<int>(e.kind), label.at(e.object));
                if (e.object == n.id) neigh.emplace_back(static_cast<int>(e.kind), label.at(e.subject));
            }
            std::sort(neigh.begin(), neigh.end());
            std::string sig = to_token(n.kind);
            for (const auto& [kind, l] : neigh)
                sig += "|" + std::to_string(kind) + ":" + std::to_string(l);
            next[n.id] = detail::fnv1a(sig);
        }
        label = std::move(next);
        for (const Node& n : g.nodes)
            out.vector[r * buckets + label.at(n.id) % buckets] += 1.0;
    }

    double norm = 0.0;
    for (const double v : out.vector) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : out.vector) v /= norm;
    return out;
}

// Cosine over embeddings. Empty graphs embed to the zero vector, where the
// cosine is undefined; by convention two empties agree perfectly and an empty
// never resembles a populated graph.
inline double similarity(const AttackScenarioGraph& a, const AttackScenarioGraph& b,
                         const std::string& scheme = kDefaultScheme) {
    const GraphEmbedding ea = embed(a, scheme);
    const GraphEmbedding eb = embed(b, scheme);
    if (a.nodes.empty() && b.nodes.empty()) return 1.0;
    if (a.nodes.empty() || b.nodes.empty()) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < ea.vector.size(); ++i) dot += ea.vector[i] * eb.vector[i];
    return dot;
}

}  // namespace asg
