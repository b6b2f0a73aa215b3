#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asg/errors.hpp"
#include "asg/graph.hpp"
#include "asg/verify.hpp"

namespace asg {

// Node embeddings: entity-kind one-hot (6), log1p in/out degree (2), and a
// one-hot of the phase band holding the node's first event (5: slot 0 is the
// pre-attack band). The schema hash is persisted with models so a file trained
// against a different layout is rejected on load.
constexpr int kEmbedDim = 13;
constexpr int kNodeClasses = kEntityKindCount + 1;    // entity kinds + STOP
constexpr int kEdgeClasses = kRelationKindCount + 1;  // relation kinds + NO-EDGE
constexpr int kStopClass = kEntityKindCount;
constexpr int kNoEdgeClass = kRelationKindCount;

using FeatureVector = std::array<double, kEmbedDim>;

inline std::uint64_t feature_schema_hash() {
    constexpr const char* tag = "kind6|log1p_in|log1p_out|band5";
    std::uint64_t h = 1469598103934665603ull;
    for (const char* p = tag; *p != '\0'; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 1099511628211ull;
    }
    return h;
}

// Generation order: nodes sorted by first appearance in the event stream
// (subject before object within an edge), isolated nodes last by id. Storage
// order of the node and edge vectors does not affect the result.
inline std::vector<std::string> canonical_order(const AttackScenarioGraph& g) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& e : event_stream(g)) {
        if (seen.insert(e.subject).second) order.push_back(e.subject);
        if (seen.insert(e.object).second) order.push_back(e.object);
    }
    std::vector<std::string> isolated;
    for (const auto& n : g.nodes)
        if (!seen.count(n.id)) isolated.push_back(n.id);
    std::sort(isolated.begin(), isolated.end());
    order.insert(order.end(), isolated.begin(), isolated.end());
    return order;
}

// Phase bands of a (possibly partial) graph, for feature extraction. Graphs
// with no matches segment to nothing; every band slot stays zero then.
inline std::vector<Segment> phase_bands(const AttackScenarioGraph& g) {
    if (g.edges.empty()) return {};
    return verify(g).segmentation;
}

inline FeatureVector node_embedding(const AttackScenarioGraph& g,
                                    const std::vector<Segment>& bands,
                                    const std::string& id) {
    FeatureVector f{};
    const Node* node = nullptr;
    for (const auto& n : g.nodes)
        if (n.id == id) { node = &n; break; }
    if (node == nullptr) throw NodeNotFound(id);
    f[static_cast<int>(node->kind)] = 1.0;
    f[6] = std::log1p(static_cast<double>(in_degree(g, id)));
    f[7] = std::log1p(static_cast<double>(out_degree(g, id)));
    bool touched = false;
    std::uint64_t first = 0;
    for (const auto& e : g.edges) {
        if (e.subject != id && e.object != id) continue;
        if (!touched || e.seq < first) first = e.seq;
        touched = true;
    }
    if (touched) {
        for (const auto& s : bands) {
            if (s.first <= first && first <= s.last) {
                f[8 + (s.phase ? static_cast<int>(*s.phase) : 0)] = 1.0;
                break;
            }
        }
    }
    return f;
}

// Sum of node embeddings: the generator's running description of a placed
// prefix. Empty graphs summarize to the zero vector.
inline FeatureVector graph_summary(const AttackScenarioGraph& g,
                                   const std::vector<Segment>& bands) {
    FeatureVector sum{};
    for (const auto& n : g.nodes) {
        const FeatureVector f = node_embedding(g, bands, n.id);
        for (int i = 0; i < kEmbedDim; ++i) sum[i] += f[i];
    }
    return sum;
}

inline std::vector<double> softmax(std::vector<double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : z) v /= total;
    return z;
}

// One hidden layer, tanh activation. Weights are row-major: w1[h * in + i],
// w2[o * hidden + h].
struct Mlp {
    int in = 0;
    int hidden = 0;
    int out = 0;
    std::vector<double> w1, b1, w2, b2;

    friend bool operator==(const Mlp&, const Mlp&) = default;

    void init(int in_dim, int hidden_dim, int out_dim, std::mt19937_64& gen) {
        in = in_dim;
        hidden = hidden_dim;
        out = out_dim;
        w1.assign(static_cast<std::size_t>(hidden) * in, 0.0);
        b1.assign(hidden, 0.0);
        w2.assign(static_cast<std::size_t>(out) * hidden, 0.0);
        b2.assign(out, 0.0);
        const auto unit = [&gen] { return (gen() >> 11) * 0x1.0p-53; };
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : w1) w = (unit() * 2.0 - 1.0) * s1;
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (double& w : w2) w = (unit() * 2.0 - 1.0) * s2;
    }

    // Logits; hidden activations are exposed for backpropagation.
    std::vector<double> forward(const std::vector<double>& x,
                                std::vector<double>* activations = nullptr) const {
        std::vector<double> a(hidden, 0.0);
        for (int h = 0; h < hidden; ++h) {
            double z = b1[h];
            const double* row = &w1[static_cast<std::size_t>(h) * in];
            for (int i = 0; i < in; ++i) z += row[i] * x[i];
            a[h] = std::tanh(z);
        }
        std::vector<double> z(out, 0.0);
        for (int o = 0; o < out; ++o) {
            double v = b2[o];
            const double* row = &w2[static_cast<std::size_t>(o) * hidden];
            for (int h = 0; h < hidden; ++h) v += row[h] * a[h];
            z[o] = v;
        }
        if (activations != nullptr) *activations = std::move(a);
        return z;
    }
};

// Shallow categorical predictors over graph prefixes: the node predictor maps
// a prefix summary to a distribution over the next node's kind (or STOP); the
// edge predictor maps (summary, focus embedding, candidate embedding) to a
// distribution over the relation kind linking them (or NO-EDGE).
struct GeneratorModel {
    int embed_dim = kEmbedDim;
    int k = 10;  // candidate window: a new node may link to its previous k nodes
    int hidden = 32;
    bool trained = false;
    std::uint64_t feature_schema = feature_schema_hash();
    Mlp node_predictor;
    Mlp edge_predictor;

    friend bool operator==(const GeneratorModel&, const GeneratorModel&) = default;

    std::vector<double> node_distribution(const FeatureVector& summary) const {
        return softmax(node_predictor.forward({summary.begin(), summary.end()}));
    }

    std::vector<double> edge_distribution(const FeatureVector& summary,
                                          const FeatureVector& focus,
                                          const FeatureVector& candidate) const {
        std::vector<double> x;
        x.reserve(3 * kEmbedDim);
        x.insert(x.end(), summary.begin(), summary.end());
        x.insert(x.end(), focus.begin(), focus.end());
        x.insert(x.end(), candidate.begin(), candidate.end());
        return softmax(edge_predictor.forward(x));
    }
};

// Teacher-forcing examples. A node step asks "which kind comes next after this
// prefix" (kStopClass once every node is placed); an edge step asks "which
// relation links the focus node to this candidate" (kNoEdgeClass for none).
struct NodeStep {
    FeatureVector summary{};
    int target = 0;
};

struct EdgeStep {
    FeatureVector summary{};
    FeatureVector focus{};
    FeatureVector candidate{};
    int target = 0;
};

namespace detail {

// Serializes a graph into generation steps under canonical_order. The prefix
// at step f holds the first f nodes and every edge of g between them; the
// focus node is embedded as if just placed (no edges yet). Edge candidates are
// the previous min(k, f) nodes, oldest first, and the target for a pair is the
// kind of the earliest edge between them in either direction.
inline void serialize_steps(const AttackScenarioGraph& g, int k,
                            std::vector<NodeStep>& node_steps,
                            std::vector<EdgeStep>& edge_steps) {
    const std::vector<std::string> order = canonical_order(g);
    std::map<std::string, EntityKind> kind;
    for (const auto& n : g.nodes) kind.emplace(n.id, n.kind);
    std::map<std::pair<std::string, std::string>, RelationKind> pair_kind;
    for (const auto& e : event_stream(g)) {
        auto key = std::minmax(e.subject, e.object);
        pair_kind.emplace(std::make_pair(key.first, key.second), e.kind);
    }

    AttackScenarioGraph prefix;
    std::set<std::string> placed;
    for (std::size_t f = 0; f <= order.size(); ++f) {
        const std::vector<Segment> bands = phase_bands(prefix);
        const FeatureVector summary = graph_summary(prefix, bands);
        if (f == order.size()) {
            node_steps.push_back({summary, kStopClass});
            break;
        }
        const std::string& vid = order[f];
        node_steps.push_back({summary, static_cast<int>(kind.at(vid))});

        prefix.nodes.push_back({vid, kind.at(vid), std::nullopt});
        placed.insert(vid);
        const FeatureVector focus = node_embedding(prefix, bands, vid);
        const std::size_t lo = f >= static_cast<std::size_t>(k) ? f - k : 0;
        for (std::size_t j = lo; j < f; ++j) {
            const FeatureVector cand = node_embedding(prefix, bands, order[j]);
            auto key = std::minmax(vid, order[j]);
            const auto it = pair_kind.find(std::make_pair(key.first, key.second));
            const int target =
                it == pair_kind.end() ? kNoEdgeClass : static_cast<int>(it->second);
            edge_steps.push_back({summary, focus, cand, target});
        }
        for (const auto& e : g.edges) {
            const bool mine = e.subject == vid || e.object == vid;
            if (!mine) continue;
            const std::string& other = e.subject == vid ? e.object : e.subject;
            if (placed.count(other)) prefix.edges.push_back(e);
        }
    }
}

struct Gradients {
    std::vector<double> w1, b1, w2, b2;

    explicit Gradients(const Mlp& m)
        : w1(m.w1.size(), 0.0),
          b1(m.b1.size(), 0.0),
          w2(m.w2.size(), 0.0),
          b2(m.b2.size(), 0.0) {}
};

// Adds this example's gradient (softmax + negative log likelihood) and
// returns its loss.
inline double accumulate_gradients(const Mlp& m, const std::vector<double>& x,
                                   int target, Gradients& grad) {
    std::vector<double> a;
    const std::vector<double> p = softmax(m.forward(x, &a));
    const double loss = -std::log(std::max(p[target], 1e-300));

    std::vector<double> dz(m.out, 0.0);
    for (int o = 0; o < m.out; ++o) {
        dz[o] = p[o] - (o == target ? 1.0 : 0.0);
        grad.b2[o] += dz[o];
        double* row = &grad.w2[static_cast<std::size_t>(o) * m.hidden];
        for (int h = 0; h < m.hidden; ++h) row[h] += dz[o] * a[h];
    }
    for (int h = 0; h < m.hidden; ++h) {
        double dh = 0.0;
        for (int o = 0; o < m.out; ++o)
            dh += dz[o] * m.w2[static_cast<std::size_t>(o) * m.hidden + h];
        const double dpre = dh * (1.0 - a[h] * a[h]);
        grad.b1[h] += dpre;
        double* row = &grad.w1[static_cast<std::size_t>(h) * m.in];
        for (int i = 0; i < m.in; ++i) row[i] += dpre * x[i];
    }
    return loss;
}

inline void apply_gradients(Mlp& m, const Gradients& grad, double step) {
    for (std::size_t i = 0; i < m.w1.size(); ++i) m.w1[i] -= step * grad.w1[i];
    for (std::size_t i = 0; i < m.b1.size(); ++i) m.b1[i] -= step * grad.b1[i];
    for (std::size_t i = 0; i < m.w2.size(); ++i) m.w2[i] -= step * grad.w2[i];
    for (std::size_t i = 0; i < m.b2.size(); ++i) m.b2[i] -= step * grad.b2[i];
}

inline std::vector<double> edge_input(const EdgeStep& s) {
    std::vector<double> x;
    x.reserve(3 * kEmbedDim);
    x.insert(x.end(), s.summary.begin(), s.summary.end());
    x.insert(x.end(), s.focus.begin(), s.focus.end());
    x.insert(x.end(), s.candidate.begin(), s.candidate.end());
    return x;
}

}  // namespace detail

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.2;
    int hidden = 32;
    int k = 10;
    std::uint64_t seed = 7;
    // Called once per epoch with the mean negative log likelihood at the
    // parameters the epoch started from.
    std::function<void(int, double)> on_epoch;
};

// Full-batch gradient descent on the pooled node and edge steps of the
// corpus. Every graph must verify as rational. Deterministic for a given
// corpus and config.
inline GeneratorModel train(const std::vector<AttackScenarioGraph>& corpus,
                            const TrainConfig& cfg = {}) {
    if (corpus.empty()) throw CorpusError("no graphs");
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (verify(corpus[i]).rational) continue;
        const std::string name =
            corpus[i].provenance.value_or("corpus[" + std::to_string(i) + "]");
        throw CorpusError("graph not rational: " + name, name);
    }

    std::vector<NodeStep> node_steps;
    std::vector<EdgeStep> edge_steps;
    for (const auto& g : corpus) detail::serialize_steps(g, cfg.k, node_steps, edge_steps);

    GeneratorModel m;
    m.k = cfg.k;
    m.hidden = cfg.hidden;
    std::mt19937_64 gen(cfg.seed);
    m.node_predictor.init(kEmbedDim, cfg.hidden, kNodeClasses, gen);
    m.edge_predictor.init(3 * kEmbedDim, cfg.hidden, kEdgeClasses, gen);

    const double count = static_cast<double>(node_steps.size() + edge_steps.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::Gradients gn(m.node_predictor);
        detail::Gradients ge(m.edge_predictor);
        double loss = 0.0;
        for (const auto& s : node_steps)
            loss += detail::accumulate_gradients(
                m.node_predictor, {s.summary.begin(), s.summary.end()}, s.target, gn);
        for (const auto& s : edge_steps)
            loss += detail::accumulate_gradients(m.edge_predictor, detail::edge_input(s),
                                                 s.target, ge);
        loss /= count;
        const double step = cfg.learning_rate / count;
        detail::apply_gradients(m.node_predictor, gn, step);
        detail::apply_gradients(m.edge_predictor, ge, step);
        if (cfg.on_epoch) cfg.on_epoch(epoch, loss);
    }
    m.trained = true;
    return m;
}

namespace detail {

inline nlohmann::ordered_json mlp_to_json(const Mlp& m) {
    nlohmann::ordered_json j;
    j["in"] = m.in;
    j["hidden"] = m.hidden;
    j["out"] = m.out;
    j["w1"] = m.w1;
    j["b1"] = m.b1;
    j["w2"] = m.w2;
    j["b2"] = m.b2;
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j, const std::string& path) {
    const auto field = [&](const char* name) -> const nlohmann::json& {
        const auto it = j.find(name);
        if (it == j.end())
            throw SchemaError("missing field", 0, path + "." + name);
        return *it;
    };
    const auto dims = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_number_integer() || v.get<int>() <= 0)
            throw SchemaError("expected a positive integer", 0, path + "." + name);
        return v.get<int>();
    };
    const auto matrix = [&](const char* name, std::size_t want) {
        const auto& v = field(name);
        if (!v.is_array())
            throw SchemaError("expected an array of numbers", 0, path + "." + name);
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& x : v) {
            if (!x.is_number())
                throw SchemaError("expected an array of numbers", 0, path + "." + name);
            out.push_back(x.get<double>());
        }
        if (out.size() != want)
            throw SchemaError("parameter count does not match layer dimensions", 0,
                              path + "." + name);
        return out;
    };
    Mlp m;
    m.in = dims("in");
    m.hidden = dims("hidden");
    m.out = dims("out");
    m.w1 = matrix("w1", static_cast<std::size_t>(m.hidden) * m.in);
    m.b1 = matrix("b1", static_cast<std::size_t>(m.hidden));
    m.w2 = matrix("w2", static_cast<std::size_t>(m.out) * m.hidden);
    m.b2 = matrix("b2", static_cast<std::size_t>(m.out));
    return m;
}

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace detail

inline std::string save_model(const GeneratorModel& m) {
    nlohmann::ordered_json j;
    j["format"] = 1;
    j["embed_dim"] = m.embed_dim;
    j["k"] = m.k;
    j["hidden"] = m.hidden;
    j["feature_schema"] = detail::hash_hex(m.feature_schema);
    j["trained"] = m.trained;
    j["node_predictor"] = detail::mlp_to_json(m.node_predictor);
    j["edge_predictor"] = detail::mlp_to_json(m.edge_predictor);
    return j.dump(2) + "\n";
}

// Structural problems (bad JSON, wrong types, inconsistent parameter counts)
// raise SchemaError; a well-formed file this build cannot use (format bump,
// different feature schema, wrong layer widths) raises ModelError.
inline GeneratorModel load_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("model file is not valid JSON: ") + e.what(),
                          e.byte);
    }
    if (!j.is_object()) throw SchemaError("model file must be a JSON object");
    const auto field = [&](const char* name) -> const nlohmann::json& {
        const auto it = j.find(name);
        if (it == j.end()) throw SchemaError("missing field", 0, name);
        return *it;
    };
    const auto& format = field("format");
    if (!format.is_number_integer())
        throw SchemaError("expected an integer", 0, "format");
    if (format.get<int>() != 1)
        throw ModelError("unsupported model format " + format.dump() +
                         " (this build reads format 1)");
    const auto& schema = field("feature_schema");
    if (!schema.is_string())
        throw SchemaError("expected a string", 0, "feature_schema");
    if (schema.get<std::string>() != detail::hash_hex(feature_schema_hash()))
        throw ModelError("model was trained against a different feature schema");

    GeneratorModel m;
    const auto integer = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_number_integer() || v.get<int>() <= 0)
            throw SchemaError("expected a positive integer", 0, name);
        return v.get<int>();
    };
    m.embed_dim = integer("embed_dim");
    m.k = integer("k");
    m.hidden = integer("hidden");
    const auto& trained = field("trained");
    if (!trained.is_boolean()) throw SchemaError("expected a boolean", 0, "trained");
    m.trained = trained.get<bool>();
    m.node_predictor = detail::mlp_from_json(field("node_predictor"), "node_predictor");
    m.edge_predictor = detail::mlp_from_json(field("edge_predictor"), "edge_predictor");

    if (m.embed_dim != kEmbedDim)
        throw ModelError("model embeds nodes in " + std::to_string(m.embed_dim) +
                         " dimensions; this build uses " + std::to_string(kEmbedDim));
    if (m.node_predictor.in != kEmbedDim || m.node_predictor.out != kNodeClasses ||
        m.edge_predictor.in != 3 * kEmbedDim || m.edge_predictor.out != kEdgeClasses)
        throw ModelError("predictor layer widths do not match this build");
    if (m.node_predictor.hidden != m.hidden || m.edge_predictor.hidden != m.hidden)
        throw ModelError("predictor hidden widths do not match the declared size");
    return m;
}

}  // namespace asg
