#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "asg/errors.hpp"
#include "asg/graph.hpp"
#include "asg/graph_io.hpp"
#include "asg/ioc.hpp"
#include "asg/kx.hpp"
#include "asg/metrics.hpp"
#include "asg/model.hpp"
#include "asg/repair.hpp"
#include "asg/repair_logic.hpp"
#include "asg/rule_catalog.hpp"
#include "asg/rules.hpp"
#include "asg/verify.hpp"

namespace asg {

// Knobs shared by the pipeline stages. window_n describes the upstream
// extraction's sliding window; it is recorded in audits, never consumed.
struct PipelineConfig {
    std::string rules_path;   // empty: built-in catalog
    std::string model_path;   // empty: skip the model repair stage
    int budget = 50;
    std::uint64_t seed = 7;
    int window_n = 8;
    int span_k = 10;
    std::string out_dir = ".";
};

inline void validate(const PipelineConfig& cfg) {
    if (cfg.window_n < 1)
        throw SchemaError("config: sliding window n must be >= 1", 0, "window_n");
    if (cfg.span_k < 1) throw SchemaError("config: span k must be >= 1", 0, "span_k");
    if (cfg.budget < 0) throw SchemaError("config: repair budget must be >= 0", 0, "budget");
}

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path);
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("cannot write " + path);
}

}  // namespace detail

inline RuleCatalog load_catalog(const std::string& path) {
    if (path.empty()) return default_rules();
    return parse_rules(detail::read_file(path));
}

inline nlohmann::ordered_json match_to_json(const FlagEventMatch& m) {
    nlohmann::ordered_json j;
    j["rule"] = m.rule;
    j["phase"] = to_token(m.phase);
    j["seq"] = m.seq;
    j["stream_index"] = m.stream_index;
    j["subject"] = m.subject;
    j["object"] = m.object;
    return j;
}

inline nlohmann::ordered_json report_to_json(const VerificationReport& rep) {
    nlohmann::ordered_json j;
    j["rational"] = rep.rational;
    j["phases_passed"] = nlohmann::ordered_json::array();
    for (const Phase p : all_phases)
        if (rep.phases_passed.count(p)) j["phases_passed"].push_back(to_token(p));
    j["anchors"] = nlohmann::ordered_json::object();
    for (const auto& [phase, match] : rep.anchors)
        j["anchors"][to_token(phase)] = match_to_json(match);
    j["matches"] = nlohmann::ordered_json::array();
    for (const auto& m : rep.matches) j["matches"].push_back(match_to_json(m));
    j["segmentation"] = nlohmann::ordered_json::array();
    for (const auto& s : rep.segmentation) {
        nlohmann::ordered_json js;
        js["first"] = s.first;
        js["last"] = s.last;
        js["phase"] = s.phase ? nlohmann::ordered_json(to_token(*s.phase))
                              : nlohmann::ordered_json(nullptr);
        j["segmentation"].push_back(std::move(js));
    }
    j["graph_fingerprint"] = rep.graph_fingerprint;
    return j;
}

// Band colors for DOT output; the pre-attack band renders gray.
inline const char* phase_color(const std::optional<Phase>& p) {
    if (!p) return "gray";
    switch (*p) {
        case Phase::InitialIntrusion: return "green";
        case Phase::CodeExecution: return "blue";
        case Phase::BreakAccessControl: return "red";
        case Phase::LeakageDestruction: return "orange";
    }
    return "gray";
}

inline std::vector<std::string> phase_edge_colors(const AttackScenarioGraph& g,
                                                  const VerificationReport& rep) {
    const auto stream = event_stream(g);
    std::vector<std::string> colors(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i)
        for (const Segment& s : rep.segmentation)
            if (s.first <= stream[i].seq && stream[i].seq <= s.last) {
                colors[i] = phase_color(s.phase);
                break;
            }
    return colors;
}

inline nlohmann::ordered_json ioc_scan_to_json(const std::string& doc,
                                               const ProtectedText& p) {
    nlohmann::ordered_json j;
    j["doc"] = doc;
    j["matches"] = nlohmann::ordered_json::array();
    for (const auto& m : p.matches) {
        nlohmann::ordered_json jm;
        jm["kind"] = to_token(m.kind);
        jm["raw"] = m.raw;
        jm["start"] = m.start;
        jm["end"] = m.end;
        jm["placeholder"] = m.placeholder;
        j["matches"].push_back(std::move(jm));
    }
    j["sentences"] = nlohmann::ordered_json::array();
    for (const auto& [first, last] : p.sentence_spans)
        j["sentences"].push_back({{"start", first}, {"end", last}});
    j["protected"] = p.text;
    return j;
}

// Model-stage summary for audits: closes fragments, then supplements every
// missing phase in order until the budget or the phase set is exhausted.
struct ModelRepairOutcome {
    AttackScenarioGraph graph;
    std::vector<AddedEdge> relation_edges;
    nlohmann::ordered_json supplements = nlohmann::ordered_json::array();
    bool rational = false;
};

inline ModelRepairOutcome model_repair(const AttackScenarioGraph& g, const GeneratorModel& m,
                                       const RuleCatalog& catalog, int budget) {
    ModelRepairOutcome out;
    const RelationRepairResult rr = repair_relations(g, m);
    out.graph = rr.graph;
    out.relation_edges = rr.added;

    VerificationReport rep = verify(out.graph, catalog);
    for (const Phase p : all_phases) {
        if (rep.phases_passed.count(p)) continue;
        const SupplementResult s = supplement_phase(out.graph, m, p, budget);
        out.graph = s.graph;
        nlohmann::ordered_json js;
        js["phase"] = to_token(p);
        js["nodes_added"] = s.added_nodes.size();
        js["edges_added"] = s.added_edges.size();
        rep = verify(out.graph, catalog);
        js["restored"] = rep.phases_passed.count(p) > 0;
        out.supplements.push_back(std::move(js));
    }
    out.rational = rep.rational;
    return out;
}

enum class InputMode { Auto, Text, Graph };

struct DocumentOutcome {
    std::string input;
    bool graph_mode = false;
    bool rational = false;  // final verdict; always false for text inputs
    std::vector<std::string> artifacts;
    nlohmann::ordered_json audit;
};

namespace detail {

// report.kx.json and report.txt both map to the artifact stem "report".
inline std::string artifact_stem(const std::string& input) {
    std::string stem = std::filesystem::path(input).stem().string();
    if (stem.size() > 3 && stem.compare(stem.size() - 3, 3, ".kx") == 0)
        stem.resize(stem.size() - 3);
    return stem.empty() ? std::string("doc") : stem;
}

inline bool looks_like_json(const std::string& text) {
    for (const char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
    return false;
}

}  // namespace detail

// One document through the full chain. Text inputs stop after the IOC scan;
// kx/1 inputs run build, logic fix, verify, model repair, and drift scoring.
// Every mutation lands in the .audit.json sidecar.
inline DocumentOutcome run_document(const PipelineConfig& cfg, const std::string& input,
                                    InputMode mode, const RuleCatalog& catalog,
                                    const std::optional<GeneratorModel>& model) {
    const std::string text = detail::read_file(input);
    const bool graph_mode =
        mode == InputMode::Graph || (mode == InputMode::Auto && detail::looks_like_json(text));

    DocumentOutcome out;
    out.input = input;
    out.graph_mode = graph_mode;
    const std::filesystem::path base =
        std::filesystem::path(cfg.out_dir) / detail::artifact_stem(input);
    const auto emit = [&out](const std::filesystem::path& path, const std::string& content) {
        detail::write_file(path.string(), content);
        out.artifacts.push_back(path.string());
    };

    nlohmann::ordered_json audit;
    audit["input"] = input;
    audit["mode"] = graph_mode ? "graph" : "text";
    audit["window_n"] = cfg.window_n;
    audit["span_k"] = cfg.span_k;
    audit["seed"] = cfg.seed;

    if (!graph_mode) {
        const ProtectedText p = segment(protect(text));
        emit(base.string() + ".ioc.json", ioc_scan_to_json(input, p).dump(2) + "\n");
        audit["iocs_found"] = p.matches.size();
        audit["sentences"] = p.sentence_spans.size();
    } else {
        const CorefMerge merged = merge_coref(parse_exchange(text));
        const BuildResult built = build_graph(merged.document);
        emit(base.string() + ".asg.json", serialize(built.graph) + "\n");
        audit["coref_conflicts"] = merged.conflicts;
        audit["dropped_relations"] = built.warnings;

        const LogicFixResult fixed = logic_fix(built.graph);
        audit["logic_fixes"] = nlohmann::ordered_json::array();
        for (const LogicFix& f : fixed.fixes) {
            nlohmann::ordered_json jf;
            jf["rule"] = f.rule;
            jf["subject"] = f.subject;
            jf["object"] = f.object;
            jf["detail"] = f.detail;
            audit["logic_fixes"].push_back(std::move(jf));
        }

        const VerificationReport rep = verify(fixed.graph, catalog);
        emit(base.string() + ".verify.json", report_to_json(rep).dump(2) + "\n");
        emit(base.string() + ".dot", to_dot(fixed.graph, phase_edge_colors(fixed.graph, rep)));

        AttackScenarioGraph repaired = fixed.graph;
        audit["repair"] = nlohmann::ordered_json::object();
        if (model) {
            const ModelRepairOutcome mr = model_repair(repaired, *model, catalog, cfg.budget);
            repaired = mr.graph;
            audit["repair"]["relation_edges"] = nlohmann::ordered_json::array();
            for (const AddedEdge& e : mr.relation_edges) {
                nlohmann::ordered_json je;
                je["subject"] = e.subject;
                je["object"] = e.object;
                je["kind"] = to_token(e.kind);
                je["seq"] = e.seq;
                audit["repair"]["relation_edges"].push_back(std::move(je));
            }
            audit["repair"]["supplements"] = mr.supplements;
        }

        const VerificationReport final_rep = verify(repaired, catalog);
        out.rational = final_rep.rational;
        emit(base.string() + ".repaired.asg.json", serialize(repaired) + "\n");
        emit(base.string() + ".repaired.dot",
             to_dot(repaired, phase_edge_colors(repaired, final_rep)));

        // Drift of the repaired graph against the extraction's preliminary one.
        const EvalResult drift = edge_match(repaired, built.graph);
        audit["drift"] = {{"precision", drift.precision},
                          {"recall", drift.recall},
                          {"similarity", similarity(repaired, built.graph)}};
        audit["rational"] = out.rational;
    }

    // Basenames keep sidecars byte-stable across output locations.
    audit["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& a : out.artifacts)
        audit["artifacts"].push_back(std::filesystem::path(a).filename().string());
    out.audit = std::move(audit);
    detail::write_file(base.string() + ".audit.json", out.audit.dump(2) + "\n");
    out.artifacts.push_back(base.string() + ".audit.json");
    return out;
}

struct PipelineResult {
    std::vector<DocumentOutcome> documents;
};

// Bounded-worker fan-out over inputs; outcomes come back in input order and
// the first failing input's error (by position) is rethrown after the join.
inline PipelineResult run_pipeline(const PipelineConfig& cfg,
                                   const std::vector<std::string>& inputs,
                                   InputMode mode = InputMode::Auto, int jobs = 1) {
    validate(cfg);
    PipelineResult result;
    if (inputs.empty()) return result;

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);

    const RuleCatalog catalog = load_catalog(cfg.rules_path);
    std::optional<GeneratorModel> model;
    if (!cfg.model_path.empty()) {
        if (!std::filesystem::exists(cfg.model_path))
            throw ModelError("model not found: " + cfg.model_path);
        model = load_model(detail::read_file(cfg.model_path));
    }

    const std::size_t workers =
        std::clamp<std::size_t>(jobs < 1 ? 1 : static_cast<std::size_t>(jobs), 1, inputs.size());
    std::vector<DocumentOutcome> outcomes(inputs.size());
    std::vector<std::exception_ptr> errors(inputs.size());
    std::atomic<std::size_t> cursor{0};
    const auto work = [&] {
        for (std::size_t i = cursor.fetch_add(1); i < inputs.size(); i = cursor.fetch_add(1)) {
            try {
                outcomes[i] = run_document(cfg, inputs[i], mode, catalog, model);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    result.documents = std::move(outcomes);
    return result;
}

struct TrainOutcome {
    std::string model_file;
    std::string summary_file;
    std::vector<double> losses;
};

// Trains on every .json graph in the directory (filename order) and persists
// the model plus a loss-curve summary next to it.
inline TrainOutcome run_train(const PipelineConfig& cfg, const std::string& corpus_dir,
                              TrainConfig tcfg = {}) {
    validate(cfg);
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(corpus_dir, ec))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    if (ec) throw IoError("cannot read corpus directory " + corpus_dir);
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw CorpusError("no graphs found in " + corpus_dir);

    std::vector<AttackScenarioGraph> corpus;
    for (const auto& f : files) {
        AttackScenarioGraph g = deserialize(detail::read_file(f.string()));
        if (!g.provenance) g.provenance = f.stem().string();
        corpus.push_back(std::move(g));
    }

    TrainOutcome out;
    const auto user_hook = tcfg.on_epoch;
    tcfg.on_epoch = [&](int epoch, double loss) {
        out.losses.push_back(loss);
        if (user_hook) user_hook(epoch, loss);
    };
    const GeneratorModel m = train(corpus, tcfg);

    std::error_code dir_ec;
    std::filesystem::create_directories(cfg.out_dir, dir_ec);
    if (dir_ec) throw IoError("cannot create output directory " + cfg.out_dir);
    out.model_file = cfg.model_path.empty()
                         ? (std::filesystem::path(cfg.out_dir) / "model.json").string()
                         : cfg.model_path;
    detail::write_file(out.model_file, save_model(m));

    nlohmann::ordered_json summary;
    summary["epochs"] = tcfg.epochs;
    summary["learning_rate"] = tcfg.learning_rate;
    summary["hidden"] = tcfg.hidden;
    summary["seed"] = tcfg.seed;
    summary["corpus"] = nlohmann::ordered_json::array();
    for (const auto& f : files) summary["corpus"].push_back(f.string());
    summary["loss"] = out.losses;
    std::filesystem::path spath(out.model_file);
    spath.replace_extension();
    out.summary_file = spath.string() + ".train.json";
    detail::write_file(out.summary_file, summary.dump(2) + "\n");
    return out;
}

}  // namespace asg
