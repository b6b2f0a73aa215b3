// asgc: attack scenario graph toolkit.
//
// Subcommands map one-to-one onto library operations: ioc scanning, exchange
// ingest, rationality verification, model training, graph repair, scoring,
// and the full per-document pipeline. Exit codes: 0 ok, 2 schema error,
// 3 model error, 4 I/O error, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asg/pipeline.hpp"

namespace {

constexpr const char* kConfigEnvVar = "ASGC_CONFIG";

struct Defaults {
    asg::PipelineConfig pipe;
    int jobs = 1;
    std::string mode = "auto";
};

// JSON config file; flags given on the command line override these values.
Defaults load_defaults(const std::string& path) {
    Defaults d;
    if (path.empty()) return d;
    const nlohmann::json j = asg::detail::parse_json(asg::detail::read_file(path));
    if (!j.is_object()) throw asg::SchemaError("config file must be an object");
    const auto str = [&](const char* key, std::string& into) {
        if (!j.contains(key)) return;
        if (!j[key].is_string())
            throw asg::SchemaError(std::string("config field '") + key + "' must be a string",
                                   0, key);
        into = j[key].get<std::string>();
    };
    const auto integer = [&](const char* key, auto& into, long long lo) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].template get<long long>() < lo)
            throw asg::SchemaError(std::string("config field '") + key +
                                       "' must be an integer >= " + std::to_string(lo),
                                   0, key);
        into = j[key].template get<std::decay_t<decltype(into)>>();
    };
    str("rules", d.pipe.rules_path);
    str("model", d.pipe.model_path);
    str("out_dir", d.pipe.out_dir);
    str("mode", d.mode);
    integer("budget", d.pipe.budget, 0);
    integer("seed", d.pipe.seed, 0);
    integer("window_n", d.pipe.window_n, 1);
    integer("span_k", d.pipe.span_k, 1);
    integer("jobs", d.jobs, 1);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const std::vector<std::string> known{"rules",    "model",  "out_dir",
                                                    "mode",     "budget", "seed",
                                                    "window_n", "span_k", "jobs"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw asg::SchemaError("unknown config field '" + key + "'", 0, key);
    }
    return d;
}

// --config wins over $ASGC_CONFIG; the file must load if either names one.
std::string config_path_from(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    const char* env = std::getenv(kConfigEnvVar);
    return env ? env : "";
}

void print_or_write(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        asg::detail::write_file(out_path, content);
}

// "g.asg.json" -> "g.asg.audit.json"
std::string sidecar_path(const std::string& out_path) {
    const std::string suffix = ".json";
    if (out_path.size() > suffix.size() &&
        out_path.compare(out_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return out_path.substr(0, out_path.size() - suffix.size()) + ".audit.json";
    return out_path + ".audit.json";
}

asg::InputMode parse_mode(const std::string& mode) {
    if (mode == "auto") return asg::InputMode::Auto;
    if (mode == "ioc" || mode == "text") return asg::InputMode::Text;
    if (mode == "graph" || mode == "kx") return asg::InputMode::Graph;
    throw asg::SchemaError("unknown input mode '" + mode + "'", 0, "mode");
}

nlohmann::ordered_json logic_fixes_to_json(const std::vector<asg::LogicFix>& fixes) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : fixes) {
        nlohmann::ordered_json jf;
        jf["rule"] = f.rule;
        jf["subject"] = f.subject;
        jf["object"] = f.object;
        jf["detail"] = f.detail;
        arr.push_back(std::move(jf));
    }
    return arr;
}

int run_ioc(const std::string& input, const std::string& out_path) {
    const asg::ProtectedText p = asg::segment(asg::protect(asg::detail::read_file(input)));
    print_or_write(out_path, asg::ioc_scan_to_json(input, p).dump(2) + "\n");
    return 0;
}

int run_build(const std::string& input, const std::string& out_path) {
    const asg::CorefMerge merged =
        asg::merge_coref(asg::parse_exchange(asg::detail::read_file(input)));
    const asg::BuildResult built = asg::build_graph(merged.document);
    print_or_write(out_path, asg::serialize(built.graph) + "\n");
    if (!out_path.empty()) {
        nlohmann::ordered_json audit;
        audit["input"] = input;
        audit["coref_conflicts"] = merged.conflicts;
        audit["dropped_relations"] = built.warnings;
        asg::detail::write_file(sidecar_path(out_path), audit.dump(2) + "\n");
    }
    return 0;
}

int run_verify(const std::string& input, const std::string& rules_path,
               const std::string& out_path, const std::string& dot_path) {
    const asg::RuleCatalog catalog = asg::load_catalog(rules_path);
    const asg::AttackScenarioGraph g = asg::deserialize(asg::detail::read_file(input));
    const asg::VerificationReport rep = asg::verify(g, catalog);
    print_or_write(out_path, asg::report_to_json(rep).dump(2) + "\n");
    if (!dot_path.empty())
        asg::detail::write_file(dot_path, asg::to_dot(g, asg::phase_edge_colors(g, rep)));
    return 0;  // an irrational graph is a result, not an error
}

int run_repair(const std::string& input, const asg::PipelineConfig& cfg,
               const std::string& out_path) {
    if (cfg.model_path.empty()) throw asg::ModelError("repair requires --model");
    if (!std::filesystem::exists(cfg.model_path))
        throw asg::ModelError("model not found: " + cfg.model_path);
    const asg::GeneratorModel model =
        asg::load_model(asg::detail::read_file(cfg.model_path));
    const asg::RuleCatalog catalog = asg::load_catalog(cfg.rules_path);

    const asg::AttackScenarioGraph g = asg::deserialize(asg::detail::read_file(input));
    const asg::LogicFixResult fixed = asg::logic_fix(g);
    const asg::ModelRepairOutcome mr =
        asg::model_repair(fixed.graph, model, catalog, cfg.budget);
    print_or_write(out_path, asg::serialize(mr.graph) + "\n");
    if (!out_path.empty()) {
        nlohmann::ordered_json audit;
        audit["input"] = input;
        audit["logic_fixes"] = logic_fixes_to_json(fixed.fixes);
        auto edges = nlohmann::ordered_json::array();
        for (const auto& e : mr.relation_edges) {
            nlohmann::ordered_json je;
            je["subject"] = e.subject;
            je["object"] = e.object;
            je["kind"] = asg::to_token(e.kind);
            je["seq"] = e.seq;
            edges.push_back(std::move(je));
        }
        audit["repair"] = {{"relation_edges", std::move(edges)},
                           {"supplements", mr.supplements}};
        audit["rational"] = mr.rational;
        asg::detail::write_file(sidecar_path(out_path), audit.dump(2) + "\n");
    }
    return 0;
}

int run_eval(const std::string& truth_path, const std::string& recon_path,
             const std::string& mode, const std::string& out_path) {
    if (mode != "typed" && mode != "generalized")
        throw asg::SchemaError("unknown eval mode '" + mode + "'", 0, "mode");
    const asg::MatchMode mm =
        mode == "typed" ? asg::MatchMode::Typed : asg::MatchMode::Generalized;
    const asg::AttackScenarioGraph truth =
        asg::deserialize(asg::detail::read_file(truth_path));
    const asg::AttackScenarioGraph recon =
        asg::deserialize(asg::detail::read_file(recon_path));

    asg::EvalResult r = asg::edge_match(recon, truth, mm);
    r.similarity = asg::similarity(recon, truth);

    // Auxiliary node-kind counts; evaluation proper scores edges only.
    std::map<asg::EntityKind, std::size_t> truth_kinds, recon_kinds;
    for (const auto& n : truth.nodes) ++truth_kinds[n.kind];
    for (const auto& n : recon.nodes) ++recon_kinds[n.kind];
    std::size_t node_overlap = 0;
    for (const auto& [kind, count] : recon_kinds) {
        const auto it = truth_kinds.find(kind);
        if (it != truth_kinds.end()) node_overlap += std::min(count, it->second);
    }

    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["similarity"] = r.similarity;
    j["matched_edges"] = r.matched_pairs.size();
    j["recon_edges"] = recon.edges.size();
    j["truth_edges"] = truth.edges.size();
    j["node_kind_overlap"] = node_overlap;
    j["recon_nodes"] = recon.nodes.size();
    j["truth_nodes"] = truth.nodes.size();

    char table[512];
    std::snprintf(table, sizeof table,
                  "metric       value\n"
                  "precision    %.4f  (%zu/%zu reconstructed edges)\n"
                  "recall       %.4f  (%zu/%zu truth edges)\n"
                  "similarity   %.4f\n"
                  "node overlap %zu/%zu reconstructed, %zu truth\n",
                  r.precision, r.matched_pairs.size(), recon.edges.size(), r.recall,
                  r.matched_pairs.size(), truth.edges.size(), r.similarity, node_overlap,
                  recon.nodes.size(), truth.nodes.size());
    if (out_path.empty()) {
        std::cout << j.dump(2) + "\n" << table;
    } else {
        asg::detail::write_file(out_path, j.dump(2) + "\n");
        std::cout << table;
    }
    return 0;
}

int run_train_cmd(const std::string& corpus_dir, asg::PipelineConfig cfg,
                  const asg::TrainConfig& tcfg, const std::string& out_path) {
    if (!out_path.empty()) cfg.model_path = out_path;
    const asg::TrainOutcome out = asg::run_train(cfg, corpus_dir, tcfg);
    std::cout << "model: " << out.model_file << "\n"
              << "summary: " << out.summary_file << "\n"
              << "final loss: " << (out.losses.empty() ? 0.0 : out.losses.back()) << "\n";
    return 0;
}

int run_pipeline_cmd(const asg::PipelineConfig& cfg, const std::vector<std::string>& inputs,
                     const std::string& mode, int jobs) {
    const asg::PipelineResult result =
        asg::run_pipeline(cfg, inputs, parse_mode(mode), jobs);
    for (const auto& doc : result.documents) {
        std::cout << doc.input << ": "
                  << (doc.graph_mode ? (doc.rational ? "rational" : "not rational")
                                     : "ioc scan")
                  << ", " << doc.artifacts.size() << " artifacts\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        Defaults d = load_defaults(config_path_from(argc, argv));

        CLI::App app{"attack scenario graph toolkit"};
        app.require_subcommand(1);
        app.fallthrough();
        std::string config_path;
        app.add_option("--config", config_path,
                       "JSON config file; $" + std::string(kConfigEnvVar) +
                           " names the default. Flags override config values.");

        std::string in, out, dot, rules = d.pipe.rules_path, model = d.pipe.model_path;
        std::string truth, recon, eval_mode = "typed", pipe_mode = d.mode;
        std::string out_dir = d.pipe.out_dir;
        std::vector<std::string> inputs;
        int budget = d.pipe.budget, jobs = d.jobs;
        int window_n = d.pipe.window_n, span_k = d.pipe.span_k;
        std::uint64_t seed = d.pipe.seed;
        asg::TrainConfig tcfg;
        tcfg.seed = seed;

        auto* ioc = app.add_subcommand("ioc", "scan a text report for indicators");
        ioc->add_option("input", in, "text document")->required();
        ioc->add_option("-o,--out", out, "output JSON path (default stdout)");

        auto* build = app.add_subcommand("build", "build a preliminary graph from kx/1");
        build->add_option("input", in, "kx/1 extraction document")->required();
        build->add_option("-o,--out", out,
                          "output graph path (default stdout; sidecar audit when set)");

        auto* verify = app.add_subcommand("verify", "verify phase rationality");
        verify->add_option("input", in, "graph JSON")->required();
        verify->add_option("-o,--out", out, "report path (default stdout)");
        verify->add_option("--dot", dot, "also write a phase-colored DOT file");
        verify->add_option("--rules", rules, "flag rule catalog file (default built-in)");

        auto* repair = app.add_subcommand("repair", "logic-fix and model-repair a graph");
        repair->add_option("input", in, "graph JSON")->required();
        repair->add_option("-o,--out", out,
                           "repaired graph path (default stdout; sidecar audit when set)");
        repair->add_option("--model", model, "trained model file");
        repair->add_option("--rules", rules, "flag rule catalog file");
        repair->add_option("--budget", budget, "supplement node budget per phase")
            ->check(CLI::NonNegativeNumber);

        auto* train = app.add_subcommand("train", "train a generator model on a corpus");
        train->add_option("corpus", in, "directory of rational graph JSON files")->required();
        train->add_option("-o,--out", out, "model output path (default <out-dir>/model.json)");
        train->add_option("--out-dir", out_dir, "output directory");
        train->add_option("--epochs", tcfg.epochs, "training epochs")
            ->check(CLI::PositiveNumber);
        train->add_option("--lr", tcfg.learning_rate, "learning rate");
        train->add_option("--hidden", tcfg.hidden, "hidden layer width")
            ->check(CLI::PositiveNumber);
        train->add_option("--seed", tcfg.seed, "parameter init seed");
        train->add_option("--span-k", tcfg.k, "edge candidate span")
            ->check(CLI::PositiveNumber);

        auto* eval = app.add_subcommand("eval", "score a reconstruction against truth");
        eval->add_option("--truth", truth, "ground-truth graph JSON")->required();
        eval->add_option("--recon", recon, "reconstructed graph JSON")->required();
        eval->add_option("--mode", eval_mode, "typed|generalized");
        eval->add_option("-o,--out", out, "result JSON path (table still prints)");

        auto* pipeline = app.add_subcommand("pipeline", "run documents through the full chain");
        pipeline->add_option("inputs", inputs, "text or kx/1 documents");
        pipeline->add_option("--out-dir", out_dir, "artifact directory");
        pipeline->add_option("--model", model, "trained model for the repair stage");
        pipeline->add_option("--rules", rules, "flag rule catalog file");
        pipeline->add_option("--budget", budget, "supplement node budget per phase")
            ->check(CLI::NonNegativeNumber);
        pipeline->add_option("--seed", seed, "recorded in audits");
        pipeline->add_option("--window-n", window_n, "upstream sliding window metadata")
            ->check(CLI::PositiveNumber);
        pipeline->add_option("--span-k", span_k, "edge candidate span metadata")
            ->check(CLI::PositiveNumber);
        pipeline->add_option("--jobs", jobs, "bounded worker count")
            ->check(CLI::PositiveNumber);
        pipeline->add_option("--mode", pipe_mode, "auto|ioc|graph input handling");

        CLI11_PARSE(app, argc, argv);

        asg::PipelineConfig cfg;
        cfg.rules_path = rules;
        cfg.model_path = model;
        cfg.budget = budget;
        cfg.seed = seed;
        cfg.window_n = window_n;
        cfg.span_k = span_k;
        cfg.out_dir = out_dir;

        if (ioc->parsed()) return run_ioc(in, out);
        if (build->parsed()) return run_build(in, out);
        if (verify->parsed()) return run_verify(in, rules, out, dot);
        if (repair->parsed()) return run_repair(in, cfg, out);
        if (train->parsed()) return run_train_cmd(in, cfg, tcfg, out);
        if (eval->parsed()) return run_eval(truth, recon, eval_mode, out);
        if (pipeline->parsed()) return run_pipeline_cmd(cfg, inputs, pipe_mode, jobs);
        return 1;
    } catch (const asg::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const asg::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const asg::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const asg::CorpusError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const asg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
