#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "asg/pipeline.hpp"

#include "support/corpus.hpp"

using namespace asg;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = std::string(ASG_SOURCE_DIR) + "/tests/data";

// Fresh scratch directory per call site.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "asg_pipeline_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) { return detail::read_file(p.string()); }

struct CmdResult {
    int code = -1;
    std::string output;  // stdout+stderr interleaved
};

CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static const fs::path capture = scratch("cli_capture") / "out.txt";
    std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") + ASG_CLI_PATH + " " +
                      args + " > " + capture.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.output = slurp(capture);
    return r;
}

const GeneratorModel& template_model() {
    static const GeneratorModel m = [] {
        TrainConfig cfg;
        cfg.epochs = 1500;
        cfg.learning_rate = 0.5;
        return train({testgen::corpus_template()}, cfg);
    }();
    return m;
}

std::map<std::string, std::string> artifact_bytes(const DocumentOutcome& doc) {
    std::map<std::string, std::string> out;
    for (const auto& a : doc.artifacts) out[fs::path(a).filename().string()] = slurp(a);
    return out;
}

}  // namespace

TEST_CASE("verification reports serialize deterministically") {
    const auto g = testgen::corpus_template();
    const auto rep = verify(g);
    const auto j = report_to_json(rep);

    CHECK(j["rational"] == true);
    CHECK(j["phases_passed"] == nlohmann::ordered_json({"I", "II", "III", "IV"}));
    CHECK(j["matches"].size() == rep.matches.size());
    CHECK(j["segmentation"].size() == 5);
    CHECK(j["segmentation"][0]["phase"].is_null());
    CHECK(j["anchors"].size() == 4);
    CHECK(j["graph_fingerprint"] == rep.graph_fingerprint);
    CHECK(j.dump() == report_to_json(verify(g)).dump());
}

TEST_CASE("edge colors follow the phase bands") {
    const auto g = testgen::corpus_template();
    const auto colors = phase_edge_colors(g, verify(g));
    const std::vector<std::string> expected{"gray", "gray", "green", "blue", "blue",
                                            "blue", "blue", "red",   "red",  "orange"};
    CHECK(colors == expected);
}

TEST_CASE("pipeline config limits are enforced") {
    PipelineConfig cfg;
    cfg.budget = -1;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    cfg = {};
    cfg.window_n = 0;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    cfg = {};
    cfg.span_k = 0;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    CHECK_NOTHROW(validate(PipelineConfig{}));
}

TEST_CASE("a kx document yields the full artifact set") {
    const fs::path dir = scratch("kx_doc");
    PipelineConfig cfg;
    cfg.out_dir = dir.string();

    const auto doc = run_document(cfg, kFixtures + "/asyncrat.kx.json", InputMode::Auto,
                                  default_rules(), std::nullopt);
    CHECK(doc.graph_mode);
    CHECK(doc.rational);
    REQUIRE(doc.artifacts.size() == 6);
    const std::vector<std::string> names{"asyncrat.asg.json",          "asyncrat.verify.json",
                                         "asyncrat.dot",               "asyncrat.repaired.asg.json",
                                         "asyncrat.repaired.dot",      "asyncrat.audit.json"};
    for (std::size_t i = 0; i < names.size(); ++i)
        CHECK(fs::path(doc.artifacts[i]).filename() == names[i]);

    // Every emitted graph re-validates through the schema reader.
    const auto prelim = deserialize(slurp(dir / "asyncrat.asg.json"));
    const auto repaired = deserialize(slurp(dir / "asyncrat.repaired.asg.json"));
    CHECK(verify(repaired).rational);
    CHECK(prelim.nodes.size() == repaired.nodes.size());

    const auto audit = nlohmann::json::parse(slurp(dir / "asyncrat.audit.json"));
    CHECK(audit["mode"] == "graph");
    CHECK(audit["rational"] == true);
    CHECK(audit.contains("dropped_relations"));
    CHECK(audit.contains("logic_fixes"));
    CHECK(audit["drift"]["precision"] == 1.0);

    const auto dot = slurp(dir / "asyncrat.dot");
    CHECK(dot.find("digraph asg") != std::string::npos);
    CHECK(dot.find("color=green") != std::string::npos);
    CHECK(dot.find("color=orange") != std::string::npos);

    // Byte reproducibility: a second run emits identical files.
    const auto first = artifact_bytes(doc);
    const fs::path dir2 = scratch("kx_doc_again");
    cfg.out_dir = dir2.string();
    const auto again = run_document(cfg, kFixtures + "/asyncrat.kx.json", InputMode::Auto,
                                    default_rules(), std::nullopt);
    CHECK(artifact_bytes(again) == first);
}

TEST_CASE("a text document yields an ioc scan") {
    const fs::path dir = scratch("text_doc");
    PipelineConfig cfg;
    cfg.out_dir = dir.string();

    const auto doc = run_document(cfg, kFixtures + "/asyncrat_report.txt", InputMode::Auto,
                                  default_rules(), std::nullopt);
    CHECK(!doc.graph_mode);
    CHECK(!doc.rational);
    REQUIRE(doc.artifacts.size() == 2);

    const auto scan = nlohmann::json::parse(slurp(dir / "asyncrat_report.ioc.json"));
    const auto expected = protect(slurp(kFixtures + "/asyncrat_report.txt"));
    CHECK(scan["matches"].size() == expected.matches.size());
    CHECK(!scan["matches"].empty());
    CHECK(scan["sentences"].size() > 0);
    CHECK(scan["protected"].get<std::string>() == expected.text);
}

TEST_CASE("an empty input list succeeds with no outputs") {
    const fs::path dir = scratch("empty_inputs");
    PipelineConfig cfg;
    cfg.out_dir = (dir / "sub").string();
    const auto result = run_pipeline(cfg, {});
    CHECK(result.documents.empty());
    CHECK(!fs::exists(dir / "sub"));  // not even the directory is created
}

TEST_CASE("the model stage supplements missing phases") {
    // Deleting band I strands mf2; relation repair reconnects it at the tail,
    // which cannot satisfy the virgin-object read, so the supplement stage
    // must regenerate the intrusion.
    const auto damaged =
        testgen::delete_phase_band(testgen::corpus_template(), Phase::InitialIntrusion);
    REQUIRE(damaged.has_value());
    const auto mr = model_repair(*damaged, template_model(), default_rules(), 50);
    CHECK(mr.rational);
    CHECK(mr.relation_edges.size() == 1);
    REQUIRE(mr.supplements.size() == 1);
    CHECK(mr.supplements[0]["phase"] == "I");
    CHECK(mr.supplements[0]["nodes_added"] == 2);
    CHECK(mr.supplements[0]["restored"] == true);
    CHECK(verify(mr.graph).rational);
}

TEST_CASE("the model stage can restore a phase by relation repair alone") {
    // Band IV's only edge is the stream tail, so reconnecting the stranded
    // file at its memorized position brings the anchor back without any
    // supplementation.
    const auto damaged =
        testgen::delete_phase_band(testgen::corpus_template(), Phase::LeakageDestruction);
    REQUIRE(damaged.has_value());
    const auto mr = model_repair(*damaged, template_model(), default_rules(), 50);
    CHECK(mr.rational);
    REQUIRE(mr.relation_edges.size() == 1);
    CHECK(mr.relation_edges[0].subject == "mp2");
    CHECK(mr.relation_edges[0].object == "sf2");
    CHECK(mr.relation_edges[0].kind == RelationKind::UKF);
    CHECK(mr.supplements.empty());
    CHECK(verify(mr.graph).rational);
}

TEST_CASE("training runs persist the model and its loss curve") {
    const fs::path dir = scratch("train_run");
    const fs::path corpus_dir = dir / "corpus";
    fs::create_directories(corpus_dir);
    const auto corpus = testgen::make_corpus(3, 5);
    for (std::size_t i = 0; i < corpus.size(); ++i)
        detail::write_file((corpus_dir / ("g" + std::to_string(i) + ".json")).string(),
                           serialize(corpus[i]) + "\n");

    PipelineConfig cfg;
    cfg.out_dir = dir.string();
    TrainConfig tcfg;
    tcfg.epochs = 5;
    const auto out = run_train(cfg, corpus_dir.string(), tcfg);
    CHECK(out.model_file == (dir / "model.json").string());
    CHECK(out.losses.size() == 5);

    // Reload round-trips the parameters exactly.
    const auto m = load_model(slurp(out.model_file));
    CHECK(save_model(m) == slurp(out.model_file));

    const auto summary = nlohmann::json::parse(slurp(out.summary_file));
    CHECK(summary["epochs"] == 5);
    CHECK(summary["loss"].size() == 5);
    CHECK(summary["corpus"].size() == 3);

    // Same seed, same corpus: identical bytes.
    const auto again = run_train(cfg, corpus_dir.string(), tcfg);
    CHECK(slurp(again.model_file) == slurp(out.model_file));

    const fs::path hollow = dir / "hollow";
    fs::create_directories(hollow);
    CHECK_THROWS_AS(run_train(cfg, hollow.string(), tcfg), CorpusError);
}

TEST_CASE("pipeline errors carry their type") {
    const fs::path dir = scratch("pipe_errors");
    PipelineConfig cfg;
    cfg.out_dir = dir.string();

    CHECK_THROWS_AS(run_pipeline(cfg, {dir.string() + "/absent.json"}), IoError);

    const fs::path corrupt = dir / "corrupt.kx.json";
    detail::write_file(corrupt.string(), "{\"format\": 17}\n");
    CHECK_THROWS_AS(run_pipeline(cfg, {corrupt.string()}), SchemaError);

    cfg.model_path = (dir / "missing_model.json").string();
    CHECK_THROWS_AS(run_pipeline(cfg, {corrupt.string()}), ModelError);
}

TEST_CASE("the cli verifies graphs and renders phase bands") {
    const fs::path dir = scratch("cli_verify");
    const auto graph_file = (dir / "g.asg.json").string();
    detail::write_file(graph_file, serialize(testgen::corpus_template()) + "\n");

    const auto rep_path = (dir / "rep.json").string();
    const auto dot_path = (dir / "g.dot").string();
    const auto r =
        run_cli("verify " + graph_file + " -o " + rep_path + " --dot " + dot_path);
    REQUIRE(r.code == 0);
    const auto rep = nlohmann::json::parse(slurp(rep_path));
    CHECK(rep["rational"] == true);
    const auto dot = slurp(dot_path);
    CHECK(dot.find("color=blue") != std::string::npos);

    // Irrational graphs still exit 0: the verdict is data, not a failure.
    auto damaged = testgen::delete_phase_band(testgen::corpus_template(), Phase::CodeExecution);
    REQUIRE(damaged.has_value());
    const auto damaged_file = (dir / "damaged.asg.json").string();
    detail::write_file(damaged_file, serialize(*damaged) + "\n");
    const auto r2 = run_cli("verify " + damaged_file);
    CHECK(r2.code == 0);
    CHECK(r2.output.find("\"rational\": false") != std::string::npos);
}

TEST_CASE("cli exit codes distinguish failure classes") {
    const fs::path dir = scratch("cli_codes");
    CHECK(run_cli("verify " + (dir / "absent.json").string()).code == 4);

    const auto corrupt = (dir / "bad.kx.json").string();
    detail::write_file(corrupt, "not json\n");
    CHECK(run_cli("build " + corrupt).code == 2);

    const auto graph_file = (dir / "g.asg.json").string();
    detail::write_file(graph_file, serialize(testgen::corpus_template()) + "\n");
    CHECK(run_cli("repair " + graph_file).code == 3);  // no model configured
    CHECK(run_cli("repair " + graph_file + " --model " + (dir / "nope.json").string()).code ==
          3);

    CHECK(run_cli("eval --truth " + graph_file + " --recon " + graph_file +
                  " --mode bogus")
              .code == 2);
}

TEST_CASE("the cli pipeline is byte-reproducible across runs and jobs") {
    const fs::path out1 = scratch("cli_pipe1");
    const fs::path out2 = scratch("cli_pipe2");
    const std::string inputs =
        kFixtures + "/asyncrat.kx.json " + kFixtures + "/asyncrat_report.txt";

    const auto r1 = run_cli("pipeline " + inputs + " --out-dir " + out1.string());
    REQUIRE(r1.code == 0);
    CHECK(r1.output.find("asyncrat.kx.json: rational, 6 artifacts") != std::string::npos);
    CHECK(r1.output.find("asyncrat_report.txt: ioc scan, 2 artifacts") != std::string::npos);

    const auto r2 =
        run_cli("pipeline " + inputs + " --out-dir " + out2.string() + " --jobs 2");
    REQUIRE(r2.code == 0);

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(out1)) {
        const auto name = entry.path().filename();
        INFO("artifact " << name);
        REQUIRE(fs::exists(out2 / name));
        CHECK(slurp(entry.path()) == slurp(out2 / name));
        ++compared;
    }
    CHECK(compared == 8);
}

TEST_CASE("config files supply defaults and flags win") {
    const fs::path dir = scratch("cli_config");
    const fs::path from_config = dir / "from_config";
    const fs::path from_flag = dir / "from_flag";
    const auto config = (dir / "asgc.json").string();
    detail::write_file(config, "{\"out_dir\": \"" + from_config.string() + "\"}\n");

    const auto r1 = run_cli("pipeline " + kFixtures + "/asyncrat.kx.json",
                            "ASGC_CONFIG=" + config);
    REQUIRE(r1.code == 0);
    CHECK(fs::exists(from_config / "asyncrat.audit.json"));

    const auto r2 = run_cli("pipeline " + kFixtures + "/asyncrat.kx.json --out-dir " +
                                from_flag.string() + " --config " + config);
    REQUIRE(r2.code == 0);
    CHECK(fs::exists(from_flag / "asyncrat.audit.json"));

    const auto bad = (dir / "bad_config.json").string();
    detail::write_file(bad, "{\"unknown_knob\": 1}\n");
    CHECK(run_cli("pipeline --config " + bad).code == 2);
}

TEST_CASE("the cli trains and repairs through files") {
    const fs::path dir = scratch("cli_train");
    const fs::path corpus_dir = dir / "corpus";
    fs::create_directories(corpus_dir);
    detail::write_file((corpus_dir / "template.json").string(),
                       serialize(testgen::corpus_template()) + "\n");

    const auto model_path = (dir / "m.json").string();
    const auto r1 = run_cli("train " + corpus_dir.string() + " -o " + model_path +
                            " --epochs 1500 --lr 0.5");
    REQUIRE(r1.code == 0);
    REQUIRE(fs::exists(model_path));

    auto damaged =
        testgen::delete_phase_band(testgen::corpus_template(), Phase::InitialIntrusion);
    REQUIRE(damaged.has_value());
    const auto damaged_file = (dir / "damaged.asg.json").string();
    detail::write_file(damaged_file, serialize(*damaged) + "\n");

    const auto repaired_file = (dir / "repaired.asg.json").string();
    const auto r2 = run_cli("repair " + damaged_file + " --model " + model_path + " -o " +
                            repaired_file);
    REQUIRE(r2.code == 0);
    const auto repaired = deserialize(slurp(repaired_file));
    CHECK(verify(repaired).rational);

    const auto audit = nlohmann::json::parse(slurp(dir / "repaired.asg.audit.json"));
    CHECK(audit["rational"] == true);
    CHECK(audit["repair"]["relation_edges"].size() == 1);
    REQUIRE(audit["repair"]["supplements"].size() == 1);
    CHECK(audit["repair"]["supplements"][0]["phase"] == "I");
}
