#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "asg/kx.hpp"

#include "support/io.hpp"
#include "support/random_graph.hpp"

using namespace asg;

namespace {

std::string fixture(const char* name) {
    return testsupport::slurp(std::string(ASG_SOURCE_DIR) + "/tests/data/" + name);
}

ExtractionDocument tiny_doc() {
    ExtractionDocument d;
    d.doc_id = "tiny";
    d.entities = {{"proc", EntityKind::MP, {{"loader", 0, 2}}, {}},
                  {"file", EntityKind::MF, {{"payload.bin", 0, 5}}, {}}};
    d.relations = {{"proc", "file", RelationKind::WR, 0, 3}};
    return d;
}

// Random document made of coref chains hanging off root entities, plus
// relations between random entities. Chain roots carry no coref_of.
ExtractionDocument random_chained_doc(testgen::Rng& rng) {
    ExtractionDocument d;
    d.doc_id = "fuzz";
    const int roots = rng.range(1, 5);
    for (int r = 0; r < roots; ++r) {
        const std::string root_id = "root" + std::to_string(r);
        const auto kind = testgen::kind_at(rng.range(0, 5));
        d.entities.push_back({root_id, kind, {{root_id, 0, static_cast<std::uint64_t>(r)}}, {}});
        std::string prev = root_id;
        const int len = rng.range(0, 4);
        for (int c = 0; c < len; ++c) {
            const std::string id = root_id + "_c" + std::to_string(c);
            // Sometimes point mid-chain instead of at the direct parent.
            const std::string target = rng.chance(0.3) ? root_id : prev;
            d.entities.push_back({id, kind, {{id, 1, static_cast<std::uint64_t>(c)}}, target});
            prev = id;
        }
    }
    const int rels = rng.range(0, 8);
    for (int i = 0; i < rels; ++i) {
        const auto& a = d.entities[rng.below(d.entities.size())];
        const auto& b = d.entities[rng.below(d.entities.size())];
        d.relations.push_back({a.id, b.id, testgen::relation_at(rng.range(0, 9)),
                               rng.below(4), rng.below(16)});
    }
    return d;
}

}  // namespace

TEST_CASE("exchange parser enforces format and schema", "[kx]") {
    REQUIRE_THROWS_AS(parse_exchange("{}"), SchemaError);
    REQUIRE_THROWS_AS(parse_exchange(R"({"format":"kx/2","doc_id":"x","entities":[],"relations":[]})"),
                      SchemaError);
    REQUIRE_THROWS_AS(parse_exchange(R"({"format":"kx/1","entities":[],"relations":[]})"),
                      SchemaError);
    REQUIRE_THROWS_AS(parse_exchange("not json"), SchemaError);

    auto field_path_of = [](const std::string& text) {
        try {
            parse_exchange(text);
        } catch (const SchemaError& e) {
            return e.field_path();
        }
        return std::string("<no error>");
    };
    REQUIRE(field_path_of(R"({"format":"kx/1","doc_id":"d","entities":[{"id":"a","kind":"QQ","mentions":[]}],"relations":[]})") ==
            "entities[0].kind");
    REQUIRE(field_path_of(R"({"format":"kx/1","doc_id":"d","entities":[{"id":"a","kind":"MP","mentions":[{"text":"a","sent":0}]}],"relations":[]})") ==
            "entities[0].mentions[0].tok");
    REQUIRE(field_path_of(R"({"format":"kx/1","doc_id":"d","entities":[{"id":"a","kind":"MP","mentions":[]},{"id":"a","kind":"MP","mentions":[]}],"relations":[]})") ==
            "entities[1].id");
    REQUIRE(field_path_of(R"({"format":"kx/1","doc_id":"d","entities":[{"id":"a","kind":"MP","mentions":[],"coref_of":"ghost"}],"relations":[]})") ==
            "entities[0].coref_of");
    REQUIRE(field_path_of(R"({"format":"kx/1","doc_id":"d","entities":[{"id":"a","kind":"MP","mentions":[]}],"relations":[{"subject":"a","object":"ghost","kind":"FR","sent":0,"tok":0}]})") ==
            "relations[0].object");
}

TEST_CASE("exchange round-trips through its serializer", "[kx]") {
    const auto doc = parse_exchange(fixture("asyncrat.kx.json"));
    REQUIRE(parse_exchange(serialize_exchange(doc)) == doc);
    REQUIRE(doc.entities.size() == 16);
    REQUIRE(doc.relations.size() == 18);
    REQUIRE(doc.doc_id == "asyncrat-3losh");
}

TEST_CASE("documents without coreference pass through merge unchanged", "[kx]") {
    const auto d = tiny_doc();
    const auto merged = merge_coref(d);
    REQUIRE(merged.document == d);
    REQUIRE(merged.conflicts.empty());
}

TEST_CASE("pronoun chain folds into its canonical entity", "[kx]") {
    const auto doc = parse_exchange(fixture("asyncrat.kx.json"));
    const auto merged = merge_coref(doc);
    REQUIRE(merged.conflicts.empty());
    REQUIRE(merged.document.entities.size() == 15);
    REQUIRE(find_entity(merged.document, "ent_it") == nullptr);

    const auto* canon = find_entity(merged.document, "mp_infect");
    REQUIRE(canon != nullptr);
    REQUIRE(canon->mentions.size() == 2);
    REQUIRE(canon->mentions[0].text == "infection process");
    REQUIRE(canon->mentions[1].text == "it");
    REQUIRE_FALSE(canon->coref_of.has_value());

    // The relation that used the pronoun now uses the canonical id.
    bool repointed = false;
    for (const auto& r : merged.document.relations)
        if (r.kind == RelationKind::RF) {
            REQUIRE(r.subject == "mp_infect");
            repointed = true;
        }
    REQUIRE(repointed);
}

TEST_CASE("merge is idempotent", "[kx]") {
    const auto doc = parse_exchange(fixture("asyncrat.kx.json"));
    const auto once = merge_coref(doc);
    const auto twice = merge_coref(once.document);
    REQUIRE(twice.document == once.document);
    REQUIRE(twice.conflicts.empty());
}

TEST_CASE("kind disagreement is logged and the canonical kind wins", "[kx]") {
    ExtractionDocument d;
    d.doc_id = "conflict";
    d.entities = {{"canon", EntityKind::MP, {{"process", 0, 0}}, {}},
                  {"alias", EntityKind::MF, {{"artifact", 1, 0}}, std::string("canon")}};
    const auto merged = merge_coref(d);
    REQUIRE(merged.conflicts.size() == 1);
    REQUIRE(merged.conflicts[0].find("alias") != std::string::npos);
    REQUIRE(merged.document.entities.size() == 1);
    REQUIRE(merged.document.entities[0].kind == EntityKind::MP);
}

TEST_CASE("coreference cycles are reported with the cycle itself", "[kx]") {
    ExtractionDocument d;
    d.doc_id = "loop";
    d.entities = {{"a", EntityKind::MP, {}, std::string("b")},
                  {"b", EntityKind::MP, {}, std::string("c")},
                  {"c", EntityKind::MP, {}, std::string("a")}};
    try {
        merge_coref(d);
        FAIL("expected CorefCycleError");
    } catch (const CorefCycleError& e) {
        REQUIRE(e.cycle().size() == 4);
        REQUIRE(e.cycle().front() == e.cycle().back());
    }

    ExtractionDocument self;
    self.doc_id = "self";
    self.entities = {{"x", EntityKind::MP, {}, std::string("x")}};
    REQUIRE_THROWS_AS(merge_coref(self), CorefCycleError);
}

TEST_CASE("random chains collapse to their roots", "[kx][property]") {
    testgen::Rng rng(606);
    for (int trial = 0; trial < 120; ++trial) {
        const auto d = random_chained_doc(rng);
        int roots = 0;
        std::size_t mentions = 0;
        for (const auto& e : d.entities) {
            if (!e.coref_of) ++roots;
            mentions += e.mentions.size();
        }

        const auto merged = merge_coref(d);
        REQUIRE(static_cast<int>(merged.document.entities.size()) == roots);
        REQUIRE(merged.conflicts.empty());  // chains share their root's kind

        std::size_t merged_mentions = 0;
        for (const auto& e : merged.document.entities) {
            REQUIRE_FALSE(e.coref_of.has_value());
            merged_mentions += e.mentions.size();
        }
        REQUIRE(merged_mentions == mentions);

        for (const auto& r : merged.document.relations)
            REQUIRE(find_entity(merged.document, r.subject) != nullptr);
    }
}

TEST_CASE("two entities and one relation build the minimal graph", "[kx]") {
    const auto result = build_graph(tiny_doc());
    REQUIRE(result.warnings.empty());
    REQUIRE(result.graph.nodes.size() == 2);
    REQUIRE(result.graph.edges.size() == 1);
    REQUIRE(result.graph.edges[0].seq == 0);
    REQUIRE(result.graph.provenance == "tiny");
    REQUIRE(result.graph.nodes[0].label == "loader");
}

TEST_CASE("illegal relations are dropped with a warning, not an error", "[kx]") {
    ExtractionDocument d;
    d.doc_id = "noisy";
    d.entities = {{"f1", EntityKind::MF, {{"a.exe", 0, 0}}, {}},
                  {"f2", EntityKind::SF, {{"conf", 0, 4}}, {}},
                  {"p", EntityKind::MP, {{"proc", 1, 0}}, {}}};
    d.relations = {{"f1", "f2", RelationKind::RD, 0, 1},   // file reads file: dropped
                   {"p", "f1", RelationKind::EX, 1, 2},
                   {"p", "f2", RelationKind::ST, 2, 0}};   // file object for a socket kind

    const auto result = build_graph(d);
    REQUIRE(result.warnings.size() == 2);
    REQUIRE(result.warnings[0].find("f1") != std::string::npos);
    REQUIRE(result.graph.edges.size() == 1);
    REQUIRE(result.graph.edges[0].kind == RelationKind::EX);
    REQUIRE(result.graph.edges[0].seq == 0);  // dropped relations take no rank
    REQUIRE_NOTHROW(validate_graph(result.graph));
}

TEST_CASE("building an unmerged document is refused", "[kx]") {
    ExtractionDocument d;
    d.entities = {{"canon", EntityKind::MP, {}, {}},
                  {"alias", EntityKind::MP, {}, std::string("canon")}};
    REQUIRE_THROWS_AS(build_graph(d), SchemaError);
}

TEST_CASE("sequence numbers are dense ranks of the order keys", "[kx][property]") {
    testgen::Rng rng(7771);
    for (int trial = 0; trial < 120; ++trial) {
        auto d = random_chained_doc(rng);
        const auto merged = merge_coref(d);
        const auto result = build_graph(merged.document);
        const auto& g = result.graph;
        REQUIRE_NOTHROW(validate_graph(g));

        // Dense from zero: the distinct seq values are exactly 0..K-1.
        std::set<std::uint64_t> seqs;
        for (const auto& e : g.edges) seqs.insert(e.seq);
        std::uint64_t expect = 0;
        for (auto s : seqs) REQUIRE(s == expect++);

        // Order matches a brute-force sort of the kept relations' keys.
        std::map<std::string, EntityKind> kind_of;
        for (const auto& e : merged.document.entities) kind_of[e.id] = e.kind;
        std::vector<std::pair<std::uint64_t, std::uint64_t>> keys;
        for (const auto& r : merged.document.relations)
            if (relation_legal(kind_of.at(r.subject), r.kind, kind_of.at(r.object)))
                keys.push_back({r.sent, r.tok});
        REQUIRE(keys.size() == g.edges.size());
        for (std::size_t i = 0; i < keys.size(); ++i)
            for (std::size_t j = 0; j < keys.size(); ++j) {
                if (keys[i] < keys[j]) REQUIRE(g.edges[i].seq < g.edges[j].seq);
                if (keys[i] == keys[j]) REQUIRE(g.edges[i].seq == g.edges[j].seq);
            }
    }
}

TEST_CASE("report exchange document builds the frozen scenario graph", "[kx][golden]") {
    const auto doc = parse_exchange(fixture("asyncrat.kx.json"));
    const auto merged = merge_coref(doc);
    REQUIRE(merged.conflicts.empty());

    const auto result = build_graph(merged.document);
    REQUIRE(result.warnings.empty());
    REQUIRE(result.graph.nodes.size() == 15);
    REQUIRE(result.graph.edges.size() == 18);

    std::string golden = fixture("asyncrat.asg.json");
    REQUIRE(serialize(result.graph) == golden);

    // And the golden file itself round-trips.
    REQUIRE(serialize(deserialize(golden)) == golden);
}
