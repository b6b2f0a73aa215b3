// Builds a small attack scenario by hand, checks whether it tells a complete
// story, and shows how logic repair reacts when it does not.
//
//   ./sample_verify          prints the verification report
//   ./sample_verify --dot    also prints Graphviz source for the graph

#include <cstdio>
#include <cstring>

#include "asg/asg.hpp"

using namespace asg;

namespace {

// A workstation compromise: a document fetched from the network is opened,
// the payload schedules itself, tampers with a system binary, and finally
// wipes its staging file.
AttackScenarioGraph scenario() {
    AttackScenarioGraph g;
    g.nodes = {
        {"winword", EntityKind::TP, "WINWORD.EXE"},
        {"invoice", EntityKind::MF, "invoice.docm"},
        {"dropper", EntityKind::MP, "update.exe"},
        {"schtask", EntityKind::TP, "schtasks.exe"},
        {"taskdb", EntityKind::SF, "C:/Windows/System32/Tasks"},
        {"svcbin", EntityKind::SF, "C:/Windows/System32/spoolsv.exe"},
        {"staging", EntityKind::SF, "C:/Users/Public/stage.bin"},
    };
    g.edges = {
        {"winword", "invoice", RelationKind::RD, 0},   // open the lure
        {"schtask", "taskdb", RelationKind::RD, 1},    // scheduler was already alive
        {"dropper", "invoice", RelationKind::RD, 2},   // payload reads it back
        {"dropper", "schtask", RelationKind::FR, 3},   // persistence via scheduler
        {"dropper", "svcbin", RelationKind::CD, 4},    // swap a service binary
        {"dropper", "staging", RelationKind::WR, 5},
        {"dropper", "staging", RelationKind::UKF, 6},  // destroy the evidence
    };
    return g;
}

void print_report(const AttackScenarioGraph& g, const VerificationReport& rep) {
    std::printf("rational: %s\n", rep.rational ? "yes" : "no");
    std::printf("flag events:\n");
    for (const auto& m : rep.matches)
        std::printf("  @%-3llu %-32s %s -> %s  (phase %s)\n",
                    static_cast<unsigned long long>(m.seq), m.rule.c_str(), m.subject.c_str(),
                    m.object.c_str(), to_token(m.phase));
    std::printf("phase bands:\n");
    for (const auto& s : rep.segmentation)
        std::printf("  [%llu, %llu] %s\n", static_cast<unsigned long long>(s.first),
                    static_cast<unsigned long long>(s.last),
                    s.phase ? to_token(*s.phase) : "pre");
    std::printf("fingerprint: %016llx\n", static_cast<unsigned long long>(fingerprint(g)));
}

}  // namespace

int main(int argc, char** argv) {
    const auto g = scenario();
    const auto rep = verify(g);
    print_report(g, rep);

    // Knock out the destruction step and let logic repair explain the gap.
    auto broken = g;
    broken.edges.pop_back();
    const auto fixed = logic_fix(broken);
    const auto rep2 = verify(fixed.graph);
    std::printf("\nwithout the final flow: rational=%s, missing:", rep2.rational ? "yes" : "no");
    for (const Phase p : all_phases)
        if (!rep2.phases_passed.count(p)) std::printf(" %s", to_token(p));
    std::printf("\n");

    if (argc > 1 && std::strcmp(argv[1], "--dot") == 0)
        std::printf("\n%s", to_dot(g, phase_edge_colors(g, rep)).c_str());
    return rep.rational ? 0 : 1;
}
