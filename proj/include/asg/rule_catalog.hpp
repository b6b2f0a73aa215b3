#pragma once

#include <string>

#include "asg/rules.hpp"

namespace asg {

// Built-in copy of data/flag_rules.txt so the library works without the
// data file installed. A test keeps the two in sync byte for byte.
inline const std::string& default_rules_text() {
    static const std::string text = R"cat(# Flag-event catalog. One block per rule; the file order is the catalog
# order and breaks ties between events matching at the same sequence number.
#
#   anchor <relation kinds> <subject kinds> -> <object kinds> bind <subj> <obj>
#
# plain:/forward:/backward: conditions are scoped to the whole stream, to
# events strictly after the anchor, or to events strictly before it.
# Conditions joined with '&' share one window; separate lines are checked
# independently. 'fresh K v: (...)' binds a node of kind K distinct from all
# nodes bound so far. 'event Name(x)' requires another matched flag event
# with x as its subject; adding ', fresh' also requires its object to be a
# node not bound here. 'event phase_N(x)' accepts any rule of that phase.

rule Untrusted_Read
phase I
anchor RD TP,MP -> MF bind s o
forward: deg(o) == 0
end

rule Malicious_Link_Clicks
phase I
anchor ST,RF TP,MP -> SO bind s o
forward: deg(o) == 0
end

rule Target_Process_Fork
phase II
anchor FR MP -> TP bind s o
forward: fresh MF f: (rel(s, f, EX))
backward: deg(o) != 0
end

rule Malicious_File_Write_Exec
phase II
anchor WR,EX MP -> MF bind s o
forward: event Untrusted_Read(s, fresh) & fresh MP p: (rel(s, p, FR))
end

rule Call_OS_API
phase II
anchor FR MP -> TP bind s o
forward: fresh MF f: (rel(s, f, EX)) & deg(o) == 0
backward: deg(o) != 0
end

rule Shell_Exec
phase II
anchor EX TP,MP -> MF bind s o
plain: event phase_I(s)
backward: deg(s) != 0
end

rule Exploitation_for_Client_Execution
phase II
anchor RD,WR TP -> MF bind s o
forward: fresh SO c: (inter(s, c) != 0)
backward: deg(s) != 0
end

rule Inter-Process_Communication
phase II
anchor FR,IJ MP -> MP bind s o
forward: fresh SO c: (inter(s, c) != 0)
backward: deg(o) != 0
end

rule Abuse_Task_Scheduling
phase II
anchor FR MP -> TP bind s o
forward: deg(s) != 0
backward: deg(o) != 0
end

rule Abuse_Elevation
phase III
anchor CD MP -> SF bind s o
forward: deg(s) != 0
end

rule Trigger_Execution
phase III
anchor IJ MP -> TP bind s o
forward: fresh SF f: (inter(s, f) != 0)
backward: deg(o) != 0
end

rule Modify_Access_Tokens
phase III
anchor RD,WR TP,MP -> SF bind s o
plain: all(s, o, {RD, WR})
forward: deg(s) != 0
end

rule Configure_System_Settings
phase III
anchor RD TP,MP -> SF bind s o
forward: deg(s) != 0
backward: fresh MF f: (inter(s, f) != 0)
end

rule Scripts_Automatically_Write_or_Exec
phase III
anchor WR,EX TP,MP -> MF bind s o
forward: fresh SF f: (rel(s, f, WR) || rel(s, f, RD))
backward: fresh TP,MP p: (inter(p, o) != 0)
end

rule Modify_System-level_Processes
phase III
anchor IJ MP -> TP bind s o
plain: fresh MF f: (true)
forward: fresh SF f: (inter(s, f) != 0)
backward: deg(s) != 0
end

rule Hijack_Execution_Flow
phase III
anchor RD MP -> SF bind s o
forward: fresh MF f: (rel(s, f, WR)) & inter(s, o) != 0
backward: fresh TP t: (indeg(t) != 0)
end

rule Account_Access_Removal
phase IV
anchor UKF MP -> SF bind s o
forward: event Modify_Access_Tokens(s, fresh)
backward: deg(o) == 0
end

rule Collected_Sensitive_Information
phase IV
anchor WR MP -> TF bind s o
plain: fresh SF f: (true)
forward: rel(s, o, RD)
end

rule Service_Stop_to_Avoid_Detection
phase IV
anchor UKF MP -> SF bind s o
forward: deg(s) == 0
end

rule Clean_Artifacts
phase IV
anchor UKF MP -> TF bind s o
forward: fresh SF f: (rel(s, f, RD)) || fresh TF t: (rel(s, t, UKF))
backward: fresh MF f: (inter(s, f) != 0)
end
)cat";
    return text;
}

inline const RuleCatalog& default_rules() {
    static const RuleCatalog catalog = parse_rules(default_rules_text());
    return catalog;
}

}  // namespace asg
