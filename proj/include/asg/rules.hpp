#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "asg/errors.hpp"
#include "asg/graph.hpp"

namespace asg {

// The four attack phases, in chronological order.
enum class Phase : std::uint8_t {
    InitialIntrusion = 1,
    CodeExecution = 2,
    BreakAccessControl = 3,
    LeakageDestruction = 4,
};

constexpr const char* to_token(Phase p) {
    switch (p) {
        case Phase::InitialIntrusion: return "I";
        case Phase::CodeExecution: return "II";
        case Phase::BreakAccessControl: return "III";
        case Phase::LeakageDestruction: return "IV";
    }
    return "?";
}

inline std::optional<Phase> phase_from_token(const std::string& s) {
    if (s == "I") return Phase::InitialIntrusion;
    if (s == "II") return Phase::CodeExecution;
    if (s == "III") return Phase::BreakAccessControl;
    if (s == "IV") return Phase::LeakageDestruction;
    return std::nullopt;
}

constexpr std::array<Phase, 4> all_phases{Phase::InitialIntrusion, Phase::CodeExecution,
                                          Phase::BreakAccessControl, Phase::LeakageDestruction};

// Condition AST. Variables name nodes bound by the anchor or by an
// enclosing `fresh` quantifier.
enum class CondKind : std::uint8_t {
    True,          // always holds
    Relation,      // rel(x, y, K): K appears between x and y in the window
    RelationAll,   // all(x, y, {K...}): every listed kind appears
    InterNonEmpty, // inter(x, y) != 0
    InterEmpty,    // inter(x, y) == 0
    DegreeEq0,     // deg(x) == 0 within the window
    DegreeNe0,     // deg(x) != 0
    InDegreeNe0,   // indeg(x) != 0
    ExistsFresh,   // some node of a listed kind, distinct from all bound nodes
    ExistsEvent,   // another flag event with the shared variable as subject
    And,
    Or,
};

struct Cond;
using CondPtr = std::shared_ptr<const Cond>;

struct Cond {
    CondKind kind = CondKind::True;
    std::string x, y;                       // variable operands
    RelationKind rel = RelationKind::RD;    // Relation
    std::vector<RelationKind> rel_set;      // RelationAll
    std::vector<EntityKind> fresh_kinds;    // ExistsFresh
    std::string fresh_var;                  // ExistsFresh
    std::string event_rule;                 // ExistsEvent: rule name, empty for a phase reference
    Phase event_phase = Phase::InitialIntrusion;  // ExistsEvent: valid when event_rule is empty
    bool event_fresh_object = false;        // ExistsEvent: object must be a fresh node
    std::vector<CondPtr> children;          // And/Or operands; ExistsFresh body (exactly one)
};

// Scope a condition is evaluated under, relative to the anchor edge.
enum class ClauseWindow : std::uint8_t { Plain, Forward, Backward };

struct Clause {
    ClauseWindow window = ClauseWindow::Plain;
    CondPtr cond;
};

struct FlagRule {
    std::string name;
    Phase phase = Phase::InitialIntrusion;
    std::vector<RelationKind> anchor_kinds;   // edge kind must be one of these
    std::vector<EntityKind> subject_kinds;
    std::vector<EntityKind> object_kinds;
    std::string subject_var, object_var;
    std::vector<Clause> clauses;              // all must hold
};

struct RuleCatalog {
    std::vector<FlagRule> rules;  // file order; breaks ties between simultaneous matches

    const FlagRule* find(std::string_view name) const {
        for (const auto& r : rules)
            if (r.name == name) return &r;
        return nullptr;
    }

    std::vector<std::size_t> of_phase(Phase p) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < rules.size(); ++i)
            if (rules[i].phase == p) out.push_back(i);
        return out;
    }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < rules.size(); ++i)
            if (rules[i].name == name) return i;
        throw SchemaError("unknown rule '" + std::string(name) + "'");
    }
};

namespace detail {

[[noreturn]] inline void rule_error(int line, const std::string& msg) {
    throw SchemaError("rule catalog: " + msg, 0, "line " + std::to_string(line));
}

inline bool word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
}

inline std::vector<std::string> lex_cond(const std::string& s, int line) {
    std::vector<std::string> toks;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == ' ' || c == '\t') {
            ++i;
        } else if (word_char(c)) {
            std::size_t j = i;
            while (j < s.size() && word_char(s[j])) ++j;
            toks.push_back(s.substr(i, j - i));
            i = j;
        } else if (s.compare(i, 2, "==") == 0 || s.compare(i, 2, "!=") == 0 ||
                   s.compare(i, 2, "||") == 0) {
            toks.push_back(s.substr(i, 2));
            i += 2;
        } else if (c == '(' || c == ')' || c == '{' || c == '}' || c == ',' || c == ':' ||
                   c == '&') {
            toks.push_back(std::string(1, c));
            ++i;
        } else {
            rule_error(line, std::string("unexpected character '") + c + "' in condition");
        }
    }
    return toks;
}

// Recursive-descent parser for one condition expression.
class CondParser {
  public:
    CondParser(std::vector<std::string> toks, int line, std::vector<std::string> scope)
        : toks_(std::move(toks)), line_(line), scope_(std::move(scope)) {}

    CondPtr parse() {
        auto c = parse_or();
        if (pos_ != toks_.size()) rule_error(line_, "trailing tokens after condition");
        return c;
    }

  private:
    const std::string& peek() const {
        static const std::string end = "<end>";
        return pos_ < toks_.size() ? toks_[pos_] : end;
    }

    std::string take() {
        if (pos_ >= toks_.size()) rule_error(line_, "condition ends unexpectedly");
        return toks_[pos_++];
    }

    void expect(const std::string& t) {
        const auto got = take();
        if (got != t) rule_error(line_, "expected '" + t + "', got '" + got + "'");
    }

    std::string take_var() {
        const auto v = take();
        if (std::find(scope_.begin(), scope_.end(), v) == scope_.end())
            rule_error(line_, "variable '" + v + "' is not bound here");
        return v;
    }

    RelationKind take_relation() {
        const auto t = take();
        const auto k = relation_kind_from_token(t);
        if (!k) rule_error(line_, "unknown relation kind '" + t + "'");
        return *k;
    }

    EntityKind take_entity() {
        const auto t = take();
        const auto k = entity_kind_from_token(t);
        if (!k) rule_error(line_, "unknown entity kind '" + t + "'");
        return *k;
    }

    CondPtr parse_or() {
        std::vector<CondPtr> parts{parse_and()};
        while (peek() == "||") {
            take();
            parts.push_back(parse_and());
        }
        if (parts.size() == 1) return parts[0];
        auto c = std::make_shared<Cond>();
        c->kind = CondKind::Or;
        c->children = std::move(parts);
        return c;
    }

    CondPtr parse_and() {
        std::vector<CondPtr> parts{parse_prim()};
        while (peek() == "&") {
            take();
            parts.push_back(parse_prim());
        }
        if (parts.size() == 1) return parts[0];
        auto c = std::make_shared<Cond>();
        c->kind = CondKind::And;
        c->children = std::move(parts);
        return c;
    }

    CondPtr parse_prim() {
        auto c = std::make_shared<Cond>();
        const auto head = take();
        if (head == "true") {
            c->kind = CondKind::True;
        } else if (head == "rel") {
            c->kind = CondKind::Relation;
            expect("(");
            c->x = take_var();
            expect(",");
            c->y = take_var();
            expect(",");
            c->rel = take_relation();
            expect(")");
        } else if (head == "all") {
            c->kind = CondKind::RelationAll;
            expect("(");
            c->x = take_var();
            expect(",");
            c->y = take_var();
            expect(",");
            expect("{");
            c->rel_set.push_back(take_relation());
            while (peek() == ",") {
                take();
                c->rel_set.push_back(take_relation());
            }
            expect("}");
            expect(")");
        } else if (head == "inter") {
            expect("(");
            c->x = take_var();
            expect(",");
            c->y = take_var();
            expect(")");
            const auto op = take();
            expect("0");
            if (op == "!=") c->kind = CondKind::InterNonEmpty;
            else if (op == "==") c->kind = CondKind::InterEmpty;
            else rule_error(line_, "expected '==' or '!=' after inter(...)");
        } else if (head == "deg") {
            expect("(");
            c->x = take_var();
            expect(")");
            const auto op = take();
            expect("0");
            if (op == "==") c->kind = CondKind::DegreeEq0;
            else if (op == "!=") c->kind = CondKind::DegreeNe0;
            else rule_error(line_, "expected '==' or '!=' after deg(...)");
        } else if (head == "indeg") {
            c->kind = CondKind::InDegreeNe0;
            expect("(");
            c->x = take_var();
            expect(")");
            expect("!=");
            expect("0");
        } else if (head == "fresh") {
            c->kind = CondKind::ExistsFresh;
            c->fresh_kinds.push_back(take_entity());
            while (peek() == ",") {
                take();
                c->fresh_kinds.push_back(take_entity());
            }
            c->fresh_var = take();
            if (std::find(scope_.begin(), scope_.end(), c->fresh_var) != scope_.end())
                rule_error(line_, "fresh variable '" + c->fresh_var + "' shadows a binding");
            expect(":");
            expect("(");
            scope_.push_back(c->fresh_var);
            c->children.push_back(parse_or());
            scope_.pop_back();
            expect(")");
        } else if (head == "event") {
            c->kind = CondKind::ExistsEvent;
            const auto name = take();
            if (const auto p = phase_from_token(name.size() > 6 ? name.substr(6) : "");
                name.rfind("phase_", 0) == 0 && p) {
                c->event_phase = *p;
            } else {
                c->event_rule = name;
            }
            expect("(");
            c->x = take_var();
            if (peek() == ",") {
                take();
                expect("fresh");
                c->event_fresh_object = true;
            }
            expect(")");
        } else if (head == "(") {
            c = std::const_pointer_cast<Cond>(parse_or());
            expect(")");
        } else {
            rule_error(line_, "unexpected token '" + head + "'");
        }
        return c;
    }

    std::vector<std::string> toks_;
    std::size_t pos_ = 0;
    int line_;
    std::vector<std::string> scope_;
};

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename Kind, typename FromToken>
std::vector<Kind> parse_kind_list(const std::string& csv, FromToken from, int line) {
    std::vector<Kind> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const auto item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        const auto k = from(item);
        if (!k) rule_error(line, "unknown kind '" + item + "'");
        out.push_back(*k);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Every event reference must name a known rule, and references must not form
// a cycle (a phase reference depends on every rule of that phase).
inline void check_event_refs(const RuleCatalog& cat) {
    std::vector<std::vector<std::size_t>> deps(cat.rules.size());
    std::vector<const Cond*> stack;
    for (std::size_t i = 0; i < cat.rules.size(); ++i) {
        for (const auto& cl : cat.rules[i].clauses) stack.push_back(cl.cond.get());
        while (!stack.empty()) {
            const Cond* c = stack.back();
            stack.pop_back();
            for (const auto& ch : c->children) stack.push_back(ch.get());
            if (c->kind != CondKind::ExistsEvent) continue;
            if (c->event_rule.empty()) {
                for (auto j : cat.of_phase(c->event_phase)) deps[i].push_back(j);
            } else {
                const FlagRule* target = cat.find(c->event_rule);
                if (!target)
                    throw SchemaError("rule catalog: rule '" + cat.rules[i].name +
                                      "' references unknown event '" + c->event_rule + "'");
                deps[i].push_back(cat.index_of(c->event_rule));
            }
        }
    }
    // 0 = unvisited, 1 = open, 2 = done.
    std::vector<int> state(cat.rules.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> dfs;
    for (std::size_t root = 0; root < cat.rules.size(); ++root) {
        if (state[root]) continue;
        dfs.push_back({root, 0});
        state[root] = 1;
        while (!dfs.empty()) {
            auto& [n, next] = dfs.back();
            if (next < deps[n].size()) {
                const auto m = deps[n][next++];
                if (state[m] == 1)
                    throw SchemaError("rule catalog: circular event reference through '" +
                                      cat.rules[m].name + "'");
                if (state[m] == 0) {
                    state[m] = 1;
                    dfs.push_back({m, 0});
                }
            } else {
                state[n] = 2;
                dfs.pop_back();
            }
        }
    }
}

}  // namespace detail

// Parses the line-oriented rule catalog format:
//
//   rule <Name>
//   phase <I|II|III|IV>
//   anchor <REL[,REL...]> <KIND[,KIND...]> -> <KIND[,KIND...]> bind <svar> <ovar>
//   plain:    <condition>     (each of these lines optional, repeatable;
//   forward:  <condition>      conditions on one line share that window)
//   backward: <condition>
//   end
//
// '#' starts a comment. Conditions: rel(x,y,K), all(x,y,{K,...}),
// inter(x,y)==0|!=0, deg(x)==0|!=0, indeg(x)!=0, fresh KIND[,KIND] v: (...),
// event Name(x[, fresh]), event phase_N(x), true, combined with '&' and '||'.
inline RuleCatalog parse_rules(const std::string& text) {
    RuleCatalog cat;
    std::optional<FlagRule> cur;
    bool saw_phase = false, saw_anchor = false;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto words = detail::split_ws(line);
        if (words.empty()) continue;
        const auto& head = words[0];

        if (head == "rule") {
            if (cur) detail::rule_error(line_no, "previous rule is missing 'end'");
            if (words.size() != 2) detail::rule_error(line_no, "expected 'rule <name>'");
            if (cat.find(words[1]))
                detail::rule_error(line_no, "duplicate rule name '" + words[1] + "'");
            cur.emplace();
            cur->name = words[1];
            saw_phase = saw_anchor = false;
            continue;
        }
        if (!cur) detail::rule_error(line_no, "'" + head + "' outside a rule block");

        if (head == "phase") {
            if (words.size() != 2) detail::rule_error(line_no, "expected 'phase <I..IV>'");
            const auto p = phase_from_token(words[1]);
            if (!p) detail::rule_error(line_no, "unknown phase '" + words[1] + "'");
            cur->phase = *p;
            saw_phase = true;
        } else if (head == "anchor") {
            if (words.size() != 8 || words[3] != "->" || words[5] != "bind")
                detail::rule_error(line_no,
                                   "expected 'anchor <rels> <kinds> -> <kinds> bind <s> <o>'");
            cur->anchor_kinds = detail::parse_kind_list<RelationKind>(
                words[1], relation_kind_from_token, line_no);
            cur->subject_kinds =
                detail::parse_kind_list<EntityKind>(words[2], entity_kind_from_token, line_no);
            cur->object_kinds =
                detail::parse_kind_list<EntityKind>(words[4], entity_kind_from_token, line_no);
            cur->subject_var = words[6];
            cur->object_var = words[7];
            if (cur->subject_var == cur->object_var)
                detail::rule_error(line_no, "anchor variables must be distinct");
            for (const auto sk : cur->subject_kinds)
                for (const auto rk : cur->anchor_kinds)
                    for (const auto ok : cur->object_kinds)
                        if (!relation_legal(sk, rk, ok))
                            detail::rule_error(line_no, "anchor allows an illegal edge shape");
            saw_anchor = true;
        } else if (head == "end") {
            if (!saw_phase || !saw_anchor)
                detail::rule_error(line_no, "rule '" + cur->name + "' lacks phase or anchor");
            cat.rules.push_back(std::move(*cur));
            cur.reset();
        } else if (head == "plain:" || head == "forward:" || head == "backward:") {
            const auto colon = line.find(':');
            const auto body = line.substr(colon + 1);
            Clause cl;
            cl.window = head == "plain:" ? ClauseWindow::Plain
                        : head == "forward:" ? ClauseWindow::Forward
                                             : ClauseWindow::Backward;
            if (!saw_anchor)
                detail::rule_error(line_no, "condition before the anchor line");
            detail::CondParser parser(detail::lex_cond(body, line_no), line_no,
                                      {cur->subject_var, cur->object_var});
            cl.cond = parser.parse();
            cur->clauses.push_back(std::move(cl));
        } else {
            detail::rule_error(line_no, "unknown directive '" + head + "'");
        }
    }
    if (cur) throw SchemaError("rule catalog: unterminated rule '" + cur->name + "'");
    detail::check_event_refs(cat);
    return cat;
}

}  // namespace asg
