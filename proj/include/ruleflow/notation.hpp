#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ruleflow/errors.hpp"
#include "ruleflow/rule_model.hpp"

namespace ruleflow {

// ── flow rule statements ────────────────────────────────────────────────────

/// Attribute pattern used by edit/delete: any field may be the wildcard `*`.
struct AttrFilter {
    std::string name = "*";
    std::string type = "*";
    std::string value = "*";

    friend bool operator==(const AttrFilter&, const AttrFilter&) = default;
};

/// `pr(in, [outs...])`: propagate rules arriving on one input port to outputs.
struct Propagate {
    std::string in_port;
    std::vector<std::string> out_ports;

    friend bool operator==(const Propagate&, const Propagate&) = default;
};

/// `edit(in, out, name, type, value, new_type, new_value)`: rewrite matching
/// propagated attributes on the in→out copy. The replacement is never `*`.
struct EditRule {
    std::string in_port;   // may be "*"
    std::string out_port;  // may be "*"
    AttrFilter filter;
    std::string new_type;
    std::string new_value;

    friend bool operator==(const EditRule&, const EditRule&) = default;
};

/// `delete(in, out, name, type, value)`: drop matching propagated attributes
/// (and, downstream, every obligation that references one of them).
struct DeleteRule {
    std::string in_port;
    std::string out_port;
    AttrFilter filter;

    friend bool operator==(const DeleteRule&, const DeleteRule&) = default;
};

using Refinement = std::variant<EditRule, DeleteRule>;

/// A process's flow rules: propagations plus ordered refinements.
struct FlowRuleSet {
    std::vector<Propagate> propagates;
    std::vector<Refinement> refinements;

    bool empty() const { return propagates.empty() && refinements.empty(); }

    friend bool operator==(const FlowRuleSet&, const FlowRuleSet&) = default;
};

using AnyStatement = std::variant<AttributeDecl, ObligationDecl, Propagate, EditRule, DeleteRule>;

// ── scanner ─────────────────────────────────────────────────────────────────

namespace detail {

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

inline std::string lowered(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), ascii_lower);
    return s;
}

inline std::string rtrimmed(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    return s;
}

/**
 * Character scanner over rule text.
 *
 * The notation in the wild is transcribed from policy documents and arrives
 * with typographic damage, so value scanning repairs three specific shapes
 * instead of failing:
 *
 *   1. Stray closing quotes: if a quote closes but the next non-space
 *      character is not a field delimiter, the literal keeps going — raw text
 *      and further quoted segments are appended (quote marks dropped) until a
 *      delimiter appears outside quotes.
 *   2. Unterminated single-line strings: the value extends to the *last*
 *      delimiter on the line (values legitimately contain commas and
 *      parentheses, so the first one would cut too early).
 *   3. Block strings: only when the opening quote is immediately followed by
 *      a line break does a literal span lines, running to the next quote.
 *      Everything else is line-bound, so one bad quote cannot swallow the
 *      statements after it.
 */
class Scanner {
public:
    explicit Scanner(const std::string& text) : text_(text) {}

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    void skip_ws() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    int line() const {
        return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + long(pos_), '\n'));
    }

    int column() const {
        std::size_t bol = text_.rfind('\n', pos_ == 0 ? 0 : pos_ - 1);
        std::size_t start = (pos_ == 0 || bol == std::string::npos) ? 0 : bol + 1;
        return 1 + static_cast<int>(pos_ - start);
    }

    [[noreturn]] void fail(const std::string& expected) const {
        throw SyntaxError(line(), column(), expected);
    }

    void expect(char c, const char* what) {
        skip_ws();
        if (peek() != c) fail(std::string("expected ") + what);
        ++pos_;
    }

    bool try_consume(char c) {
        skip_ws();
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    /// Consumes exactly one character (no whitespace skipping).
    void bump() { ++pos_; }

    bool looking_at_ident() {
        skip_ws();
        return is_ident_start(peek());
    }

    std::string read_ident() {
        skip_ws();
        if (!is_ident_start(peek())) fail("expected identifier");
        std::string out;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) {
            out.push_back(text_[pos_]);
            ++pos_;
        }
        return out;
    }

    /// Consumes the given keyword (case-insensitive, whole-identifier match)
    /// if it is next; leaves the cursor untouched otherwise.
    bool try_keyword(const char* kw) {
        skip_ws();
        std::size_t save = pos_;
        if (!is_ident_start(peek())) return false;
        std::string ident = read_ident();
        if (lowered(ident) == kw) return true;
        pos_ = save;
        return false;
    }

    /// Reads a value at the cursor: quoted string (with repairs), or a bare
    /// token running to the next delimiter. `delims` are the characters that
    /// may legally follow the value in this grammar position.
    std::string read_value(const std::string& delims) {
        skip_ws();
        if (peek() == '"') return read_string(delims);
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\n' || delims.find(c) != std::string::npos) break;
            out.push_back(c);
            ++pos_;
        }
        out = rtrimmed(out);
        if (out.empty()) fail("expected value");
        return out;
    }

    std::string read_string(const std::string& delims) {
        int start_line = line(), start_col = column();
        ++pos_;  // opening quote
        // Block mode: the opening quote ends its line.
        std::size_t probe = pos_;
        while (probe < text_.size() &&
               (text_[probe] == ' ' || text_[probe] == '\t' || text_[probe] == '\r')) {
            ++probe;
        }
        if (probe >= text_.size() || text_[probe] == '\n') {
            std::string out;
            while (pos_ < text_.size()) {
                char c = text_[pos_];
                if (c == '\\' && pos_ + 1 < text_.size()) {
                    out.push_back(unescape(text_[pos_ + 1]));
                    pos_ += 2;
                    continue;
                }
                if (c == '"') {
                    ++pos_;
                    return out;
                }
                out.push_back(c);
                ++pos_;
            }
            throw SyntaxError(start_line, start_col, "unterminated block string");
        }
        // Single-line mode: everything below stays on the opening line.
        std::size_t content_start = pos_;
        std::size_t eol = text_.find('\n', pos_);
        if (eol == std::string::npos) eol = text_.size();
        std::string out;
        bool inside = true;
        std::size_t clean_len = 0;  // out length at the last closing quote
        // Repair material appended after a close gets right-trimmed; content
        // that was properly inside the quotes is kept verbatim.
        auto trimmed_tail = [&]() {
            while (out.size() > clean_len &&
                   (out.back() == ' ' || out.back() == '\t' || out.back() == '\r')) {
                out.pop_back();
            }
            return out;
        };
        while (pos_ < eol) {
            char c = text_[pos_];
            if (inside) {
                if (c == '\\' && pos_ + 1 < eol) {
                    out.push_back(unescape(text_[pos_ + 1]));
                    pos_ += 2;
                    continue;
                }
                if (c == '"') {
                    inside = false;
                    ++pos_;
                    clean_len = out.size();
                    continue;
                }
                out.push_back(c);
                ++pos_;
            } else {
                if (delims.find(c) != std::string::npos) return trimmed_tail();
                if (c == '"') {
                    inside = true;  // the previous quote was stray; keep going
                    ++pos_;
                    continue;
                }
                out.push_back(c);
                ++pos_;
            }
        }
        if (!inside) return trimmed_tail();  // closed right at the line end
        // Unterminated: repair by taking everything up to the last delimiter
        // on the line, with stray quote marks dropped.
        std::size_t last_delim = std::string::npos;
        for (std::size_t i = content_start; i < eol; ++i) {
            if (delims.find(text_[i]) != std::string::npos) last_delim = i;
        }
        if (last_delim == std::string::npos) {
            throw SyntaxError(start_line, start_col, "unterminated string");
        }
        out.clear();
        for (std::size_t i = content_start; i < last_delim;) {
            char c = text_[i];
            if (c == '\\' && i + 1 < last_delim) {
                out.push_back(unescape(text_[i + 1]));
                i += 2;
                continue;
            }
            if (c != '"') out.push_back(c);
            ++i;
        }
        pos_ = last_delim;
        return rtrimmed(out);
    }

private:
    static char unescape(char c) {
        switch (c) {
            case 'n': return '\n';
            case 't': return '\t';
            case 'r': return '\r';
            default: return c;  // covers \" and \\ and anything exotic
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

// ── statement parsers ───────────────────────────────────────────────────────

inline Condition parse_or_expr(Scanner& s);

inline Condition parse_comparison(Scanner& s) {
    int line = s.line(), col = s.column();
    std::string slot_ident = s.read_ident();
    auto slot = slot_from_name(slot_ident);
    if (!slot) {
        (void)line;
        (void)col;
        throw UnknownSlot(slot_ident);
    }
    s.skip_ws();
    CompareOp op;
    if (s.try_consume('!')) {
        s.expect('=', "'=' after '!'");
        op = CompareOp::Neq;
    } else if (s.try_consume('=')) {
        op = CompareOp::Eq;
    } else {
        s.fail("expected '=' or '!='");
    }
    s.skip_ws();
    if (s.try_consume('*')) return Condition::compare_any(*slot, op);
    if (s.peek() == '"') {
        return Condition::compare(*slot, op, s.read_string(",)"));
    }
    // Bare operand: a run of non-delimiter characters (policy text uses
    // tokens like `identify|forAdvertisingCampaigns` here).
    std::string operand;
    while (true) {
        char c = s.peek();
        if (c == '\0' || c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',' ||
            c == ')' || c == '(') {
            break;
        }
        operand.push_back(c);
        s.bump();
    }
    if (operand.empty()) s.fail("expected comparison operand");
    return Condition::compare(*slot, op, operand);
}

inline Condition parse_unary(Scanner& s) {
    // `null` is accepted wherever a term is: programmatically built
    // conditions may nest it, and their canonical text must re-parse.
    if (s.try_keyword("null")) return Condition::null_condition();
    if (s.try_keyword("not")) return Condition::negation(parse_unary(s));
    if (s.try_consume('(')) {
        Condition inner = parse_or_expr(s);
        s.expect(')', "')' closing condition group");
        return inner;
    }
    return parse_comparison(s);
}

inline Condition parse_and_expr(Scanner& s) {
    std::vector<Condition> terms;
    terms.push_back(parse_unary(s));
    while (s.try_keyword("and")) terms.push_back(parse_unary(s));
    if (terms.size() == 1) return std::move(terms.front());
    return Condition::conjunction(std::move(terms));
}

inline Condition parse_or_expr(Scanner& s) {
    std::vector<Condition> terms;
    terms.push_back(parse_and_expr(s));
    while (s.try_keyword("or")) terms.push_back(parse_and_expr(s));
    if (terms.size() == 1) return std::move(terms.front());
    return Condition::disjunction(std::move(terms));
}

inline Condition parse_condition(Scanner& s) { return parse_or_expr(s); }

inline AttributeDecl parse_attribute(Scanner& s) {
    AttributeDecl attr;
    s.expect('(', "'(' after attribute");
    attr.name = s.read_ident();
    s.expect(',', "',' after attribute name");
    s.skip_ws();
    if (s.peek() == '"') {
        attr.type = "str";  // typeless declarations default to str
        attr.value = s.read_string(")");
    } else {
        attr.type = s.read_ident();
        s.try_consume(',');  // tolerated: some sources comma-separate type and value
        s.skip_ws();
        if (s.peek() == ')') s.fail("expected attribute value");
        attr.value = s.read_value(")");
    }
    s.expect(')', "')' closing attribute");
    return attr;
}

inline ObligationDecl parse_obligation(Scanner& s) {
    ObligationDecl ob;
    s.expect('(', "'(' after obligation");
    ob.action_class = s.read_ident();
    while (s.looking_at_ident()) ob.args.push_back(s.read_ident());
    s.expect(',', "',' after obligation head");
    s.expect('[', "'[' opening validity list");
    while (true) {
        s.skip_ws();
        if (s.peek() == ']') break;
        ob.validity.push_back(s.read_ident());
        s.try_consume(',');
    }
    s.expect(']', "']' closing validity list");
    s.expect(',', "',' before activation condition");
    ob.condition = parse_condition(s);
    s.expect(')', "')' closing obligation");
    return ob;
}

inline Propagate parse_propagate(Scanner& s) {
    Propagate pr;
    s.expect('(', "'(' after pr");
    pr.in_port = s.read_ident();
    s.expect(',', "',' after input port");
    s.skip_ws();
    if (s.try_consume('[')) {
        while (true) {
            s.skip_ws();
            if (s.peek() == ']') break;
            pr.out_ports.push_back(s.read_ident());
            s.try_consume(',');
        }
        s.expect(']', "']' closing output list");
    } else {
        pr.out_ports.push_back(s.read_ident());
    }
    s.expect(')', "')' closing pr");
    return pr;
}

/// Reads the comma-separated field list of an edit/delete statement. Fields
/// are `*`, quoted strings, or bare tokens.
inline std::vector<std::string> parse_field_list(Scanner& s, const char* keyword) {
    s.expect('(', "'(' after statement keyword");
    std::vector<std::string> fields;
    while (true) {
        s.skip_ws();
        if (s.peek() == ')') break;
        if (s.try_consume('*')) {
            fields.push_back("*");
        } else {
            fields.push_back(s.read_value(",)"));
        }
        if (!s.try_consume(',')) break;
    }
    s.expect(')', (std::string("')' closing ") + keyword).c_str());
    return fields;
}

inline DeleteRule parse_delete(Scanner& s, int line) {
    std::vector<std::string> f = parse_field_list(s, "delete");
    if (f.size() != 5) throw ArityError(line, "delete", 5, f.size());
    return DeleteRule{f[0], f[1], AttrFilter{f[2], f[3], f[4]}};
}

inline EditRule parse_edit(Scanner& s, int line) {
    std::vector<std::string> f = parse_field_list(s, "edit");
    if (f.size() != 7) throw ArityError(line, "edit", 7, f.size());
    if (f[5] == "*" || f[6] == "*") {
        throw SyntaxError(line, 1, "edit replacement type/value may not be '*'");
    }
    return EditRule{f[0], f[1], AttrFilter{f[2], f[3], f[4]}, f[5], f[6]};
}

inline std::vector<AnyStatement> parse_any(const std::string& text) {
    Scanner s(text);
    std::vector<AnyStatement> out;
    while (!s.at_end()) {
        int line = s.line();
        std::string keyword = lowered(s.read_ident());
        if (keyword == "attribute") {
            out.emplace_back(parse_attribute(s));
        } else if (keyword == "obligation") {
            out.emplace_back(parse_obligation(s));
        } else if (keyword == "pr") {
            out.emplace_back(parse_propagate(s));
        } else if (keyword == "edit") {
            out.emplace_back(parse_edit(s, line));
        } else if (keyword == "delete") {
            out.emplace_back(parse_delete(s, line));
        } else {
            throw SyntaxError(line, 1, "unknown statement keyword '" + keyword + "'");
        }
    }
    return out;
}

}  // namespace detail

// ── public parse interface ──────────────────────────────────────────────────

/// Parses data-rule text into statements (references still by name).
/// Flow statements in the input are an error here.
inline std::vector<RuleStatement> parse_data_rules(const std::string& text) {
    std::vector<RuleStatement> out;
    for (AnyStatement& st : detail::parse_any(text)) {
        if (auto* attr = std::get_if<AttributeDecl>(&st)) {
            out.emplace_back(std::move(*attr));
        } else if (auto* ob = std::get_if<ObligationDecl>(&st)) {
            out.emplace_back(std::move(*ob));
        } else {
            throw SyntaxError(1, 1, "flow rule statement not allowed among data rules");
        }
    }
    return out;
}

/// Parses flow-rule text. Data statements in the input are an error here.
inline FlowRuleSet parse_flow_rules(const std::string& text) {
    FlowRuleSet out;
    for (AnyStatement& st : detail::parse_any(text)) {
        if (auto* pr = std::get_if<Propagate>(&st)) {
            out.propagates.push_back(std::move(*pr));
        } else if (auto* ed = std::get_if<EditRule>(&st)) {
            out.refinements.emplace_back(std::move(*ed));
        } else if (auto* del = std::get_if<DeleteRule>(&st)) {
            out.refinements.emplace_back(std::move(*del));
        } else {
            throw SyntaxError(1, 1, "data rule statement not allowed among flow rules");
        }
    }
    return out;
}

/// Parses a mixed statement stream; used by validation tooling.
inline std::vector<AnyStatement> parse_statements(const std::string& text) {
    return detail::parse_any(text);
}

// ── canonical serialization ─────────────────────────────────────────────────

namespace detail {

inline std::string filter_field_text(const std::string& f) {
    if (f == "*") return "*";
    if (is_plain_ident(f)) return f;
    return quote_value(f);
}

}  // namespace detail

inline std::string to_text(const AttributeDecl& a) {
    return "attribute(" + a.name + ", " + a.type + " " + quote_value(a.value) + ")";
}

inline std::string to_text(const Attribute& a) {
    return to_text(AttributeDecl{a.name, a.type, a.value});
}

/// Canonical text of an unresolved obligation statement (references by name).
inline std::string to_text(const ObligationDecl& o) {
    std::string out = "obligation(" + o.action_class;
    for (const std::string& arg : o.args) out += " " + arg;
    out += ", [";
    for (std::size_t i = 0; i < o.validity.size(); ++i) {
        if (i) out += ", ";
        out += o.validity[i];
    }
    out += "], " + condition_to_text(o.condition) + ")";
    return out;
}

inline std::string to_text(const Propagate& pr) {
    std::string out = "pr(" + pr.in_port + ", ";
    if (pr.out_ports.size() == 1) {
        out += pr.out_ports.front();
    } else {
        out += "[";
        for (std::size_t i = 0; i < pr.out_ports.size(); ++i) {
            if (i) out += ", ";
            out += pr.out_ports[i];
        }
        out += "]";
    }
    return out + ")";
}

inline std::string to_text(const EditRule& e) {
    return "edit(" + e.in_port + ", " + e.out_port + ", " + detail::filter_field_text(e.filter.name) +
           ", " + detail::filter_field_text(e.filter.type) + ", " +
           (e.filter.value == "*" ? "*" : quote_value(e.filter.value)) + ", " + e.new_type + ", " +
           quote_value(e.new_value) + ")";
}

inline std::string to_text(const DeleteRule& d) {
    return "delete(" + d.in_port + ", " + d.out_port + ", " +
           detail::filter_field_text(d.filter.name) + ", " + detail::filter_field_text(d.filter.type) +
           ", " + (d.filter.value == "*" ? "*" : quote_value(d.filter.value)) + ")";
}

/// Canonical text of one obligation inside its owning set (references are
/// printed as the attribute names they resolve to).
inline std::string to_text(const DataRuleSet& set, const Obligation& ob) {
    std::string out = "obligation(" + ob.action_class;
    for (std::size_t ref : ob.args) out += " " + set.attributes()[ref].name;
    out += ", [";
    for (std::size_t i = 0; i < ob.validity.size(); ++i) {
        if (i) out += ", ";
        out += set.attributes()[ob.validity[i]].name;
    }
    out += "], " + condition_to_text(ob.condition) + ")";
    return out;
}

/**
 * Canonical text of a rule set: one statement per line, lowercase keywords,
 * explicit types, quoted values.
 *
 * Statements are interleaved so that re-parsing reproduces the same bindings:
 * after each attribute, every obligation whose references all name-resolve to
 * the intended attributes is flushed. An obligation whose reference got
 * shadowed by a later same-named attribute is emitted right behind a repeated
 * declaration of the intended one — attribute statements deduplicate on the
 * triple, so the repeat restores the nearest-preceding binding without
 * changing the set.
 */
inline std::string serialize(const DataRuleSet& set) {
    std::vector<std::string> lines;
    std::vector<bool> ob_emitted(set.obligations().size(), false);
    // The latest emitted attribute with a given name is what a re-parse would
    // bind a following obligation reference to.
    std::map<std::string, std::size_t> latest;
    auto bound_correctly = [&](std::size_t ref) {
        auto it = latest.find(set.attributes()[ref].name);
        return it != latest.end() && it->second == ref;
    };
    auto flush_ready = [&]() {
        bool progress = true;
        while (progress) {
            progress = false;
            for (std::size_t i = 0; i < set.obligations().size(); ++i) {
                if (ob_emitted[i]) continue;
                const Obligation& ob = set.obligations()[i];
                bool ready = true;
                for (std::size_t ref : ob.args) ready = ready && bound_correctly(ref);
                for (std::size_t ref : ob.validity) ready = ready && bound_correctly(ref);
                if (ready) {
                    lines.push_back(to_text(set, ob));
                    ob_emitted[i] = true;
                    progress = true;
                }
            }
        }
    };
    for (std::size_t i = 0; i < set.attributes().size(); ++i) {
        lines.push_back(to_text(set.attributes()[i]));
        latest[set.attributes()[i].name] = i;
        flush_ready();
    }
    // Shadowed bindings: re-declare the intended attribute (a parse-time
    // no-op for the set) so the following obligation binds to it.
    for (std::size_t i = 0; i < set.obligations().size(); ++i) {
        if (ob_emitted[i]) continue;
        const Obligation& ob = set.obligations()[i];
        auto force = [&](std::size_t ref) {
            if (bound_correctly(ref)) return;
            lines.push_back(to_text(set.attributes()[ref]));
            latest[set.attributes()[ref].name] = ref;
        };
        for (std::size_t ref : ob.args) force(ref);
        for (std::size_t ref : ob.validity) force(ref);
        lines.push_back(to_text(set, ob));
        ob_emitted[i] = true;
        flush_ready();  // the re-declarations may have unblocked others
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        out += lines[i];
    }
    return out;
}

/// Canonical text of flow rules: propagations first, then refinements, both
/// in declaration order (refinement order is semantic and preserved).
inline std::string serialize(const FlowRuleSet& flow) {
    std::vector<std::string> lines;
    for (const Propagate& pr : flow.propagates) lines.push_back(to_text(pr));
    for (const Refinement& r : flow.refinements) {
        std::visit([&](const auto& stmt) { lines.push_back(to_text(stmt)); }, r);
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        out += lines[i];
    }
    return out;
}

}  // namespace ruleflow
