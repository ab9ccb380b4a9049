#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "ruleflow/errors.hpp"

namespace ruleflow {

// ── activation conditions ───────────────────────────────────────────────────

/// Context slots an activation condition may test.
enum class Slot { Action, Stage, Purpose, User, StartTime, ProcessId };

inline const char* slot_name(Slot s) {
    switch (s) {
        case Slot::Action: return "action";
        case Slot::Stage: return "stage";
        case Slot::Purpose: return "purpose";
        case Slot::User: return "user";
        case Slot::StartTime: return "startTime";
        case Slot::ProcessId: return "processId";
    }
    return "action";
}

/// Maps a written slot name to its slot; `process` is an alias for `action`.
inline std::optional<Slot> slot_from_name(const std::string& name) {
    if (name == "action" || name == "process") return Slot::Action;
    if (name == "stage") return Slot::Stage;
    if (name == "purpose") return Slot::Purpose;
    if (name == "user") return Slot::User;
    if (name == "startTime") return Slot::StartTime;
    if (name == "processId") return Slot::ProcessId;
    return std::nullopt;
}

enum class CompareOp { Eq, Neq };

/**
 * Activation condition tree.
 *
 * `null` never activates on its own (the obligation waits for out-of-band
 * handling); a comparison tests one context slot; `and`/`or` are n-ary and
 * `not` is unary. Trees compare structurally. Build through the factories so
 * unused payload fields stay in their default state.
 */
struct Condition {
    enum class Kind { Null, Compare, And, Or, Not };

    Kind kind = Kind::Null;

    // Compare payload (meaningful only when kind == Compare).
    Slot slot = Slot::Action;
    CompareOp op = CompareOp::Eq;
    std::string operand;    // literal to compare against; empty when wildcard
    bool wildcard = false;  // operand was `*` (any value of a present slot)

    std::vector<Condition> children;  // And/Or: two or more; Not: exactly one

    static Condition null_condition() { return Condition{}; }

    static Condition compare(Slot s, CompareOp o, std::string literal) {
        Condition c;
        c.kind = Kind::Compare;
        c.slot = s;
        c.op = o;
        c.operand = std::move(literal);
        return c;
    }

    static Condition compare_any(Slot s, CompareOp o) {
        Condition c;
        c.kind = Kind::Compare;
        c.slot = s;
        c.op = o;
        c.wildcard = true;
        return c;
    }

    static Condition conjunction(std::vector<Condition> terms) {
        Condition c;
        c.kind = Kind::And;
        c.children = std::move(terms);
        return c;
    }

    static Condition disjunction(std::vector<Condition> terms) {
        Condition c;
        c.kind = Kind::Or;
        c.children = std::move(terms);
        return c;
    }

    static Condition negation(Condition term) {
        Condition c;
        c.kind = Kind::Not;
        c.children.push_back(std::move(term));
        return c;
    }

    friend bool operator==(const Condition&, const Condition&) = default;
};

/// Context a condition is evaluated against. Absent slots are simply unset.
struct EvaluationContext {
    std::optional<std::string> action;
    std::optional<std::string> stage;
    std::optional<std::string> purpose;
    std::optional<std::string> user;
    std::optional<std::string> start_time;
    std::optional<std::string> process_id;

    const std::optional<std::string>& get(Slot s) const {
        switch (s) {
            case Slot::Action: return action;
            case Slot::Stage: return stage;
            case Slot::Purpose: return purpose;
            case Slot::User: return user;
            case Slot::StartTime: return start_time;
            case Slot::ProcessId: return process_id;
        }
        return action;
    }
};

/**
 * Evaluates a condition against a context. Total: every tree yields a bool.
 *
 * Slot-presence semantics:
 *   - `slot = *`  is true iff the slot is set, whatever its value ("any
 *     action type" reads as "some action is happening").
 *   - `slot != *` is the exact negation: true iff the slot is unset.
 *   - `slot = v`  is false when the slot is unset; `slot != v` is true then.
 *   - `null` is always false (such obligations are never auto-activated).
 */
inline bool eval_condition(const Condition& cond, const EvaluationContext& ctx) {
    switch (cond.kind) {
        case Condition::Kind::Null:
            return false;
        case Condition::Kind::Compare: {
            const auto& v = ctx.get(cond.slot);
            bool eq;
            if (cond.wildcard) {
                eq = v.has_value();
            } else {
                eq = v.has_value() && *v == cond.operand;
            }
            return cond.op == CompareOp::Eq ? eq : !eq;
        }
        case Condition::Kind::And:
            return std::all_of(cond.children.begin(), cond.children.end(),
                               [&](const Condition& c) { return eval_condition(c, ctx); });
        case Condition::Kind::Or:
            return std::any_of(cond.children.begin(), cond.children.end(),
                               [&](const Condition& c) { return eval_condition(c, ctx); });
        case Condition::Kind::Not:
            return !eval_condition(cond.children.front(), ctx);
    }
    return false;
}

// ── canonical text fragments ────────────────────────────────────────────────
//
// Canonical forms are defined here (next to the types) so equality keys,
// serialization, and reporting all agree on one spelling.

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':';
}

inline bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '-';
}

inline bool is_plain_ident(const std::string& s) {
    if (s.empty() || !is_ident_start(s[0])) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return is_ident_char(c); });
}

}  // namespace detail

/// Double-quotes a value, escaping quotes, backslashes, and line breaks.
inline std::string quote_value(const std::string& v) {
    std::string out;
    out.reserve(v.size() + 2);
    out.push_back('"');
    for (char c : v) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

/// Canonical text of a condition: lowercase connectives, spaced comparisons,
/// parentheses only where precedence demands them.
inline std::string condition_to_text(const Condition& cond) {
    switch (cond.kind) {
        case Condition::Kind::Null:
            return "null";
        case Condition::Kind::Compare: {
            std::string out = slot_name(cond.slot);
            out += cond.op == CompareOp::Eq ? " = " : " != ";
            if (cond.wildcard) {
                out += "*";
            } else if (detail::is_plain_ident(cond.operand)) {
                out += cond.operand;
            } else {
                out += quote_value(cond.operand);
            }
            return out;
        }
        case Condition::Kind::And: {
            std::string out;
            for (std::size_t i = 0; i < cond.children.size(); ++i) {
                if (i) out += " and ";
                const Condition& c = cond.children[i];
                // `or` binds looser than `and`, so an or-child needs parens.
                if (c.kind == Condition::Kind::Or) {
                    out += "(" + condition_to_text(c) + ")";
                } else {
                    out += condition_to_text(c);
                }
            }
            return out;
        }
        case Condition::Kind::Or: {
            std::string out;
            for (std::size_t i = 0; i < cond.children.size(); ++i) {
                if (i) out += " or ";
                out += condition_to_text(cond.children[i]);
            }
            return out;
        }
        case Condition::Kind::Not: {
            const Condition& c = cond.children.front();
            if (c.kind == Condition::Kind::Compare) {
                return "not " + condition_to_text(c);
            }
            return "not (" + condition_to_text(c) + ")";
        }
    }
    return "null";
}

// ── data rules ──────────────────────────────────────────────────────────────

/// One hop of a rule's audit trail: the port it passed through on a process.
struct Hop {
    std::string process;
    std::string port;

    friend bool operator==(const Hop&, const Hop&) = default;
};

/**
 * Data attribute: a named metadata triple attached to a dataset.
 *
 * Identity is the full (name, type, value) triple — two attributes with the
 * same name but different values are distinct rules. `history` is an audit
 * trail of the ports the attribute travelled through; it never participates
 * in equality and is concatenated when duplicates merge.
 */
struct Attribute {
    std::string name;
    std::string type;
    std::string value;
    std::vector<Hop> history;

    std::tuple<const std::string&, const std::string&, const std::string&> triple() const {
        return std::tie(name, type, value);
    }

    friend bool operator==(const Attribute& a, const Attribute& b) {
        return a.triple() == b.triple();
    }
};

/// Canonical inline form of an attribute, e.g. `pf(column "DoB")`.
inline std::string attribute_inline(const Attribute& a) {
    return a.name + "(" + a.type + " " + quote_value(a.value) + ")";
}

/**
 * Obligation: an action of `action_class` over the referenced argument
 * attributes, bound in validity to the `validity` attributes, activated when
 * `condition` evaluates true against the current context.
 *
 * References are indices into the owning rule set's attribute vector, so an
 * edit to a referenced attribute is followed automatically and a delete of
 * one cascades to the obligation. Equality is structural over the *resolved*
 * references; `history` is audit-only, exactly as for attributes.
 */
struct Obligation {
    std::string action_class;
    std::vector<std::size_t> args;      // ordered argument list
    std::vector<std::size_t> validity;  // validity binding, set semantics
    Condition condition;
    std::vector<Hop> history;
};

/**
 * A set of data rules: attributes plus obligations over them.
 *
 * Set semantics throughout — inserting a duplicate attribute (same triple) or
 * a structurally equal obligation is a no-op that concatenates the audit
 * histories instead of growing the set. Insertion order is preserved and all
 * iteration is deterministic. Obligation references always point inside the
 * set (enforced on insert); attributes referenced by no obligation are
 * ordinary members and are never pruned.
 */
class DataRuleSet {
public:
    const std::vector<Attribute>& attributes() const { return attributes_; }
    const std::vector<Obligation>& obligations() const { return obligations_; }
    bool empty() const { return attributes_.empty() && obligations_.empty(); }

    /// Inserts an attribute, deduplicating on the triple. Returns the index
    /// of the stored attribute (the existing one when it was a duplicate).
    std::size_t add_attribute(Attribute a) {
        if (a.name.empty() || a.type.empty() || a.value.empty()) {
            throw InvalidRule("attribute fields must be non-empty");
        }
        if (a.name == "*" || a.type == "*" || a.value == "*") {
            throw InvalidRule("stored attributes may not contain the wildcard '*'");
        }
        for (std::size_t i = 0; i < attributes_.size(); ++i) {
            if (attributes_[i] == a) {
                append_history(attributes_[i].history, a.history);
                return i;
            }
        }
        attributes_.push_back(std::move(a));
        return attributes_.size() - 1;
    }

    /// Inserts an obligation whose references are indices into this set.
    /// Structurally equal duplicates merge; returns the stored index.
    std::size_t add_obligation(Obligation ob) {
        if (ob.action_class.empty() || ob.action_class == "*") {
            throw InvalidRule("obligation action class must be a non-wildcard name");
        }
        for (std::size_t ref : ob.args) {
            if (ref >= attributes_.size()) throw InvalidRule("obligation argument index out of range");
        }
        for (std::size_t ref : ob.validity) {
            if (ref >= attributes_.size()) throw InvalidRule("obligation validity index out of range");
        }
        normalize_validity(ob);
        std::string key = structural_key(ob);
        for (std::size_t i = 0; i < obligations_.size(); ++i) {
            if (structural_key(obligations_[i]) == key) {
                append_history(obligations_[i].history, ob.history);
                return i;
            }
        }
        obligations_.push_back(std::move(ob));
        return obligations_.size() - 1;
    }

    /// Resolved view of an obligation: references materialized as attributes.
    struct ResolvedObligation {
        std::string action_class;
        std::vector<Attribute> args;
        std::vector<Attribute> validity;  // sorted by triple (set semantics)
        Condition condition;
    };

    ResolvedObligation resolve(const Obligation& ob) const {
        ResolvedObligation r;
        r.action_class = ob.action_class;
        for (std::size_t ref : ob.args) r.args.push_back(attributes_.at(ref));
        for (std::size_t ref : ob.validity) r.validity.push_back(attributes_.at(ref));
        std::sort(r.validity.begin(), r.validity.end(),
                  [](const Attribute& a, const Attribute& b) { return a.triple() < b.triple(); });
        r.condition = ob.condition;
        return r;
    }

    /// Deterministic identity key of an obligation within this set: action
    /// class, resolved argument triples in order, sorted validity triples,
    /// and the canonical condition text. History plays no part.
    std::string structural_key(const Obligation& ob) const {
        ResolvedObligation r = resolve(ob);
        std::string key = r.action_class;
        key += '\x1e';
        for (const Attribute& a : r.args) {
            key += attribute_inline(a);
            key += '\x1f';
        }
        key += '\x1e';
        for (const Attribute& a : r.validity) {
            key += attribute_inline(a);
            key += '\x1f';
        }
        key += '\x1e';
        key += condition_to_text(ob.condition);
        return key;
    }

    /// Order-free structural equality: same attribute triples, same resolved
    /// obligations. Histories and insertion order are ignored.
    bool structurally_equal(const DataRuleSet& other) const {
        if (attributes_.size() != other.attributes_.size()) return false;
        if (obligations_.size() != other.obligations_.size()) return false;
        auto triples = [](const DataRuleSet& s) {
            std::vector<std::tuple<std::string, std::string, std::string>> v;
            v.reserve(s.attributes_.size());
            for (const Attribute& a : s.attributes_) v.emplace_back(a.name, a.type, a.value);
            std::sort(v.begin(), v.end());
            return v;
        };
        if (triples(*this) != triples(other)) return false;
        auto keys = [](const DataRuleSet& s) {
            std::vector<std::string> v;
            v.reserve(s.obligations_.size());
            for (const Obligation& ob : s.obligations_) v.push_back(s.structural_key(ob));
            std::sort(v.begin(), v.end());
            return v;
        };
        return keys(*this) == keys(other);
    }

private:
    static void append_history(std::vector<Hop>& dst, const std::vector<Hop>& src) {
        dst.insert(dst.end(), src.begin(), src.end());
    }

    /// Validity bindings are a set: drop references that resolve to a triple
    /// already present, keeping first occurrences.
    void normalize_validity(Obligation& ob) const {
        std::vector<std::size_t> unique;
        for (std::size_t ref : ob.validity) {
            bool seen = std::any_of(unique.begin(), unique.end(), [&](std::size_t u) {
                return attributes_[u] == attributes_[ref];
            });
            if (!seen) unique.push_back(ref);
        }
        ob.validity = std::move(unique);
    }

    std::vector<Attribute> attributes_;
    std::vector<Obligation> obligations_;
};

// ── rule statements and resolution ──────────────────────────────────────────

/// Parsed `attribute(name, type "value")` statement, references unresolved.
struct AttributeDecl {
    std::string name;
    std::string type;
    std::string value;
};

/// Parsed `obligation(class args..., [validity...], condition)` statement.
struct ObligationDecl {
    std::string action_class;
    std::vector<std::string> args;
    std::vector<std::string> validity;
    Condition condition;
};

using RuleStatement = std::variant<AttributeDecl, ObligationDecl>;

/**
 * Resolves a statement list into a DataRuleSet.
 *
 * Every obligation reference binds to the nearest *preceding* declaration of
 * that attribute name, or — because real policy text sometimes states the
 * obligation first — the nearest following one. A name declared nowhere in
 * the list raises UnresolvedReference. Duplicate attribute declarations (same
 * triple) collapse; duplicate obligations likewise.
 */
inline DataRuleSet resolve_rule_set(const std::vector<RuleStatement>& statements) {
    DataRuleSet set;
    struct Decl {
        std::size_t position;  // statement index, for nearest-declaration search
        std::string name;
        std::size_t attr_index;
    };
    std::vector<Decl> decls;
    for (std::size_t i = 0; i < statements.size(); ++i) {
        if (const auto* attr = std::get_if<AttributeDecl>(&statements[i])) {
            std::size_t idx = set.add_attribute(Attribute{attr->name, attr->type, attr->value, {}});
            decls.push_back(Decl{i, attr->name, idx});
        }
    }
    auto resolve_name = [&](const std::string& name, std::size_t position) -> std::size_t {
        const Decl* before = nullptr;
        const Decl* after = nullptr;
        for (const Decl& d : decls) {
            if (d.name != name) continue;
            if (d.position < position) {
                before = &d;  // decls are in order: keeps the nearest preceding
            } else if (!after) {
                after = &d;
            }
        }
        if (before) return before->attr_index;
        if (after) return after->attr_index;
        throw UnresolvedReference(name);
    };
    for (std::size_t i = 0; i < statements.size(); ++i) {
        if (const auto* ob = std::get_if<ObligationDecl>(&statements[i])) {
            Obligation resolved;
            resolved.action_class = ob->action_class;
            for (const std::string& name : ob->args) {
                resolved.args.push_back(resolve_name(name, i));
            }
            for (const std::string& name : ob->validity) {
                resolved.validity.push_back(resolve_name(name, i));
            }
            resolved.condition = ob->condition;
            set.add_obligation(std::move(resolved));
        }
    }
    return set;
}

/**
 * Merges rule sets into one: set union of attributes and obligations, with
 * obligation references remapped onto the merged attribute vector. Duplicates
 * collapse and their histories concatenate in merge order. Deterministic.
 */
inline DataRuleSet merge_rule_sets(const std::vector<DataRuleSet>& sets) {
    DataRuleSet merged;
    for (const DataRuleSet& s : sets) {
        std::vector<std::size_t> remap;
        remap.reserve(s.attributes().size());
        for (const Attribute& a : s.attributes()) {
            remap.push_back(merged.add_attribute(a));
        }
        for (const Obligation& ob : s.obligations()) {
            Obligation moved = ob;
            for (std::size_t& ref : moved.args) ref = remap[ref];
            for (std::size_t& ref : moved.validity) ref = remap[ref];
            merged.add_obligation(std::move(moved));
        }
    }
    return merged;
}

inline DataRuleSet merge_rule_sets(const DataRuleSet& a, const DataRuleSet& b) {
    return merge_rule_sets(std::vector<DataRuleSet>{a, b});
}

}  // namespace ruleflow
