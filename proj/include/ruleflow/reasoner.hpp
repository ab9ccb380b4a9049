#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleflow/errors.hpp"
#include "ruleflow/flow_graph.hpp"
#include "ruleflow/notation.hpp"
#include "ruleflow/rule_model.hpp"

namespace ruleflow {

// ── result types ────────────────────────────────────────────────────────────

/**
 * Record of one obligation meeting a true activation condition. The argument
 * and validity attributes are frozen snapshots taken at activation time —
 * later edits or deletes downstream do not rewrite history. `violation` is
 * set when the obligation's action class is Prohibited: an activated
 * prohibition means the workflow does something the rules forbid.
 */
struct ActivatedObligation {
    std::string process;  // triggering process id, or start/end-of-workflow
    std::string action_class;
    std::vector<Attribute> args;
    std::vector<Attribute> validity;  // sorted by triple
    std::string context;              // stage when one applies, else action type
    bool violation = false;

    /// Deterministic identity used for multiset comparison and deduplication.
    std::string key() const {
        std::string k = process + '\x1e' + action_class + '\x1e';
        for (const Attribute& a : args) k += attribute_inline(a) + '\x1f';
        k += '\x1e';
        for (const Attribute& a : validity) k += attribute_inline(a) + '\x1f';
        k += '\x1e' + context + '\x1e' + (violation ? "1" : "0");
        return k;
    }

    friend bool operator==(const ActivatedObligation& a, const ActivatedObligation& b) {
        return a.key() == b.key();
    }
};

/// Everything one reasoning run produces.
struct ReasoningResult {
    std::vector<std::pair<PortRef, DataRuleSet>> outputs;  // terminal ports in visit order
    std::vector<ActivatedObligation> activations;          // in evaluation order
    std::vector<std::string> lints;                        // non-fatal flow-rule complaints

    const DataRuleSet* find_output(const std::string& process, const std::string& port) const {
        for (const auto& [ref, rules] : outputs) {
            if (ref.process == process && ref.port == port) return &rules;
        }
        return nullptr;
    }

    bool has_violation() const {
        return std::any_of(activations.begin(), activations.end(),
                           [](const ActivatedObligation& a) { return a.violation; });
    }
};

/// Caller-supplied overrides for the graph-level context defaults.
struct ReasoningOverrides {
    std::optional<std::string> purpose;
    std::optional<std::string> user;
    std::optional<std::string> start_time;
};

// ── attribute matching and rewriting ────────────────────────────────────────

/// True when the attribute matches the filter; `*` matches any field value.
inline bool match_attr_filter(const Attribute& attr, const AttrFilter& filter) {
    return (filter.name == "*" || filter.name == attr.name) &&
           (filter.type == "*" || filter.type == attr.type) &&
           (filter.value == "*" || filter.value == attr.value);
}

namespace detail {

/// Rebuilds a rule set with matching attributes rewritten to the new type and
/// value. Obligation references follow their attributes; a rewrite that makes
/// two attributes collide merges them (set semantics).
inline DataRuleSet apply_edit(const DataRuleSet& set, const EditRule& edit) {
    DataRuleSet out;
    std::vector<std::size_t> remap(set.attributes().size());
    for (std::size_t i = 0; i < set.attributes().size(); ++i) {
        Attribute a = set.attributes()[i];
        if (match_attr_filter(a, edit.filter)) {
            a.type = edit.new_type;
            a.value = edit.new_value;
        }
        remap[i] = out.add_attribute(std::move(a));
    }
    for (const Obligation& ob : set.obligations()) {
        Obligation moved = ob;
        for (std::size_t& ref : moved.args) ref = remap[ref];
        for (std::size_t& ref : moved.validity) ref = remap[ref];
        out.add_obligation(std::move(moved));
    }
    return out;
}

/// Rebuilds a rule set with matching attributes removed. An obligation whose
/// arguments or validity binding reference a removed attribute is removed
/// too — it can no longer be discharged or verified.
inline DataRuleSet apply_delete(const DataRuleSet& set, const DeleteRule& del) {
    DataRuleSet out;
    std::vector<std::optional<std::size_t>> remap(set.attributes().size());
    for (std::size_t i = 0; i < set.attributes().size(); ++i) {
        const Attribute& a = set.attributes()[i];
        if (!match_attr_filter(a, del.filter)) remap[i] = out.add_attribute(a);
    }
    for (const Obligation& ob : set.obligations()) {
        bool severed = false;
        for (std::size_t ref : ob.args) severed = severed || !remap[ref];
        for (std::size_t ref : ob.validity) severed = severed || !remap[ref];
        if (severed) continue;
        Obligation moved = ob;
        for (std::size_t& ref : moved.args) ref = *remap[ref];
        for (std::size_t& ref : moved.validity) ref = *remap[ref];
        out.add_obligation(std::move(moved));
    }
    return out;
}

/// Appends one hop to every rule's audit history.
inline DataRuleSet with_hop(const DataRuleSet& set, const std::string& process,
                            const std::string& port) {
    DataRuleSet out;
    std::vector<std::size_t> remap(set.attributes().size());
    for (std::size_t i = 0; i < set.attributes().size(); ++i) {
        Attribute a = set.attributes()[i];
        a.history.push_back(Hop{process, port});
        remap[i] = out.add_attribute(std::move(a));
    }
    for (const Obligation& ob : set.obligations()) {
        Obligation moved = ob;
        moved.history.push_back(Hop{process, port});
        for (std::size_t& ref : moved.args) ref = remap[ref];
        for (std::size_t& ref : moved.validity) ref = remap[ref];
        out.add_obligation(std::move(moved));
    }
    return out;
}

inline bool port_matches(const std::string& pattern, const std::string& port) {
    return pattern == "*" || pattern == port;
}

}  // namespace detail

// ── flow application ────────────────────────────────────────────────────────

struct FlowOutcome {
    std::map<std::string, DataRuleSet> outputs;  // every declared output port
    std::vector<std::string> lints;
};

/**
 * Applies a process's flow rules to the rules arriving on its input ports.
 *
 * Three phases:
 *   1. Propagation — each `pr` makes one copy of the input port's rules per
 *      target output port. A process without flow rules gets the default:
 *      every input propagated to every output. (Flow rules that are present
 *      but propagate nothing really do propagate nothing.)
 *   2. Refinement — edits and deletes run in declaration order over every
 *      copy whose (in, out) tag matches; successive edits chain.
 *   3. Merge — copies landing on the same output port merge under set
 *      semantics.
 *
 * A flow rule naming a port the process does not have is reported as a lint
 * and matches nothing; it never aborts reasoning.
 */
inline FlowOutcome apply_flow(const ProcessNode& process,
                              const std::map<std::string, DataRuleSet>& in_rules) {
    FlowOutcome outcome;
    auto has_port = [](const std::vector<std::string>& list, const std::string& name) {
        return std::find(list.begin(), list.end(), name) != list.end();
    };

    // Phase 1: propagation.
    std::vector<Propagate> propagates;
    if (process.flow_rules) {
        propagates = process.flow_rules->propagates;
    } else {
        for (const std::string& in : process.inputs) {
            propagates.push_back(Propagate{in, process.outputs});
        }
    }
    struct Copy {
        std::string in_port;
        std::string out_port;
        DataRuleSet rules;
    };
    std::vector<Copy> copies;
    for (const Propagate& pr : propagates) {
        if (!has_port(process.inputs, pr.in_port)) {
            outcome.lints.push_back("process '" + process.id + "': pr names unknown input port '" +
                                    pr.in_port + "'");
            continue;
        }
        auto found = in_rules.find(pr.in_port);
        const DataRuleSet* incoming = found == in_rules.end() ? nullptr : &found->second;
        for (const std::string& out : pr.out_ports) {
            if (!has_port(process.outputs, out)) {
                outcome.lints.push_back("process '" + process.id +
                                        "': pr names unknown output port '" + out + "'");
                continue;
            }
            Copy copy;
            copy.in_port = pr.in_port;
            copy.out_port = out;
            if (incoming) copy.rules = detail::with_hop(*incoming, process.id, out);
            copies.push_back(std::move(copy));
        }
    }

    // Phase 2: refinements in declaration order, over every matching copy.
    if (process.flow_rules) {
        for (const Refinement& r : process.flow_rules->refinements) {
            const std::string& rin = std::holds_alternative<EditRule>(r)
                                         ? std::get<EditRule>(r).in_port
                                         : std::get<DeleteRule>(r).in_port;
            const std::string& rout = std::holds_alternative<EditRule>(r)
                                          ? std::get<EditRule>(r).out_port
                                          : std::get<DeleteRule>(r).out_port;
            const char* kw = std::holds_alternative<EditRule>(r) ? "edit" : "delete";
            if (rin != "*" && !has_port(process.inputs, rin)) {
                outcome.lints.push_back("process '" + process.id + "': " + kw +
                                        " names unknown input port '" + rin + "'");
            }
            if (rout != "*" && !has_port(process.outputs, rout)) {
                outcome.lints.push_back("process '" + process.id + "': " + kw +
                                        " names unknown output port '" + rout + "'");
            }
            for (Copy& copy : copies) {
                if (!detail::port_matches(rin, copy.in_port)) continue;
                if (!detail::port_matches(rout, copy.out_port)) continue;
                if (const auto* edit = std::get_if<EditRule>(&r)) {
                    copy.rules = detail::apply_edit(copy.rules, *edit);
                } else {
                    copy.rules = detail::apply_delete(copy.rules, std::get<DeleteRule>(r));
                }
            }
        }
    }

    // Phase 3: merge per output port; every declared port appears.
    for (const std::string& out : process.outputs) {
        std::vector<DataRuleSet> parts;
        for (const Copy& copy : copies) {
            if (copy.out_port == out) parts.push_back(copy.rules);
        }
        outcome.outputs[out] = merge_rule_sets(parts);
    }
    return outcome;
}

// ── activation checking ─────────────────────────────────────────────────────

/**
 * Evaluates every obligation in `incoming` against the context and returns a
 * record per true condition, in rule-set order. Obligations are not consumed:
 * they stay in the data rules and keep flowing.
 */
inline std::vector<ActivatedObligation> check_activation(const std::string& process_label,
                                                         const DataRuleSet& incoming,
                                                         const EvaluationContext& ctx) {
    std::vector<ActivatedObligation> out;
    for (const Obligation& ob : incoming.obligations()) {
        if (!eval_condition(ob.condition, ctx)) continue;
        DataRuleSet::ResolvedObligation resolved = incoming.resolve(ob);
        ActivatedObligation rec;
        rec.process = process_label;
        rec.action_class = resolved.action_class;
        rec.args = std::move(resolved.args);
        rec.validity = std::move(resolved.validity);
        for (Attribute& a : rec.args) a.history.clear();      // snapshots carry values,
        for (Attribute& a : rec.validity) a.history.clear();  // not travel logs
        rec.context = ctx.stage ? *ctx.stage : ctx.action.value_or("");
        rec.violation = resolved.action_class == "Prohibited";
        out.push_back(std::move(rec));
    }
    return out;
}

// ── whole-graph reasoning ───────────────────────────────────────────────────

/**
 * Runs the reasoner over a dataflow graph: visits processes in topological
 * order, checks activations on everything a process consumes, applies its
 * flow rules, and routes the results downstream.
 *
 * Activation contexts: rules consumed directly from an initial attachment are
 * evaluated first with stage=import (the dataset enters the workflow there);
 * rules arriving from upstream are evaluated without a stage. Before any
 * process runs, all initial rules are checked once with
 * stage=start-of-workflow, and after the last process the merged terminal
 * rules are checked with stage=end-of-workflow — both with only graph-level
 * slots set, since no process is involved.
 */
inline ReasoningResult reason(const DataFlowGraph& graph, const ReasoningOverrides& overrides = {}) {
    ReasoningResult result;
    std::optional<std::string> purpose = overrides.purpose ? overrides.purpose : graph.purpose;
    std::optional<std::string> default_user = overrides.user ? overrides.user : graph.user;
    std::optional<std::string> default_start =
        overrides.start_time ? overrides.start_time : graph.start_time;

    // Initial attachments become "fresh" rules on their ports, stamped with
    // the entry hop.
    std::map<std::string, std::map<std::string, DataRuleSet>> fresh;   // process → port → rules
    std::map<std::string, std::map<std::string, DataRuleSet>> flowed;  // filled while visiting
    std::vector<DataRuleSet> all_initial;
    for (const InitialAttachment& at : graph.attachments) {
        DataRuleSet stamped = detail::with_hop(at.rules, at.process, at.port);
        auto& slot = fresh[at.process][at.port];
        slot = merge_rule_sets(slot, stamped);
        all_initial.push_back(at.rules);
    }

    EvaluationContext boundary;
    boundary.purpose = purpose;
    boundary.user = default_user;
    boundary.start_time = default_start;
    boundary.stage = "start-of-workflow";
    for (ActivatedObligation& rec :
         check_activation("start-of-workflow", merge_rule_sets(all_initial), boundary)) {
        result.activations.push_back(std::move(rec));
    }

    for (const std::string& id : topo_order(graph)) {
        const ProcessNode& process = *graph.find_process(id);
        const auto& fresh_ports = fresh[id];
        const auto& flowed_ports = flowed[id];

        // Merge per consumption kind (for activation) and per port (for flow).
        std::vector<DataRuleSet> fresh_parts;
        std::vector<DataRuleSet> flowed_parts;
        std::map<std::string, DataRuleSet> in_rules;
        for (const std::string& port : process.inputs) {
            auto ff = fresh_ports.find(port);
            auto fl = flowed_ports.find(port);
            std::vector<DataRuleSet> port_parts;
            if (ff != fresh_ports.end()) {
                fresh_parts.push_back(ff->second);
                port_parts.push_back(ff->second);
            }
            if (fl != flowed_ports.end()) {
                flowed_parts.push_back(fl->second);
                port_parts.push_back(fl->second);
            }
            if (!port_parts.empty()) in_rules[port] = merge_rule_sets(port_parts);
        }

        EvaluationContext ctx;
        ctx.action = process.action_type;
        ctx.purpose = purpose;
        ctx.user = process.user ? process.user : default_user;
        ctx.start_time = process.start_time ? process.start_time : default_start;
        ctx.process_id = process.id;

        EvaluationContext import_ctx = ctx;
        import_ctx.stage = "import";
        for (ActivatedObligation& rec :
             check_activation(id, merge_rule_sets(fresh_parts), import_ctx)) {
            result.activations.push_back(std::move(rec));
        }
        for (ActivatedObligation& rec : check_activation(id, merge_rule_sets(flowed_parts), ctx)) {
            result.activations.push_back(std::move(rec));
        }

        FlowOutcome outcome = apply_flow(process, in_rules);
        for (std::string& lint : outcome.lints) result.lints.push_back(std::move(lint));

        for (const std::string& port : process.outputs) {
            const DataRuleSet& produced = outcome.outputs[port];
            bool consumed = false;
            for (const Connection& c : graph.connections) {
                if (c.from_process != id || c.from_port != port) continue;
                consumed = true;
                DataRuleSet delivered = detail::with_hop(produced, c.to_process, c.to_port);
                auto& slot = flowed[c.to_process][c.to_port];
                slot = merge_rule_sets(slot, delivered);
            }
            if (!consumed) {
                result.outputs.emplace_back(PortRef{id, port, PortDir::Out}, produced);
            }
        }
    }

    std::vector<DataRuleSet> terminal;
    for (const auto& [ref, rules] : result.outputs) terminal.push_back(rules);
    boundary.stage = "end-of-workflow";
    for (ActivatedObligation& rec :
         check_activation("end-of-workflow", merge_rule_sets(terminal), boundary)) {
        result.activations.push_back(std::move(rec));
    }
    return result;
}

// ── result serialization ────────────────────────────────────────────────────

/// JSON form of a result: terminal port rules in canonical notation plus the
/// ordered activation records. Byte-deterministic.
inline nlohmann::ordered_json result_to_json(const ReasoningResult& result) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    doc["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [ref, rules] : result.outputs) {
        doc["outputs"].push_back(nlohmann::ordered_json{
            {"process", ref.process}, {"port", ref.port}, {"rules", serialize(rules)}});
    }
    doc["activations"] = nlohmann::ordered_json::array();
    for (const ActivatedObligation& rec : result.activations) {
        std::vector<std::string> args;
        for (const Attribute& a : rec.args) args.push_back(attribute_inline(a));
        std::vector<std::string> validity;
        for (const Attribute& a : rec.validity) validity.push_back(attribute_inline(a));
        doc["activations"].push_back(nlohmann::ordered_json{{"process", rec.process},
                                                            {"action", rec.action_class},
                                                            {"args", args},
                                                            {"validity", validity},
                                                            {"stage", rec.context},
                                                            {"violation", rec.violation}});
    }
    return doc;
}

inline std::string result_to_text(const ReasoningResult& result) {
    return result_to_json(result).dump(2) + "\n";
}

}  // namespace ruleflow
