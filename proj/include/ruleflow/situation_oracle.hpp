#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ruleflow/flow_graph.hpp"
#include "ruleflow/reasoner.hpp"
#include "ruleflow/rule_model.hpp"

namespace ruleflow {

/**
 * Naive reference interpreter for the reasoner.
 *
 * Where `reason` works set-at-a-time (propagate copies, refine, merge),
 * this oracle replays the underlying transition axioms one fluent at a time:
 * attributes and obligations are rows in a little database, `pr` consumes the
 * rows resting at an input port and lays down per-output copies, edit/delete
 * rewrite matching propagated rows in place, and `end` turns propagated rows
 * back into resting rows at their output port, deduplicating there. It is
 * deliberately simple and slow; its only job is to give the engine something
 * independent to agree with.
 */
namespace oracle_detail {

struct AttrFluent {
    int id = 0;
    std::string name, type, value;
    std::vector<Hop> history;
    bool prop = false;      // currently a propagated (in-flight) row
    std::string port;       // resting port, or the lane's input port
    std::string out_port;   // lane's target output port (prop rows only)
    bool fresh = false;     // seeded from an initial attachment here
    bool alive = true;
};

struct ObFluent {
    int id = 0;
    std::string action_class;
    std::vector<int> args;      // attr fluent ids
    std::vector<int> validity;  // attr fluent ids
    Condition condition;
    std::vector<Hop> history;
    bool prop = false;
    std::string port;
    std::string out_port;
    bool fresh = false;
    bool alive = true;
};

/// Per-process fluent database.
struct Fluents {
    std::vector<AttrFluent> attrs;
    std::vector<ObFluent> obs;
    int next_id = 1;

    AttrFluent& find_attr(int id) {
        for (AttrFluent& a : attrs) {
            if (a.id == id) return a;
        }
        throw InvalidRule("oracle: dangling attribute fluent id");
    }

    const AttrFluent& find_attr(int id) const {
        for (const AttrFluent& a : attrs) {
            if (a.id == id) return a;
        }
        throw InvalidRule("oracle: dangling attribute fluent id");
    }
};

inline bool same_triple(const AttrFluent& a, const AttrFluent& b) {
    return a.name == b.name && a.type == b.type && a.value == b.value;
}

/// Structural identity of an obligation row: class, argument triples in
/// order, validity triples as a sorted set, condition text.
inline std::string ob_key(const Fluents& db, const ObFluent& ob) {
    std::string key = ob.action_class;
    key += '\x1e';
    for (int id : ob.args) {
        const AttrFluent& a = db.find_attr(id);
        key += a.name + '\x1f' + a.type + '\x1f' + a.value + '\x1d';
    }
    key += '\x1e';
    std::vector<std::string> validity;
    for (int id : ob.validity) {
        const AttrFluent& a = db.find_attr(id);
        validity.push_back(a.name + '\x1f' + a.type + '\x1f' + a.value);
    }
    std::sort(validity.begin(), validity.end());
    for (const std::string& v : validity) key += v + '\x1d';
    key += '\x1e';
    key += condition_to_text(ob.condition);
    return key;
}

/// Copies a rule set into fluent rows resting at a port.
inline void seed(Fluents& db, const DataRuleSet& rules, const std::string& process,
                 const std::string& port, bool fresh) {
    std::map<std::size_t, int> id_of;
    for (std::size_t i = 0; i < rules.attributes().size(); ++i) {
        const Attribute& a = rules.attributes()[i];
        AttrFluent f;
        f.id = db.next_id++;
        f.name = a.name;
        f.type = a.type;
        f.value = a.value;
        f.history = a.history;
        f.history.push_back(Hop{process, port});
        f.port = port;
        f.fresh = fresh;
        id_of[i] = f.id;
        db.attrs.push_back(std::move(f));
    }
    for (const Obligation& ob : rules.obligations()) {
        ObFluent f;
        f.id = db.next_id++;
        f.action_class = ob.action_class;
        for (std::size_t ref : ob.args) f.args.push_back(id_of.at(ref));
        for (std::size_t ref : ob.validity) f.validity.push_back(id_of.at(ref));
        f.condition = ob.condition;
        f.history = ob.history;
        f.history.push_back(Hop{process, port});
        f.port = port;
        f.fresh = fresh;
        db.obs.push_back(std::move(f));
    }
}

inline bool filter_hits(const AttrFluent& a, const AttrFilter& f) {
    if (f.name != "*" && f.name != a.name) return false;
    if (f.type != "*" && f.type != a.type) return false;
    if (f.value != "*" && f.value != a.value) return false;
    return true;
}

/// Packages the resting rows at one port into a rule set.
inline DataRuleSet package(const Fluents& db, const std::string& port) {
    DataRuleSet out;
    std::map<int, std::size_t> index_of;
    for (const AttrFluent& a : db.attrs) {
        if (!a.alive || a.prop || a.port != port) continue;
        index_of[a.id] = out.add_attribute(Attribute{a.name, a.type, a.value, a.history});
    }
    for (const ObFluent& ob : db.obs) {
        if (!ob.alive || ob.prop || ob.port != port) continue;
        Obligation packed;
        packed.action_class = ob.action_class;
        for (int id : ob.args) packed.args.push_back(index_of.at(id));
        for (int id : ob.validity) packed.validity.push_back(index_of.at(id));
        packed.condition = ob.condition;
        packed.history = ob.history;
        out.add_obligation(std::move(packed));
    }
    return out;
}

/// Activation sweep over one group of obligation rows. Structurally equal
/// rows in a group yield one record (the group is a set).
inline void collect_activations(const Fluents& db, bool want_fresh, const std::string& label,
                                const EvaluationContext& ctx,
                                std::vector<ActivatedObligation>& sink) {
    std::set<std::string> seen;
    for (const ObFluent& ob : db.obs) {
        if (!ob.alive || ob.prop || ob.fresh != want_fresh) continue;
        if (!seen.insert(ob_key(db, ob)).second) continue;
        if (!eval_condition(ob.condition, ctx)) continue;
        ActivatedObligation rec;
        rec.process = label;
        rec.action_class = ob.action_class;
        for (int id : ob.args) {
            const AttrFluent& a = db.find_attr(id);
            rec.args.push_back(Attribute{a.name, a.type, a.value, {}});
        }
        for (int id : ob.validity) {
            const AttrFluent& a = db.find_attr(id);
            rec.validity.push_back(Attribute{a.name, a.type, a.value, {}});
        }
        std::sort(rec.validity.begin(), rec.validity.end(),
                  [](const Attribute& x, const Attribute& y) { return x.triple() < y.triple(); });
        rec.context = ctx.stage ? *ctx.stage : ctx.action.value_or("");
        rec.violation = ob.action_class == "Prohibited";
        sink.push_back(std::move(rec));
    }
}

/// `pr`: consume the rows resting at `in_port`, laying down one propagated
/// copy per target output port.
inline void act_propagate(Fluents& db, const std::string& process, const std::string& in_port,
                          const std::vector<std::string>& outs) {
    std::vector<int> attr_ids;
    std::vector<int> ob_ids;
    for (const AttrFluent& a : db.attrs) {
        if (a.alive && !a.prop && a.port == in_port) attr_ids.push_back(a.id);
    }
    for (const ObFluent& ob : db.obs) {
        if (ob.alive && !ob.prop && ob.port == in_port) ob_ids.push_back(ob.id);
    }
    for (const std::string& out : outs) {
        std::map<int, int> clone_of;
        for (int id : attr_ids) {
            AttrFluent copy = db.find_attr(id);
            copy.id = db.next_id++;
            copy.prop = true;
            copy.out_port = out;
            copy.history.push_back(Hop{process, out});
            copy.fresh = false;
            clone_of[id] = copy.id;
            db.attrs.push_back(std::move(copy));
        }
        for (int id : ob_ids) {
            const ObFluent* source = nullptr;
            for (const ObFluent& ob : db.obs) {
                if (ob.id == id) source = &ob;
            }
            ObFluent copy = *source;
            copy.id = db.next_id++;
            copy.prop = true;
            copy.out_port = out;
            copy.history.push_back(Hop{process, out});
            copy.fresh = false;
            for (int& ref : copy.args) ref = clone_of.at(ref);
            for (int& ref : copy.validity) ref = clone_of.at(ref);
            db.obs.push_back(std::move(copy));
        }
    }
    for (int id : attr_ids) db.find_attr(id).alive = false;
    for (ObFluent& ob : db.obs) {
        if (std::find(ob_ids.begin(), ob_ids.end(), ob.id) != ob_ids.end()) ob.alive = false;
    }
}

inline bool lane_matches(const std::string& pattern, const std::string& value) {
    return pattern == "*" || pattern == value;
}

/// `edit`: rewrite matching propagated attribute rows in place. Obligation
/// references are by row id, so they follow automatically.
inline void act_edit(Fluents& db, const EditRule& edit) {
    for (AttrFluent& a : db.attrs) {
        if (!a.alive || !a.prop) continue;
        if (!lane_matches(edit.in_port, a.port)) continue;
        if (!lane_matches(edit.out_port, a.out_port)) continue;
        if (!filter_hits(a, edit.filter)) continue;
        a.type = edit.new_type;
        a.value = edit.new_value;
    }
}

/// `delete`: remove matching propagated attribute rows and every propagated
/// obligation row referencing one of them.
inline void act_delete(Fluents& db, const DeleteRule& del) {
    std::set<int> removed;
    for (AttrFluent& a : db.attrs) {
        if (!a.alive || !a.prop) continue;
        if (!lane_matches(del.in_port, a.port)) continue;
        if (!lane_matches(del.out_port, a.out_port)) continue;
        if (!filter_hits(a, del.filter)) continue;
        a.alive = false;
        removed.insert(a.id);
    }
    if (removed.empty()) return;
    for (ObFluent& ob : db.obs) {
        if (!ob.alive || !ob.prop) continue;
        bool severed = std::any_of(ob.args.begin(), ob.args.end(),
                                   [&](int id) { return removed.count(id) > 0; }) ||
                       std::any_of(ob.validity.begin(), ob.validity.end(),
                                   [&](int id) { return removed.count(id) > 0; });
        if (severed) ob.alive = false;
    }
}

/// `end`: propagated rows targeting this output port come to rest there, and
/// the port's rows deduplicate into a set (audit histories concatenate).
inline void act_end(Fluents& db, const std::string& out_port) {
    for (AttrFluent& a : db.attrs) {
        if (a.alive && a.prop && a.out_port == out_port) {
            a.prop = false;
            a.port = out_port;
            a.out_port.clear();
        }
    }
    for (ObFluent& ob : db.obs) {
        if (ob.alive && ob.prop && ob.out_port == out_port) {
            ob.prop = false;
            ob.port = out_port;
            ob.out_port.clear();
        }
    }
    // Attribute dedup with reference remapping onto the surviving row.
    std::map<int, int> survivor_of;
    std::vector<int> kept;
    for (AttrFluent& a : db.attrs) {
        if (!a.alive || a.prop || a.port != out_port) continue;
        bool merged = false;
        for (int kept_id : kept) {
            AttrFluent& k = db.find_attr(kept_id);
            if (same_triple(k, a)) {
                k.history.insert(k.history.end(), a.history.begin(), a.history.end());
                survivor_of[a.id] = kept_id;
                a.alive = false;
                merged = true;
                break;
            }
        }
        if (!merged) kept.push_back(a.id);
    }
    for (ObFluent& ob : db.obs) {
        if (!ob.alive || ob.prop || ob.port != out_port) continue;
        for (int& ref : ob.args) {
            auto it = survivor_of.find(ref);
            if (it != survivor_of.end()) ref = it->second;
        }
        for (int& ref : ob.validity) {
            auto it = survivor_of.find(ref);
            if (it != survivor_of.end()) ref = it->second;
        }
    }
    // Obligation dedup.
    std::vector<std::string> seen;
    for (ObFluent& ob : db.obs) {
        if (!ob.alive || ob.prop || ob.port != out_port) continue;
        std::string key = ob_key(db, ob);
        bool dup = false;
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (seen[i] == key) {
                dup = true;
                break;
            }
        }
        if (dup) {
            // Concatenate the history onto the first equal row.
            for (ObFluent& first : db.obs) {
                if (&first == &ob) break;
                if (first.alive && !first.prop && first.port == out_port &&
                    ob_key(db, first) == key) {
                    first.history.insert(first.history.end(), ob.history.begin(), ob.history.end());
                    break;
                }
            }
            ob.alive = false;
        } else {
            seen.push_back(std::move(key));
        }
    }
}

}  // namespace oracle_detail

/**
 * Reference implementation of `reason`: same inputs, same result shape, but
 * computed by replaying transition axioms over fluent rows. Compare with
 * `reason` via per-port structural equality and activation multisets.
 */
inline ReasoningResult oracle_reason(const DataFlowGraph& graph,
                                     const ReasoningOverrides& overrides = {}) {
    using namespace oracle_detail;
    ReasoningResult result;
    std::optional<std::string> purpose = overrides.purpose ? overrides.purpose : graph.purpose;
    std::optional<std::string> default_user = overrides.user ? overrides.user : graph.user;
    std::optional<std::string> default_start =
        overrides.start_time ? overrides.start_time : graph.start_time;

    std::map<std::string, Fluents> fluents_of;  // process id → its fluent rows

    // Boundary: start-of-workflow over every initial rule set, as one group.
    {
        Fluents pool;
        for (const InitialAttachment& at : graph.attachments) {
            seed(pool, at.rules, at.process, at.port, true);
        }
        // One shared resting port so the sweep sees one deduplicated group.
        for (AttrFluent& a : pool.attrs) a.port = "!initial";
        for (ObFluent& ob : pool.obs) ob.port = "!initial";
        EvaluationContext ctx;
        ctx.stage = "start-of-workflow";
        ctx.purpose = purpose;
        ctx.user = default_user;
        ctx.start_time = default_start;
        collect_activations(pool, true, "start-of-workflow", ctx, result.activations);
    }

    for (const InitialAttachment& at : graph.attachments) {
        seed(fluents_of[at.process], at.rules, at.process, at.port, true);
    }

    std::vector<std::pair<PortRef, DataRuleSet>> terminal;
    for (const std::string& id : topo_order(graph)) {
        const ProcessNode& process = *graph.find_process(id);
        Fluents& db = fluents_of[id];

        EvaluationContext ctx;
        ctx.action = process.action_type;
        ctx.purpose = purpose;
        ctx.user = process.user ? process.user : default_user;
        ctx.start_time = process.start_time ? process.start_time : default_start;
        ctx.process_id = process.id;
        EvaluationContext import_ctx = ctx;
        import_ctx.stage = "import";
        collect_activations(db, true, id, import_ctx, result.activations);
        collect_activations(db, false, id, ctx, result.activations);

        // Action sequence: one pr per input port (propagates merged), then
        // the refinements in declaration order, then end per output port.
        auto known_in = [&](const std::string& port) {
            return std::find(process.inputs.begin(), process.inputs.end(), port) !=
                   process.inputs.end();
        };
        auto known_out = [&](const std::string& port) {
            return std::find(process.outputs.begin(), process.outputs.end(), port) !=
                   process.outputs.end();
        };
        std::vector<std::pair<std::string, std::vector<std::string>>> pr_actions;
        auto add_pr = [&](const std::string& in, const std::vector<std::string>& outs) {
            if (!known_in(in)) return;  // lint territory: matches nothing
            std::vector<std::string>* target = nullptr;
            for (auto& [port, list] : pr_actions) {
                if (port == in) target = &list;
            }
            if (!target) {
                pr_actions.emplace_back(in, std::vector<std::string>{});
                target = &pr_actions.back().second;
            }
            for (const std::string& out : outs) {
                if (!known_out(out)) continue;
                if (std::find(target->begin(), target->end(), out) == target->end()) {
                    target->push_back(out);
                }
            }
        };
        if (process.flow_rules) {
            for (const Propagate& pr : process.flow_rules->propagates) {
                add_pr(pr.in_port, pr.out_ports);
            }
        } else {
            for (const std::string& in : process.inputs) add_pr(in, process.outputs);
        }
        for (const auto& [in, outs] : pr_actions) act_propagate(db, id, in, outs);
        if (process.flow_rules) {
            for (const Refinement& r : process.flow_rules->refinements) {
                if (const auto* edit = std::get_if<EditRule>(&r)) {
                    act_edit(db, *edit);
                } else {
                    act_delete(db, std::get<DeleteRule>(r));
                }
            }
        }
        for (const std::string& out : process.outputs) act_end(db, out);

        for (const std::string& out : process.outputs) {
            DataRuleSet rules = package(db, out);
            bool consumed = false;
            for (const Connection& c : graph.connections) {
                if (c.from_process != id || c.from_port != out) continue;
                consumed = true;
                seed(fluents_of[c.to_process], rules, c.to_process, c.to_port, false);
            }
            if (!consumed) terminal.emplace_back(PortRef{id, out, PortDir::Out}, std::move(rules));
        }
    }
    result.outputs = terminal;

    // Boundary: end-of-workflow over the merged terminal rows.
    {
        Fluents pool;
        for (const auto& [ref, rules] : terminal) seed(pool, rules, ref.process, ref.port, true);
        for (AttrFluent& a : pool.attrs) a.port = "!terminal";
        for (ObFluent& ob : pool.obs) ob.port = "!terminal";
        EvaluationContext ctx;
        ctx.stage = "end-of-workflow";
        ctx.purpose = purpose;
        ctx.user = default_user;
        ctx.start_time = default_start;
        collect_activations(pool, true, "end-of-workflow", ctx, result.activations);
    }
    return result;
}

}  // namespace ruleflow
