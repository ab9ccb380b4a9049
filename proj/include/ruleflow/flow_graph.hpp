#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleflow/errors.hpp"
#include "ruleflow/notation.hpp"
#include "ruleflow/rule_model.hpp"

namespace ruleflow {

// ── graph model ─────────────────────────────────────────────────────────────

enum class PortDir { In, Out };

/// Identifies one port on one process.
struct PortRef {
    std::string process;
    std::string port;
    PortDir dir = PortDir::In;

    std::string text() const { return process + ":" + port; }

    friend bool operator==(const PortRef&, const PortRef&) = default;
    friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct Connection {
    std::string from_process;
    std::string from_port;
    std::string to_process;
    std::string to_port;

    friend bool operator==(const Connection&, const Connection&) = default;
};

/**
 * One process of the dataflow graph. A process with no flow rules propagates
 * every input to every output unchanged (the safe default); `is_virtual`
 * marks processes injected by tooling rather than declared by the workflow.
 */
struct ProcessNode {
    std::string id;
    std::string action_type;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::optional<FlowRuleSet> flow_rules;
    std::optional<std::string> user;
    std::optional<std::string> start_time;
    bool is_virtual = false;
    std::set<std::string> virtual_inputs;  // injected data-source ports
};

/// Rules attached to an input port before the workflow runs.
struct InitialAttachment {
    std::string process;
    std::string port;
    DataRuleSet rules;
};

struct DataFlowGraph {
    std::optional<std::string> purpose;
    std::optional<std::string> user;
    std::optional<std::string> start_time;
    std::vector<ProcessNode> processes;
    std::vector<Connection> connections;
    std::vector<InitialAttachment> attachments;

    const ProcessNode* find_process(const std::string& id) const {
        for (const ProcessNode& p : processes) {
            if (p.id == id) return &p;
        }
        return nullptr;
    }

    ProcessNode* find_process(const std::string& id) {
        for (ProcessNode& p : processes) {
            if (p.id == id) return &p;
        }
        return nullptr;
    }

    /// The producer connection feeding an input port, if any (at most one).
    const Connection* producer_of(const std::string& process, const std::string& port) const {
        for (const Connection& c : connections) {
            if (c.to_process == process && c.to_port == port) return &c;
        }
        return nullptr;
    }
};

// ── topological order ───────────────────────────────────────────────────────

/// Deterministic topological order of process ids (ties broken by ascending
/// id). Throws CycleDetected with one offending path spelled out.
inline std::vector<std::string> topo_order(const DataFlowGraph& graph) {
    std::map<std::string, std::set<std::string>> successors;
    std::map<std::string, int> indegree;
    for (const ProcessNode& p : graph.processes) {
        successors[p.id];
        indegree[p.id];
    }
    for (const Connection& c : graph.connections) {
        if (successors[c.from_process].insert(c.to_process).second) {
            ++indegree[c.to_process];
        }
    }
    std::set<std::string> ready;
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) ready.insert(id);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const std::string& next : successors[id]) {
            if (--indegree[next] == 0) ready.insert(next);
        }
    }
    if (order.size() == graph.processes.size()) return order;
    // A cycle remains. Every leftover node still has an unprocessed
    // predecessor, so walking predecessors must revisit a node — that loop,
    // reversed into flow direction, is the reported path.
    std::set<std::string> leftover;
    for (const auto& [id, deg] : indegree) {
        if (deg > 0) leftover.insert(id);
    }
    auto predecessor_of = [&](const std::string& id) {
        for (const auto& [from, tos] : successors) {
            if (leftover.count(from) && tos.count(id)) return from;
        }
        return id;  // unreachable by construction
    };
    std::vector<std::string> path;
    std::set<std::string> on_path;
    std::string cur = *leftover.begin();
    while (on_path.insert(cur).second) {
        path.push_back(cur);
        cur = predecessor_of(cur);
    }
    path.push_back(cur);
    auto loop_start = std::find(path.begin(), path.end(), cur);
    std::vector<std::string> loop(loop_start, path.end());
    std::reverse(loop.begin(), loop.end());
    std::string text;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        if (i) text += " -> ";
        text += loop[i];
    }
    throw CycleDetected(text);
}

// ── JSON load / save ────────────────────────────────────────────────────────

namespace detail {

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw IoError(std::string("graph field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

inline void check_port_names(const ProcessNode& p) {
    std::set<std::string> seen;
    for (const std::string& name : p.inputs) {
        if (!seen.insert(name).second) throw DuplicateId(p.id + ":" + name);
    }
    for (const std::string& name : p.outputs) {
        if (!seen.insert(name).second) throw DuplicateId(p.id + ":" + name);
    }
}

}  // namespace detail

/**
 * Loads a dataflow graph from its JSON document form and validates it:
 * unique process/port ids, endpoints that exist with the right direction,
 * at most one producer per input port, and acyclicity.
 */
inline DataFlowGraph load_graph(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("graph is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw IoError("graph document must be a JSON object");

    DataFlowGraph graph;
    graph.purpose = detail::opt_string(doc, "purpose");
    graph.user = detail::opt_string(doc, "user");
    graph.start_time = detail::opt_string(doc, "startTime");

    for (const nlohmann::json& pj : doc.value("processes", nlohmann::json::array())) {
        ProcessNode p;
        if (!pj.contains("id") || !pj.at("id").is_string() || pj.at("id").get<std::string>().empty()) {
            throw IoError("every process needs a non-empty string 'id'");
        }
        p.id = pj.at("id").get<std::string>();
        p.action_type = pj.value("action", std::string{});
        if (p.action_type.empty()) throw IoError("process '" + p.id + "' needs an 'action' type");
        for (const nlohmann::json& name : pj.value("inputs", nlohmann::json::array())) {
            p.inputs.push_back(name.get<std::string>());
        }
        for (const nlohmann::json& name : pj.value("outputs", nlohmann::json::array())) {
            p.outputs.push_back(name.get<std::string>());
        }
        if (pj.contains("flowRules") && !pj.at("flowRules").is_null()) {
            p.flow_rules = parse_flow_rules(pj.at("flowRules").get<std::string>());
        }
        p.user = detail::opt_string(pj, "user");
        p.start_time = detail::opt_string(pj, "startTime");
        p.is_virtual = pj.value("virtual", false);
        for (const nlohmann::json& name : pj.value("virtualInputs", nlohmann::json::array())) {
            p.virtual_inputs.insert(name.get<std::string>());
        }
        detail::check_port_names(p);
        if (graph.find_process(p.id)) throw DuplicateId(p.id);
        graph.processes.push_back(std::move(p));
    }

    auto port_exists = [&](const std::string& process, const std::string& port, PortDir dir) {
        const ProcessNode* p = graph.find_process(process);
        if (!p) return false;
        const auto& list = dir == PortDir::In ? p->inputs : p->outputs;
        return std::find(list.begin(), list.end(), port) != list.end();
    };

    std::set<std::pair<std::string, std::string>> fed_inputs;
    for (const nlohmann::json& cj : doc.value("connections", nlohmann::json::array())) {
        Connection c;
        c.from_process = cj.value("fromProcess", std::string{});
        c.from_port = cj.value("fromPort", std::string{});
        c.to_process = cj.value("toProcess", std::string{});
        c.to_port = cj.value("toPort", std::string{});
        if (!port_exists(c.from_process, c.from_port, PortDir::Out)) {
            throw DanglingPort(c.from_process + ":" + c.from_port);
        }
        if (!port_exists(c.to_process, c.to_port, PortDir::In)) {
            throw DanglingPort(c.to_process + ":" + c.to_port);
        }
        if (!fed_inputs.insert({c.to_process, c.to_port}).second) {
            throw DuplicatePort(c.to_process + ":" + c.to_port);
        }
        graph.connections.push_back(std::move(c));
    }

    for (const nlohmann::json& aj : doc.value("initialRules", nlohmann::json::array())) {
        InitialAttachment at;
        at.process = aj.value("process", std::string{});
        at.port = aj.value("port", std::string{});
        if (!port_exists(at.process, at.port, PortDir::In)) {
            throw DanglingPort(at.process + ":" + at.port);
        }
        at.rules = resolve_rule_set(parse_data_rules(aj.value("rules", std::string{})));
        // Multiple attachments to one port merge into one rule set.
        bool merged = false;
        for (InitialAttachment& existing : graph.attachments) {
            if (existing.process == at.process && existing.port == at.port) {
                existing.rules = merge_rule_sets(existing.rules, at.rules);
                merged = true;
                break;
            }
        }
        if (!merged) graph.attachments.push_back(std::move(at));
    }

    topo_order(graph);  // validates acyclicity
    return graph;
}

/// Serializes a graph back to its JSON document form (canonical rule text,
/// stable field order). load → save → load is a fixpoint.
inline std::string save_graph(const DataFlowGraph& graph) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    if (graph.purpose) doc["purpose"] = *graph.purpose;
    if (graph.user) doc["user"] = *graph.user;
    if (graph.start_time) doc["startTime"] = *graph.start_time;
    doc["processes"] = nlohmann::ordered_json::array();
    for (const ProcessNode& p : graph.processes) {
        nlohmann::ordered_json pj = nlohmann::ordered_json::object();
        pj["id"] = p.id;
        pj["action"] = p.action_type;
        pj["inputs"] = p.inputs;
        pj["outputs"] = p.outputs;
        if (p.flow_rules) pj["flowRules"] = serialize(*p.flow_rules);
        if (p.user) pj["user"] = *p.user;
        if (p.start_time) pj["startTime"] = *p.start_time;
        if (p.is_virtual) pj["virtual"] = true;
        if (!p.virtual_inputs.empty()) {
            pj["virtualInputs"] = std::vector<std::string>(p.virtual_inputs.begin(), p.virtual_inputs.end());
        }
        doc["processes"].push_back(std::move(pj));
    }
    doc["connections"] = nlohmann::ordered_json::array();
    for (const Connection& c : graph.connections) {
        doc["connections"].push_back(nlohmann::ordered_json{{"fromProcess", c.from_process},
                                                            {"fromPort", c.from_port},
                                                            {"toProcess", c.to_process},
                                                            {"toPort", c.to_port}});
    }
    doc["initialRules"] = nlohmann::ordered_json::array();
    for (const InitialAttachment& at : graph.attachments) {
        doc["initialRules"].push_back(nlohmann::ordered_json{
            {"process", at.process}, {"port", at.port}, {"rules", serialize(at.rules)}});
    }
    return doc.dump(2) + "\n";
}

// ── virtual injections ──────────────────────────────────────────────────────

/**
 * Returns a copy of the graph with one virtual sink process appended: it has
 * the given action type, one input port per source output port, and no
 * outputs. Used to make framework steps (publish, archive, ...) visible to
 * the reasoner. The input graph is left untouched.
 */
inline DataFlowGraph inject_virtual_process(const DataFlowGraph& graph,
                                            const std::string& action_type,
                                            const std::vector<PortRef>& sources) {
    if (sources.empty()) throw InvalidRule("virtual process needs at least one source port");
    DataFlowGraph out = graph;
    for (const PortRef& src : sources) {
        const ProcessNode* p = out.find_process(src.process);
        if (!p || std::find(p->outputs.begin(), p->outputs.end(), src.port) == p->outputs.end()) {
            throw UnknownPort(src.text());
        }
    }
    std::string id = "virtual:" + action_type;
    for (int n = 2; out.find_process(id); ++n) {
        id = "virtual:" + action_type + ":" + std::to_string(n);
    }
    ProcessNode sink;
    sink.id = id;
    sink.action_type = action_type;
    sink.is_virtual = true;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        std::string port = "in" + std::to_string(i + 1);
        sink.inputs.push_back(port);
        out.connections.push_back(Connection{sources[i].process, sources[i].port, id, port});
    }
    out.processes.push_back(std::move(sink));
    return out;
}

/**
 * Returns a copy of the graph with a virtual (sourceless) input port added to
 * a process and the given rules attached to it. Models hard-coded data
 * sources that never appear as workflow inputs.
 */
inline DataFlowGraph inject_virtual_input(const DataFlowGraph& graph, const std::string& process_id,
                                          const std::string& port, const DataRuleSet& rules) {
    DataFlowGraph out = graph;
    ProcessNode* p = out.find_process(process_id);
    if (!p) throw UnknownPort(process_id + ":" + port);
    bool exists = std::find(p->inputs.begin(), p->inputs.end(), port) != p->inputs.end() ||
                  std::find(p->outputs.begin(), p->outputs.end(), port) != p->outputs.end();
    if (exists) throw DuplicatePort(process_id + ":" + port);
    p->inputs.push_back(port);
    p->virtual_inputs.insert(port);
    out.attachments.push_back(InitialAttachment{process_id, port, rules});
    return out;
}

// ── DOT export ──────────────────────────────────────────────────────────────

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail

/// Per-port rule summaries rendered next to their process in the DOT output.
using OutputSummaries = std::vector<std::pair<PortRef, std::string>>;

/**
 * Renders the graph as Graphviz DOT. Deterministic: the same graph always
 * yields byte-identical text. Processes are boxes labeled with their action
 * type (virtual ones dashed); attachment-bearing sourceless input ports are
 * ellipses (dashed when virtual); optional summaries appear as note shapes.
 */
inline std::string export_dot(const DataFlowGraph& graph, const OutputSummaries* summaries = nullptr) {
    std::string out = "digraph G {\n";
    out += "  rankdir=LR;\n";
    out += "  node [shape=box, fontname=\"Helvetica\"];\n";
    for (const ProcessNode& p : graph.processes) {
        out += "  \"" + detail::dot_escape(p.id) + "\" [label=\"" + detail::dot_escape(p.id) +
               "\\n" + detail::dot_escape(p.action_type) + "\"";
        if (p.is_virtual) out += ", style=dashed";
        out += "];\n";
    }
    for (const InitialAttachment& at : graph.attachments) {
        const ProcessNode* p = graph.find_process(at.process);
        bool is_virtual = p && p->virtual_inputs.count(at.port) > 0;
        std::string node = at.process + ":" + at.port + ":in";
        out += "  \"" + detail::dot_escape(node) + "\" [shape=ellipse, label=\"" +
               detail::dot_escape(at.port) + "\"";
        if (is_virtual) out += ", style=dashed";
        out += "];\n";
        out += "  \"" + detail::dot_escape(node) + "\" -> \"" + detail::dot_escape(at.process) +
               "\"" + (is_virtual ? " [style=dashed]" : "") + ";\n";
    }
    for (const Connection& c : graph.connections) {
        out += "  \"" + detail::dot_escape(c.from_process) + "\" -> \"" +
               detail::dot_escape(c.to_process) + "\" [label=\"" + detail::dot_escape(c.from_port) +
               " -> " + detail::dot_escape(c.to_port) + "\"];\n";
    }
    if (summaries) {
        for (const auto& [ref, rules] : *summaries) {
            std::string node = ref.process + ":" + ref.port + ":rules";
            out += "  \"" + detail::dot_escape(node) + "\" [shape=note, label=\"" +
                   detail::dot_escape(ref.port) + "\\n" + detail::dot_escape(rules) + "\"];\n";
            out += "  \"" + detail::dot_escape(ref.process) + "\" -> \"" + detail::dot_escape(node) +
                   "\" [style=dotted];\n";
        }
    }
    out += "}\n";
    return out;
}

}  // namespace ruleflow
