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

// ── rule database ───────────────────────────────────────────────────────────

/// Attaches data rules to input data recognized by id, URI, or port key.
struct DataMatcher {
    std::optional<std::string> data_id;      // glob over the datum id
    std::optional<std::string> uri_pattern;  // glob over the datum id/URI
    std::optional<std::string> port;         // glob over "process:port"
    DataRuleSet rules;
};

/// Supplies flow rules to processes recognized by id or action type.
struct ProcessMatcher {
    std::optional<std::string> process_id;
    std::optional<std::string> action_type;
    FlowRuleSet flow_rules;
};

/// Adds a virtual (hard-coded) data source port to matching processes.
struct Injection {
    std::optional<std::string> process_id;
    std::optional<std::string> action_type;
    std::string port;
    DataRuleSet rules;
};

/**
 * The recognizer's knowledge: what rules belong to which data and processes.
 * `derived` holds rules written back from earlier reasoning runs, keyed by
 * datum id, so obligations can chain across separately-run workflows.
 */
struct RuleDatabase {
    std::vector<DataMatcher> data;
    std::vector<ProcessMatcher> process;
    std::vector<Injection> injections;
    std::map<std::string, DataRuleSet> derived;
};

namespace detail {

/// Glob match where `*` spans any run of characters (no other metacharacters).
inline bool glob_match(const std::string& pattern, const std::string& text) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string::npos, star_t = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            star_t = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++star_t;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

inline DataRuleSet parse_rules_text(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return DataRuleSet{};
    return resolve_rule_set(parse_data_rules(j.at(key).get<std::string>()));
}

}  // namespace detail

inline RuleDatabase load_rule_database(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("rule database is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw IoError("rule database must be a JSON object");
    RuleDatabase db;
    for (const nlohmann::json& mj : doc.value("data", nlohmann::json::array())) {
        DataMatcher m;
        nlohmann::json match = mj.value("match", nlohmann::json::object());
        m.data_id = detail::opt_string(match, "dataId");
        m.uri_pattern = detail::opt_string(match, "uriPattern");
        m.port = detail::opt_string(match, "port");
        m.rules = detail::parse_rules_text(mj, "rules");
        db.data.push_back(std::move(m));
    }
    for (const nlohmann::json& mj : doc.value("process", nlohmann::json::array())) {
        ProcessMatcher m;
        nlohmann::json match = mj.value("match", nlohmann::json::object());
        m.process_id = detail::opt_string(match, "processId");
        m.action_type = detail::opt_string(match, "actionType");
        if (mj.contains("flowRules") && !mj.at("flowRules").is_null()) {
            m.flow_rules = parse_flow_rules(mj.at("flowRules").get<std::string>());
        }
        db.process.push_back(std::move(m));
    }
    for (const nlohmann::json& ij : doc.value("injections", nlohmann::json::array())) {
        Injection inj;
        nlohmann::json match = ij.value("match", nlohmann::json::object());
        inj.process_id = detail::opt_string(match, "processId");
        inj.action_type = detail::opt_string(match, "actionType");
        inj.port = ij.value("port", std::string{});
        if (inj.port.empty()) throw IoError("injection entries need a 'port' name");
        inj.rules = detail::parse_rules_text(ij, "rules");
        db.injections.push_back(std::move(inj));
    }
    if (doc.contains("derived")) {
        for (const auto& [key, value] : doc.at("derived").items()) {
            db.derived[key] = resolve_rule_set(parse_data_rules(value.get<std::string>()));
        }
    }
    return db;
}

inline std::string save_rule_database(const RuleDatabase& db) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    doc["data"] = nlohmann::ordered_json::array();
    for (const DataMatcher& m : db.data) {
        nlohmann::ordered_json match = nlohmann::ordered_json::object();
        if (m.data_id) match["dataId"] = *m.data_id;
        if (m.uri_pattern) match["uriPattern"] = *m.uri_pattern;
        if (m.port) match["port"] = *m.port;
        doc["data"].push_back(nlohmann::ordered_json{{"match", match}, {"rules", serialize(m.rules)}});
    }
    doc["process"] = nlohmann::ordered_json::array();
    for (const ProcessMatcher& m : db.process) {
        nlohmann::ordered_json match = nlohmann::ordered_json::object();
        if (m.process_id) match["processId"] = *m.process_id;
        if (m.action_type) match["actionType"] = *m.action_type;
        doc["process"].push_back(
            nlohmann::ordered_json{{"match", match}, {"flowRules", serialize(m.flow_rules)}});
    }
    doc["injections"] = nlohmann::ordered_json::array();
    for (const Injection& inj : db.injections) {
        nlohmann::ordered_json match = nlohmann::ordered_json::object();
        if (inj.process_id) match["processId"] = *inj.process_id;
        if (inj.action_type) match["actionType"] = *inj.action_type;
        doc["injections"].push_back(nlohmann::ordered_json{
            {"match", match}, {"port", inj.port}, {"rules", serialize(inj.rules)}});
    }
    doc["derived"] = nlohmann::ordered_json::object();
    for (const auto& [key, rules] : db.derived) {
        doc["derived"][key] = serialize(rules);
    }
    return doc.dump(2) + "\n";
}

// ── annotation ──────────────────────────────────────────────────────────────

namespace detail {

/// The datum id of a data port: an explicit literal binding from a matching
/// data matcher when one exists, otherwise the "process:port" key itself.
inline std::string datum_id_for(const RuleDatabase& db, const std::string& port_key) {
    for (const DataMatcher& m : db.data) {
        if (m.port && glob_match(*m.port, port_key) && m.data_id &&
            m.data_id->find('*') == std::string::npos) {
            return *m.data_id;
        }
    }
    return port_key;
}

inline bool data_matcher_hits(const DataMatcher& m, const std::string& port_key,
                              const std::string& datum_id) {
    if (m.port && glob_match(*m.port, port_key)) return true;
    if (m.data_id && glob_match(*m.data_id, datum_id)) return true;
    if (m.uri_pattern && glob_match(*m.uri_pattern, datum_id)) return true;
    return false;  // a matcher with no match fields recognizes nothing
}

inline bool process_matcher_hits(const std::optional<std::string>& process_id,
                                 const std::optional<std::string>& action_type,
                                 const ProcessNode& p) {
    if (process_id && glob_match(*process_id, p.id)) return true;
    if (action_type && glob_match(*action_type, p.action_type)) return true;
    return false;
}

inline void merge_attachment(DataFlowGraph& graph, const std::string& process,
                             const std::string& port, const DataRuleSet& rules) {
    for (InitialAttachment& at : graph.attachments) {
        if (at.process == process && at.port == port) {
            at.rules = merge_rule_sets(at.rules, rules);
            return;
        }
    }
    graph.attachments.push_back(InitialAttachment{process, port, rules});
}

}  // namespace detail

/**
 * Annotates a graph from the rule database, returning a new graph:
 *
 *   - every sourceless (workflow-input) port collects the data rules of all
 *     matching data matchers plus any derived rules recorded for its datum
 *     id, merged into its initial attachment;
 *   - every process without flow rules receives the flow rules of the first
 *     matching process matcher (processes that declare their own keep them);
 *   - injections add virtual data-source ports to matching processes.
 *
 * Annotating an already annotated graph changes nothing: rule merging is a
 * set union, flow rules are only filled where absent, and injections merge
 * into the port they already created (previously injected ports are skipped
 * by the data pass — their rules come from their injection entry).
 */
inline DataFlowGraph annotate(const DataFlowGraph& graph, const RuleDatabase& db) {
    DataFlowGraph out = graph;
    for (const ProcessNode& p : out.processes) {
        for (const std::string& port : p.inputs) {
            if (out.producer_of(p.id, port)) continue;      // fed by the workflow
            if (p.virtual_inputs.count(port)) continue;     // owned by an injection
            std::string key = p.id + ":" + port;
            std::string datum_id = detail::datum_id_for(db, key);
            std::vector<DataRuleSet> parts;
            for (const DataMatcher& m : db.data) {
                if (detail::data_matcher_hits(m, key, datum_id)) parts.push_back(m.rules);
            }
            auto derived = db.derived.find(datum_id);
            if (derived != db.derived.end()) parts.push_back(derived->second);
            if (parts.empty()) continue;
            detail::merge_attachment(out, p.id, port, merge_rule_sets(parts));
        }
    }
    for (ProcessNode& p : out.processes) {
        if (p.flow_rules) continue;
        for (const ProcessMatcher& m : db.process) {
            if (detail::process_matcher_hits(m.process_id, m.action_type, p)) {
                p.flow_rules = m.flow_rules;
                break;  // first match wins
            }
        }
    }
    for (const Injection& inj : db.injections) {
        std::vector<std::string> targets;
        for (const ProcessNode& p : out.processes) {
            if (detail::process_matcher_hits(inj.process_id, inj.action_type, p)) {
                targets.push_back(p.id);
            }
        }
        for (const std::string& id : targets) {
            ProcessNode* p = out.find_process(id);
            bool is_input =
                std::find(p->inputs.begin(), p->inputs.end(), inj.port) != p->inputs.end();
            if (is_input) {
                detail::merge_attachment(out, id, inj.port, inj.rules);
            } else {
                out = inject_virtual_input(out, id, inj.port, inj.rules);
            }
        }
    }
    return out;
}

/// Records reasoning-derived rules for a datum id (replacing any previous
/// entry — the newest run wins), so later workflows consuming that datum
/// inherit its obligations through `annotate`.
inline void write_back(RuleDatabase& db, const std::string& data_id, const DataRuleSet& rules) {
    db.derived[data_id] = rules;
}

}  // namespace ruleflow
