// ruleflow — command-line front end for the rule-propagation library.
//
// Subcommands:
//   reason      load a graph, attach rules, reason, report outputs/obligations
//   validate    parse a rule file and report diagnostics
//   obligations tabulate a recorded obligation store
//   export-dot  render a graph (without reasoning) to Graphviz DOT
//
// Exit codes: 0 ok, 1 usage, 2 input error, 3 internal error,
//             4 reasoning finished but a Prohibited obligation activated.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ruleflow/errors.hpp"
#include "ruleflow/flow_graph.hpp"
#include "ruleflow/notation.hpp"
#include "ruleflow/obligation_store.hpp"
#include "ruleflow/reasoner.hpp"
#include "ruleflow/recognizer.hpp"
#include "ruleflow/rule_model.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ruleflow::IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ruleflow::IoError("cannot read '" + path + "'");
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ruleflow::IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw ruleflow::IoError("cannot write '" + path + "'");
}

// Timestamp used for store records. RULEFLOW_NOW overrides the clock so runs
// can be made reproducible.
std::string now_stamp() {
    if (const char* fixed = std::getenv("RULEFLOW_NOW")) return fixed;
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// "proc:out" -> PortRef, splitting on the LAST colon so process ids may
// themselves contain colons (e.g. "virtual:publish").
ruleflow::PortRef parse_port_ref(const std::string& text) {
    std::size_t pos = text.rfind(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == text.size()) {
        throw CLI::ValidationError("expected PROCESS:PORT, got '" + text + "'");
    }
    return ruleflow::PortRef{text.substr(0, pos), text.substr(pos + 1)};
}

struct WriteBackEntry {
    ruleflow::PortRef port;
    std::string data_id;
};

// "proc:out=datum-id" -> port + target database key.
WriteBackEntry parse_write_back(const std::string& text) {
    std::size_t eq = text.find('=');
    if (eq == std::string::npos || eq + 1 == text.size()) {
        throw CLI::ValidationError("expected PROCESS:PORT=DATA-ID, got '" + text + "'");
    }
    return WriteBackEntry{parse_port_ref(text.substr(0, eq)), text.substr(eq + 1)};
}

// ── reason ───────────────────────────────────────────────────────────────────

struct ReasonConfig {
    std::string graph_path;
    std::string rules_path;
    std::string store_path;
    std::string purpose;
    std::string user;
    std::string start_time;
    std::vector<std::string> inject_publish;
    std::vector<std::string> write_back;
    std::string out_path;
    std::string dot_path;
};

int run_reason(const ReasonConfig& cfg) {
    using namespace ruleflow;

    DataFlowGraph graph = load_graph(read_file(cfg.graph_path));

    RuleDatabase db;
    if (!cfg.rules_path.empty()) {
        db = load_rule_database(read_file(cfg.rules_path));
        graph = annotate(graph, db);
    }

    if (!cfg.inject_publish.empty()) {
        std::vector<PortRef> sources;
        for (const std::string& ref : cfg.inject_publish) sources.push_back(parse_port_ref(ref));
        graph = inject_virtual_process(graph, "publish", sources);
    }

    ReasoningOverrides overrides;
    if (!cfg.purpose.empty()) overrides.purpose = cfg.purpose;
    if (!cfg.user.empty()) overrides.user = cfg.user;
    if (!cfg.start_time.empty()) overrides.start_time = cfg.start_time;

    ReasoningResult result = reason(graph, overrides);
    for (const std::string& lint : result.lints) std::cerr << "lint: " << lint << "\n";

    std::string doc = result_to_text(result);
    if (cfg.out_path.empty()) {
        std::cout << doc;
    } else {
        write_file(cfg.out_path, doc);
    }

    if (!cfg.dot_path.empty()) {
        OutputSummaries summaries;
        for (const auto& [ref, rules] : result.outputs) {
            summaries.emplace_back(ref, serialize(rules));
        }
        write_file(cfg.dot_path, export_dot(graph, &summaries));
    }

    if (!cfg.write_back.empty()) {
        for (const std::string& text : cfg.write_back) {
            WriteBackEntry entry = parse_write_back(text);
            const DataRuleSet* rules = result.find_output(entry.port.process, entry.port.port);
            if (!rules) throw UnknownPort(entry.port.text() + " (not a terminal output)");
            write_back(db, entry.data_id, *rules);
        }
        write_file(cfg.rules_path, save_rule_database(db));
    }

    if (!cfg.store_path.empty()) {
        record_activations(cfg.store_path, cfg.graph_path, result.activations, now_stamp());
    }

    return result.has_violation() ? 4 : 0;
}

// ── validate ─────────────────────────────────────────────────────────────────

int run_validate(const std::string& path) {
    using namespace ruleflow;

    std::vector<AnyStatement> statements = parse_statements(read_file(path));

    std::size_t attributes = 0, obligations = 0, propagations = 0, refinements = 0;
    std::vector<RuleStatement> data_part;
    for (const AnyStatement& st : statements) {
        if (const auto* a = std::get_if<AttributeDecl>(&st)) {
            ++attributes;
            data_part.push_back(*a);
        } else if (const auto* o = std::get_if<ObligationDecl>(&st)) {
            ++obligations;
            data_part.push_back(*o);
        } else if (std::holds_alternative<Propagate>(st)) {
            ++propagations;
        } else {
            ++refinements;
        }
    }

    // Surfaces unresolved attribute references; throws on failure.
    DataRuleSet resolved = resolve_rule_set(data_part);

    std::cout << statements.size() << " statements (" << attributes << " attributes, "
              << obligations << " obligations, " << propagations << " propagations, "
              << refinements << " refinements)\n";
    for (std::size_t i = 0; i < resolved.obligations().size(); ++i) {
        if (resolved.obligations()[i].condition.kind == Condition::Kind::Null) {
            std::cout << "note: obligation " << i + 1
                      << " has a null activation condition and never activates on its own\n";
        }
    }
    return 0;
}

// ── obligations ──────────────────────────────────────────────────────────────

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out;
}

int run_obligations(const std::string& path, bool dedup, bool violations_only) {
    using namespace ruleflow;

    StoreFilter filter;
    filter.dedup = dedup;
    filter.violations_only = violations_only;
    std::vector<StoreRecord> records = list_records(load_store(path), filter);
    if (records.empty()) {
        std::cout << "no records\n";
        return 0;
    }

    std::vector<std::array<std::string, 6>> rows;
    rows.push_back({"ACTION", "ARGS", "VALIDITY", "STAGE", "PROCESS", "GRAPH"});
    for (const StoreRecord& rec : records) {
        std::string action = rec.action;
        if (rec.violation) action += " !";
        rows.push_back({action, join(rec.args), join(rec.validity), rec.stage, rec.process,
                        rec.graph});
    }

    std::array<std::size_t, 6> width{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c];
            if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
        }
        std::cout << line << "\n";
    }
    std::cout << records.size() << " record(s)\n";
    return 0;
}

// ── export-dot ───────────────────────────────────────────────────────────────

int run_export_dot(const std::string& graph_path, const std::string& out_path) {
    using namespace ruleflow;

    std::string dot = export_dot(load_graph(read_file(graph_path)));
    if (out_path.empty()) {
        std::cout << dot;
    } else {
        write_file(out_path, dot);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-governance rule propagation over dataflow graphs"};
    app.require_subcommand(1);

    ReasonConfig reason_cfg;
    CLI::App* reason_cmd =
        app.add_subcommand("reason", "Derive output rules and activated obligations for a graph");
    reason_cmd->add_option("graph", reason_cfg.graph_path, "Dataflow graph JSON file")
        ->required();
    reason_cmd->add_option("--rules", reason_cfg.rules_path,
                           "Rule database JSON; matched rules are attached before reasoning");
    reason_cmd->add_option("--store", reason_cfg.store_path,
                           "Obligation store (JSONL) to append activations to");
    reason_cmd->add_option("--purpose", reason_cfg.purpose, "Override the graph's purpose");
    reason_cmd->add_option("--user", reason_cfg.user, "Override the graph's user");
    reason_cmd->add_option("--start-time", reason_cfg.start_time,
                           "Override the graph's start time");
    reason_cmd->add_option("--inject-publish", reason_cfg.inject_publish,
                           "Output port(s) PROCESS:PORT to feed into a virtual publish sink");
    reason_cmd->add_option("--write-back", reason_cfg.write_back,
                           "PROCESS:PORT=DATA-ID pairs: save derived output rules into --rules");
    reason_cmd->add_option("--out", reason_cfg.out_path,
                           "Write the result document here instead of stdout");
    reason_cmd->add_option("--dot", reason_cfg.dot_path,
                           "Write a DOT rendering annotated with the derived output rules");

    std::string validate_path;
    CLI::App* validate_cmd = app.add_subcommand("validate", "Parse a rule file and report diagnostics");
    validate_cmd->add_option("rules-file", validate_path, "Rule text file")->required();

    std::string store_path;
    bool dedup = false, violations_only = false;
    CLI::App* obligations_cmd =
        app.add_subcommand("obligations", "Tabulate recorded obligation activations");
    obligations_cmd->add_option("store", store_path, "Obligation store (JSONL) file")->required();
    obligations_cmd->add_flag("--dedup", dedup, "Collapse repeats of the same logical obligation");
    obligations_cmd->add_flag("--violations-only", violations_only,
                              "Show only activations of Prohibited actions");

    std::string export_graph_path, export_out_path;
    CLI::App* export_cmd = app.add_subcommand("export-dot", "Render a graph to Graphviz DOT");
    export_cmd->add_option("graph", export_graph_path, "Dataflow graph JSON file")->required();
    export_cmd->add_option("--out", export_out_path, "Write DOT here instead of stdout");

    try {
        app.parse(argc, argv);

        // --write-back stores results into the rule database, so it needs one.
        if (!reason_cfg.write_back.empty() && reason_cfg.rules_path.empty()) {
            throw CLI::ValidationError("--write-back requires --rules");
        }

        if (reason_cmd->parsed()) return run_reason(reason_cfg);
        if (validate_cmd->parsed()) return run_validate(validate_path);
        if (obligations_cmd->parsed()) return run_obligations(store_path, dedup, violations_only);
        if (export_cmd->parsed()) return run_export_dot(export_graph_path, export_out_path);
        return 1;  // unreachable: require_subcommand(1)
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: Usage: " << e.what() << "\n";
        return 1;
    } catch (const ruleflow::Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 3;
    }
}
