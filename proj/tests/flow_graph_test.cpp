#include "ruleflow/flow_graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace ruleflow;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << p;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string fixture(const char* rel) {
    return slurp(std::filesystem::path(RULEFLOW_FIXTURES_DIR) / rel);
}

const char* kMinimalGraph = R"json({
  "purpose": "research",
  "processes": [
    {"id": "a", "action": "produce", "inputs": [], "outputs": ["out"]},
    {"id": "b", "action": "consume", "inputs": ["in"], "outputs": []}
  ],
  "connections": [
    {"fromProcess": "a", "fromPort": "out", "toProcess": "b", "toPort": "in"}
  ],
  "initialRules": []
})json";

}  // namespace

// ── loading and validation ───────────────────────────────────────────────────

TEST(GraphLoad, ParsesProcessesConnectionsAndContext) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    EXPECT_EQ(g.purpose, "research");
    EXPECT_FALSE(g.user.has_value());
    ASSERT_EQ(g.processes.size(), 2u);
    EXPECT_EQ(g.processes[0].action_type, "produce");
    ASSERT_EQ(g.connections.size(), 1u);
    EXPECT_EQ(g.connections[0].to_port, "in");
    EXPECT_NE(g.producer_of("b", "in"), nullptr);
    EXPECT_EQ(g.producer_of("a", "out"), nullptr);
}

TEST(GraphLoad, AttachedRulesAreResolvedAndMergedPerPort) {
    DataFlowGraph g = load_graph(R"json({
      "processes": [{"id": "p", "action": "x", "inputs": ["in"], "outputs": []}],
      "initialRules": [
        {"process": "p", "port": "in", "rules": "attribute(a, str \"1\")"},
        {"process": "p", "port": "in", "rules": "attribute(b, str \"2\")\nobligation(Cite b, [], null)"}
      ]
    })json");
    ASSERT_EQ(g.attachments.size(), 1u);
    EXPECT_EQ(g.attachments[0].rules.attributes().size(), 2u);
    EXPECT_EQ(g.attachments[0].rules.obligations().size(), 1u);
}

TEST(GraphLoad, RejectsMalformedDocuments) {
    EXPECT_THROW(load_graph("not json"), IoError);
    EXPECT_THROW(load_graph("[]"), IoError);
    EXPECT_THROW(load_graph(R"({"processes": [{"id": "p"}]})"), IoError);  // no action
    EXPECT_THROW(load_graph(R"({"processes": [{"action": "x"}]})"), IoError);  // no id
}

TEST(GraphLoad, RejectsDuplicateIdentifiers) {
    EXPECT_THROW(load_graph(R"json({
      "processes": [
        {"id": "p", "action": "x", "inputs": [], "outputs": []},
        {"id": "p", "action": "y", "inputs": [], "outputs": []}
      ]
    })json"),
                 DuplicateId);
    EXPECT_THROW(load_graph(R"json({
      "processes": [{"id": "p", "action": "x", "inputs": ["dup"], "outputs": ["dup"]}]
    })json"),
                 DuplicateId);
}

TEST(GraphLoad, RejectsDanglingEndpoints) {
    EXPECT_THROW(load_graph(R"json({
      "processes": [{"id": "p", "action": "x", "inputs": ["in"], "outputs": []}],
      "connections": [{"fromProcess": "ghost", "fromPort": "o", "toProcess": "p", "toPort": "in"}]
    })json"),
                 DanglingPort);
    // Direction matters: an input port is not a valid source.
    EXPECT_THROW(load_graph(R"json({
      "processes": [
        {"id": "a", "action": "x", "inputs": ["in"], "outputs": []},
        {"id": "b", "action": "x", "inputs": ["in"], "outputs": []}
      ],
      "connections": [{"fromProcess": "a", "fromPort": "in", "toProcess": "b", "toPort": "in"}]
    })json"),
                 DanglingPort);
    EXPECT_THROW(load_graph(R"json({
      "processes": [{"id": "p", "action": "x", "inputs": ["in"], "outputs": []}],
      "initialRules": [{"process": "p", "port": "nope", "rules": ""}]
    })json"),
                 DanglingPort);
}

TEST(GraphLoad, RejectsTwoProducersForOneInput) {
    EXPECT_THROW(load_graph(R"json({
      "processes": [
        {"id": "a", "action": "x", "inputs": [], "outputs": ["o1", "o2"]},
        {"id": "b", "action": "x", "inputs": ["in"], "outputs": []}
      ],
      "connections": [
        {"fromProcess": "a", "fromPort": "o1", "toProcess": "b", "toPort": "in"},
        {"fromProcess": "a", "fromPort": "o2", "toProcess": "b", "toPort": "in"}
      ]
    })json"),
                 DuplicatePort);
}

TEST(GraphLoad, RejectsCyclesWithAPathInTheMessage) {
    try {
        load_graph(R"json({
          "processes": [
            {"id": "a", "action": "x", "inputs": ["in"], "outputs": ["out"]},
            {"id": "b", "action": "x", "inputs": ["in"], "outputs": ["out"]}
          ],
          "connections": [
            {"fromProcess": "a", "fromPort": "out", "toProcess": "b", "toPort": "in"},
            {"fromProcess": "b", "fromPort": "out", "toProcess": "a", "toPort": "in"}
          ]
        })json");
        FAIL() << "expected CycleDetected";
    } catch (const CycleDetected& e) {
        EXPECT_NE(std::string(e.what()).find("->"), std::string::npos);
    }
}

TEST(GraphSave, LoadSaveLoadIsAFixpoint) {
    for (const char* rel : {"graphs/running_example.graph.json", "graphs/cyclone.graph.json",
                            "graphs/mt3d_stage1.graph.json", "graphs/mt3d_stage2.graph.json"}) {
        SCOPED_TRACE(rel);
        DataFlowGraph g = load_graph(fixture(rel));
        std::string saved = save_graph(g);
        DataFlowGraph reloaded = load_graph(saved);
        EXPECT_EQ(save_graph(reloaded), saved);
    }
}

// ── topological order ────────────────────────────────────────────────────────

TEST(TopoOrder, DeterministicWithTiesByAscendingId) {
    DataFlowGraph g = load_graph(R"json({
      "processes": [
        {"id": "zeta", "action": "x", "inputs": [], "outputs": []},
        {"id": "alpha", "action": "x", "inputs": [], "outputs": []},
        {"id": "mid", "action": "x", "inputs": [], "outputs": []}
      ]
    })json");
    EXPECT_EQ(topo_order(g), (std::vector<std::string>{"alpha", "mid", "zeta"}));
}

TEST(TopoOrder, IndependentOfDeclarationOrder) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataFlowGraph shuffled = g;
    std::reverse(shuffled.processes.begin(), shuffled.processes.end());
    EXPECT_EQ(topo_order(g), topo_order(shuffled));
}

TEST(TopoOrder, RandomDagsAlwaysRespectEveryEdge) {
    std::mt19937 rng(20260816);
    for (int round = 0; round < 200; ++round) {
        DataFlowGraph g;
        int n = 1 + int(rng() % 8);
        for (int i = 0; i < n; ++i) {
            ProcessNode p;
            p.id = "p" + std::to_string(i);
            p.action_type = "x";
            g.processes.push_back(std::move(p));
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng() % 3 == 0) {
                    g.connections.push_back(
                        Connection{"p" + std::to_string(i), "o", "p" + std::to_string(j), "i"});
                }
            }
        }
        std::vector<std::string> order = topo_order(g);
        ASSERT_EQ(order.size(), g.processes.size());
        auto rank = [&](const std::string& id) {
            return std::find(order.begin(), order.end(), id) - order.begin();
        };
        for (const Connection& c : g.connections) {
            EXPECT_LT(rank(c.from_process), rank(c.to_process));
        }
    }
}

// ── virtual injections ───────────────────────────────────────────────────────

TEST(VirtualProcess, AppendsASinkFedByTheNamedOutputs) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataFlowGraph with = inject_virtual_process(g, "publish", {PortRef{"a", "out", PortDir::Out}});
    ASSERT_EQ(with.processes.size(), 3u);
    const ProcessNode& sink = with.processes.back();
    EXPECT_EQ(sink.id, "virtual:publish");
    EXPECT_EQ(sink.action_type, "publish");
    EXPECT_TRUE(sink.is_virtual);
    EXPECT_EQ(sink.inputs, std::vector<std::string>{"in1"});
    EXPECT_TRUE(sink.outputs.empty());
    EXPECT_NE(with.producer_of("virtual:publish", "in1"), nullptr);
    // The original graph is untouched.
    EXPECT_EQ(g.processes.size(), 2u);
}

TEST(VirtualProcess, IdsGetNumericSuffixesOnCollision) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataFlowGraph once = inject_virtual_process(g, "publish", {PortRef{"a", "out", PortDir::Out}});
    DataFlowGraph twice =
        inject_virtual_process(once, "publish", {PortRef{"a", "out", PortDir::Out}});
    EXPECT_EQ(twice.processes.back().id, "virtual:publish:2");
}

TEST(VirtualProcess, SourcesMustBeRealOutputs) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    EXPECT_THROW(inject_virtual_process(g, "publish", {PortRef{"b", "in", PortDir::Out}}),
                 UnknownPort);
    EXPECT_THROW(inject_virtual_process(g, "publish", {PortRef{"ghost", "out", PortDir::Out}}),
                 UnknownPort);
    EXPECT_THROW(inject_virtual_process(g, "publish", {}), InvalidRule);
}

TEST(VirtualInput, AddsASourcelessPortWithAttachedRules) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataRuleSet rules;
    rules.add_attribute(Attribute{"src", "url", "somewhere", {}});
    DataFlowGraph with = inject_virtual_input(g, "a", "mesh", rules);
    const ProcessNode* p = with.find_process("a");
    ASSERT_NE(p, nullptr);
    EXPECT_NE(std::find(p->inputs.begin(), p->inputs.end(), "mesh"), p->inputs.end());
    EXPECT_TRUE(p->virtual_inputs.count("mesh"));
    ASSERT_EQ(with.attachments.size(), 1u);
    EXPECT_EQ(with.attachments[0].port, "mesh");
    EXPECT_EQ(g.attachments.size(), 0u);  // original untouched

    EXPECT_THROW(inject_virtual_input(g, "ghost", "mesh", rules), UnknownPort);
    EXPECT_THROW(inject_virtual_input(g, "b", "in", rules), DuplicatePort);   // existing input
    EXPECT_THROW(inject_virtual_input(g, "a", "out", rules), DuplicatePort);  // existing output
}

TEST(VirtualInjections, SurviveSaveAndReload) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataRuleSet rules;
    rules.add_attribute(Attribute{"src", "url", "somewhere", {}});
    DataFlowGraph with = inject_virtual_input(
        inject_virtual_process(g, "publish", {PortRef{"a", "out", PortDir::Out}}), "a", "mesh",
        rules);
    DataFlowGraph reloaded = load_graph(save_graph(with));
    EXPECT_TRUE(reloaded.processes.back().is_virtual);
    EXPECT_TRUE(reloaded.find_process("a")->virtual_inputs.count("mesh"));
    EXPECT_EQ(save_graph(reloaded), save_graph(with));
}

// ── DOT export ───────────────────────────────────────────────────────────────

TEST(Dot, DeterministicAndStructurallyComplete) {
    DataFlowGraph g = load_graph(fixture("graphs/running_example.graph.json"));
    std::string dot = export_dot(g);
    EXPECT_EQ(export_dot(g), dot);
    EXPECT_NE(dot.find("digraph G {"), std::string::npos);
    EXPECT_NE(dot.find("\"p1\" [label=\"p1\\npreprocess\"]"), std::string::npos);
    EXPECT_NE(dot.find("\"p1:input1:in\" [shape=ellipse, label=\"input1\"]"), std::string::npos);
    EXPECT_EQ(dot.back(), '\n');
}

TEST(Dot, SummariesRenderAsNoteNodes) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    OutputSummaries summaries{{PortRef{"a", "out", PortDir::Out}, "attribute(x, str \"1\")"}};
    std::string dot = export_dot(g, &summaries);
    EXPECT_NE(dot.find("\"a:out:rules\" [shape=note"), std::string::npos);
    EXPECT_NE(dot.find("[style=dotted]"), std::string::npos);
    // Quotes inside rule text must be escaped for DOT.
    EXPECT_NE(dot.find("attribute(x, str \\\"1\\\")"), std::string::npos);
}

TEST(Dot, VirtualNodesAreDashed) {
    DataFlowGraph g = load_graph(kMinimalGraph);
    DataRuleSet rules;
    rules.add_attribute(Attribute{"src", "url", "somewhere", {}});
    DataFlowGraph with = inject_virtual_input(
        inject_virtual_process(g, "publish", {PortRef{"a", "out", PortDir::Out}}), "a", "mesh",
        rules);
    std::string dot = export_dot(with);
    EXPECT_NE(dot.find("\"virtual:publish\" [label=\"virtual:publish\\npublish\", style=dashed]"),
              std::string::npos);
    EXPECT_NE(dot.find("\"a:mesh:in\" [shape=ellipse, label=\"mesh\", style=dashed]"),
              std::string::npos);
}
