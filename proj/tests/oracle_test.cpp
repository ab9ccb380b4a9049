#include "ruleflow/situation_oracle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "random_graphs.hpp"
#include "ruleflow/flow_graph.hpp"
#include "ruleflow/reasoner.hpp"

using namespace ruleflow;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << p;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

DataFlowGraph load_fixture(const char* rel) {
    return load_graph(slurp(std::filesystem::path(RULEFLOW_FIXTURES_DIR) / rel));
}

void expect_equivalent(const DataFlowGraph& g, const ReasoningOverrides& overrides = {}) {
    std::string why;
    EXPECT_TRUE(testgen::results_equivalent(reason(g, overrides), oracle_reason(g, overrides), &why))
        << why;
}

}  // namespace

TEST(Oracle, AgreesOnTheFixtureWorkflows) {
    expect_equivalent(load_fixture("graphs/running_example.graph.json"));
    expect_equivalent(load_fixture("graphs/cyclone.graph.json"));
    expect_equivalent(load_fixture("graphs/mt3d_stage1.graph.json"));
    expect_equivalent(load_fixture("graphs/mt3d_stage2.graph.json"));
}

TEST(Oracle, AgreesOnRefinementEdgeCases) {
    // Chained edits, deletes that sever, wildcard lanes, ghost ports, and a
    // diamond fan-in all in one graph.
    DataFlowGraph g = load_graph(R"json({
      "purpose": "research",
      "processes": [
        {"id": "a", "action": "split", "inputs": ["in"], "outputs": ["l", "r"],
         "flowRules": "pr(in, [l, r])\nedit(in, l, pf, *, *, column, \"YroB\")\nedit(*, *, pf, column, \"YroB\", column, \"Decade\")\ndelete(in, r, ru, *, *)\npr(ghost, l)"},
        {"id": "b", "action": "merge", "inputs": ["x", "y"], "outputs": ["out"]}
      ],
      "connections": [
        {"fromProcess": "a", "fromPort": "l", "toProcess": "b", "toPort": "x"},
        {"fromProcess": "a", "fromPort": "r", "toProcess": "b", "toPort": "y"}
      ],
      "initialRules": [{"process": "a", "port": "in",
        "rules": "attribute(pf, column \"DoB\")\nattribute(ru, url \"r.example\")\nobligation(report ru, [pf], action = *)\nobligation(Prohibited pf, [], purpose = commercial)"}]
    })json");
    expect_equivalent(g);
    ReasoningOverrides commercial;
    commercial.purpose = "commercial";
    expect_equivalent(g, commercial);
}

TEST(Oracle, AgreesOnVirtualInjections) {
    DataFlowGraph g = load_fixture("graphs/cyclone.graph.json");
    DataFlowGraph with =
        inject_virtual_process(g, "publish", {PortRef{"merge", "tracks", PortDir::Out}});
    expect_equivalent(with);
}

TEST(Oracle, AgreesOnAThousandRandomWorkflows) {
    std::mt19937 rng(0xA11CE5);
    for (int round = 0; round < 1000; ++round) {
        DataFlowGraph g = testgen::random_graph(rng);
        std::string why;
        ReasoningResult engine = reason(g);
        ReasoningResult replay = oracle_reason(g);
        ASSERT_TRUE(testgen::results_equivalent(engine, replay, &why))
            << "round " << round << ": " << why << "\n"
            << save_graph(g);
    }
}
