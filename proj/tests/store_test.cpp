#include "ruleflow/obligation_store.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace ruleflow;

namespace {

class StoreTest : public ::testing::Test {
protected:
    void SetUp() override {
        path_ = (std::filesystem::temp_directory_path() /
                 ("store_test_" + std::to_string(::getpid()) + "_" +
                  ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".jsonl"))
                    .string();
        std::filesystem::remove(path_);
    }

    void TearDown() override { std::filesystem::remove(path_); }

    std::string path_;
};

ActivatedObligation activation(const std::string& process, const std::string& action,
                               bool violation = false) {
    ActivatedObligation rec;
    rec.process = process;
    rec.action_class = action;
    rec.args = {Attribute{"ru", "url", "report.example.ac", {}}};
    rec.validity = {Attribute{"pf", "column", "DoB", {}}};
    rec.context = "import";
    rec.violation = violation;
    return rec;
}

}  // namespace

TEST_F(StoreTest, RecordAndLoadRoundTrip) {
    record_activations(path_, "wf.json", {activation("p1", "report")}, "2026-08-16T00:00:00Z");
    std::vector<StoreRecord> records = load_store(path_);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].graph, "wf.json");
    EXPECT_EQ(records[0].process, "p1");
    EXPECT_EQ(records[0].action, "report");
    EXPECT_EQ(records[0].args, std::vector<std::string>{"ru(url \"report.example.ac\")"});
    EXPECT_EQ(records[0].validity, std::vector<std::string>{"pf(column \"DoB\")"});
    EXPECT_EQ(records[0].stage, "import");
    EXPECT_FALSE(records[0].violation);
    EXPECT_EQ(records[0].recorded_at, "2026-08-16T00:00:00Z");
}

TEST_F(StoreTest, AppendsPreserveExistingRecordsAndOrder) {
    record_activations(path_, "run1", {activation("p1", "report")}, "t1");
    record_activations(path_, "run2", {activation("p2", "Cite"), activation("p3", "Acknowledge")},
                       "t2");
    std::vector<StoreRecord> records = load_store(path_);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_EQ(records[0].graph, "run1");
    EXPECT_EQ(records[1].process, "p2");
    EXPECT_EQ(records[2].process, "p3");
    EXPECT_EQ(records[2].recorded_at, "t2");
}

TEST_F(StoreTest, EmptyActivationListTouchesNothing) {
    record_activations(path_, "run", {}, "t");
    EXPECT_FALSE(std::filesystem::exists(path_));
}

TEST_F(StoreTest, StoreIsOneJsonObjectPerLine) {
    record_activations(path_, "run", {activation("p1", "report"), activation("p2", "Cite")}, "t");
    std::ifstream in(path_);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        EXPECT_NO_THROW(nlohmann::json::parse(line)) << line;
    }
    EXPECT_EQ(lines, 2);
}

TEST_F(StoreTest, MissingStoreFailsWithIoError) {
    EXPECT_THROW(load_store(path_), IoError);
}

TEST_F(StoreTest, CorruptLinesFailWithPosition) {
    record_activations(path_, "run", {activation("p1", "report")}, "t");
    {
        std::ofstream out(path_, std::ios::app);
        out << "this is not json\n";
    }
    try {
        load_store(path_);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST_F(StoreTest, ViolationsFilter) {
    record_activations(path_, "run",
                       {activation("p1", "report"), activation("p2", "Prohibited", true),
                        activation("p3", "Cite")},
                       "t");
    std::vector<StoreRecord> only =
        list_records(load_store(path_), StoreFilter{.violations_only = true, .dedup = false});
    ASSERT_EQ(only.size(), 1u);
    EXPECT_EQ(only[0].action, "Prohibited");
    EXPECT_TRUE(only[0].violation);
}

TEST_F(StoreTest, DedupCollapsesTheSameLogicalObligation) {
    // The same obligation triggered by different processes in different runs
    // is one logical duty.
    record_activations(path_, "run1", {activation("p1", "report")}, "t1");
    record_activations(path_, "run2", {activation("p2", "report")}, "t2");
    record_activations(path_, "run3", {activation("p3", "Cite")}, "t3");
    std::vector<StoreRecord> all = load_store(path_);
    ASSERT_EQ(all.size(), 3u);
    std::vector<StoreRecord> deduped =
        list_records(all, StoreFilter{.violations_only = false, .dedup = true});
    ASSERT_EQ(deduped.size(), 2u);
    EXPECT_EQ(deduped[0].process, "p1");  // first record of the duty survives
    EXPECT_EQ(deduped[1].action, "Cite");
}

TEST_F(StoreTest, LogicalKeyIgnoresValidityOrderButNotContent) {
    StoreRecord a;
    a.action = "report";
    a.validity = {"x(str \"1\")", "y(str \"2\")"};
    StoreRecord b = a;
    b.validity = {"y(str \"2\")", "x(str \"1\")"};
    EXPECT_EQ(a.logical_key(), b.logical_key());
    b.validity = {"x(str \"1\")"};
    EXPECT_NE(a.logical_key(), b.logical_key());
    b = a;
    b.stage = "publish";
    EXPECT_NE(a.logical_key(), b.logical_key());
}
