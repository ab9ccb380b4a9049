#include "ruleflow/rule_model.hpp"

#include <gtest/gtest.h>

using namespace ruleflow;

namespace {

Attribute attr(std::string name, std::string type, std::string value) {
    return Attribute{std::move(name), std::move(type), std::move(value), {}};
}

Obligation oblig(std::string cls, std::vector<std::size_t> args, std::vector<std::size_t> validity,
                 Condition c) {
    return Obligation{std::move(cls), std::move(args), std::move(validity), std::move(c), {}};
}

}  // namespace

// ── condition evaluation ─────────────────────────────────────────────────────

TEST(Condition, LiteralComparisonAgainstPresentSlot) {
    EvaluationContext ctx;
    ctx.action = "publish";
    EXPECT_TRUE(eval_condition(Condition::compare(Slot::Action, CompareOp::Eq, "publish"), ctx));
    EXPECT_FALSE(eval_condition(Condition::compare(Slot::Action, CompareOp::Eq, "import"), ctx));
    EXPECT_TRUE(eval_condition(Condition::compare(Slot::Action, CompareOp::Neq, "import"), ctx));
    EXPECT_FALSE(eval_condition(Condition::compare(Slot::Action, CompareOp::Neq, "publish"), ctx));
}

TEST(Condition, MissingSlotFailsEqualityAndPassesInequality) {
    EvaluationContext ctx;  // nothing set
    EXPECT_FALSE(eval_condition(Condition::compare(Slot::User, CompareOp::Eq, "alice"), ctx));
    EXPECT_TRUE(eval_condition(Condition::compare(Slot::User, CompareOp::Neq, "alice"), ctx));
}

TEST(Condition, WildcardTestsSlotPresence) {
    EvaluationContext ctx;
    ctx.stage = "import";
    EXPECT_TRUE(eval_condition(Condition::compare_any(Slot::Stage, CompareOp::Eq), ctx));
    EXPECT_FALSE(eval_condition(Condition::compare_any(Slot::Stage, CompareOp::Neq), ctx));
    EXPECT_FALSE(eval_condition(Condition::compare_any(Slot::Purpose, CompareOp::Eq), ctx));
    EXPECT_TRUE(eval_condition(Condition::compare_any(Slot::Purpose, CompareOp::Neq), ctx));
}

TEST(Condition, NullNeverActivates) {
    EvaluationContext ctx;
    ctx.action = "publish";
    ctx.stage = "import";
    EXPECT_FALSE(eval_condition(Condition::null_condition(), ctx));
}

TEST(Condition, BooleanConnectives) {
    EvaluationContext ctx;
    ctx.action = "publish";
    ctx.purpose = "research";
    auto is_publish = Condition::compare(Slot::Action, CompareOp::Eq, "publish");
    auto is_import = Condition::compare(Slot::Stage, CompareOp::Eq, "import");
    auto is_research = Condition::compare(Slot::Purpose, CompareOp::Eq, "research");

    EXPECT_TRUE(eval_condition(Condition::conjunction({is_publish, is_research}), ctx));
    EXPECT_FALSE(eval_condition(Condition::conjunction({is_publish, is_import}), ctx));
    EXPECT_TRUE(eval_condition(Condition::disjunction({is_import, is_research}), ctx));
    EXPECT_FALSE(eval_condition(Condition::disjunction({is_import, is_import}), ctx));
    EXPECT_TRUE(eval_condition(Condition::negation(is_import), ctx));
    EXPECT_FALSE(eval_condition(Condition::negation(is_publish), ctx));
}

TEST(Condition, EverySlotIsAddressable) {
    EvaluationContext ctx;
    ctx.action = "a";
    ctx.stage = "s";
    ctx.purpose = "p";
    ctx.user = "u";
    ctx.start_time = "t";
    ctx.process_id = "id";
    for (Slot s : {Slot::Action, Slot::Stage, Slot::Purpose, Slot::User, Slot::StartTime,
                   Slot::ProcessId}) {
        EXPECT_TRUE(eval_condition(Condition::compare_any(s, CompareOp::Eq), ctx))
            << slot_name(s);
        EXPECT_TRUE(eval_condition(Condition::compare(s, CompareOp::Eq, *ctx.get(s)), ctx))
            << slot_name(s);
    }
}

TEST(Condition, ProcessIsAnAliasForAction) {
    EXPECT_EQ(slot_from_name("process"), Slot::Action);
    EXPECT_EQ(slot_from_name("action"), Slot::Action);
    EXPECT_EQ(slot_from_name("startTime"), Slot::StartTime);
    EXPECT_EQ(slot_from_name("bogus"), std::nullopt);
}

TEST(Condition, TextUsesMinimalParentheses) {
    auto a = Condition::compare(Slot::Action, CompareOp::Eq, "publish");
    auto b = Condition::compare(Slot::Stage, CompareOp::Eq, "import");
    auto c = Condition::compare(Slot::User, CompareOp::Neq, "alice");

    EXPECT_EQ(condition_to_text(Condition::conjunction({a, b})),
              "action = publish and stage = import");
    EXPECT_EQ(condition_to_text(Condition::conjunction({Condition::disjunction({a, b}), c})),
              "(action = publish or stage = import) and user != alice");
    EXPECT_EQ(condition_to_text(Condition::disjunction({Condition::conjunction({a, b}), c})),
              "action = publish and stage = import or user != alice");
    EXPECT_EQ(condition_to_text(Condition::negation(a)), "not action = publish");
    EXPECT_EQ(condition_to_text(Condition::negation(Condition::conjunction({a, b}))),
              "not (action = publish and stage = import)");
    EXPECT_EQ(condition_to_text(Condition::compare_any(Slot::Action, CompareOp::Eq)),
              "action = *");
    EXPECT_EQ(condition_to_text(Condition::null_condition()), "null");
}

TEST(Condition, TextQuotesNonIdentifierOperands) {
    auto cond = Condition::compare(Slot::User, CompareOp::Eq, "some user");
    EXPECT_EQ(condition_to_text(cond), "user = \"some user\"");
}

// ── attribute and set semantics ──────────────────────────────────────────────

TEST(DataRuleSet, AttributeIdentityIsTheFullTriple) {
    DataRuleSet set;
    std::size_t first = set.add_attribute(attr("pf", "column", "DoB"));
    std::size_t again = set.add_attribute(attr("pf", "column", "DoB"));
    std::size_t other = set.add_attribute(attr("pf", "column", "Name"));
    EXPECT_EQ(first, again);
    EXPECT_NE(first, other);
    EXPECT_EQ(set.attributes().size(), 2u);
}

TEST(DataRuleSet, DuplicateInsertConcatenatesHistory) {
    DataRuleSet set;
    Attribute a = attr("pf", "column", "DoB");
    a.history = {Hop{"p1", "input1"}};
    set.add_attribute(a);
    Attribute b = attr("pf", "column", "DoB");
    b.history = {Hop{"p2", "input1"}};
    set.add_attribute(b);
    ASSERT_EQ(set.attributes().size(), 1u);
    ASSERT_EQ(set.attributes()[0].history.size(), 2u);
    EXPECT_EQ(set.attributes()[0].history[1].process, "p2");
}

TEST(DataRuleSet, RejectsEmptyAndWildcardFields) {
    DataRuleSet set;
    EXPECT_THROW(set.add_attribute(attr("", "column", "DoB")), InvalidRule);
    EXPECT_THROW(set.add_attribute(attr("pf", "*", "DoB")), InvalidRule);
    EXPECT_THROW(set.add_attribute(attr("pf", "column", "")), InvalidRule);
}

TEST(DataRuleSet, ObligationReferencesMustBeInRange) {
    DataRuleSet set;
    set.add_attribute(attr("pf", "column", "DoB"));
    EXPECT_THROW(set.add_obligation(oblig("report", {5}, {}, Condition::null_condition())),
                 InvalidRule);
    EXPECT_THROW(set.add_obligation(oblig("report", {}, {5}, Condition::null_condition())),
                 InvalidRule);
    EXPECT_THROW(set.add_obligation(oblig("*", {}, {}, Condition::null_condition())), InvalidRule);
}

TEST(DataRuleSet, ObligationsDeduplicateStructurally) {
    DataRuleSet set;
    std::size_t pf = set.add_attribute(attr("pf", "column", "DoB"));
    std::size_t ru = set.add_attribute(attr("ru", "url", "report.example.ac"));
    auto cond = Condition::compare_any(Slot::Action, CompareOp::Eq);
    std::size_t first = set.add_obligation(oblig("report", {ru}, {pf}, cond));
    std::size_t again = set.add_obligation(oblig("report", {ru}, {pf}, cond));
    EXPECT_EQ(first, again);
    EXPECT_EQ(set.obligations().size(), 1u);

    // A different argument order is a different obligation (args are ordered).
    set.add_obligation(oblig("report", {ru, pf}, {}, cond));
    set.add_obligation(oblig("report", {pf, ru}, {}, cond));
    EXPECT_EQ(set.obligations().size(), 3u);
}

TEST(DataRuleSet, ValidityBindingIsAnUnorderedSet) {
    DataRuleSet set;
    std::size_t pf = set.add_attribute(attr("pf", "column", "DoB"));
    std::size_t ru = set.add_attribute(attr("ru", "url", "report.example.ac"));
    auto cond = Condition::compare_any(Slot::Action, CompareOp::Eq);
    std::size_t first = set.add_obligation(oblig("report", {}, {pf, ru}, cond));
    std::size_t again = set.add_obligation(oblig("report", {}, {ru, pf}, cond));
    EXPECT_EQ(first, again);

    // Duplicate references inside one binding collapse.
    std::size_t dup = set.add_obligation(oblig("report", {}, {pf, pf, ru}, cond));
    EXPECT_EQ(dup, first);
    EXPECT_EQ(set.obligations().size(), 1u);
    EXPECT_EQ(set.obligations()[0].validity.size(), 2u);
}

TEST(DataRuleSet, StructuralEqualityIgnoresOrderAndHistory) {
    DataRuleSet a;
    std::size_t pf_a = a.add_attribute(attr("pf", "column", "DoB"));
    a.add_attribute(attr("ru", "url", "r"));
    a.add_obligation(oblig("report", {}, {pf_a}, Condition::null_condition()));

    DataRuleSet b;
    b.add_attribute(attr("ru", "url", "r"));
    Attribute with_history = attr("pf", "column", "DoB");
    with_history.history = {Hop{"p9", "out"}};
    std::size_t pf_b = b.add_attribute(with_history);
    b.add_obligation(oblig("report", {}, {pf_b}, Condition::null_condition()));

    EXPECT_TRUE(a.structurally_equal(b));
    EXPECT_TRUE(b.structurally_equal(a));

    b.add_attribute(attr("extra", "str", "x"));
    EXPECT_FALSE(a.structurally_equal(b));
}

// ── statement resolution ─────────────────────────────────────────────────────

TEST(Resolution, ReferencesBindToTheNearestPrecedingDeclaration) {
    std::vector<RuleStatement> statements{
        AttributeDecl{"pf", "column", "DoB"},
        AttributeDecl{"pf", "column", "Name"},
        ObligationDecl{"report", {"pf"}, {}, Condition::null_condition()},
    };
    DataRuleSet set = resolve_rule_set(statements);
    ASSERT_EQ(set.obligations().size(), 1u);
    EXPECT_EQ(set.attributes()[set.obligations()[0].args[0]].value, "Name");
}

TEST(Resolution, ForwardReferencesBindToTheFollowingDeclaration) {
    std::vector<RuleStatement> statements{
        ObligationDecl{"Cite", {"src"}, {}, Condition::null_condition()},
        AttributeDecl{"src", "url", "somewhere"},
    };
    DataRuleSet set = resolve_rule_set(statements);
    ASSERT_EQ(set.obligations().size(), 1u);
    EXPECT_EQ(set.attributes()[set.obligations()[0].args[0]].value, "somewhere");
}

TEST(Resolution, UndeclaredReferenceThrows) {
    std::vector<RuleStatement> statements{
        ObligationDecl{"Cite", {"ghost"}, {}, Condition::null_condition()},
    };
    EXPECT_THROW(resolve_rule_set(statements), UnresolvedReference);
}

// ── merging ──────────────────────────────────────────────────────────────────

namespace {

DataRuleSet sample_set_a() {
    DataRuleSet s;
    std::size_t pf = s.add_attribute(attr("pf", "column", "DoB"));
    std::size_t ru = s.add_attribute(attr("ru", "url", "report.example.ac"));
    s.add_obligation(oblig("report", {ru}, {pf}, Condition::compare_any(Slot::Action, CompareOp::Eq)));
    return s;
}

DataRuleSet sample_set_b() {
    DataRuleSet s;
    std::size_t ack = s.add_attribute(attr("ack", "str", "thanks"));
    std::size_t pf = s.add_attribute(attr("pf", "column", "DoB"));
    s.add_obligation(
        oblig("Acknowledge", {ack}, {pf}, Condition::compare(Slot::Action, CompareOp::Eq, "publish")));
    return s;
}

}  // namespace

TEST(Merge, SharedAttributesCollapseAndReferencesAreRemapped) {
    DataRuleSet merged = merge_rule_sets(sample_set_a(), sample_set_b());
    EXPECT_EQ(merged.attributes().size(), 3u);  // pf shared
    ASSERT_EQ(merged.obligations().size(), 2u);
    const Obligation& ack = merged.obligations()[1];
    EXPECT_EQ(merged.attributes()[ack.args[0]].name, "ack");
    EXPECT_EQ(merged.attributes()[ack.validity[0]].name, "pf");
    EXPECT_EQ(merged.attributes()[ack.validity[0]].value, "DoB");
}

TEST(Merge, IdempotentCommutativeAssociative) {
    DataRuleSet a = sample_set_a(), b = sample_set_b();
    EXPECT_TRUE(merge_rule_sets(a, a).structurally_equal(a));
    EXPECT_TRUE(merge_rule_sets(a, b).structurally_equal(merge_rule_sets(b, a)));
    DataRuleSet c;
    c.add_attribute(attr("x", "str", "1"));
    EXPECT_TRUE(merge_rule_sets(merge_rule_sets(a, b), c)
                    .structurally_equal(merge_rule_sets(a, merge_rule_sets(b, c))));
}

TEST(Merge, EmptySetIsTheIdentity) {
    DataRuleSet a = sample_set_a();
    EXPECT_TRUE(merge_rule_sets(a, DataRuleSet{}).structurally_equal(a));
    EXPECT_TRUE(merge_rule_sets(DataRuleSet{}, a).structurally_equal(a));
}
