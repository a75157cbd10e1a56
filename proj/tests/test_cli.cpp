// SPDX-License-Identifier: Apache-2.0
// Drives the built CLI as a subprocess. Only scripted models are used.
#include <gtest/gtest.h>

#include "agentlab/bench.hpp"
#include "support.hpp"

using agentlab::testing::read_text;
using agentlab::testing::TempDir;
using agentlab::testing::write_text;
using nlohmann::json;

namespace {

const std::string kSource = AGENTLAB_SOURCE_DIR;
const std::string kConfig = kSource + "/data/config.json";

class Cli : public ::testing::Test {
protected:
    agentlab::testing::ProcessResult run(const std::vector<std::string>& args,
                                         const std::string& stdin_text = "") {
        std::vector<std::string> argv = {AGENTLAB_CLI_PATH, "--config", kConfig};
        argv.insert(argv.end(), args.begin(), args.end());
        return agentlab::testing::run_process(argv, stdin_text, dir_.path());
    }

    TempDir dir_;
};

}  // namespace

TEST_F(Cli, LabListAndRun) {
    auto list = run({"lab", "list"});
    EXPECT_EQ(list.code, 0);
    EXPECT_NE(list.out.find("rag-poisoning-cmd-injection"), std::string::npos);

    auto r = run({"lab", "run", "sql-injection"});
    EXPECT_EQ(r.code, 0) << r.err;

    auto j = run({"lab", "run", "output-xss", "--format", "json"});
    EXPECT_EQ(j.code, 0);
    auto doc = json::parse(j.out);
    EXPECT_EQ(doc["vulnerable"]["compromised"], true);
    EXPECT_EQ(doc["hardened"]["compromised"], false);

    auto single = run({"lab", "run", "prompt-leak", "--variant", "vulnerable", "--format", "json"});
    EXPECT_EQ(single.code, 0);
    EXPECT_EQ(json::parse(single.out)["compromised"], true);
}

TEST_F(Cli, LabFailuresAndUsageErrors) {
    auto unknown = run({"lab", "run", "nope"});
    EXPECT_EQ(unknown.code, 2);
    EXPECT_NE(unknown.err.find("sql-excessive-agency"), std::string::npos);

    // a model that ignores the attack cannot show the asymmetry
    EXPECT_EQ(run({"lab", "run", "prompt-leak", "--model", "chat-basic"}).code, 1);
    EXPECT_EQ(run({"lab", "run", "prompt-leak", "--variant", "sideways"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(Cli, BenchRunWritesReport) {
    auto out = dir_ / "report.json";
    auto r = run({"bench", "run", kSource + "/data/suites/deobfuscation.json", "--models",
                  "deobf-oracle,deobf-hex-only", "--out", out.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("deobf-oracle: 9/9 passed"), std::string::npos);
    EXPECT_NE(r.out.find("deobf-hex-only: 3/9 passed"), std::string::npos);
    auto doc = json::parse(read_text(out));
    EXPECT_EQ(doc["rows"].size(), 18u);

    auto md = run({"bench", "run", kSource + "/data/suites/commands.json", "--models", "cmd-oracle",
                   "--report", "markdown"});
    EXPECT_EQ(md.code, 0);
    EXPECT_NE(md.out.find("## Benchmark commands"), std::string::npos);
}

TEST_F(Cli, BenchErrors) {
    write_text(dir_ / "bad.json", "{\n  \"id\": \"x\",\n  \"cases\": [,]\n}\n");
    auto bad = run({"bench", "run", (dir_ / "bad.json").string(), "--models", "cmd-oracle"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
    EXPECT_EQ(run({"bench", "run", "/nonexistent.json", "--models", "cmd-oracle"}).code, 2);
    EXPECT_EQ(run({"bench", "run", kSource + "/data/suites/commands.json", "--models", "nope"}).code, 2);
}

TEST_F(Cli, RagIngestQueryAnswer) {
    write_text(dir_ / "docs/fw.txt", "The firewall blocks inbound port 22 from untrusted networks.");
    write_text(dir_ / "docs/food.txt", "Pasta should be cooked in salted boiling water.");
    auto store = (dir_ / "store.jsonl").string();
    auto ingest = run({"rag", "ingest", (dir_ / "docs").string(), "--store", store});
    EXPECT_EQ(ingest.code, 0) << ingest.err;

    auto q = run({"rag", "query", "firewall port", "--store", store, "-k", "1", "--format", "json"});
    EXPECT_EQ(q.code, 0) << q.err;
    EXPECT_NE(q.out.find("fw.txt"), std::string::npos);
    EXPECT_EQ(q.out.find("food.txt"), std::string::npos);

    auto a = run({"rag", "answer", "firewall port", "--store", store, "--model", "rag-echo", "-k", "1"});
    EXPECT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("firewall"), std::string::npos);

    EXPECT_EQ(run({"rag", "query", "x", "--store", (dir_ / "missing.jsonl").string()}).code, 2);
}

TEST_F(Cli, RagIngestUrlFromFixtures) {
    write_text(dir_ / "fx.json", R"({"https://docs.example/fw": "<h1>Firewall</h1><p>drop tcp 22</p>"})");
    auto store = (dir_ / "s.jsonl").string();
    auto r = run({"rag", "ingest", "https://docs.example/fw", "--store", store, "--fixtures",
                  (dir_ / "fx.json").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    auto text = read_text(store);
    EXPECT_NE(text.find("drop tcp 22"), std::string::npos);
    EXPECT_EQ(text.find("<p>"), std::string::npos);
}

TEST_F(Cli, ChatPlainAndAgent) {
    auto plain = run({"chat", "--model", "chat-basic"}, "2+2\n");
    EXPECT_EQ(plain.code, 0) << plain.err;
    EXPECT_NE(plain.out.find("4"), std::string::npos);

    auto trace = dir_ / "trace.json";
    auto agent = run({"chat", "--model", "react-calc", "--agent", "--tools", "calculator", "--trace",
                      trace.string()},
                     "compute 2*(3+4)\n");
    EXPECT_EQ(agent.code, 0) << agent.err;
    EXPECT_NE(agent.out.find("14"), std::string::npos);

    auto show = run({"trace", "show", trace.string()});
    EXPECT_EQ(show.code, 0) << show.err;
    EXPECT_NE(show.out.find("calculator"), std::string::npos);

    EXPECT_EQ(run({"chat", "--model", "react-calc", "--agent", "--tools", "bogus"}).code, 2);
    EXPECT_EQ(run({"trace", "show", (dir_ / "nope.json").string()}).code, 2);
}

TEST_F(Cli, ModelsListAndLab) {
    auto list = run({"models", "list", "--format", "json"});
    EXPECT_EQ(list.code, 0);
    auto doc = json::parse(list.out);
    ASSERT_TRUE(doc.is_array());
    EXPECT_GE(doc.size(), 2u);
    EXPECT_EQ(list.out.find("sk-"), std::string::npos);

    write_text(dir_ / "p.json", R"({"instruction": "Answer briefly.", "input_data": "hello there"})");
    auto lab = run({"models", "lab", "--prompt-file", (dir_ / "p.json").string(), "--models",
                    "rag-echo,chat-basic"});
    EXPECT_EQ(lab.code, 0) << lab.err;
    EXPECT_LT(lab.out.find("chat-basic"), lab.out.find("rag-echo"));

    write_text(dir_ / "empty.json", R"({"input_data": "x"})");
    EXPECT_EQ(run({"models", "lab", "--prompt-file", (dir_ / "empty.json").string(), "--models",
                   "chat-basic"}).code,
              2);
}
