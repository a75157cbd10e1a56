// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "agentlab/error.hpp"
#include "agentlab/rag.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace agentlab::rag;
using agentlab::testing::TempDir;
using agentlab::testing::write_text;

namespace {

Chunk chunk_of(std::string text, std::string doc = "d") {
    Chunk c;
    c.doc_id = std::move(doc);
    c.span = {0, text.size()};
    c.text = std::move(text);
    return c;
}

}  // namespace

TEST(LoadPath, TextFilePassthrough) {
    TempDir dir;
    write_text(dir / "a.txt", "hello");
    auto r = load_path(dir / "a.txt");
    ASSERT_EQ(r.documents.size(), 1u);
    EXPECT_EQ(r.documents[0].content, "hello");
    EXPECT_TRUE(r.warnings.empty());
}

TEST(LoadPath, CsvRowPerDocument) {
    TempDir dir;
    write_text(dir / "p.csv", "name,type\nBulbasaur,grass\nCharmander,fire\n");
    auto r = load_path(dir / "p.csv");
    ASSERT_EQ(r.documents.size(), 2u);
    EXPECT_EQ(r.documents[0].content, "name: Bulbasaur; type: grass");
    EXPECT_EQ(r.documents[1].content, "name: Charmander; type: fire");
}

TEST(LoadPath, CsvQuotedFields) {
    auto docs = parse_csv_documents("a,b\n\"x, y\",\"say \"\"hi\"\"\"\n", "q.csv");
    ASSERT_EQ(docs.size(), 1u);
    EXPECT_EQ(docs[0].content, "a: x, y; b: say \"hi\"");
}

TEST(LoadPath, EmptyDirectory) {
    TempDir dir;
    EXPECT_TRUE(load_path(dir.path()).documents.empty());
}

TEST(LoadPath, DirectoryIsRecursiveAndSortedWithWarnings) {
    TempDir dir;
    write_text(dir / "b.md", "bee");
    write_text(dir / "sub/a.txt", "ay");
    write_text(dir / "a.txt", "first");
    write_text(dir / "x.pdf", "%PDF");
    auto r = load_path(dir.path());
    ASSERT_EQ(r.documents.size(), 3u);
    EXPECT_EQ(r.documents[0].content, "first");
    EXPECT_EQ(r.documents[1].content, "bee");
    EXPECT_EQ(r.documents[2].content, "ay");
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("x.pdf"), std::string::npos);
}

TEST(LoadPath, MissingPathIsIoError) {
    EXPECT_THROW(load_path("/nonexistent/agentlab/file.txt"), IoError);
}

TEST(LoadUrl, FixtureEcho) {
    FixtureMap fx{{"http://x.test/a", "<p>Hi</p>"}};
    auto d = load_url("http://x.test/a", &fx);
    EXPECT_EQ(d.content, "<p>Hi</p>");
    EXPECT_EQ(d.source, "http://x.test/a");
}

TEST(LoadUrl, MissingFixtureNamesUrl) {
    FixtureMap fx;
    try {
        load_url("http://x.test/missing", &fx);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("http://x.test/missing"), std::string::npos);
    }
}

TEST(StripHtml, Examples) {
    EXPECT_EQ(strip_html("<p>Hi <b>there</b></p>"), "Hi there");
    EXPECT_EQ(strip_html("<script>x=1</script>Hello"), "Hello");
    EXPECT_EQ(strip_html("a &amp; b"), "a & b");
    EXPECT_EQ(strip_html("&lt;tag&gt; &quot;q&quot; &apos;s&apos;"), "<tag> \"q\" 's'");
    EXPECT_EQ(strip_html("<style>p{}</style><!-- c --><div>x</div><div>y</div>"), "x y");
}

TEST(StripHtml, NoTagBracketsSurvive) {
    std::mt19937 rng(5);
    std::vector<std::string> parts = {"<p>", "</p>", "<b class='x'>", "text", " ", "<br/>", "more",
                                      "<script>if(a<b){}</script>", "<i>", "</i>"};
    for (int n = 0; n < 500; ++n) {
        std::string html;
        for (int k = 0; k < 12; ++k) html += parts[rng() % parts.size()];
        auto out = strip_html(html);
        EXPECT_EQ(out.find('<'), std::string::npos) << html;
        EXPECT_EQ(out.find('>'), std::string::npos) << html;
    }
}

TEST(ChunkFixed, Alphabet) {
    std::string abc = "abcdefghijklmnopqrstuvwxyz";
    auto chunks = chunk_fixed(abc, 10, 2);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].span, (Span{0, 10}));
    EXPECT_EQ(chunks[1].span, (Span{8, 18}));
    EXPECT_EQ(chunks[2].span, (Span{16, 26}));
    EXPECT_EQ(chunks[2].text, "qrstuvwxyz");
    EXPECT_EQ(chunks[1].seq, 1u);
}

TEST(ChunkFixed, ShortAndEmpty) {
    auto one = chunk_fixed("short", 10, 0);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].text, "short");
    EXPECT_TRUE(chunk_fixed("", 10, 2).empty());
}

TEST(ChunkFixed, OverlapMustBeSmallerThanSize) {
    EXPECT_THROW(chunk_fixed("abc", 4, 4), ValidationError);
    EXPECT_THROW(chunk_fixed("abc", 0, 0), ValidationError);
}

TEST(ChunkFixed, ReconstructionProperty) {
    std::mt19937 rng(1234);
    for (int n = 0; n < 1000; ++n) {
        auto text = agentlab::testing::random_string(rng, 300, "abcdef \n.");
        std::size_t size = 1 + rng() % 40;
        std::size_t overlap = rng() % size;
        auto chunks = chunk_fixed(text, size, overlap);
        if (text.empty()) {
            ASSERT_TRUE(chunks.empty());
            continue;
        }
        std::string rebuilt = chunks[0].text;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            ASSERT_LE(chunks[i].text.size(), size);
            ASSERT_EQ(chunks[i].text, text.substr(chunks[i].span.start, chunks[i].span.end - chunks[i].span.start));
            if (i > 0) {
                ASSERT_EQ(chunks[i - 1].span.end - chunks[i].span.start, overlap);
                rebuilt += chunks[i].text.substr(overlap);
            }
        }
        ASSERT_EQ(rebuilt, text) << "size=" << size << " overlap=" << overlap;
        ASSERT_EQ(chunks.back().span.end, text.size());
    }
}

TEST(ChunkParagraphs, Packing) {
    std::string p10a(10, 'a'), p10b(10, 'b');
    auto packed = chunk_paragraphs(p10a + "\n\n" + p10b, 25);
    ASSERT_EQ(packed.size(), 1u);
    EXPECT_EQ(packed[0].text, p10a + "\n" + p10b);

    std::string p20a(20, 'a'), p20b(20, 'b');
    EXPECT_EQ(chunk_paragraphs(p20a + "\n\n" + p20b, 25).size(), 2u);

    auto fallback = chunk_paragraphs(std::string(30, 'z'), 10);
    ASSERT_EQ(fallback.size(), 3u);
    for (const auto& c : fallback) EXPECT_EQ(c.text, std::string(10, 'z'));
}

TEST(Embedding, FnvKnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
    EXPECT_EQ(fnv1a64("alpha"), 0x8ac625bb85ed202bull);
    EXPECT_EQ(fnv1a64("beta"), 0x7627619b954620a7ull);
}

TEST(Embedding, AlphaBetaFrozenComponents) {
    // alpha -> 43 (bit 63 set, -1); beta -> 167 (+1); both scaled by 1/sqrt(2).
    auto v = embed_hash("alpha beta", 256);
    ASSERT_EQ(v.values.size(), 256u);
    const double s = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < 256; ++i) {
        double want = i == 43 ? -s : (i == 167 ? s : 0.0);
        EXPECT_NEAR(v.values[i], want, 1e-12) << i;
    }
}

TEST(Embedding, MatchesOracleOnRandomText) {
    std::mt19937 rng(99);
    for (int n = 0; n < 300; ++n) {
        auto text = agentlab::testing::random_string(rng, 80, "abcXYZ019 -_!");
        std::size_t dim = 8 + rng() % 300;
        auto got = embed_hash(text, dim);
        auto want = oracle::embed(text, dim);
        ASSERT_EQ(got.values.size(), dim);
        for (std::size_t i = 0; i < dim; ++i) ASSERT_NEAR(got.values[i], want[i], 1e-12);
        if (!got.is_zero()) {
            ASSERT_NEAR(got.norm(), 1.0, 1e-9);
        }
    }
}

TEST(Embedding, EmptyAndOrderInvariance) {
    auto z = embed_hash("");
    EXPECT_TRUE(z.is_zero());
    EXPECT_EQ(z.norm(), 0.0);
    EXPECT_NEAR(cosine(embed_hash("alpha beta"), embed_hash("beta ALPHA")), 1.0, 1e-9);
    EXPECT_EQ(cosine(z, embed_hash("alpha")), 0.0);
    EXPECT_THROW(embed_hash("x", 4), ValidationError);
}

TEST(VectorStore, IdsAreMonotone) {
    VectorStore s;
    EXPECT_EQ(s.add({chunk_of("a"), chunk_of("b"), chunk_of("c")}),
              (std::vector<std::uint64_t>{0, 1, 2}));
    VectorStore t;
    t.add({chunk_of("a"), chunk_of("b")});
    EXPECT_EQ(t.add({chunk_of("c"), chunk_of("d")}), (std::vector<std::uint64_t>{2, 3}));
}

TEST(VectorStore, ZeroVectorNeverOutranksMatches) {
    VectorStore s;
    s.add({chunk_of("!!!"), chunk_of("firewall rules")});
    ASSERT_TRUE(s.get(0).has_value());
    EXPECT_TRUE(s.get(0)->vector.is_zero());
    auto hits = s.query("firewall", 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].record.record_id, 1u);
    EXPECT_GT(hits[0].score, 0.0);
    EXPECT_EQ(hits[1].score, 0.0);
}

TEST(VectorStore, FirewallBeatsPasta) {
    VectorStore s;
    s.add({chunk_of("cooking pasta recipe"), chunk_of("firewall iptables rules")});
    auto hits = s.query("iptables firewall", 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].record.chunk.text, "firewall iptables rules");
    EXPECT_EQ(oracle::cosine(oracle::embed("cooking pasta recipe", 256),
                            oracle::embed("iptables firewall", 256)),
              0.0);
}

TEST(VectorStore, EmptyAndOversizedK) {
    VectorStore s;
    EXPECT_TRUE(s.query("x", 3).empty());
    s.add({chunk_of("b a"), chunk_of("a"), chunk_of("c")});
    auto hits = s.query("a", 10);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_GE(hits[0].score, hits[1].score);
    EXPECT_GE(hits[1].score, hits[2].score);
}

TEST(VectorStore, QueryMatchesBruteForceOracle) {
    std::mt19937 rng(2024);
    std::vector<std::string> vocab = {"nmap", "scan", "port", "firewall", "iptables", "drop",
                                      "ssh", "key", "hash", "salt", "xss", "script", "sql",
                                      "inject", "token", "cookie", "dns", "whois"};
    for (int round = 0; round < 5; ++round) {
        VectorStore s;
        std::vector<std::string> texts;
        std::vector<Chunk> chunks;
        for (int d = 0; d < 100; ++d) {
            std::string t;
            int words = static_cast<int>(rng() % 5);  // sometimes empty
            for (int w = 0; w < words; ++w) t += vocab[rng() % vocab.size()] + " ";
            texts.push_back(t);
            chunks.push_back(chunk_of(t));
        }
        s.add(chunks);
        for (int q = 0; q < 20; ++q) {
            std::string query = vocab[rng() % vocab.size()] + " " + vocab[rng() % vocab.size()];
            auto qv = oracle::embed(query, 256);
            std::vector<std::pair<double, std::uint64_t>> scored;
            for (std::size_t i = 0; i < texts.size(); ++i) {
                scored.push_back({oracle::cosine(oracle::embed(texts[i], 256), qv), i});
            }
            std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                if (std::abs(a.first - b.first) > 1e-12) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t k : {1u, 5u}) {
                auto hits = s.query(query, k);
                ASSERT_EQ(hits.size(), k);
                for (std::size_t i = 0; i < k; ++i) {
                    EXPECT_EQ(hits[i].record.record_id, scored[i].second) << query << " k=" << k;
                    EXPECT_NEAR(hits[i].score, scored[i].first, 1e-12);
                }
            }
        }
    }
}

TEST(VectorStore, SaveLoadRoundTripIsByteIdentical) {
    TempDir dir;
    VectorStore s;
    std::vector<Chunk> chunks;
    for (int i = 0; i < 10; ++i) chunks.push_back(chunk_of("record number " + std::to_string(i) + " text"));
    s.add(chunks);
    auto bytes = s.save(dir / "s.jsonl");
    EXPECT_GT(bytes, 0u);
    auto loaded = VectorStore::load(dir / "s.jsonl");
    EXPECT_TRUE(loaded == s);
    EXPECT_EQ(loaded.records(), s.records());
    loaded.save(dir / "t.jsonl");
    s.save(dir / "u.jsonl");
    EXPECT_EQ(agentlab::testing::read_text(dir / "s.jsonl"), agentlab::testing::read_text(dir / "t.jsonl"));
    EXPECT_EQ(agentlab::testing::read_text(dir / "s.jsonl"), agentlab::testing::read_text(dir / "u.jsonl"));
    // ids continue after load
    EXPECT_EQ(loaded.add({chunk_of("next")}), (std::vector<std::uint64_t>{10}));
}

TEST(VectorStore, TruncatedFileNamesLine) {
    VectorStore s;
    s.add({chunk_of("one"), chunk_of("two"), chunk_of("three")});
    auto data = s.serialize();
    auto second_line = data.find('\n') + 1;
    auto truncated = data.substr(0, second_line + 20);
    try {
        VectorStore::parse(truncated);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(RagAnswer, ScriptedEchoAndCitations) {
    VectorStore s;
    s.add({chunk_of("Charmander is a fire type."), chunk_of("Bulbasaur is a grass type."),
           chunk_of("Squirtle is a water type.")});
    auto m = agentlab::testing::scripted(
        "r", {agentlab::testing::rule(model::MatchKind::substring, model::MatchTarget::full_prompt,
                                      "Bulbasaur", "Bulbasaur is a grass type.")});
    auto a = rag_answer("What type is Bulbasaur?", s, m, 1, {});
    EXPECT_EQ(a.answer, "Bulbasaur is a grass type.");
    EXPECT_EQ(a.citations, std::vector<std::uint64_t>{1});
    EXPECT_GT(a.usage.prompt_tokens, 0);

    auto two = rag_answer("What type is Bulbasaur?", s, m, 2, {});
    ASSERT_EQ(two.citations.size(), 2u);
    auto hits = s.query("What type is Bulbasaur?", 2);
    EXPECT_EQ(two.citations[0], hits[0].record.record_id);
    EXPECT_EQ(two.citations[1], hits[1].record.record_id);
}

TEST(RagAnswer, ContextJoinedWithSeparator) {
    VectorStore s;
    s.add({chunk_of("alpha one"), chunk_of("alpha two")});
    auto m = agentlab::testing::scripted(
        "r", {agentlab::testing::rule(model::MatchKind::substring, model::MatchTarget::full_prompt,
                                      "\n---\n", "separated")});
    EXPECT_EQ(rag_answer("alpha", s, m, 2, {}).answer, "separated");
}

TEST(RagAnswer, EmptyStoreIsValidationError) {
    VectorStore s;
    EXPECT_THROW(rag_answer("q", s, agentlab::testing::scripted("r"), 1, {}), ValidationError);
}
