// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agentlab/agent.hpp"
#include "agentlab/bench.hpp"
#include "agentlab/error.hpp"
#include "agentlab/model.hpp"
#include "agentlab/rag.hpp"
#include "agentlab/seclab.hpp"
#include "agentlab/text.hpp"
#include "agentlab/tools.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agentlab;

namespace {

constexpr int kOk = 0;
constexpr int kAssertionFailed = 1;
constexpr int kUsageError = 2;

// Raised inside subcommands to leave with a specific exit code.
struct Exit {
    int code;
    std::string message;
};

struct Globals {
    std::string config_path;
    std::string model_override;
    std::string format = "text";
    int verbosity = 0;

    bool json_output() const { return format == "json"; }
};

std::optional<fs::path> user_config_path() {
    if (const char* xdg = std::getenv("XDG_CONFIG_HOME"); xdg && *xdg) {
        return fs::path(xdg) / "agentlab" / "config.json";
    }
    if (const char* home = std::getenv("HOME"); home && *home) {
        return fs::path(home) / ".config" / "agentlab" / "config.json";
    }
    return std::nullopt;
}

// --config beats ./config.json beats the per-user path.
std::optional<fs::path> discover_config(const Globals& g) {
    if (!g.config_path.empty()) return fs::path(g.config_path);
    if (fs::exists("config.json")) return fs::path("config.json");
    if (auto p = user_config_path(); p && fs::exists(*p)) return p;
    return std::nullopt;
}

model::Config require_config(const Globals& g) {
    auto path = discover_config(g);
    if (!path) {
        throw Exit{kUsageError, "no config found: pass --config or create ./config.json"};
    }
    try {
        return model::load_config(*path);
    } catch (const Error& e) {
        throw Exit{kUsageError, e.what()};
    }
}

const model::ModelSpec& require_model(const model::Config& cfg, const std::string& id) {
    if (id.empty()) throw Exit{kUsageError, "no model selected: pass --model"};
    const auto* m = cfg.find(id);
    if (!m) {
        std::string known;
        for (const auto& spec : cfg.models) known += "\n  " + spec.id;
        throw Exit{kUsageError, "unknown model '" + id + "'; configured models:" + known};
    }
    return *m;
}

std::vector<model::ModelSpec> require_models(const model::Config& cfg, const std::string& csv) {
    std::vector<model::ModelSpec> out;
    std::stringstream ss(csv);
    std::string id;
    while (std::getline(ss, id, ',')) {
        id = std::string(text::trim(id));
        if (!id.empty()) out.push_back(require_model(cfg, id));
    }
    if (out.empty()) throw Exit{kUsageError, "--models needs at least one model id"};
    return out;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Exit{kUsageError, "cannot read " + path.string()};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Exit{kUsageError, "cannot write " + path.string()};
    out << data;
}

// --- lab -------------------------------------------------------------------

void print_lab_report(const seclab::LabReport& r, bool expected) {
    std::cout << r.exercise_id << " [" << seclab::to_string(r.variant) << "] "
              << (r.compromised ? "COMPROMISED" : "clean") << (expected ? "" : " (unexpected)")
              << "\n";
    if (!r.evidence.empty()) std::cout << "  evidence: " << r.evidence << "\n";
    std::cout << "  outcome: " << agent::to_string(r.trace.outcome.kind);
    if (!r.trace.outcome.text.empty()) std::cout << ": " << r.trace.outcome.text;
    std::cout << "\n";
}

int cmd_lab_list(const Globals& g) {
    auto exercises = seclab::builtin_exercises();
    if (g.json_output()) {
        json arr = json::array();
        for (const auto& ex : exercises) {
            arr.push_back({{"id", ex.id}, {"description", ex.description}});
        }
        print_json(arr);
        return kOk;
    }
    for (const auto& ex : exercises) std::cout << ex.id << "\n";
    return kOk;
}

int cmd_lab_run(const Globals& g, const std::string& id, const std::string& variant) {
    auto ex = seclab::find_exercise(id);
    if (!ex) {
        std::string msg = "unknown exercise '" + id + "'; known exercises:";
        for (const auto& known : seclab::exercise_ids()) msg += "\n  " + known;
        throw Exit{kUsageError, msg};
    }
    std::optional<model::ModelSpec> override_model;
    if (!g.model_override.empty()) {
        auto cfg = require_config(g);
        override_model = require_model(cfg, g.model_override);
    }
    const model::ModelSpec* mo = override_model ? &*override_model : nullptr;

    if (variant == "both") {
        auto result = seclab::assert_asymmetry(*ex, mo);
        if (g.json_output()) {
            print_json({{"exercise_id", ex->id},
                        {"pass", result.pass},
                        {"details", result.details},
                        {"vulnerable", seclab::to_json(result.vulnerable)},
                        {"hardened", seclab::to_json(result.hardened)}});
        } else {
            print_lab_report(result.vulnerable, result.vulnerable.compromised);
            print_lab_report(result.hardened, !result.hardened.compromised);
            std::cout << "asymmetry: " << (result.pass ? "PASS" : "FAIL") << " (" << result.details
                      << ")\n";
        }
        return result.pass ? kOk : kAssertionFailed;
    }

    auto v = seclab::variant_from_string(variant);
    if (!v) throw Exit{kUsageError, "--variant must be vulnerable, hardened, or both"};
    auto report = seclab::run_exercise(*ex, *v, mo);
    bool expected = (*v == seclab::Variant::vulnerable) == report.compromised;
    if (g.json_output()) {
        print_json(seclab::to_json(report));
    } else {
        print_lab_report(report, expected);
    }
    return expected ? kOk : kAssertionFailed;
}

// --- bench -----------------------------------------------------------------

int cmd_bench_run(const Globals& g, const std::string& suite_path, const std::string& models_csv,
                  const std::string& out_path, const std::string& report_format) {
    bench::Suite suite;
    try {
        suite = bench::load_suite(suite_path);
    } catch (const ParseError& e) {
        throw Exit{kUsageError, suite_path + ": malformed suite JSON at " + e.what()};
    } catch (const Error& e) {
        throw Exit{kUsageError, suite_path + ": " + e.what()};
    }
    auto cfg = require_config(g);
    auto models = require_models(cfg, models_csv);
    auto report = bench::run_suite(suite, models, cfg.defaults);

    if (!out_path.empty()) {
        write_file(out_path, bench::render_report(report, bench::ReportFormat::json));
    }
    bench::ReportFormat fmt = bench::ReportFormat::text;
    if (g.json_output() || report_format == "json") {
        fmt = bench::ReportFormat::json;
    } else if (report_format == "markdown") {
        fmt = bench::ReportFormat::markdown;
    }
    std::cout << bench::render_report(report, fmt);
    return kOk;
}

// --- rag -------------------------------------------------------------------

rag::VectorStore require_store(const std::string& path) {
    if (!fs::exists(path)) throw Exit{kUsageError, "store not found: " + path};
    try {
        return rag::VectorStore::load(path);
    } catch (const Error& e) {
        throw Exit{kUsageError, path + ": " + e.what()};
    }
}

bool is_url(const std::string& s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

int cmd_rag_ingest(const Globals& g, const std::vector<std::string>& paths,
                   const std::string& store_path, std::size_t size, std::size_t overlap,
                   const std::string& fixtures_path) {
    if (overlap >= size) throw Exit{kUsageError, "--overlap must be smaller than --size"};
    rag::VectorStore store;
    if (fs::exists(store_path)) store = require_store(store_path);

    std::optional<rag::FixtureMap> fixtures;
    if (!fixtures_path.empty()) fixtures = rag::load_fixture_map(fixtures_path);

    std::vector<rag::Document> docs;
    std::vector<std::string> warnings;
    for (const auto& p : paths) {
        if (is_url(p)) {
            docs.push_back(rag::load_url(p, fixtures ? &*fixtures : nullptr));
            continue;
        }
        if (!fs::exists(p)) throw Exit{kUsageError, "no such file or directory: " + p};
        auto loaded = rag::load_path(p);
        for (auto& d : loaded.documents) docs.push_back(std::move(d));
        for (auto& w : loaded.warnings) warnings.push_back(std::move(w));
    }

    std::vector<std::uint64_t> ids;
    std::size_t chunk_count = 0;
    for (const auto& d : docs) {
        auto fmt = d.metadata.count("format") ? d.metadata.at("format") : std::string{};
        std::string content =
            (fmt == "html" || fmt == "htm" || fmt == "url") ? rag::strip_html(d.content) : d.content;
        auto chunks = rag::chunk_fixed(content, size, overlap, d.id);
        chunk_count += chunks.size();
        for (auto id : store.add(chunks)) ids.push_back(id);
    }
    store.save(store_path);

    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (g.json_output()) {
        print_json({{"documents", docs.size()},
                    {"chunks", chunk_count},
                    {"record_ids", ids},
                    {"store_size", store.size()},
                    {"warnings", warnings}});
    } else {
        std::cout << "ingested " << docs.size() << " documents, " << chunk_count << " chunks into "
                  << store_path << " (" << store.size() << " records)\n";
    }
    return kOk;
}

int cmd_rag_query(const Globals& g, const std::string& q, const std::string& store_path,
                  std::size_t k) {
    auto store = require_store(store_path);
    auto hits = store.query(q, k);
    if (g.json_output()) {
        json arr = json::array();
        for (const auto& h : hits) {
            arr.push_back({{"record_id", h.record.record_id},
                           {"doc_id", h.record.chunk.doc_id},
                           {"seq", h.record.chunk.seq},
                           {"score", h.score},
                           {"text", h.record.chunk.text}});
        }
        print_json(arr);
        return kOk;
    }
    for (const auto& h : hits) {
        char score[32];
        std::snprintf(score, sizeof score, "%.4f", h.score);
        std::cout << score << "  #" << h.record.record_id << "  " << h.record.chunk.doc_id << "["
                  << h.record.chunk.seq << "]\n";
        for (const auto& line : text::split_lines(h.record.chunk.text)) {
            std::cout << "    " << line << "\n";
        }
    }
    return kOk;
}

int cmd_rag_answer(const Globals& g, const std::string& q, const std::string& store_path,
                   const std::string& model_id, std::size_t k) {
    auto store = require_store(store_path);
    if (store.empty()) throw Exit{kUsageError, "store is empty: " + store_path};
    auto cfg = require_config(g);
    const auto& m = require_model(cfg, model_id.empty() ? g.model_override : model_id);
    auto answer = rag::rag_answer(q, store, m, k, cfg.defaults);
    if (g.json_output()) {
        print_json({{"answer", answer.answer},
                    {"citations", answer.citations},
                    {"usage", model::to_json(answer.usage)}});
    } else {
        std::cout << answer.answer << "\n" << "citations:";
        for (auto id : answer.citations) std::cout << " #" << id;
        std::cout << "\n";
    }
    return kOk;
}

// --- chat ------------------------------------------------------------------

struct ChatTools {
    std::shared_ptr<sql::TableStore> db = std::make_shared<sql::TableStore>(tools::seed_users_store());
    std::shared_ptr<tools::CommandPolicy> terminal =
        std::make_shared<tools::CommandPolicy>(tools::CommandPolicy::fake({}));
    std::shared_ptr<rag::VectorStore> store = std::make_shared<rag::VectorStore>();
};

const std::vector<std::string>& chat_tool_names() {
    static const std::vector<std::string> names = {"calculator", "terminal", "sql", "user_hash",
                                                   "vector_db_query"};
    return names;
}

agent::ToolRegistry build_chat_tools(const std::string& csv, ChatTools& env) {
    agent::ToolRegistry reg;
    std::stringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        name = std::string(text::trim(name));
        if (name.empty()) continue;
        if (name == "calculator") {
            reg.add(tools::make_calculator_tool());
        } else if (name == "terminal") {
            reg.add(tools::make_terminal_tool(env.terminal));
        } else if (name == "sql") {
            reg.add(tools::make_sql_raw_tool(env.db));
        } else if (name == "user_hash") {
            reg.add(tools::make_sql_user_hash_tool(env.db));
        } else if (name == "vector_db_query") {
            reg.add(tools::make_vector_query_tool(env.store));
        } else {
            throw Exit{kUsageError, "unknown tool '" + name + "'; available: " +
                                        text::join(chat_tool_names(), ", ")};
        }
    }
    return reg;
}

int cmd_chat(const Globals& g, const std::string& model_id, bool agent_mode,
             const std::string& tools_csv, const std::string& trace_path,
             const std::string& store_path) {
    auto cfg = require_config(g);
    const auto& m = require_model(cfg, model_id.empty() ? g.model_override : model_id);

    ChatTools env;
    if (!store_path.empty()) *env.store = require_store(store_path);
    agent::AgentConfig acfg;
    if (agent_mode) {
        acfg.tools = build_chat_tools(tools_csv, env);
        acfg.model = m;
        acfg.params = cfg.defaults;
    } else if (!tools_csv.empty()) {
        throw Exit{kUsageError, "--tools requires --agent"};
    }

    std::vector<model::Message> history;
    std::optional<agent::AgentTrace> last_trace;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (text::trim(line).empty()) continue;
        if (agent_mode) {
            auto trace = agent::run_agent(acfg, line);
            if (g.json_output()) {
                print_json(agent::to_json(trace));
            } else if (auto ans = trace.final_answer()) {
                std::cout << *ans << "\n";
            } else {
                std::cout << "[" << agent::to_string(trace.outcome.kind) << "] "
                          << trace.outcome.text << "\n";
            }
            last_trace = std::move(trace);
        } else {
            history.push_back({model::Role::user, line});
            model::Completion c;
            try {
                c = model::complete(m, history, cfg.defaults);
            } catch (const BackendError& e) {
                history.pop_back();
                std::cerr << "error: " << e.what() << "\n";
                continue;
            }
            history.push_back({model::Role::assistant, c.text});
            if (g.json_output()) {
                print_json({{"text", c.text}, {"usage", model::to_json(c.usage)}});
            } else {
                std::cout << c.text << "\n";
            }
        }
        std::cout.flush();
    }
    if (!trace_path.empty() && last_trace) {
        write_file(trace_path, agent::to_json(*last_trace).dump(2) + "\n");
    }
    return kOk;
}

// --- models ----------------------------------------------------------------

int cmd_models_list(const Globals& g) {
    auto cfg = require_config(g);
    auto models = cfg.models;
    std::sort(models.begin(), models.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    if (g.json_output()) {
        json arr = json::array();
        for (const auto& m : models) arr.push_back(model::to_json(m));
        print_json(arr);
        return kOk;
    }
    for (const auto& m : models) {
        model::Cost in{m.price_in_micro_per_1k * 1000};
        model::Cost out{m.price_out_micro_per_1k * 1000};
        std::cout << m.id << "  " << (m.backend == model::Backend::scripted ? "scripted" : "http_chat")
                  << "  in/1k=" << in.to_string() << "  out/1k=" << out.to_string() << "\n";
    }
    return kOk;
}

int cmd_models_lab(const Globals& g, const std::string& prompt_file, const std::string& models_csv) {
    if (!fs::exists(prompt_file)) throw Exit{kUsageError, "prompt file not found: " + prompt_file};
    model::PromptSpec spec;
    try {
        spec = model::prompt_spec_from_json(json::parse(read_file(prompt_file)));
    } catch (const json::parse_error& e) {
        throw Exit{kUsageError, prompt_file + ": " + e.what()};
    } catch (const ValidationError& e) {
        throw Exit{kUsageError, prompt_file + ": " + e.what()};
    }
    auto cfg = require_config(g);
    auto models = require_models(cfg, models_csv);
    auto report = model::prompt_lab(spec, models, cfg.defaults);
    if (g.json_output()) {
        print_json(model::to_json(report));
        return kOk;
    }
    for (const auto& row : report.rows) {
        std::cout << "== " << row.model_id << " (" << row.usage.prompt_tokens << "+"
                  << row.usage.completion_tokens << " tokens, cost " << row.cost.to_string()
                  << ")\n";
        std::cout << (row.error ? "error: " + *row.error : row.text) << "\n";
    }
    return kOk;
}

// --- trace -----------------------------------------------------------------

int cmd_trace_show(const Globals& g, const std::string& path) {
    agent::AgentTrace trace;
    try {
        trace = agent::trace_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Exit{kUsageError, path + ": " + e.what()};
    } catch (const Error& e) {
        throw Exit{kUsageError, path + ": " + e.what()};
    }
    if (g.json_output()) {
        print_json(agent::to_json(trace));
        return kOk;
    }
    std::cout << "Question: " << trace.question << "\n";
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        std::cout << "-- step " << (i + 1) << "\n" << agent::render_step(trace.steps[i]);
    }
    auto summary = agent::trace_summary(trace);
    std::cout << "Outcome: " << agent::to_string(trace.outcome.kind);
    if (!trace.outcome.text.empty()) std::cout << ": " << trace.outcome.text;
    std::cout << "\nTokens: " << summary.usage.prompt_tokens << " prompt, "
              << summary.usage.completion_tokens << " completion; cost " << summary.cost.to_string()
              << "\n";
    if (!summary.tools_used.empty()) {
        std::cout << "Tools: " << text::join(summary.tools_used, ", ") << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentlab: prompt, RAG, agent and LLM security laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Config file (default ./config.json, then "
                                              "$XDG_CONFIG_HOME/agentlab/config.json or "
                                              "~/.config/agentlab/config.json)");
    app.add_option("--model", g.model_override, "Model id override");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_flag("-v,--verbose", g.verbosity, "Increase verbosity");

    std::function<int()> action;

    auto* lab = app.add_subcommand("lab", "Security exercises");
    lab->require_subcommand(1);
    lab->add_subcommand("list", "List exercises")->callback([&] { action = [&] { return cmd_lab_list(g); }; });
    auto* lab_run = lab->add_subcommand("run", "Run an exercise");
    std::string lab_id, lab_variant = "both";
    lab_run->add_option("id", lab_id, "Exercise id")->required();
    lab_run->add_option("--variant", lab_variant, "vulnerable|hardened|both")
        ->check(CLI::IsMember({"vulnerable", "hardened", "both"}));
    lab_run->callback([&] { action = [&] { return cmd_lab_run(g, lab_id, lab_variant); }; });

    auto* bench_cmd = app.add_subcommand("bench", "Known-answer benchmarks");
    bench_cmd->require_subcommand(1);
    auto* bench_run = bench_cmd->add_subcommand("run", "Run a suite against models");
    std::string suite_path, bench_models, bench_out, bench_report = "text";
    bench_run->add_option("suite", suite_path, "Suite JSON file")->required();
    bench_run->add_option("--models", bench_models, "Comma-separated model ids")->required();
    bench_run->add_option("--out", bench_out, "Write the JSON report here");
    bench_run->add_option("--report", bench_report, "Printed report format")
        ->check(CLI::IsMember({"text", "markdown", "json"}));
    bench_run->callback([&] {
        action = [&] { return cmd_bench_run(g, suite_path, bench_models, bench_out, bench_report); };
    });

    auto* rag_cmd = app.add_subcommand("rag", "Document stores");
    rag_cmd->require_subcommand(1);
    std::string store_path;
    std::size_t chunk_size = rag::kDefaultChunkSize, chunk_overlap = rag::kDefaultChunkOverlap, top_k = 3;
    std::vector<std::string> ingest_paths;
    std::string fixtures_path, rag_q, rag_model;
    auto* ingest = rag_cmd->add_subcommand("ingest", "Load, chunk, embed and store documents");
    ingest->add_option("paths", ingest_paths, "Files, directories or URLs")->required();
    ingest->add_option("--store", store_path, "Store file (JSONL)")->required();
    ingest->add_option("--size", chunk_size, "Chunk size in bytes")->check(CLI::PositiveNumber);
    ingest->add_option("--overlap", chunk_overlap, "Chunk overlap in bytes");
    ingest->add_option("--fixtures", fixtures_path, "URL fixture map for offline URL loading");
    ingest->callback([&] {
        action = [&] {
            return cmd_rag_ingest(g, ingest_paths, store_path, chunk_size, chunk_overlap, fixtures_path);
        };
    });
    auto* query = rag_cmd->add_subcommand("query", "Rank stored chunks against a query");
    query->add_option("question", rag_q, "Query text")->required();
    query->add_option("--store", store_path, "Store file")->required();
    query->add_option("-k", top_k, "Number of results");
    query->callback([&] { action = [&] { return cmd_rag_query(g, rag_q, store_path, top_k); }; });
    auto* answer = rag_cmd->add_subcommand("answer", "Answer a question from the store");
    answer->add_option("question", rag_q, "Question")->required();
    answer->add_option("--store", store_path, "Store file")->required();
    answer->add_option("--model", rag_model, "Model id");
    answer->add_option("-k", top_k, "Number of context chunks");
    answer->callback([&] {
        action = [&] { return cmd_rag_answer(g, rag_q, store_path, rag_model, top_k); };
    });

    auto* chat = app.add_subcommand("chat", "Line-oriented chat or agent REPL");
    std::string chat_model, chat_tools, chat_trace, chat_store;
    bool chat_agent = false;
    chat->add_option("--model", chat_model, "Model id");
    chat->add_flag("--agent", chat_agent, "Run each line through the ReAct agent");
    chat->add_option("--tools", chat_tools, "Comma-separated tools: " + text::join(chat_tool_names(), ", "));
    chat->add_option("--trace", chat_trace, "Write the last agent trace here");
    chat->add_option("--store", chat_store, "Store backing vector_db_query");
    chat->callback([&] {
        action = [&] {
            return cmd_chat(g, chat_model, chat_agent, chat_tools, chat_trace, chat_store);
        };
    });

    auto* models = app.add_subcommand("models", "Configured models");
    models->require_subcommand(1);
    models->add_subcommand("list", "List configured models")->callback([&] {
        action = [&] { return cmd_models_list(g); };
    });
    auto* mlab = models->add_subcommand("lab", "Send one prompt to several models");
    std::string prompt_file, lab_models;
    mlab->add_option("--prompt-file", prompt_file, "PromptSpec JSON")->required();
    mlab->add_option("--models", lab_models, "Comma-separated model ids")->required();
    mlab->callback([&] { action = [&] { return cmd_models_lab(g, prompt_file, lab_models); }; });

    auto* trace = app.add_subcommand("trace", "Agent traces");
    trace->require_subcommand(1);
    auto* show = trace->add_subcommand("show", "Print a trace file");
    std::string trace_file;
    show->add_option("file", trace_file, "Trace JSON")->required();
    show->callback([&] { action = [&] { return cmd_trace_show(g, trace_file); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsageError;
    }

    try {
        return action ? action() : kUsageError;
    } catch (const Exit& e) {
        if (!e.message.empty()) std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kAssertionFailed;
    }
}
