// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/agent.hpp"
#include "agentlab/error.hpp"
#include "agentlab/rag.hpp"
#include "agentlab/sql.hpp"

namespace agentlab::tools {

// --- SQL tools -------------------------------------------------------------

/// users(username, hash) with alice/h1 and bob/h2.
sql::TableStore seed_users_store();

struct SqlAuditEntry {
    std::string statement;
    sql::ExecResult result;
};

/// Records every statement a SQL tool executes. Thread-safe.
class SqlAudit {
public:
    void record(std::string statement, sql::ExecResult result);
    std::vector<SqlAuditEntry> entries() const;
    /// Largest row count returned by any SELECT so far.
    std::size_t max_rows_returned() const;

private:
    mutable std::mutex mutex_;
    std::vector<SqlAuditEntry> entries_;
};

/// "sql": parses and executes whatever it is given. Unvalidated.
agent::ToolSpec make_sql_raw_tool(std::shared_ptr<sql::TableStore> store,
                                  std::shared_ptr<SqlAudit> audit = nullptr);

/// "user_hash": binds a validated username into a fixed SELECT.
agent::ToolSpec make_sql_user_hash_tool(std::shared_ptr<sql::TableStore> store,
                                        std::shared_ptr<SqlAudit> audit = nullptr);

/// "user_hash" built the unsafe way: the input is pasted into the SQL text
/// and the resulting script is executed. Used as the vulnerable contrast.
agent::ToolSpec make_sql_interpolated_user_hash_tool(std::shared_ptr<sql::TableStore> store,
                                                     std::shared_ptr<SqlAudit> audit = nullptr);

inline constexpr std::string_view kUserHashQuery = "SELECT hash FROM users WHERE username = ?";

// --- terminal --------------------------------------------------------------

class PolicyViolation : public Error {
public:
    explicit PolicyViolation(std::string command)
        : Error("command not permitted by policy: " + command), command_(std::move(command)) {}
    const std::string& command() const noexcept { return command_; }

private:
    std::string command_;
};

struct Invocation {
    std::string command;
    bool allowed = false;
    bool operator==(const Invocation&) const = default;
};

enum class PolicyMode { unrestricted, allowlist, fake };

/// Decides which commands the terminal tool may run and how. Permitted
/// commands run on the host shell unless a fake output map is installed.
/// Every attempt is appended to the invocation log.
class CommandPolicy {
public:
    using FakeOutputs = std::map<std::string, std::string>;

    static CommandPolicy unrestricted();
    static CommandPolicy fake(FakeOutputs outputs);
    /// Permits commands whose first word equals one of the prefixes.
    static CommandPolicy allowlist(std::vector<std::string> prefixes,
                                   std::optional<FakeOutputs> fake_outputs = std::nullopt);

    CommandPolicy(const CommandPolicy& other);
    CommandPolicy& operator=(const CommandPolicy&) = delete;

    PolicyMode mode() const noexcept { return mode_; }
    const std::vector<std::string>& prefixes() const noexcept { return prefixes_; }
    bool is_hermetic() const noexcept { return fake_.has_value(); }

    std::vector<Invocation> log() const;
    /// Commands that passed the policy and were executed.
    std::vector<std::string> executed() const;

    std::string exec(const std::string& command);

private:
    CommandPolicy(PolicyMode mode, std::vector<std::string> prefixes,
                  std::optional<FakeOutputs> fake);

    PolicyMode mode_;
    std::vector<std::string> prefixes_;
    std::optional<FakeOutputs> fake_;
    mutable std::mutex mutex_;
    std::vector<Invocation> log_;
};

inline constexpr std::string_view kCommandNotFound = "command not found";

/// Throws PolicyViolation when the policy rejects the command.
std::string terminal_exec(CommandPolicy& policy, const std::string& command);

agent::ToolSpec make_terminal_tool(std::shared_ptr<CommandPolicy> policy);

// --- retrieval -------------------------------------------------------------

/// "vector_db_query": top-3 chunk texts joined by newlines, unsanitized.
agent::ToolSpec make_vector_query_tool(std::shared_ptr<const rag::VectorStore> store);

// --- calculator ------------------------------------------------------------

class CalcError : public Error {
public:
    CalcError(std::size_t offset, const std::string& what)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

double calculator_eval(std::string_view expr);
std::string format_number(double value);
agent::ToolSpec make_calculator_tool();

// --- threat intelligence ---------------------------------------------------

enum class ApiMode { live, fixture };

struct ApiToolSpec {
    std::string name;
    std::string description;
    std::string url_template;  // exactly one {query}
    std::string header_name;   // e.g. "x-apikey"; used when header_env is set
    std::string header_env;
    std::vector<std::string> extract;  // dotted paths, numeric segments index arrays
    ApiMode mode = ApiMode::fixture;
    std::filesystem::path fixture_path;

    /// Throws ConfigError.
    void validate() const;
};

/// "path: value" lines; absent paths render as "path: <missing>".
std::string extract_fields(const nlohmann::json& body, const std::vector<std::string>& paths);

std::string api_tool_call(const ApiToolSpec& spec, const std::string& query);

std::vector<std::string> api_preset_names();
/// One of ip_reputation, whois_lookup, dns_records, url_reputation, cve_latest.
ApiToolSpec api_preset(std::string_view name);

agent::ToolSpec make_api_tool(ApiToolSpec spec);

}  // namespace agentlab::tools
