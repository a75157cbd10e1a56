// SPDX-License-Identifier: Apache-2.0
#include "agentlab/tools.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "agentlab/http.hpp"
#include "agentlab/text.hpp"

namespace agentlab::tools {

using nlohmann::json;

// --- SQL -------------------------------------------------------------------

sql::TableStore seed_users_store() {
    sql::TableStore store;
    store.execute_script(
        "CREATE TABLE users (username, hash);"
        "INSERT INTO users VALUES ('alice', 'h1');"
        "INSERT INTO users VALUES ('bob', 'h2');");
    return store;
}

void SqlAudit::record(std::string statement, sql::ExecResult result) {
    std::scoped_lock lock(mutex_);
    entries_.push_back({std::move(statement), std::move(result)});
}

std::vector<SqlAuditEntry> SqlAudit::entries() const {
    std::scoped_lock lock(mutex_);
    return entries_;
}

std::size_t SqlAudit::max_rows_returned() const {
    std::scoped_lock lock(mutex_);
    std::size_t most = 0;
    for (const auto& e : entries_) {
        if (e.result.kind == sql::ExecResult::Kind::rows) most = std::max(most, e.result.rows.size());
    }
    return most;
}

namespace {

// Executes statements one at a time so earlier ones take effect even when a
// later one fails, matching how a real database session behaves.
std::string run_script(sql::TableStore& store, const std::string& script, SqlAudit* audit) {
    std::vector<sql::Statement> statements;
    try {
        statements = sql::parse(script);
    } catch (const sql::SyntaxError& e) {
        return std::string("Error: ") + e.what();
    }
    std::vector<std::string> out;
    for (const auto& stmt : statements) {
        try {
            auto result = store.execute(stmt);
            out.push_back(sql::render_result(result));
            if (audit) audit->record(sql::render(stmt), std::move(result));
        } catch (const sql::ExecutionError& e) {
            out.push_back(std::string("Error: ") + e.what());
            break;
        }
    }
    return text::join(out, "\n");
}

}  // namespace

agent::ToolSpec make_sql_raw_tool(std::shared_ptr<sql::TableStore> store,
                                  std::shared_ptr<SqlAudit> audit) {
    return agent::ToolSpec{
        "sql",
        "Runs SQL statements against the users database and returns the result.",
        {},
        [store, audit](const std::string& input) { return run_script(*store, input, audit.get()); }};
}

agent::ToolSpec make_sql_user_hash_tool(std::shared_ptr<sql::TableStore> store,
                                        std::shared_ptr<SqlAudit> audit) {
    auto statement = sql::parse(kUserHashQuery).at(0);
    return agent::ToolSpec{
        "user_hash",
        "Looks up the password hash for a username (letters and digits only).",
        {agent::FieldConstraint::alphanumeric(), agent::FieldConstraint::max_length(64)},
        [store, audit, statement](const std::string& username) {
            auto bound = sql::bind(statement, {username});
            auto result = store->execute(bound);
            if (audit) audit->record(sql::render(bound), result);
            if (result.rows.empty()) return std::string("not found");
            std::vector<std::string> hashes;
            for (const auto& row : result.rows) hashes.push_back(row.at(0));
            return text::join(hashes, "\n");
        }};
}

agent::ToolSpec make_sql_interpolated_user_hash_tool(std::shared_ptr<sql::TableStore> store,
                                                     std::shared_ptr<SqlAudit> audit) {
    return agent::ToolSpec{
        "user_hash",
        "Looks up the password hash for a username (letters and digits only).",
        {},
        [store, audit](const std::string& username) {
            auto script = "SELECT hash FROM users WHERE username = '" + username + "'";
            auto out = run_script(*store, script, audit.get());
            return out.empty() ? std::string("not found") : out;
        }};
}

// --- terminal --------------------------------------------------------------

CommandPolicy::CommandPolicy(PolicyMode mode, std::vector<std::string> prefixes,
                             std::optional<FakeOutputs> fake)
    : mode_(mode), prefixes_(std::move(prefixes)), fake_(std::move(fake)) {}

CommandPolicy::CommandPolicy(const CommandPolicy& other)
    : mode_(other.mode_), prefixes_(other.prefixes_), fake_(other.fake_) {
    std::scoped_lock lock(other.mutex_);
    log_ = other.log_;
}

CommandPolicy CommandPolicy::unrestricted() { return {PolicyMode::unrestricted, {}, std::nullopt}; }

CommandPolicy CommandPolicy::fake(FakeOutputs outputs) {
    return {PolicyMode::fake, {}, std::move(outputs)};
}

CommandPolicy CommandPolicy::allowlist(std::vector<std::string> prefixes,
                                       std::optional<FakeOutputs> fake_outputs) {
    return {PolicyMode::allowlist, std::move(prefixes), std::move(fake_outputs)};
}

std::vector<Invocation> CommandPolicy::log() const {
    std::scoped_lock lock(mutex_);
    return log_;
}

std::vector<std::string> CommandPolicy::executed() const {
    std::scoped_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& inv : log_) {
        if (inv.allowed) out.push_back(inv.command);
    }
    return out;
}

namespace {

std::string first_word(std::string_view command) {
    auto t = text::trim(command);
    auto end = t.find_first_of(" \t\r\n");
    return std::string(t.substr(0, end));
}

std::string run_host_shell(const std::string& command) {
    std::string full = command + " 2>&1";
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe) throw IoError("cannot start shell for: " + command);
    std::string out;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    ::pclose(pipe);
    return out;
}

}  // namespace

std::string CommandPolicy::exec(const std::string& command) {
    bool allowed = true;
    if (mode_ == PolicyMode::allowlist) {
        auto word = first_word(command);
        allowed = std::find(prefixes_.begin(), prefixes_.end(), word) != prefixes_.end();
    }
    {
        std::scoped_lock lock(mutex_);
        log_.push_back({command, allowed});
    }
    if (!allowed) throw PolicyViolation(command);
    if (fake_) {
        auto it = fake_->find(command);
        return it == fake_->end() ? std::string(kCommandNotFound) : it->second;
    }
    return run_host_shell(command);
}

std::string terminal_exec(CommandPolicy& policy, const std::string& command) {
    return policy.exec(command);
}

agent::ToolSpec make_terminal_tool(std::shared_ptr<CommandPolicy> policy) {
    return agent::ToolSpec{"terminal", "Executes a shell command and returns its output.", {},
                           [policy](const std::string& command) {
                               return terminal_exec(*policy, command);
                           }};
}

// --- retrieval -------------------------------------------------------------

agent::ToolSpec make_vector_query_tool(std::shared_ptr<const rag::VectorStore> store) {
    if (!store || store->empty()) {
        throw ValidationError("vector_db_query needs a non-empty store");
    }
    return agent::ToolSpec{"vector_db_query",
                           "Searches the document collection and returns the most relevant passages.",
                           {},
                           [store](const std::string& query) {
                               std::vector<std::string> texts;
                               for (const auto& hit : store->query(query, 3)) {
                                   texts.push_back(hit.record.chunk.text);
                               }
                               return text::join(texts, "\n");
                           }};
}

// --- calculator ------------------------------------------------------------

namespace {

class Calculator {
public:
    explicit Calculator(std::string_view expr) : s_(expr) {}

    double run() {
        double v = expression();
        skip_ws();
        if (pos_ != s_.size()) throw CalcError(pos_, "unexpected character");
        return v;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    double expression() {
        double v = term();
        for (;;) {
            if (accept('+')) {
                v += term();
            } else if (accept('-')) {
                v -= term();
            } else {
                return v;
            }
        }
    }

    double term() {
        double v = unary();
        for (;;) {
            skip_ws();
            auto at = pos_;
            if (accept('*')) {
                v *= unary();
            } else if (accept('/')) {
                double d = unary();
                if (d == 0.0) throw CalcError(at, "division by zero");
                v /= d;
            } else {
                return v;
            }
        }
    }

    double unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return primary();
    }

    double primary() {
        skip_ws();
        if (accept('(')) {
            double v = expression();
            if (!accept(')')) throw CalcError(pos_, "expected ')'");
            return v;
        }
        auto start = pos_;
        bool seen_dot = false;
        while (pos_ < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[pos_])) || (s_[pos_] == '.' && !seen_dot))) {
            seen_dot |= s_[pos_] == '.';
            ++pos_;
        }
        if (start == pos_ || (pos_ - start == 1 && seen_dot)) throw CalcError(start, "expected a number");
        return std::strtod(std::string(s_.substr(start, pos_ - start)).c_str(), nullptr);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

double calculator_eval(std::string_view expr) { return Calculator(expr).run(); }

std::string format_number(double value) {
    if (value == 0.0) return "0";
    if (std::nearbyint(value) == value && std::fabs(value) < 1e15) {
        return std::to_string(static_cast<long long>(value));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

agent::ToolSpec make_calculator_tool() {
    return agent::ToolSpec{
        "calculator",
        "Evaluates an arithmetic expression with + - * / and parentheses.",
        {agent::FieldConstraint::regex(R"([0-9+\-*/(). ]+)"), agent::FieldConstraint::max_length(256)},
        [](const std::string& expr) { return format_number(calculator_eval(expr)); }};
}

// --- threat intelligence ---------------------------------------------------

void ApiToolSpec::validate() const {
    if (name.empty()) throw ConfigError("API tool needs a name");
    auto first = url_template.find("{query}");
    if (first == std::string::npos || url_template.find("{query}", first + 1) != std::string::npos) {
        throw ConfigError("url_template must contain exactly one {query} placeholder: " + name);
    }
    if (extract.empty()) throw ConfigError("API tool " + name + " extracts no fields");
    if (mode == ApiMode::fixture && fixture_path.empty()) {
        throw ConfigError("API tool " + name + " in fixture mode needs a fixture path");
    }
}

std::string extract_fields(const json& body, const std::vector<std::string>& paths) {
    std::vector<std::string> lines;
    for (const auto& path : paths) {
        const json* node = &body;
        std::size_t start = 0;
        while (node && start <= path.size()) {
            auto dot = path.find('.', start);
            auto seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (node->is_object() && node->contains(seg)) {
                node = &(*node)[seg];
            } else if (node->is_array() && !seg.empty() &&
                       std::all_of(seg.begin(), seg.end(), [](unsigned char c) { return std::isdigit(c); }) &&
                       std::stoul(seg) < node->size()) {
                node = &(*node)[std::stoul(seg)];
            } else {
                node = nullptr;
            }
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        std::string value = !node ? "<missing>" : node->is_string() ? node->get<std::string>() : node->dump();
        lines.push_back(path + ": " + value);
    }
    return text::join(lines, "\n");
}

std::string api_tool_call(const ApiToolSpec& spec, const std::string& query) {
    spec.validate();
    json body;
    if (spec.mode == ApiMode::fixture) {
        std::ifstream in(spec.fixture_path);
        if (!in) throw IoError("cannot read fixture file " + spec.fixture_path.string());
        json fixtures;
        try {
            fixtures = json::parse(in);
        } catch (const json::parse_error& e) {
            throw IoError("fixture file " + spec.fixture_path.string() + ": " + e.what());
        }
        if (!fixtures.is_object() || !fixtures.contains(query)) {
            throw IoError("no fixture for query '" + query + "' in " + spec.fixture_path.string());
        }
        body = fixtures[query];
    } else {
        auto url = text::replace_all(spec.url_template, "{query}", http::url_encode(query));
        http::Headers headers{{"Accept", "application/json"}};
        if (!spec.header_env.empty()) {
            const char* key = std::getenv(spec.header_env.c_str());
            if (!key || !*key) throw ConfigError("environment variable " + spec.header_env + " is not set");
            headers.emplace_back(spec.header_name.empty() ? "Authorization" : spec.header_name, key);
        }
        auto resp = http::get(url, headers);
        if (resp.status < 200 || resp.status >= 300) {
            throw IoError(spec.name + ": HTTP " + std::to_string(resp.status));
        }
        try {
            body = json::parse(resp.body);
        } catch (const json::parse_error& e) {
            throw IoError(spec.name + ": response is not JSON: " + e.what());
        }
    }
    return extract_fields(body, spec.extract);
}

std::vector<std::string> api_preset_names() {
    return {"ip_reputation", "whois_lookup", "dns_records", "url_reputation", "cve_latest"};
}

ApiToolSpec api_preset(std::string_view name) {
    ApiToolSpec s;
    s.name = std::string(name);
    s.mode = ApiMode::live;
    if (name == "ip_reputation") {
        s.description = "Reports the reputation of an IP address.";
        s.url_template = "https://www.virustotal.com/api/v3/ip_addresses/{query}";
        s.header_name = "x-apikey";
        s.header_env = "VT_API_KEY";
        s.extract = {"data.attributes.reputation", "data.attributes.country",
                     "data.attributes.as_owner", "data.attributes.last_analysis_stats.malicious"};
    } else if (name == "whois_lookup") {
        s.description = "Looks up registration (whois/RDAP) data for an IP address.";
        s.url_template = "https://rdap.org/ip/{query}";
        s.extract = {"handle", "name", "country", "startAddress", "endAddress"};
    } else if (name == "dns_records") {
        s.description = "Resolves the A records of a domain name.";
        s.url_template = "https://dns.google/resolve?name={query}&type=A";
        s.extract = {"Status", "Answer.0.data", "Answer.1.data"};
    } else if (name == "url_reputation") {
        s.description = "Reports the reputation of a domain.";
        s.url_template = "https://www.virustotal.com/api/v3/domains/{query}";
        s.header_name = "x-apikey";
        s.header_env = "VT_API_KEY";
        s.extract = {"data.attributes.reputation", "data.attributes.last_analysis_stats.malicious",
                     "data.attributes.categories"};
    } else if (name == "cve_latest") {
        s.description = "Finds the most recent CVE matching a keyword.";
        s.url_template =
            "https://services.nvd.nist.gov/rest/json/cves/2.0?keywordSearch={query}&resultsPerPage=1";
        s.header_name = "apiKey";
        s.header_env = "";
        s.extract = {"totalResults", "vulnerabilities.0.cve.id",
                     "vulnerabilities.0.cve.descriptions.0.value",
                     "vulnerabilities.0.cve.weaknesses.0.description.0.value"};
    } else {
        throw ConfigError("unknown API preset: " + std::string(name));
    }
    return s;
}

agent::ToolSpec make_api_tool(ApiToolSpec spec) {
    spec.validate();
    auto name = spec.name;
    auto description = spec.description.empty() ? "Queries " + spec.name + "." : spec.description;
    return agent::ToolSpec{name,
                           description,
                           {agent::FieldConstraint::regex(R"([A-Za-z0-9.:/_\-]+)"),
                            agent::FieldConstraint::max_length(256)},
                           [spec = std::move(spec)](const std::string& query) {
                               return api_tool_call(spec, query);
                           }};
}

}  // namespace agentlab::tools
