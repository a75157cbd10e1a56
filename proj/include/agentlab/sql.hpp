// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/error.hpp"

// A deliberately small SQL dialect over text-valued in-memory tables:
// CREATE TABLE, INSERT, SELECT, DELETE, UPDATE with equality conditions
// joined by AND/OR. Multiple statements and "--" comments are supported
// because classic injection payloads depend on them.
namespace agentlab::sql {

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, const std::string& what)
        : Error("syntax error at offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ExecutionError : public Error {
public:
    using Error::Error;
};

struct Operand {
    enum class Kind { column, literal, placeholder };
    Kind kind = Kind::literal;
    std::string value;  // column name or literal text (unescaped)

    static Operand column(std::string name) { return {Kind::column, std::move(name)}; }
    static Operand literal(std::string v) { return {Kind::literal, std::move(v)}; }
    static Operand placeholder() { return {Kind::placeholder, {}}; }
    bool operator==(const Operand&) const = default;
};

struct Condition {
    enum class Kind { equals, all_of, any_of };  // all_of = AND, any_of = OR
    Kind kind = Kind::equals;
    Operand lhs;
    Operand rhs;
    std::vector<Condition> children;  // exactly two for all_of / any_of

    static Condition equals(Operand l, Operand r);
    static Condition both(Condition l, Condition r);
    static Condition either(Condition l, Condition r);
    bool operator==(const Condition&) const = default;
};

struct CreateTable {
    std::string name;
    std::vector<std::string> columns;
    bool operator==(const CreateTable&) const = default;
};

struct Insert {
    std::string table;
    std::vector<Operand> values;  // literals or placeholders
    bool operator==(const Insert&) const = default;
};

struct Select {
    std::vector<std::string> columns;  // empty means '*'
    std::string table;
    std::optional<Condition> where;
    bool operator==(const Select&) const = default;
};

struct Delete {
    std::string table;
    std::optional<Condition> where;
    bool operator==(const Delete&) const = default;
};

struct Update {
    std::string table;
    std::vector<std::pair<std::string, Operand>> assignments;
    std::optional<Condition> where;
    bool operator==(const Update&) const = default;
};

using Statement = std::variant<CreateTable, Insert, Select, Delete, Update>;

/// Parses a script of ';'-separated statements. Empty statements are skipped.
std::vector<Statement> parse(std::string_view sql);

/// Renders a statement as SQL that parses back to an equal statement.
std::string render(const Statement& stmt);
std::string quote_literal(std::string_view value);

/// Substitutes '?' placeholders, in source order, with literal values.
/// Values never pass through the tokenizer.
Statement bind(Statement stmt, const std::vector<std::string>& params);

using Row = std::vector<std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<Row> rows;
    bool operator==(const Table&) const = default;
};

struct ExecResult {
    enum class Kind { rows, affected, ok };
    Kind kind = Kind::ok;
    std::vector<std::string> columns;
    std::vector<Row> rows;
    std::size_t affected = 0;
};

/// "a | b" per row, "N row(s) affected", or "ok".
std::string render_result(const ExecResult& result);

/// Tables keyed case-insensitively. Single writer, many readers.
class TableStore {
public:
    TableStore() = default;
    TableStore(const TableStore& other);
    TableStore& operator=(const TableStore& other);

    ExecResult execute(const Statement& stmt);
    /// Parses and executes every statement in order; stops at the first error.
    std::vector<ExecResult> execute_script(std::string_view sql);

    std::optional<Table> table(std::string_view name) const;
    std::vector<std::string> table_names() const;

    nlohmann::json to_json() const;
    static TableStore from_json(const nlohmann::json& doc);

    bool operator==(const TableStore& other) const;

private:
    ExecResult execute_locked(const Statement& stmt);

    std::map<std::string, Table> tables_;  // key: lowercased name
    mutable std::shared_mutex mutex_;
};

}  // namespace agentlab::sql
