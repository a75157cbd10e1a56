// SPDX-License-Identifier: Apache-2.0
#include "agentlab/sql.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <set>

#include "agentlab/text.hpp"

namespace agentlab::sql {

using nlohmann::json;

Condition Condition::equals(Operand l, Operand r) {
    Condition c;
    c.kind = Kind::equals;
    c.lhs = std::move(l);
    c.rhs = std::move(r);
    return c;
}

Condition Condition::both(Condition l, Condition r) {
    Condition c;
    c.kind = Kind::all_of;
    c.children.push_back(std::move(l));
    c.children.push_back(std::move(r));
    return c;
}

Condition Condition::either(Condition l, Condition r) {
    Condition c;
    c.kind = Kind::any_of;
    c.children.push_back(std::move(l));
    c.children.push_back(std::move(r));
    return c;
}

// --- tokenizer -------------------------------------------------------------

namespace {

struct Token {
    enum class Type { word, string, symbol, placeholder, semicolon, end };
    Type type;
    std::string text;
    std::size_t offset;
};

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < sql.size()) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '\'') {
            std::size_t start = i++;
            std::string value;
            bool closed = false;
            while (i < sql.size()) {
                if (sql[i] == '\'') {
                    if (i + 1 < sql.size() && sql[i + 1] == '\'') {
                        value += '\'';
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                value += sql[i++];
            }
            if (!closed) throw SyntaxError(start, "unterminated string literal");
            out.push_back({Token::Type::string, std::move(value), start});
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < sql.size() &&
                   (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '_')) {
                ++i;
            }
            out.push_back({Token::Type::word, std::string(sql.substr(start, i - start)), start});
        } else if (c == ';') {
            out.push_back({Token::Type::semicolon, ";", i++});
        } else if (c == '?') {
            out.push_back({Token::Type::placeholder, "?", i++});
        } else if (c == '(' || c == ')' || c == ',' || c == '=' || c == '*') {
            out.push_back({Token::Type::symbol, std::string(1, c), i++});
        } else {
            throw SyntaxError(i, std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({Token::Type::end, "", sql.size()});
    return out;
}

const std::set<std::string, std::less<>> kKeywords = {
    "AND", "CREATE", "DELETE", "FROM", "INSERT", "INTO", "OR",
    "SELECT", "SET", "TABLE", "UPDATE", "VALUES", "WHERE"};

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    std::vector<Statement> script() {
        std::vector<Statement> out;
        while (peek().type != Token::Type::end) {
            if (peek().type == Token::Type::semicolon) {
                ++pos_;
                continue;
            }
            out.push_back(statement());
            if (peek().type == Token::Type::semicolon) {
                ++pos_;
            } else if (peek().type != Token::Type::end) {
                fail("expected ';' or end of input");
            }
        }
        return out;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }

    [[noreturn]] void fail(const std::string& what) const {
        const auto& t = peek();
        std::string near = t.type == Token::Type::end ? "end of input" : "'" + t.text + "'";
        throw SyntaxError(t.offset, what + " near " + near);
    }

    bool at_keyword(std::string_view kw) const {
        return peek().type == Token::Type::word && upper(peek().text) == kw;
    }

    void expect_keyword(std::string_view kw) {
        if (!at_keyword(kw)) fail("expected " + std::string(kw));
        ++pos_;
    }

    bool accept_symbol(char s) {
        if (peek().type == Token::Type::symbol && peek().text[0] == s) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_symbol(char s) {
        if (!accept_symbol(s)) fail(std::string("expected '") + s + "'");
    }

    std::string identifier() {
        if (peek().type != Token::Type::word || kKeywords.count(upper(peek().text))) {
            fail("expected identifier");
        }
        return tokens_[pos_++].text;
    }

    Operand value() {
        if (peek().type == Token::Type::string) return Operand::literal(tokens_[pos_++].text);
        if (peek().type == Token::Type::placeholder) {
            ++pos_;
            return Operand::placeholder();
        }
        fail("expected string literal or '?'");
    }

    Operand operand() {
        if (peek().type == Token::Type::word) return Operand::column(identifier());
        return value();
    }

    Condition condition() {
        auto left = conjunction();
        while (at_keyword("OR")) {
            ++pos_;
            left = Condition::either(std::move(left), conjunction());
        }
        return left;
    }

    Condition conjunction() {
        auto left = primary();
        while (at_keyword("AND")) {
            ++pos_;
            left = Condition::both(std::move(left), primary());
        }
        return left;
    }

    Condition primary() {
        if (accept_symbol('(')) {
            auto inner = condition();
            expect_symbol(')');
            return inner;
        }
        auto lhs = operand();
        expect_symbol('=');
        return Condition::equals(std::move(lhs), operand());
    }

    std::optional<Condition> where_clause() {
        if (!at_keyword("WHERE")) return std::nullopt;
        ++pos_;
        return condition();
    }

    Statement statement() {
        if (peek().type != Token::Type::word) fail("expected a statement");
        auto kw = upper(peek().text);
        if (kw == "SELECT") {
            ++pos_;
            Select s;
            if (!accept_symbol('*')) {
                s.columns.push_back(identifier());
                while (accept_symbol(',')) s.columns.push_back(identifier());
            }
            expect_keyword("FROM");
            s.table = identifier();
            s.where = where_clause();
            return s;
        }
        if (kw == "DELETE") {
            ++pos_;
            expect_keyword("FROM");
            Delete d;
            d.table = identifier();
            d.where = where_clause();
            return d;
        }
        if (kw == "INSERT") {
            ++pos_;
            expect_keyword("INTO");
            Insert ins;
            ins.table = identifier();
            expect_keyword("VALUES");
            expect_symbol('(');
            ins.values.push_back(value());
            while (accept_symbol(',')) ins.values.push_back(value());
            expect_symbol(')');
            return ins;
        }
        if (kw == "UPDATE") {
            ++pos_;
            Update u;
            u.table = identifier();
            expect_keyword("SET");
            do {
                auto col = identifier();
                expect_symbol('=');
                u.assignments.emplace_back(std::move(col), value());
            } while (accept_symbol(','));
            u.where = where_clause();
            return u;
        }
        if (kw == "CREATE") {
            ++pos_;
            expect_keyword("TABLE");
            CreateTable c;
            c.name = identifier();
            expect_symbol('(');
            c.columns.push_back(identifier());
            while (accept_symbol(',')) c.columns.push_back(identifier());
            expect_symbol(')');
            return c;
        }
        fail("unknown statement");
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<Statement> parse(std::string_view sql) { return Parser(tokenize(sql)).script(); }

// --- rendering -------------------------------------------------------------

std::string quote_literal(std::string_view value) {
    return "'" + text::replace_all(std::string(value), "'", "''") + "'";
}

namespace {

std::string render_operand(const Operand& op) {
    switch (op.kind) {
        case Operand::Kind::column: return op.value;
        case Operand::Kind::literal: return quote_literal(op.value);
        case Operand::Kind::placeholder: return "?";
    }
    return "?";
}

std::string render_condition(const Condition& c) {
    if (c.kind == Condition::Kind::equals) {
        return render_operand(c.lhs) + " = " + render_operand(c.rhs);
    }
    auto op = c.kind == Condition::Kind::all_of ? " AND " : " OR ";
    return "(" + render_condition(c.children.at(0)) + op + render_condition(c.children.at(1)) + ")";
}

std::string render_where(const std::optional<Condition>& where) {
    return where ? " WHERE " + render_condition(*where) : std::string{};
}

struct Renderer {
    std::string operator()(const CreateTable& c) const {
        return "CREATE TABLE " + c.name + " (" + text::join(c.columns, ", ") + ")";
    }
    std::string operator()(const Insert& i) const {
        std::vector<std::string> vals;
        for (const auto& v : i.values) vals.push_back(render_operand(v));
        return "INSERT INTO " + i.table + " VALUES (" + text::join(vals, ", ") + ")";
    }
    std::string operator()(const Select& s) const {
        auto cols = s.columns.empty() ? std::string("*") : text::join(s.columns, ", ");
        return "SELECT " + cols + " FROM " + s.table + render_where(s.where);
    }
    std::string operator()(const Delete& d) const {
        return "DELETE FROM " + d.table + render_where(d.where);
    }
    std::string operator()(const Update& u) const {
        std::vector<std::string> sets;
        for (const auto& [col, v] : u.assignments) sets.push_back(col + " = " + render_operand(v));
        return "UPDATE " + u.table + " SET " + text::join(sets, ", ") + render_where(u.where);
    }
};

void bind_operand(Operand& op, const std::vector<std::string>& params, std::size_t& next) {
    if (op.kind != Operand::Kind::placeholder) return;
    if (next >= params.size()) throw ExecutionError("not enough parameters bound");
    op = Operand::literal(params[next++]);
}

void bind_condition(Condition& c, const std::vector<std::string>& params, std::size_t& next) {
    if (c.kind == Condition::Kind::equals) {
        bind_operand(c.lhs, params, next);
        bind_operand(c.rhs, params, next);
        return;
    }
    for (auto& child : c.children) bind_condition(child, params, next);
}

}  // namespace

std::string render(const Statement& stmt) { return std::visit(Renderer{}, stmt); }

Statement bind(Statement stmt, const std::vector<std::string>& params) {
    std::size_t next = 0;
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Insert>) {
                for (auto& v : s.values) bind_operand(v, params, next);
            } else if constexpr (std::is_same_v<T, Update>) {
                for (auto& [col, v] : s.assignments) bind_operand(v, params, next);
                if (s.where) bind_condition(*s.where, params, next);
            } else if constexpr (std::is_same_v<T, Select> || std::is_same_v<T, Delete>) {
                if (s.where) bind_condition(*s.where, params, next);
            }
        },
        stmt);
    if (next != params.size()) throw ExecutionError("too many parameters bound");
    return stmt;
}

std::string render_result(const ExecResult& result) {
    switch (result.kind) {
        case ExecResult::Kind::rows: {
            std::vector<std::string> lines;
            for (const auto& row : result.rows) lines.push_back(text::join(row, " | "));
            return text::join(lines, "\n");
        }
        case ExecResult::Kind::affected:
            return std::to_string(result.affected) +
                   (result.affected == 1 ? " row affected" : " rows affected");
        case ExecResult::Kind::ok: return "ok";
    }
    return "ok";
}

// --- execution -------------------------------------------------------------

TableStore::TableStore(const TableStore& other) {
    std::shared_lock lock(other.mutex_);
    tables_ = other.tables_;
}

TableStore& TableStore::operator=(const TableStore& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_);
    std::shared_lock other_lock(other.mutex_);
    tables_ = other.tables_;
    return *this;
}

bool TableStore::operator==(const TableStore& other) const {
    if (this == &other) return true;
    std::shared_lock a(mutex_);
    std::shared_lock b(other.mutex_);
    return tables_ == other.tables_;
}

namespace {

std::size_t column_index(const Table& t, std::string_view name) {
    auto lowered = text::to_lower(name);
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (text::to_lower(t.columns[i]) == lowered) return i;
    }
    throw ExecutionError("unknown column '" + std::string(name) + "' in table " + t.name);
}

const std::string& operand_value(const Table& t, const Row& row, const Operand& op) {
    switch (op.kind) {
        case Operand::Kind::column: return row[column_index(t, op.value)];
        case Operand::Kind::literal: return op.value;
        case Operand::Kind::placeholder: break;
    }
    throw ExecutionError("unbound parameter");
}

bool matches(const Table& t, const Row& row, const Condition& c) {
    switch (c.kind) {
        case Condition::Kind::equals:
            return operand_value(t, row, c.lhs) == operand_value(t, row, c.rhs);
        case Condition::Kind::all_of:
            return matches(t, row, c.children.at(0)) && matches(t, row, c.children.at(1));
        case Condition::Kind::any_of:
            return matches(t, row, c.children.at(0)) || matches(t, row, c.children.at(1));
    }
    return false;
}

// Resolves every column reference up front so errors do not depend on row count.
void check_columns(const Table& t, const Condition& c) {
    if (c.kind == Condition::Kind::equals) {
        for (const auto* op : {&c.lhs, &c.rhs}) {
            if (op->kind == Operand::Kind::column) column_index(t, op->value);
            if (op->kind == Operand::Kind::placeholder) throw ExecutionError("unbound parameter");
        }
        return;
    }
    for (const auto& child : c.children) check_columns(t, child);
}

bool row_matches(const Table& t, const Row& row, const std::optional<Condition>& where) {
    return !where || matches(t, row, *where);
}

const std::string& literal_of(const Operand& op) {
    if (op.kind != Operand::Kind::literal) throw ExecutionError("unbound parameter");
    return op.value;
}

}  // namespace

ExecResult TableStore::execute(const Statement& stmt) {
    std::scoped_lock lock(mutex_);
    return execute_locked(stmt);
}

std::vector<ExecResult> TableStore::execute_script(std::string_view sql) {
    auto statements = parse(sql);
    std::vector<ExecResult> out;
    std::scoped_lock lock(mutex_);
    for (const auto& s : statements) out.push_back(execute_locked(s));
    return out;
}

ExecResult TableStore::execute_locked(const Statement& stmt) {
    auto lookup = [&](const std::string& name) -> Table& {
        auto it = tables_.find(text::to_lower(name));
        if (it == tables_.end()) throw ExecutionError("no such table: " + name);
        return it->second;
    };

    ExecResult out;
    if (const auto* c = std::get_if<CreateTable>(&stmt)) {
        auto key = text::to_lower(c->name);
        if (tables_.count(key)) throw ExecutionError("table already exists: " + c->name);
        std::set<std::string> seen;
        for (const auto& col : c->columns) {
            if (!seen.insert(text::to_lower(col)).second) {
                throw ExecutionError("duplicate column: " + col);
            }
        }
        tables_[key] = Table{c->name, c->columns, {}};
        out.kind = ExecResult::Kind::ok;
    } else if (const auto* ins = std::get_if<Insert>(&stmt)) {
        auto& t = lookup(ins->table);
        if (ins->values.size() != t.columns.size()) {
            throw ExecutionError("table " + t.name + " has " + std::to_string(t.columns.size()) +
                                 " columns but " + std::to_string(ins->values.size()) +
                                 " values were supplied");
        }
        Row row;
        for (const auto& v : ins->values) row.push_back(literal_of(v));
        t.rows.push_back(std::move(row));
        out.kind = ExecResult::Kind::affected;
        out.affected = 1;
    } else if (const auto* sel = std::get_if<Select>(&stmt)) {
        const auto& t = lookup(sel->table);
        std::vector<std::size_t> idx;
        if (sel->columns.empty()) {
            for (std::size_t i = 0; i < t.columns.size(); ++i) idx.push_back(i);
            out.columns = t.columns;
        } else {
            for (const auto& col : sel->columns) {
                idx.push_back(column_index(t, col));
                out.columns.push_back(t.columns[idx.back()]);
            }
        }
        if (sel->where) check_columns(t, *sel->where);
        out.kind = ExecResult::Kind::rows;
        for (const auto& row : t.rows) {
            if (!row_matches(t, row, sel->where)) continue;
            Row projected;
            for (auto i : idx) projected.push_back(row[i]);
            out.rows.push_back(std::move(projected));
        }
    } else if (const auto* del = std::get_if<Delete>(&stmt)) {
        auto& t = lookup(del->table);
        if (del->where) check_columns(t, *del->where);
        auto before = t.rows.size();
        std::erase_if(t.rows, [&](const Row& row) { return row_matches(t, row, del->where); });
        out.kind = ExecResult::Kind::affected;
        out.affected = before - t.rows.size();
    } else if (const auto* up = std::get_if<Update>(&stmt)) {
        auto& t = lookup(up->table);
        if (up->where) check_columns(t, *up->where);
        std::vector<std::pair<std::size_t, std::string>> sets;
        for (const auto& [col, v] : up->assignments) sets.emplace_back(column_index(t, col), literal_of(v));
        out.kind = ExecResult::Kind::affected;
        for (auto& row : t.rows) {
            if (!row_matches(t, row, up->where)) continue;
            for (const auto& [i, v] : sets) row[i] = v;
            ++out.affected;
        }
    }
    return out;
}

std::optional<Table> TableStore::table(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = tables_.find(text::to_lower(name));
    if (it == tables_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> TableStore::table_names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [key, t] : tables_) out.push_back(t.name);
    return out;
}

json TableStore::to_json() const {
    std::shared_lock lock(mutex_);
    json tables = json::object();
    for (const auto& [key, t] : tables_) {
        tables[t.name] = {{"columns", t.columns}, {"rows", t.rows}};
    }
    return json{{"tables", tables}};
}

TableStore TableStore::from_json(const json& doc) {
    TableStore store;
    try {
        for (const auto& [name, t] : doc.at("tables").items()) {
            Table table{name, t.at("columns").get<std::vector<std::string>>(),
                        t.value("rows", std::vector<Row>{})};
            for (const auto& row : table.rows) {
                if (row.size() != table.columns.size()) {
                    throw ExecutionError("row arity mismatch in table " + name);
                }
            }
            auto key = text::to_lower(name);
            if (store.tables_.count(key)) throw ExecutionError("duplicate table: " + name);
            store.tables_[key] = std::move(table);
        }
    } catch (const json::exception& e) {
        throw ExecutionError(std::string("malformed database file: ") + e.what());
    }
    return store;
}

}  // namespace agentlab::sql
