// SPDX-License-Identifier: Apache-2.0
// Reference implementations written independently of the library. Shared by
// the unit tests and the acceptance runner.
#pragma once

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab::oracle {

// --- embeddings --------------------------------------------------------------

inline std::uint64_t fnv(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::vector<double> embed(const std::string& text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        auto h = fnv(tok);
        v[h % dim] += (h >> 63) ? -1.0 : 1.0;
        tok.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            tok += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            flush();
        }
    }
    flush();
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
        for (double& x : v) x /= n;
    }
    return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// --- codecs ------------------------------------------------------------------

inline std::string hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : bytes) {
        out += digits[c >> 4];
        out += digits[c & 0xf];
    }
    return out;
}

inline std::string base64(const std::string& bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::string xor_with(const std::string& bytes, std::uint8_t key) {
    std::string out = bytes;
    for (auto& c : out) c = static_cast<char>(static_cast<unsigned char>(c) ^ key);
    return out;
}

// --- SQL WHERE conditions ------------------------------------------------------
// Trees over columns c0..cN of a table of strings, rendered with their own
// quoting and evaluated directly.

struct Term {
    bool is_column = false;
    std::size_t column = 0;
    std::string literal;
};

struct Cond {
    enum Kind { eq, conj, disj } kind = eq;
    Term lhs, rhs;
    std::unique_ptr<Cond> a, b;
};

inline std::string sql_quote(const std::string& v) {
    std::string out = "'";
    for (char c : v) {
        out += c;
        if (c == '\'') out += '\'';
    }
    return out + "'";
}

inline std::string term_sql(const Term& t) {
    return t.is_column ? "c" + std::to_string(t.column) : sql_quote(t.literal);
}

inline std::string cond_sql(const Cond& c) {
    switch (c.kind) {
        case Cond::eq: return term_sql(c.lhs) + " = " + term_sql(c.rhs);
        case Cond::conj: return "(" + cond_sql(*c.a) + " AND " + cond_sql(*c.b) + ")";
        case Cond::disj: return "(" + cond_sql(*c.a) + " OR " + cond_sql(*c.b) + ")";
    }
    return {};
}

inline const std::string& term_value(const Term& t, const std::vector<std::string>& row) {
    return t.is_column ? row[t.column] : t.literal;
}

inline bool cond_eval(const Cond& c, const std::vector<std::string>& row) {
    switch (c.kind) {
        case Cond::eq: return term_value(c.lhs, row) == term_value(c.rhs, row);
        case Cond::conj: return cond_eval(*c.a, row) && cond_eval(*c.b, row);
        case Cond::disj: return cond_eval(*c.a, row) || cond_eval(*c.b, row);
    }
    return false;
}

inline const std::vector<std::string> kSqlValues = {"a", "b", "c", "it's", "", "x y", "1"};

inline Term random_term(std::mt19937& rng, std::size_t ncols) {
    Term t;
    t.is_column = rng() % 3 != 0;
    t.column = rng() % ncols;
    t.literal = kSqlValues[rng() % kSqlValues.size()];
    return t;
}

inline std::unique_ptr<Cond> random_cond(std::mt19937& rng, std::size_t ncols, int depth) {
    auto c = std::make_unique<Cond>();
    if (depth == 0 || rng() % 3 == 0) {
        c->lhs = random_term(rng, ncols);
        c->rhs = random_term(rng, ncols);
        return c;
    }
    c->kind = rng() % 2 ? Cond::conj : Cond::disj;
    c->a = random_cond(rng, ncols, depth - 1);
    c->b = random_cond(rng, ncols, depth - 1);
    return c;
}

// --- ReAct keyword lines -------------------------------------------------------

/// True when some line, after leading/trailing blanks, starts with a ReAct
/// keyword (case-insensitive).
inline bool has_keyword_line(const std::string& s) {
    static const std::vector<std::string> kKeywords = {"thought:",      "action:",      "action input:",
                                                       "final answer:", "observation:", "question:"};
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string::npos) end = s.size();
        std::string line = s.substr(start, end - start);
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::string lower;
        for (std::size_t j = i; j < line.size(); ++j) {
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(line[j])));
        }
        for (const auto& k : kKeywords) {
            if (lower.rfind(k, 0) == 0) return true;
        }
        start = end + 1;
    }
    return false;
}

}  // namespace agentlab::oracle
