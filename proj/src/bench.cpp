// SPDX-License-Identifier: Apache-2.0
#include "agentlab/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <regex>
#include <set>
#include <sstream>

#include "agentlab/error.hpp"
#include "agentlab/text.hpp"

namespace agentlab::bench {

using nlohmann::json;

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::hex: return "hex";
        case Scheme::base64: return "base64";
        case Scheme::xor_hex: return "xor";
    }
    return "hex";
}

Scheme scheme_from_string(std::string_view name) {
    if (name == "hex") return Scheme::hex;
    if (name == "base64") return Scheme::base64;
    if (name == "xor") return Scheme::xor_hex;
    throw ConfigError("unknown encoding scheme: " + std::string(name));
}

// --- encodings -------------------------------------------------------------

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string hex_encode(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out += kHexDigits[b >> 4];
        out += kHexDigits[b & 0x0f];
    }
    return out;
}

std::string hex_decode(std::string_view hex) {
    if (hex.size() % 2 != 0) throw ValidationError("hex payload has odd length");
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_value(hex[i]);
        int lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) throw ValidationError("invalid hex digit in payload");
        out += static_cast<char>((hi << 4) | lo);
    }
    return out;
}

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                          (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                          static_cast<unsigned char>(bytes[i + 2]);
        out += kB64[(n >> 18) & 63];
        out += kB64[(n >> 12) & 63];
        out += kB64[(n >> 6) & 63];
        out += kB64[n & 63];
    }
    auto rest = bytes.size() - i;
    if (rest == 1) {
        std::uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
        out += kB64[(n >> 18) & 63];
        out += kB64[(n >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                          (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += kB64[(n >> 18) & 63];
        out += kB64[(n >> 12) & 63];
        out += kB64[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

std::string base64_decode(std::string_view b64) {
    if (b64.size() % 4 != 0) throw ValidationError("base64 payload length is not a multiple of 4");
    std::string out;
    out.reserve(b64.size() / 4 * 3);
    for (std::size_t i = 0; i < b64.size(); i += 4) {
        bool last = i + 4 == b64.size();
        int pad = 0;
        if (last) {
            if (b64[i + 3] == '=') ++pad;
            if (b64[i + 2] == '=') ++pad;
            if (pad == 1 && b64[i + 2] == '=') throw ValidationError("malformed base64 padding");
        }
        std::uint32_t n = 0;
        for (int j = 0; j < 4; ++j) {
            int v = 0;
            if (j < 4 - pad) {
                v = b64_value(b64[i + j]);
                if (v < 0) throw ValidationError("invalid base64 character in payload");
            }
            n = (n << 6) | static_cast<std::uint32_t>(v);
        }
        out += static_cast<char>((n >> 16) & 0xff);
        if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
        if (pad < 1) out += static_cast<char>(n & 0xff);
    }
    return out;
}

std::string xor_bytes(std::string_view bytes, std::uint8_t key) {
    std::string out(bytes);
    for (auto& c : out) c = static_cast<char>(static_cast<unsigned char>(c) ^ key);
    return out;
}

std::string encode_payload(Scheme scheme, std::string_view plaintext, std::uint8_t key) {
    switch (scheme) {
        case Scheme::hex: return hex_encode(plaintext);
        case Scheme::base64: return base64_encode(plaintext);
        case Scheme::xor_hex: return hex_encode(xor_bytes(plaintext, key));
    }
    return {};
}

std::string decode_payload(Scheme scheme, std::string_view payload, std::uint8_t key) {
    switch (scheme) {
        case Scheme::hex: return hex_decode(payload);
        case Scheme::base64: return base64_decode(payload);
        case Scheme::xor_hex: return xor_bytes(hex_decode(payload), key);
    }
    return {};
}

// --- cases -----------------------------------------------------------------

TaskCase make_deobf_case(Scheme scheme, const std::string& plaintext,
                         std::optional<std::uint8_t> key, std::string id) {
    if (scheme == Scheme::xor_hex && !key) throw ValidationError("xor cases need a key");
    std::uint8_t k = key.value_or(0);

    TaskCase tc;
    tc.payload = encode_payload(scheme, plaintext, k);
    tc.expected = plaintext;
    tc.validator.kind = Validator::Kind::decode_oracle;
    tc.validator.scheme = scheme;
    tc.validator.key = k;
    tc.id = id.empty() ? std::string(to_string(scheme)) + "-" + tc.payload.value().substr(0, 24)
                       : std::move(id);
    switch (scheme) {
        case Scheme::hex:
            tc.prompt.instruction =
                "The following string is hex-encoded. Decode it and reply with the decoded text only.";
            break;
        case Scheme::base64:
            tc.prompt.instruction =
                "The following string is base64-encoded. Decode it and reply with the decoded text "
                "only.";
            break;
        case Scheme::xor_hex: {
            char buf[8];
            std::snprintf(buf, sizeof buf, "0x%02x", k);
            tc.prompt.instruction =
                std::string("The following hex string is data XOR-encrypted with the single-byte key ") +
                buf + ". Decrypt it and reply with the plaintext only.";
            break;
        }
    }
    tc.prompt.input_data = tc.payload;
    return tc;
}

Verdict validate_output(const Validator& v, std::string_view output, const TaskCase& tc) {
    auto trimmed = text::trim(output);
    switch (v.kind) {
        case Validator::Kind::exact: {
            auto expected = text::trim(tc.expected);
            if (trimmed == expected) return {true, "exact match"};
            return {false, "expected \"" + std::string(expected) + "\""};
        }
        case Validator::Kind::regex: {
            std::regex re(v.pattern);
            if (std::regex_match(trimmed.begin(), trimmed.end(), re)) return {true, "regex match"};
            return {false, "output does not match /" + v.pattern + "/"};
        }
        case Validator::Kind::contains_all: {
            std::vector<std::string> missing;
            for (const auto& term : v.terms) {
                if (!text::icontains(output, term)) missing.push_back(term);
            }
            if (missing.empty()) return {true, "all terms present"};
            return {false, "missing terms: " + text::join(missing, ", ")};
        }
        case Validator::Kind::decode_oracle: {
            if (!tc.payload) return {false, "case has no payload"};
            std::string decoded;
            try {
                decoded = decode_payload(v.scheme, *tc.payload, v.key);
            } catch (const ValidationError& e) {
                return {false, std::string("payload does not decode: ") + e.what()};
            }
            if (trimmed == decoded) return {true, "decodes to expected plaintext"};
            return {false, "expected decoded text \"" + decoded + "\""};
        }
    }
    return {false, "unknown validator"};
}

// --- suite files -----------------------------------------------------------

namespace {

Validator validator_from_json(const json& j, const std::string& case_id) {
    Validator v;
    auto kind = j.at("kind").get<std::string>();
    if (kind == "exact") {
        v.kind = Validator::Kind::exact;
    } else if (kind == "regex") {
        v.kind = Validator::Kind::regex;
        v.pattern = j.at("pattern").get<std::string>();
        try {
            std::regex check(v.pattern);
        } catch (const std::regex_error& e) {
            throw ConfigError("case " + case_id + ": invalid regex /" + v.pattern + "/: " + e.what());
        }
    } else if (kind == "contains_all") {
        v.kind = Validator::Kind::contains_all;
        v.terms = j.at("terms").get<std::vector<std::string>>();
        if (v.terms.empty()) throw ConfigError("case " + case_id + ": contains_all needs terms");
    } else if (kind == "decode_oracle") {
        v.kind = Validator::Kind::decode_oracle;
        v.scheme = scheme_from_string(j.at("scheme").get<std::string>());
        auto key = j.value("key", 0);
        if (key < 0 || key > 255) throw ConfigError("case " + case_id + ": key must be a byte");
        v.key = static_cast<std::uint8_t>(key);
        if (v.scheme == Scheme::xor_hex && !j.contains("key")) {
            throw ConfigError("case " + case_id + ": xor validator needs a key");
        }
    } else {
        throw ConfigError("case " + case_id + ": unknown validator kind " + kind);
    }
    return v;
}

json validator_to_json(const Validator& v) {
    switch (v.kind) {
        case Validator::Kind::exact: return {{"kind", "exact"}};
        case Validator::Kind::regex: return {{"kind", "regex"}, {"pattern", v.pattern}};
        case Validator::Kind::contains_all: return {{"kind", "contains_all"}, {"terms", v.terms}};
        case Validator::Kind::decode_oracle: {
            json out{{"kind", "decode_oracle"}, {"scheme", to_string(v.scheme)}};
            if (v.scheme == Scheme::xor_hex) out["key"] = v.key;
            return out;
        }
    }
    return {};
}

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

Suite parse_suite(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and points just past the offending character.
        throw ParseError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
    Suite suite;
    std::set<std::string> ids;
    try {
        suite.id = doc.at("id").get<std::string>();
        for (const auto& c : doc.at("cases")) {
            TaskCase tc;
            tc.id = c.at("id").get<std::string>();
            if (!ids.insert(tc.id).second) throw ConfigError("duplicate case id: " + tc.id);
            tc.prompt = model::prompt_spec_from_json(c.at("prompt"));
            tc.expected = c.value("expected", std::string{});
            if (c.contains("payload") && !c["payload"].is_null()) tc.payload = c["payload"].get<std::string>();
            tc.note = c.value("note", std::string{});
            tc.validator = validator_from_json(c.at("validator"), tc.id);
            if (tc.validator.kind == Validator::Kind::decode_oracle) {
                if (!tc.payload) throw ConfigError("case " + tc.id + ": decode_oracle needs a payload");
                std::string decoded;
                try {
                    decoded = decode_payload(tc.validator.scheme, *tc.payload, tc.validator.key);
                } catch (const ValidationError& e) {
                    throw ConfigError("case " + tc.id + ": " + e.what());
                }
                if (decoded != tc.expected) {
                    throw ConfigError("case " + tc.id + ": expected does not match decoded payload");
                }
            }
            suite.cases.push_back(std::move(tc));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed suite: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("malformed suite: ") + e.what());
    }
    if (suite.cases.empty()) throw ConfigError("suite " + suite.id + " has no cases");
    return suite;
}

Suite load_suite(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read suite " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_suite(buf.str());
}

json to_json(const Suite& suite) {
    json cases = json::array();
    for (const auto& tc : suite.cases) {
        json c{{"id", tc.id},
               {"prompt", model::to_json(tc.prompt)},
               {"expected", tc.expected},
               {"validator", validator_to_json(tc.validator)}};
        if (tc.payload) c["payload"] = *tc.payload;
        if (!tc.note.empty()) c["note"] = tc.note;
        cases.push_back(std::move(c));
    }
    return json{{"id", suite.id}, {"cases", cases}};
}

// --- running ---------------------------------------------------------------

namespace {

std::vector<BenchRow> run_model(const Suite& suite, const model::ModelSpec& m,
                                const model::GenerationParams& params) {
    std::vector<BenchRow> rows;
    for (const auto& tc : suite.cases) {
        BenchRow row;
        row.model_id = m.id;
        row.case_id = tc.id;
        row.weak_validation = tc.validator.weak();
        auto start = std::chrono::steady_clock::now();
        try {
            auto c = model::complete(m, model::build_prompt(tc.prompt), params);
            row.usage = c.usage;
            row.cost = model::cost_of(c.usage, m);
            auto verdict = validate_output(tc.validator, c.text, tc);
            row.pass = verdict.pass;
            row.detail = std::move(verdict.detail);
        } catch (const std::exception& e) {
            row.pass = false;
            row.detail = std::string("error: ") + e.what();
        }
        auto elapsed = std::chrono::steady_clock::now() - start;
        row.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

BenchReport run_suite(const Suite& suite, const std::vector<model::ModelSpec>& models,
                      const model::GenerationParams& params) {
    if (suite.cases.empty()) throw ValidationError("suite has no cases");
    if (models.empty()) throw ValidationError("run_suite needs at least one model");
    params.validate();

    std::vector<std::future<std::vector<BenchRow>>> pending;
    for (const auto& m : models) {
        pending.push_back(std::async(std::launch::async, run_model, std::cref(suite), std::cref(m),
                                     std::cref(params)));
    }
    BenchReport report;
    report.suite_id = suite.id;
    for (auto& f : pending) {
        for (auto& row : f.get()) report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.model_id, a.case_id) < std::tie(b.model_id, b.case_id);
    });
    for (const auto& row : report.rows) {
        if (report.aggregates.empty() || report.aggregates.back().model_id != row.model_id) {
            report.aggregates.push_back({row.model_id, 0, 0});
        }
        auto& agg = report.aggregates.back();
        ++agg.cases;
        if (row.pass) ++agg.passes;
    }
    return report;
}

// --- rendering -------------------------------------------------------------

json to_json(const BenchReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"model_id", r.model_id},
                        {"case_id", r.case_id},
                        {"pass", r.pass},
                        {"detail", r.detail},
                        {"usage", model::to_json(r.usage)},
                        {"cost", r.cost.to_double()},
                        {"latency_ms", r.latency_ms},
                        {"weak_validation", r.weak_validation}});
    }
    json aggregates = json::array();
    for (const auto& a : report.aggregates) {
        aggregates.push_back({{"model_id", a.model_id},
                              {"passes", a.passes},
                              {"cases", a.cases},
                              {"pass_rate", a.pass_rate()}});
    }
    return json{{"suite_id", report.suite_id}, {"rows", rows}, {"aggregates", aggregates}};
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::vector<std::string>> table_cells(const BenchReport& report) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"MODEL", "CASE", "RESULT", "TOKENS", "COST", "LATENCY_MS", "NOTE", "DETAIL"});
    for (const auto& r : report.rows) {
        cells.push_back({r.model_id, r.case_id, r.pass ? "PASS" : "FAIL",
                         std::to_string(r.usage.prompt_tokens) + "/" +
                             std::to_string(r.usage.completion_tokens),
                         r.cost.to_string(), fixed(r.latency_ms, 1),
                         r.weak_validation ? "weak validation" : "", r.detail});
    }
    return cells;
}

std::string md_escape(const std::string& s) {
    return text::replace_all(text::replace_all(s, "|", "\\|"), "\n", " ");
}

}  // namespace

std::string render_report(const BenchReport& report, ReportFormat format) {
    if (format == ReportFormat::json) return to_json(report).dump(2) + "\n";

    auto cells = table_cells(report);
    std::ostringstream out;
    if (format == ReportFormat::markdown) {
        out << "## Benchmark " << md_escape(report.suite_id) << "\n\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << "|";
            for (const auto& c : cells[i]) out << " " << md_escape(c) << " |";
            out << "\n";
            if (i == 0) {
                out << "|";
                for (std::size_t j = 0; j < cells[i].size(); ++j) out << " --- |";
                out << "\n";
            }
        }
        out << "\n| model | passed | cases | pass rate |\n| --- | --- | --- | --- |\n";
        for (const auto& a : report.aggregates) {
            out << "| " << md_escape(a.model_id) << " | " << a.passes << " | " << a.cases << " | "
                << fixed(a.pass_rate(), 4) << " |\n";
        }
        return out.str();
    }

    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& row : cells) {
        for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], row[j].size());
    }
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t j = 0; j < row.size(); ++j) {
            line += row[j];
            if (j + 1 < row.size()) line += std::string(widths[j] - row[j].size() + 2, ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << "\n";
    }
    out << "\n";
    for (const auto& a : report.aggregates) {
        out << a.model_id << ": " << a.passes << "/" << a.cases << " passed (pass rate "
            << fixed(a.pass_rate(), 4) << ")\n";
    }
    return out.str();
}

}  // namespace agentlab::bench
