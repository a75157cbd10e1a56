// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/error.hpp"
#include "agentlab/model.hpp"

// Known-answer benchmarking: every case has a machine-checkable expected
// result, so model output is graded rather than eyeballed.
namespace agentlab::bench {

enum class Scheme { hex, base64, xor_hex };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);

std::string hex_encode(std::string_view bytes);
/// Throws ValidationError on odd length or non-hex digits.
std::string hex_decode(std::string_view hex);
std::string base64_encode(std::string_view bytes);
/// Strict RFC 4648 (padded, standard alphabet). Throws ValidationError.
std::string base64_decode(std::string_view b64);
std::string xor_bytes(std::string_view bytes, std::uint8_t key);

/// xor_hex renders the XOR-ed bytes as lowercase hex.
std::string encode_payload(Scheme scheme, std::string_view plaintext, std::uint8_t key = 0);
std::string decode_payload(Scheme scheme, std::string_view payload, std::uint8_t key = 0);

struct Validator {
    enum class Kind { exact, regex, contains_all, decode_oracle };
    Kind kind = Kind::exact;
    std::string pattern;             // regex, full match
    std::vector<std::string> terms;  // contains_all, case-insensitive
    Scheme scheme = Scheme::hex;     // decode_oracle
    std::uint8_t key = 0;            // decode_oracle with xor_hex

    /// Keyword checks cannot confirm correctness, only plausibility.
    bool weak() const noexcept { return kind == Kind::contains_all; }
};

struct TaskCase {
    std::string id;
    model::PromptSpec prompt;
    std::string expected;
    Validator validator;
    std::optional<std::string> payload;
    std::string note;  // documents the validator's tolerance, if any
};

struct Suite {
    std::string id;
    std::vector<TaskCase> cases;
};

TaskCase make_deobf_case(Scheme scheme, const std::string& plaintext,
                         std::optional<std::uint8_t> key = std::nullopt, std::string id = {});

struct Verdict {
    bool pass = false;
    std::string detail;
};

Verdict validate_output(const Validator& v, std::string_view output, const TaskCase& tc);

/// Throws ParseError (with line) for malformed JSON, ConfigError for a bad
/// validator such as an invalid regex or inconsistent decode case.
Suite parse_suite(std::string_view text);
Suite load_suite(const std::filesystem::path& path);
nlohmann::json to_json(const Suite& suite);

struct BenchRow {
    std::string model_id;
    std::string case_id;
    bool pass = false;
    std::string detail;
    model::Usage usage;
    model::Cost cost;
    double latency_ms = 0.0;
    bool weak_validation = false;
};

struct ModelAggregate {
    std::string model_id;
    std::size_t passes = 0;
    std::size_t cases = 0;

    double pass_rate() const noexcept {
        return cases == 0 ? 0.0 : static_cast<double>(passes) / static_cast<double>(cases);
    }
};

struct BenchReport {
    std::string suite_id;
    std::vector<BenchRow> rows;              // sorted by (model_id, case_id)
    std::vector<ModelAggregate> aggregates;  // sorted by model_id
};

BenchReport run_suite(const Suite& suite, const std::vector<model::ModelSpec>& models,
                      const model::GenerationParams& params);

enum class ReportFormat { text, json, markdown };

std::string render_report(const BenchReport& report, ReportFormat format);
nlohmann::json to_json(const BenchReport& report);

}  // namespace agentlab::bench
