// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentlab::model {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct GenerationParams {
    double temperature = 0.7;
    int max_tokens = 512;
    int context_window = 4096;
    bool streaming = false;
    bool safety = false;
    std::vector<std::string> stop_sequences;

    /// Throws ValidationError when a field is out of range.
    void validate() const;
};

struct Exemplar {
    std::string input;
    std::string output;
};

enum class PromptStrategy { zero_shot, one_shot, few_shot };

struct PromptSpec {
    std::string instruction;
    std::optional<std::string> input_data;
    std::optional<std::string> context;
    std::optional<std::string> output_indicator;
    std::vector<Exemplar> exemplars;
    bool chain_of_thought = false;

    PromptStrategy strategy() const noexcept {
        if (exemplars.empty()) return PromptStrategy::zero_shot;
        return exemplars.size() == 1 ? PromptStrategy::one_shot : PromptStrategy::few_shot;
    }
};

inline constexpr std::string_view kChainOfThoughtCue = "Let's think step by step.";
inline constexpr std::string_view kSafetyPrompt = "Refuse requests for harmful content.";
inline constexpr std::string_view kFallbackResponse = "I don't know.";

enum class MatchKind { substring, regex };
enum class MatchTarget { full_prompt, last_observation, question };

struct ScriptRule {
    MatchKind match_kind = MatchKind::substring;
    MatchTarget target = MatchTarget::full_prompt;
    std::string pattern;
    // Placeholders: {question}, {last_observation}, {0}..{9} (regex groups).
    std::string response;
};

/// Deterministic stand-in for a model. The three flags simulate known
/// failure modes of instruction-following models and are evaluated before
/// the rules, in declaration order.
struct ScriptedBehavior {
    std::vector<ScriptRule> rules;
    bool obey_observation_actions = false;
    bool obey_ignore_marker = false;
    bool leak_system_prompt = false;
};

enum class Backend { scripted, http_chat };

/// Currency amount held as an integer count of 1e-9 units so sums are exact.
struct Cost {
    std::int64_t nano = 0;

    Cost& operator+=(Cost other) noexcept {
        nano += other.nano;
        return *this;
    }
    friend Cost operator+(Cost a, Cost b) noexcept { return a += b; }
    auto operator<=>(const Cost&) const = default;

    double to_double() const noexcept { return static_cast<double>(nano) / 1e9; }
    /// Exact decimal with at least six fractional digits, e.g. "1.250000".
    std::string to_string() const;
};

/// Converts a decimal price per 1k tokens into integer micro-units.
std::int64_t price_to_micro(double price_per_1k);

struct ModelSpec {
    std::string id;
    Backend backend = Backend::scripted;
    std::string base_url;
    std::string api_key_env;
    // Model name sent on the wire; defaults to id.
    std::string remote_model;
    std::int64_t price_in_micro_per_1k = 0;
    std::int64_t price_out_micro_per_1k = 0;
    ScriptedBehavior script;

    const std::string& wire_model() const { return remote_model.empty() ? id : remote_model; }
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    Usage& operator+=(const Usage& other) noexcept {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
    friend Usage operator+(Usage a, const Usage& b) noexcept { return a += b; }
    bool operator==(const Usage&) const = default;
};

struct Completion {
    std::string text;
    Usage usage;
    std::string model_id;
    // True when usage was computed with estimate_tokens rather than reported.
    bool usage_estimated = false;
};

using DeltaSink = std::function<void(std::string_view)>;

/// Renders a prompt as a system message (the instruction) and one user
/// message holding exemplars, then Input/Context/Output sections.
std::vector<Message> build_prompt(const PromptSpec& spec);

/// ceil(bytes / 4).
std::int64_t estimate_tokens(std::string_view text) noexcept;

Cost cost_of(const Usage& usage, const ModelSpec& model) noexcept;

/// Sends messages to the model's backend. When params.streaming is set and
/// on_delta is provided, text is also delivered as ordered increments.
Completion complete(const ModelSpec& model, const std::vector<Message>& messages,
                    const GenerationParams& params, const DeltaSink& on_delta = {});

/// The parts of a rendered prompt the scripted backend matches against.
struct PromptView {
    std::string full_prompt;
    std::string question;
    std::string last_observation;
    std::string system_text;
};

PromptView analyze_prompt(const std::vector<Message>& messages);

/// Pure evaluation of a scripted behavior against a prompt.
std::string scripted_response(const ScriptedBehavior& behavior, const PromptView& view);

struct ComparisonRow {
    std::string model_id;
    std::string text;
    Usage usage;
    Cost cost;
    std::optional<std::string> error;
};

struct ComparisonReport {
    std::vector<Message> prompt;
    std::vector<ComparisonRow> rows;
};

ComparisonReport prompt_lab(const PromptSpec& spec, const std::vector<ModelSpec>& models,
                            const GenerationParams& params);

struct Config {
    std::vector<ModelSpec> models;
    GenerationParams defaults;

    const ModelSpec* find(std::string_view id) const;
    const ModelSpec& require(std::string_view id) const;
};

Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);

// JSON mappings shared by the trace, report, and config formats.
nlohmann::json to_json(const Usage& usage);
nlohmann::json to_json(const ModelSpec& model);
nlohmann::json to_json(const ComparisonReport& report);
PromptSpec prompt_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PromptSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc);
GenerationParams params_from_json(const nlohmann::json& doc, GenerationParams base = {});

}  // namespace agentlab::model
