// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/model.hpp"

namespace agentlab::agent {

// --- tools -----------------------------------------------------------------

enum class ConstraintKind { alphanumeric, regex, max_length, one_of };

/// A single input check. Constraints on a tool are conjunctive and run in
/// declaration order.
struct FieldConstraint {
    std::string name;
    ConstraintKind kind = ConstraintKind::alphanumeric;
    std::string pattern;              // regex (full match)
    std::size_t limit = 0;            // max_length
    std::vector<std::string> values;  // one_of

    static FieldConstraint alphanumeric();
    static FieldConstraint regex(std::string pattern);
    static FieldConstraint max_length(std::size_t n);
    static FieldConstraint one_of(std::vector<std::string> values);
};

using ToolHandler = std::function<std::string(const std::string&)>;

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<FieldConstraint> constraints;
    ToolHandler handler;
};

/// Ordered set of tools with unique names.
class ToolRegistry {
public:
    ToolRegistry() = default;
    ToolRegistry(std::initializer_list<ToolSpec> tools);

    /// Throws ValidationError on a bad name, empty description, or duplicate.
    void add(ToolSpec tool);
    const ToolSpec* find(std::string_view name) const;
    const std::vector<ToolSpec>& tools() const noexcept { return tools_; }
    std::vector<std::string> names() const;
    bool empty() const noexcept { return tools_.empty(); }

private:
    std::vector<ToolSpec> tools_;
};

struct ValidationFailure {
    std::string constraint;
    std::string excerpt;

    std::string message() const;
};

using Validated = std::variant<std::string, ValidationFailure>;

Validated validate_input(const ToolSpec& tool, const std::string& input);

// --- ReAct -----------------------------------------------------------------

struct ToolAction {
    std::string tool;
    std::string input;
    bool operator==(const ToolAction&) const = default;
};

struct AgentStep {
    std::string thought;
    std::optional<ToolAction> action;
    std::optional<std::string> observation;
};

struct AgentConfig {
    ToolRegistry tools;
    model::ModelSpec model;
    std::size_t max_iterations = 8;
    bool sanitize_observations = false;
    model::GenerationParams params;
};

std::string render_react_prompt(const AgentConfig& config, const std::string& question,
                                const std::vector<AgentStep>& history);

/// Renders one history step exactly as it appears in the scratchpad.
std::string render_step(const AgentStep& step);

struct FinalAnswer {
    std::string text;
    bool operator==(const FinalAnswer&) const = default;
};

struct OutputParseError {
    std::string text;
};

struct ParsedOutput {
    std::string thought;
    std::variant<ToolAction, FinalAnswer, OutputParseError> result;

    bool is_action() const { return std::holds_alternative<ToolAction>(result); }
    bool is_final() const { return std::holds_alternative<FinalAnswer>(result); }
    bool is_error() const { return std::holds_alternative<OutputParseError>(result); }
};

/// First marker wins: whichever of "Action:" or "Final Answer:" starts a
/// line first decides the result.
ParsedOutput parse_model_output(std::string_view text);

/// Quotes every keyword-initial line with "> " so retrieved data cannot
/// masquerade as agent control lines. Idempotent.
std::string sanitize_observation(std::string_view text);

inline constexpr std::string_view kRetryInstruction = "Respond in the required format.";

// --- tracing ---------------------------------------------------------------

enum class OutcomeKind { final_answer, max_iterations_exceeded, aborted };

struct Outcome {
    OutcomeKind kind = OutcomeKind::aborted;
    std::string text;  // the answer, or the abort reason
};

struct CallRecord {
    model::Usage usage;
    model::Cost cost;
};

struct AgentTrace {
    std::string question;
    std::vector<AgentStep> steps;
    Outcome outcome;
    model::Usage usage;
    model::Cost cost;
    std::vector<CallRecord> calls;

    std::optional<std::string> final_answer() const {
        if (outcome.kind != OutcomeKind::final_answer) return std::nullopt;
        return outcome.text;
    }
};

AgentTrace run_agent(const AgentConfig& config, const std::string& question);

struct TraceSummary {
    std::size_t steps = 0;
    model::Usage usage;
    model::Cost cost;
    std::vector<std::string> tools_used;
};

TraceSummary trace_summary(const AgentTrace& trace);

std::string_view to_string(OutcomeKind kind);

nlohmann::json to_json(const AgentTrace& trace);
AgentTrace trace_from_json(const nlohmann::json& doc);

}  // namespace agentlab::agent
