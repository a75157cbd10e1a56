// SPDX-License-Identifier: Apache-2.0
#include "agentlab/agent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "agentlab/error.hpp"
#include "agentlab/text.hpp"

namespace agentlab::agent {

using nlohmann::json;

FieldConstraint FieldConstraint::alphanumeric() {
    return FieldConstraint{"alphanumeric", ConstraintKind::alphanumeric, {}, 0, {}};
}

FieldConstraint FieldConstraint::regex(std::string pattern) {
    std::regex check(pattern);  // throws std::regex_error on a bad pattern
    return FieldConstraint{"regex", ConstraintKind::regex, std::move(pattern), 0, {}};
}

FieldConstraint FieldConstraint::max_length(std::size_t n) {
    return FieldConstraint{"max_length", ConstraintKind::max_length, {}, n, {}};
}

FieldConstraint FieldConstraint::one_of(std::vector<std::string> values) {
    return FieldConstraint{"enum", ConstraintKind::one_of, {}, 0, std::move(values)};
}

ToolRegistry::ToolRegistry(std::initializer_list<ToolSpec> tools) {
    for (const auto& t : tools) add(t);
}

void ToolRegistry::add(ToolSpec tool) {
    if (tool.name.empty() ||
        !std::all_of(tool.name.begin(), tool.name.end(), [](unsigned char c) {
            return std::islower(c) || std::isdigit(c) || c == '_' || c == '-';
        })) {
        throw ValidationError("tool name must be lowercase without whitespace: '" + tool.name + "'");
    }
    if (text::trim(tool.description).empty() ||
        tool.description.find('\n') != std::string::npos) {
        throw ValidationError("tool " + tool.name + " needs a one-line description");
    }
    if (!tool.handler) throw ValidationError("tool " + tool.name + " has no handler");
    if (find(tool.name)) throw ValidationError("duplicate tool name: " + tool.name);
    tools_.push_back(std::move(tool));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
    for (const auto& t : tools_) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& t : tools_) out.push_back(t.name);
    return out;
}

std::string ValidationFailure::message() const {
    return "input failed constraint " + constraint + ": \"" + excerpt + "\"";
}

Validated validate_input(const ToolSpec& tool, const std::string& input) {
    for (const auto& c : tool.constraints) {
        bool ok = true;
        switch (c.kind) {
            case ConstraintKind::alphanumeric:
                ok = !input.empty() && std::all_of(input.begin(), input.end(), [](unsigned char ch) {
                    return ch < 0x80 && std::isalnum(ch);
                });
                break;
            case ConstraintKind::regex:
                ok = std::regex_match(input, std::regex(c.pattern));
                break;
            case ConstraintKind::max_length:
                ok = input.size() <= c.limit;
                break;
            case ConstraintKind::one_of:
                ok = std::find(c.values.begin(), c.values.end(), input) != c.values.end();
                break;
        }
        if (!ok) {
            constexpr std::size_t kExcerpt = 48;
            auto excerpt = input.size() <= kExcerpt ? input : input.substr(0, kExcerpt) + "...";
            return ValidationFailure{c.name, std::move(excerpt)};
        }
    }
    return input;
}

// --- template --------------------------------------------------------------

std::string render_step(const AgentStep& step) {
    std::string out = "Thought: " + step.thought + "\n";
    if (step.action) {
        out += "Action: " + step.action->tool + "\n";
        out += "Action Input: " + step.action->input + "\n";
    }
    if (step.observation) out += "Observation: " + *step.observation + "\n";
    return out;
}

std::string render_react_prompt(const AgentConfig& config, const std::string& question,
                                const std::vector<AgentStep>& history) {
    std::string out =
        "Answer the following questions as best you can. You have access to the following "
        "tools:\n\n";
    for (const auto& t : config.tools.tools()) out += t.name + ": " + t.description + "\n";
    out += "\nUse the following format:\n\n";
    out += "Question: the input question you must answer\n";
    out += "Thought: you should always think about what to do\n";
    out += "Action: the tool to use, one of [" + text::join(config.tools.names(), ", ") + "]\n";
    out += "Action Input: the input to the action\n";
    out += "Observation: the result of the action\n";
    out += "... (this Thought/Action/Action Input/Observation can repeat N times)\n";
    out += "Thought: I now know the final answer\n";
    out += "Final Answer: the final answer to the original input question\n\n";
    out += "Begin!\n\n";
    out += "Question: " + question + "\n";
    for (const auto& step : history) out += render_step(step);
    return out;
}

// --- parsing ---------------------------------------------------------------

ParsedOutput parse_model_output(std::string_view text) {
    auto lines = text::split_lines(text);
    ParsedOutput out;

    auto thought_before = [&](std::size_t idx) {
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < idx; ++i) {
            auto t = text::trim(lines[i]);
            if (t.starts_with("Thought:")) t = text::trim(t.substr(8));
            if (!t.empty()) parts.emplace_back(t);
        }
        return text::join(parts, "\n");
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (t.starts_with("Final Answer:")) {
            std::string rest(t.substr(13));
            for (std::size_t j = i + 1; j < lines.size(); ++j) {
                rest += "\n";
                rest += lines[j];
            }
            out.thought = thought_before(i);
            out.result = FinalAnswer{std::string(text::trim(rest))};
            return out;
        }
        if (t.starts_with("Action:")) {
            ToolAction action{std::string(text::trim(t.substr(7))), {}};
            for (std::size_t j = i + 1; j < lines.size(); ++j) {
                auto u = text::trim(lines[j]);
                if (u.starts_with("Action Input:")) {
                    action.input = std::string(text::trim(u.substr(13)));
                    break;
                }
                if (u.starts_with("Action:") || u.starts_with("Observation:") ||
                    u.starts_with("Final Answer:")) {
                    break;
                }
            }
            out.thought = thought_before(i);
            out.result = std::move(action);
            return out;
        }
    }
    out.result = OutputParseError{std::string(text)};
    return out;
}

std::string sanitize_observation(std::string_view text) {
    static constexpr std::string_view kKeywords[] = {"Thought:",      "Action:",  "Action Input:",
                                                     "Final Answer:", "Observation:", "Question:"};
    std::string out;
    out.reserve(text.size() + 16);
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        auto t = text::trim(line);
        bool keyword = std::any_of(std::begin(kKeywords), std::end(kKeywords),
                                   [&](std::string_view k) { return text::istarts_with(t, k); });
        if (keyword) out += "> ";
        out += line;
        if (nl == std::string_view::npos) break;
        out += '\n';
        pos = nl + 1;
    }
    return out;
}

// --- loop ------------------------------------------------------------------

namespace {

std::string execute_action(const AgentConfig& config, const ToolAction& action) {
    const auto* tool = config.tools.find(action.tool);
    if (!tool) {
        return "Error: unknown tool '" + action.tool + "'. Valid tools: " +
               text::join(config.tools.names(), ", ");
    }
    auto validated = validate_input(*tool, action.input);
    if (auto* failure = std::get_if<ValidationFailure>(&validated)) {
        return "Error: " + failure->message();
    }
    try {
        return tool->handler(std::get<std::string>(validated));
    } catch (const std::exception& e) {
        return std::string("Error: ") + e.what();
    }
}

}  // namespace

AgentTrace run_agent(const AgentConfig& config, const std::string& question) {
    if (text::trim(question).empty()) throw ValidationError("question must not be empty");
    if (config.max_iterations == 0) throw ValidationError("max_iterations must be at least 1");
    if (config.tools.empty()) throw ValidationError("agent needs at least one tool");

    AgentTrace trace;
    trace.question = question;

    auto call = [&](const std::vector<model::Message>& messages) {
        auto completion = model::complete(config.model, messages, config.params);
        auto cost = model::cost_of(completion.usage, config.model);
        trace.calls.push_back({completion.usage, cost});
        trace.usage += completion.usage;
        trace.cost += cost;
        return completion.text;
    };

    bool retried = false;
    try {
        for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
            std::vector<model::Message> messages{
                {model::Role::user, render_react_prompt(config, question, trace.steps)}};
            auto reply = call(messages);
            auto parsed = parse_model_output(reply);
            if (parsed.is_error() && !retried) {
                retried = true;
                messages.push_back({model::Role::assistant, reply});
                messages.push_back({model::Role::user, std::string(kRetryInstruction)});
                reply = call(messages);
                parsed = parse_model_output(reply);
            }
            if (parsed.is_error()) {
                trace.outcome = {OutcomeKind::aborted,
                                 "unparseable model output: " + std::string(text::trim(reply))};
                return trace;
            }
            if (auto* answer = std::get_if<FinalAnswer>(&parsed.result)) {
                trace.steps.push_back({parsed.thought, std::nullopt, std::nullopt});
                trace.outcome = {OutcomeKind::final_answer, answer->text};
                return trace;
            }
            auto action = std::get<ToolAction>(parsed.result);
            auto observation = execute_action(config, action);
            if (config.sanitize_observations) observation = sanitize_observation(observation);
            trace.steps.push_back({parsed.thought, std::move(action), std::move(observation)});
        }
        trace.outcome = {OutcomeKind::max_iterations_exceeded, {}};
    } catch (const std::exception& e) {
        trace.outcome = {OutcomeKind::aborted, e.what()};
    }
    return trace;
}

TraceSummary trace_summary(const AgentTrace& trace) {
    TraceSummary s;
    s.steps = trace.steps.size();
    for (const auto& c : trace.calls) {
        s.usage += c.usage;
        s.cost += c.cost;
    }
    for (const auto& step : trace.steps) {
        if (!step.action) continue;
        const auto& name = step.action->tool;
        if (std::find(s.tools_used.begin(), s.tools_used.end(), name) == s.tools_used.end()) {
            s.tools_used.push_back(name);
        }
    }
    return s;
}

// --- JSON ------------------------------------------------------------------

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::final_answer: return "final_answer";
        case OutcomeKind::max_iterations_exceeded: return "max_iterations_exceeded";
        case OutcomeKind::aborted: return "aborted";
    }
    return "aborted";
}

namespace {

json cost_json(model::Cost c) { return c.to_double(); }

model::Cost cost_from(const json& j) { return model::Cost{std::llround(j.get<double>() * 1e9)}; }

model::Usage usage_from(const json& j) {
    return {j.at("prompt_tokens").get<std::int64_t>(), j.at("completion_tokens").get<std::int64_t>()};
}

}  // namespace

json to_json(const AgentTrace& trace) {
    json steps = json::array();
    for (const auto& s : trace.steps) {
        json step{{"thought", s.thought}, {"action", nullptr}, {"observation", nullptr}};
        if (s.action) step["action"] = {{"tool", s.action->tool}, {"input", s.action->input}};
        if (s.observation) step["observation"] = *s.observation;
        steps.push_back(std::move(step));
    }
    json calls = json::array();
    for (const auto& c : trace.calls) {
        calls.push_back({{"usage", model::to_json(c.usage)}, {"cost", cost_json(c.cost)}});
    }
    return json{{"question", trace.question},
                {"steps", steps},
                {"outcome", {{"kind", to_string(trace.outcome.kind)}, {"text", trace.outcome.text}}},
                {"usage", model::to_json(trace.usage)},
                {"cost", cost_json(trace.cost)},
                {"calls", calls}};
}

AgentTrace trace_from_json(const json& doc) {
    try {
        AgentTrace t;
        t.question = doc.at("question").get<std::string>();
        for (const auto& s : doc.at("steps")) {
            AgentStep step;
            step.thought = s.at("thought").get<std::string>();
            if (!s.at("action").is_null()) {
                step.action = ToolAction{s["action"].at("tool").get<std::string>(),
                                         s["action"].at("input").get<std::string>()};
            }
            if (!s.at("observation").is_null()) step.observation = s["observation"].get<std::string>();
            t.steps.push_back(std::move(step));
        }
        auto kind = doc.at("outcome").at("kind").get<std::string>();
        if (kind == "final_answer") {
            t.outcome.kind = OutcomeKind::final_answer;
        } else if (kind == "max_iterations_exceeded") {
            t.outcome.kind = OutcomeKind::max_iterations_exceeded;
        } else if (kind == "aborted") {
            t.outcome.kind = OutcomeKind::aborted;
        } else {
            throw ValidationError("unknown outcome kind: " + kind);
        }
        t.outcome.text = doc["outcome"].value("text", std::string{});
        t.usage = usage_from(doc.at("usage"));
        t.cost = cost_from(doc.at("cost"));
        for (const auto& c : doc.value("calls", json::array())) {
            t.calls.push_back({usage_from(c.at("usage")), cost_from(c.at("cost"))});
        }
        return t;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed trace: ") + e.what());
    }
}

}  // namespace agentlab::agent
