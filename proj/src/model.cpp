// SPDX-License-Identifier: Apache-2.0
#include "agentlab/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "agentlab/error.hpp"
#include "agentlab/http.hpp"
#include "agentlab/text.hpp"

namespace agentlab::model {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

Role role_from_string(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    if (name == "tool") return Role::tool;
    throw ValidationError("unknown message role: " + std::string(name));
}

void GenerationParams::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw ValidationError("temperature must be in [0, 2]");
    }
    if (max_tokens <= 0) throw ValidationError("max_tokens must be positive");
    if (context_window <= 0) throw ValidationError("context_window must be positive");
    if (max_tokens > context_window) {
        throw ValidationError("max_tokens must not exceed context_window");
    }
    if (stop_sequences.size() > 4) throw ValidationError("at most 4 stop sequences");
}

std::string Cost::to_string() const {
    auto magnitude = nano < 0 ? -static_cast<unsigned long long>(nano)
                              : static_cast<unsigned long long>(nano);
    auto whole = magnitude / 1'000'000'000ULL;
    auto frac = std::to_string(magnitude % 1'000'000'000ULL);
    frac.insert(0, 9 - frac.size(), '0');
    while (frac.size() > 6 && frac.back() == '0') frac.pop_back();
    return (nano < 0 ? "-" : "") + std::to_string(whole) + "." + frac;
}

std::int64_t price_to_micro(double price_per_1k) {
    if (!(price_per_1k >= 0.0) || !std::isfinite(price_per_1k)) {
        throw ConfigError("prices must be finite and non-negative");
    }
    return std::llround(price_per_1k * 1e6);
}

// Section order: instruction (system), exemplars, input data, context,
// output indicator, then the chain-of-thought cue.
std::vector<Message> build_prompt(const PromptSpec& spec) {
    if (text::trim(spec.instruction).empty()) {
        throw ValidationError("prompt instruction must not be empty");
    }
    std::vector<std::string> blocks;
    for (const auto& ex : spec.exemplars) {
        blocks.push_back("Input: " + ex.input + "\nOutput: " + ex.output);
    }
    if (spec.input_data) blocks.push_back("Input: " + *spec.input_data);
    if (spec.context) blocks.push_back("Context: " + *spec.context);
    if (spec.output_indicator) blocks.push_back("Output: " + *spec.output_indicator);
    if (spec.chain_of_thought) blocks.emplace_back(kChainOfThoughtCue);

    return {Message{Role::system, spec.instruction},
            Message{Role::user, text::join(blocks, "\n\n")}};
}

std::int64_t estimate_tokens(std::string_view text) noexcept {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

Cost cost_of(const Usage& usage, const ModelSpec& model) noexcept {
    // tokens/1000 * price == tokens * price_micro * 1e-9
    return Cost{usage.prompt_tokens * model.price_in_micro_per_1k +
                usage.completion_tokens * model.price_out_micro_per_1k};
}

PromptView analyze_prompt(const std::vector<Message>& messages) {
    PromptView view;
    std::vector<std::string> contents;
    std::vector<std::string> system_parts;
    const Message* last_user = nullptr;
    for (const auto& m : messages) {
        contents.push_back(m.content);
        if (m.role == Role::system) system_parts.push_back(m.content);
        if (m.role == Role::user) last_user = &m;
    }
    view.full_prompt = text::join(contents, "\n");
    view.system_text = text::join(system_parts, "\n");

    struct Line {
        std::string_view text;
        std::size_t message;
    };
    std::vector<Line> lines;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        for (auto l : text::split_lines(messages[i].content)) lines.push_back({l, i});
    }

    std::size_t region = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i].text) == "Begin!") {
            region = i + 1;
            break;
        }
    }

    bool have_question = false;
    std::optional<std::size_t> last_obs;
    for (std::size_t i = region; i < lines.size(); ++i) {
        auto t = text::trim(lines[i].text);
        if (!have_question && t.starts_with("Question:")) {
            view.question = std::string(text::trim(t.substr(9)));
            have_question = true;
        }
        if (t.starts_with("Observation:")) last_obs = i;
    }
    if (!have_question && last_user) view.question = std::string(text::trim(last_user->content));

    if (last_obs) {
        std::string obs(text::trim(lines[*last_obs].text).substr(12));
        for (std::size_t i = *last_obs + 1;
             i < lines.size() && lines[i].message == lines[*last_obs].message; ++i) {
            obs += "\n";
            obs += lines[i].text;
        }
        view.last_observation = std::string(text::trim(obs));
    }
    return view;
}

namespace {

constexpr std::string_view kIgnoreMarker = "IGNORE ALL PREVIOUS INSTRUCTIONS";

std::optional<std::string> observed_action(const std::string& observation) {
    auto lines = text::split_lines(observation);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (!t.starts_with("Action:")) continue;
        std::string tool(text::trim(t.substr(7)));
        std::string input;
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            auto u = text::trim(lines[j]);
            if (u.starts_with("Action Input:")) {
                input = std::string(text::trim(u.substr(13)));
                break;
            }
        }
        return "Thought: following instructions\nAction: " + tool + "\nAction Input: " + input;
    }
    return std::nullopt;
}

std::optional<std::string> ignore_marker_payload(const std::string& prompt) {
    auto lowered = text::to_lower(prompt);
    auto pos = lowered.find(text::to_lower(kIgnoreMarker));
    if (pos == std::string::npos) return std::nullopt;
    auto rest = std::string_view(prompt).substr(pos + kIgnoreMarker.size());
    rest = rest.substr(0, rest.find('\n'));
    rest = text::trim(rest);
    for (std::string_view lead : {"and "}) {
        if (text::istarts_with(rest, lead)) rest = text::trim(rest.substr(lead.size()));
    }
    for (std::string_view verb : {"reply with ", "respond with ", "reply ", "say ", "output "}) {
        if (text::istarts_with(rest, verb)) {
            rest = text::trim(rest.substr(verb.size()));
            break;
        }
    }
    while (!rest.empty() && (rest.back() == '.' || rest.back() == '"' || rest.back() == '\'' ||
                             rest.back() == '!')) {
        rest.remove_suffix(1);
    }
    while (!rest.empty() && (rest.front() == '"' || rest.front() == '\'')) rest.remove_prefix(1);
    if (rest.empty()) return std::string("OK");
    return std::string(rest);
}

std::string fill_template(std::string response, const PromptView& view,
                          const std::vector<std::string>& groups) {
    std::string out;
    out.reserve(response.size());
    for (std::size_t i = 0; i < response.size();) {
        if (response[i] == '{') {
            auto close = response.find('}', i);
            if (close != std::string::npos) {
                auto key = std::string_view(response).substr(i + 1, close - i - 1);
                if (key == "question") {
                    out += view.question;
                    i = close + 1;
                    continue;
                }
                if (key == "last_observation") {
                    out += view.last_observation;
                    i = close + 1;
                    continue;
                }
                if (key.size() == 1 && key[0] >= '0' && key[0] <= '9') {
                    auto idx = static_cast<std::size_t>(key[0] - '0');
                    if (idx < groups.size()) out += groups[idx];
                    i = close + 1;
                    continue;
                }
            }
        }
        out += response[i++];
    }
    return out;
}

const std::string& target_text(const PromptView& view, MatchTarget target) {
    switch (target) {
        case MatchTarget::full_prompt: return view.full_prompt;
        case MatchTarget::last_observation: return view.last_observation;
        case MatchTarget::question: return view.question;
    }
    return view.full_prompt;
}

}  // namespace

std::string scripted_response(const ScriptedBehavior& behavior, const PromptView& view) {
    if (behavior.obey_observation_actions) {
        if (auto action = observed_action(view.last_observation)) return *action;
    }
    if (behavior.obey_ignore_marker) {
        if (auto payload = ignore_marker_payload(view.full_prompt)) return *payload;
    }
    if (behavior.leak_system_prompt && !view.system_text.empty() &&
        (text::icontains(view.question, "instructions") ||
         text::icontains(view.question, "system prompt"))) {
        return "My instructions are: " + view.system_text;
    }
    for (const auto& rule : behavior.rules) {
        const auto& subject = target_text(view, rule.target);
        if (rule.match_kind == MatchKind::substring) {
            if (subject.find(rule.pattern) != std::string::npos) {
                return fill_template(rule.response, view, {rule.pattern});
            }
        } else {
            std::regex re(rule.pattern);
            std::smatch m;
            if (std::regex_search(subject, m, re)) {
                std::vector<std::string> groups;
                for (const auto& g : m) groups.push_back(g.str());
                return fill_template(rule.response, view, groups);
            }
        }
    }
    return std::string(kFallbackResponse);
}

namespace {

std::vector<Message> with_safety(const std::vector<Message>& messages,
                                 const GenerationParams& params) {
    if (!params.safety) return messages;
    std::vector<Message> out;
    out.reserve(messages.size() + 1);
    out.push_back(Message{Role::system, std::string(kSafetyPrompt)});
    out.insert(out.end(), messages.begin(), messages.end());
    return out;
}

void apply_stops(std::string& text, const std::vector<std::string>& stops) {
    auto cut = text.size();
    for (const auto& s : stops) {
        if (s.empty()) continue;
        if (auto pos = text.find(s); pos != std::string::npos) cut = std::min(cut, pos);
    }
    text.resize(cut);
}

Completion complete_scripted(const ModelSpec& model, const std::vector<Message>& messages,
                             const GenerationParams& params) {
    auto view = analyze_prompt(messages);
    Completion out;
    out.text = scripted_response(model.script, view);
    apply_stops(out.text, params.stop_sequences);
    out.model_id = model.id;
    out.usage = Usage{estimate_tokens(view.full_prompt), estimate_tokens(out.text)};
    out.usage_estimated = true;
    return out;
}

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

Completion complete_http(const ModelSpec& model, const std::vector<Message>& messages,
                         const GenerationParams& params) {
    http::Headers headers;
    if (!model.api_key_env.empty()) {
        const char* key = std::getenv(model.api_key_env.c_str());
        if (!key || !*key) {
            throw ConfigError("environment variable " + model.api_key_env +
                              " is not set (model " + model.id + ")");
        }
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    if (model.base_url.empty()) throw ConfigError("model " + model.id + " has no base_url");

    json body;
    body["model"] = model.wire_model();
    body["messages"] = json::array();
    for (const auto& m : messages) {
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    body["stream"] = false;
    if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;

    std::string base = model.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();

    http::Response resp;
    try {
        resp = http::post_json(base + "/v1/chat/completions", body.dump(), headers);
    } catch (const IoError& e) {
        throw BackendError(0, e.what());
    }
    if (resp.status < 200 || resp.status >= 300) {
        throw BackendError(resp.status, excerpt(resp.body));
    }

    Completion out;
    out.model_id = model.id;
    try {
        auto doc = json::parse(resp.body);
        out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (doc.contains("usage") && doc["usage"].is_object()) {
            const auto& u = doc["usage"];
            out.usage.prompt_tokens = u.value("prompt_tokens", std::int64_t{0});
            out.usage.completion_tokens = u.value("completion_tokens", std::int64_t{0});
        } else {
            out.usage = Usage{estimate_tokens(analyze_prompt(messages).full_prompt),
                              estimate_tokens(out.text)};
            out.usage_estimated = true;
        }
    } catch (const json::exception&) {
        throw BackendError(resp.status, "malformed response body: " + excerpt(resp.body));
    }
    return out;
}

}  // namespace

Completion complete(const ModelSpec& model, const std::vector<Message>& messages,
                    const GenerationParams& params, const DeltaSink& on_delta) {
    if (messages.empty()) throw ValidationError("complete() needs at least one message");
    params.validate();
    auto full = with_safety(messages, params);
    auto out = model.backend == Backend::scripted ? complete_scripted(model, full, params)
                                                  : complete_http(model, full, params);
    if (params.streaming && on_delta) on_delta(out.text);
    return out;
}

ComparisonReport prompt_lab(const PromptSpec& spec, const std::vector<ModelSpec>& models,
                            const GenerationParams& params) {
    if (models.empty()) throw ValidationError("prompt_lab needs at least one model");
    ComparisonReport report;
    report.prompt = build_prompt(spec);

    std::vector<const ModelSpec*> ordered;
    for (const auto& m : models) ordered.push_back(&m);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](auto* a, auto* b) { return a->id < b->id; });

    for (const auto* m : ordered) {
        ComparisonRow row;
        row.model_id = m->id;
        try {
            auto c = complete(*m, report.prompt, params);
            row.text = std::move(c.text);
            row.usage = c.usage;
            row.cost = cost_of(c.usage, *m);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

const ModelSpec* Config::find(std::string_view id) const {
    for (const auto& m : models) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

const ModelSpec& Config::require(std::string_view id) const {
    if (const auto* m = find(id)) return *m;
    std::vector<std::string> known;
    for (const auto& m : models) known.push_back(m.id);
    throw ConfigError("unknown model '" + std::string(id) + "' (known: " + text::join(known, ", ") +
                      ")");
}

// --- JSON ----------------------------------------------------------------

json to_json(const Usage& usage) {
    return json{{"prompt_tokens", usage.prompt_tokens},
                {"completion_tokens", usage.completion_tokens}};
}

namespace {

std::string_view to_string(MatchKind k) { return k == MatchKind::substring ? "substring" : "regex"; }

std::string_view to_string(MatchTarget t) {
    switch (t) {
        case MatchTarget::full_prompt: return "full_prompt";
        case MatchTarget::last_observation: return "last_observation";
        case MatchTarget::question: return "question";
    }
    return "full_prompt";
}

MatchKind match_kind_from(const std::string& s) {
    if (s == "substring") return MatchKind::substring;
    if (s == "regex") return MatchKind::regex;
    throw ConfigError("unknown match_kind: " + s);
}

MatchTarget target_from(const std::string& s) {
    if (s == "full_prompt") return MatchTarget::full_prompt;
    if (s == "last_observation") return MatchTarget::last_observation;
    if (s == "question") return MatchTarget::question;
    throw ConfigError("unknown rule target: " + s);
}

std::optional<std::string> opt_string(const json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return doc[key].get<std::string>();
}

}  // namespace

json to_json(const ModelSpec& model) {
    json out{{"id", model.id},
             {"backend", model.backend == Backend::scripted ? "scripted" : "http_chat"},
             {"price_in_per_1k", static_cast<double>(model.price_in_micro_per_1k) / 1e6},
             {"price_out_per_1k", static_cast<double>(model.price_out_micro_per_1k) / 1e6}};
    if (model.backend == Backend::http_chat) {
        out["base_url"] = model.base_url;
        if (!model.api_key_env.empty()) out["api_key_env"] = model.api_key_env;
        if (!model.remote_model.empty()) out["remote_model"] = model.remote_model;
    } else {
        json rules = json::array();
        for (const auto& r : model.script.rules) {
            rules.push_back({{"match_kind", to_string(r.match_kind)},
                             {"target", to_string(r.target)},
                             {"pattern", r.pattern},
                             {"response", r.response}});
        }
        out["script"] = {{"rules", rules},
                         {"obey_observation_actions", model.script.obey_observation_actions},
                         {"obey_ignore_marker", model.script.obey_ignore_marker},
                         {"leak_system_prompt", model.script.leak_system_prompt}};
    }
    return out;
}

ModelSpec model_spec_from_json(const json& doc) {
    try {
        ModelSpec m;
        m.id = doc.at("id").get<std::string>();
        if (m.id.empty()) throw ConfigError("model id must not be empty");
        auto backend = doc.value("backend", std::string("scripted"));
        if (backend == "scripted") {
            m.backend = Backend::scripted;
        } else if (backend == "http_chat") {
            m.backend = Backend::http_chat;
        } else {
            throw ConfigError("model " + m.id + ": unknown backend " + backend);
        }
        m.base_url = doc.value("base_url", std::string{});
        m.api_key_env = doc.value("api_key_env", std::string{});
        m.remote_model = doc.value("remote_model", std::string{});
        m.price_in_micro_per_1k = price_to_micro(doc.value("price_in_per_1k", 0.0));
        m.price_out_micro_per_1k = price_to_micro(doc.value("price_out_per_1k", 0.0));
        if (m.backend == Backend::http_chat && m.base_url.empty()) {
            throw ConfigError("model " + m.id + ": http_chat backend requires base_url");
        }
        if (doc.contains("script")) {
            const auto& s = doc["script"];
            for (const auto& r : s.value("rules", json::array())) {
                ScriptRule rule;
                rule.match_kind = match_kind_from(r.value("match_kind", std::string("substring")));
                rule.target = target_from(r.value("target", std::string("full_prompt")));
                rule.pattern = r.at("pattern").get<std::string>();
                rule.response = r.at("response").get<std::string>();
                if (rule.match_kind == MatchKind::regex) {
                    try {
                        std::regex check(rule.pattern);
                    } catch (const std::regex_error& e) {
                        throw ConfigError("model " + m.id + ": bad regex '" + rule.pattern +
                                          "': " + e.what());
                    }
                }
                m.script.rules.push_back(std::move(rule));
            }
            m.script.obey_observation_actions = s.value("obey_observation_actions", false);
            m.script.obey_ignore_marker = s.value("obey_ignore_marker", false);
            m.script.leak_system_prompt = s.value("leak_system_prompt", false);
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed model entry: ") + e.what());
    }
}

GenerationParams params_from_json(const json& doc, GenerationParams base) {
    try {
        base.temperature = doc.value("temperature", base.temperature);
        base.max_tokens = doc.value("max_tokens", base.max_tokens);
        base.context_window = doc.value("context_window", base.context_window);
        base.streaming = doc.value("streaming", base.streaming);
        base.safety = doc.value("safety", base.safety);
        if (doc.contains("stop_sequences")) {
            base.stop_sequences = doc["stop_sequences"].get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed generation parameters: ") + e.what());
    }
    try {
        base.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    return base;
}

PromptSpec prompt_spec_from_json(const json& doc) {
    PromptSpec spec;
    try {
        spec.instruction = doc.value("instruction", std::string{});
        spec.input_data = opt_string(doc, "input_data");
        spec.context = opt_string(doc, "context");
        spec.output_indicator = opt_string(doc, "output_indicator");
        spec.chain_of_thought = doc.value("chain_of_thought", false);
        for (const auto& ex : doc.value("exemplars", json::array())) {
            spec.exemplars.push_back(
                {ex.at("input").get<std::string>(), ex.at("output").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed prompt: ") + e.what());
    }
    if (text::trim(spec.instruction).empty()) {
        throw ValidationError("prompt instruction must not be empty");
    }
    return spec;
}

json to_json(const PromptSpec& spec) {
    json out{{"instruction", spec.instruction}, {"chain_of_thought", spec.chain_of_thought}};
    if (spec.input_data) out["input_data"] = *spec.input_data;
    if (spec.context) out["context"] = *spec.context;
    if (spec.output_indicator) out["output_indicator"] = *spec.output_indicator;
    out["exemplars"] = json::array();
    for (const auto& ex : spec.exemplars) {
        out["exemplars"].push_back({{"input", ex.input}, {"output", ex.output}});
    }
    return out;
}

json to_json(const ComparisonReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"model_id", r.model_id},
                 {"text", r.text},
                 {"usage", to_json(r.usage)},
                 {"cost", r.cost.to_double()}};
        if (r.error) row["error"] = *r.error;
        rows.push_back(std::move(row));
    }
    return json{{"rows", rows}};
}

Config parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    Config cfg;
    std::set<std::string> ids;
    if (doc.contains("models")) {
        if (!doc["models"].is_array()) throw ConfigError("\"models\" must be an array");
        for (const auto& entry : doc["models"]) {
            auto m = model_spec_from_json(entry);
            if (!ids.insert(m.id).second) throw ConfigError("duplicate model id: " + m.id);
            cfg.models.push_back(std::move(m));
        }
    }
    if (doc.contains("defaults")) cfg.defaults = params_from_json(doc["defaults"]);
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

}  // namespace agentlab::model
