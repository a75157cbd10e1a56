// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/agent.hpp"
#include "agentlab/model.hpp"
#include "agentlab/rag.hpp"
#include "agentlab/sql.hpp"
#include "agentlab/tools.hpp"

// Attack/defense exercises. Each exercise runs the same attack input and the
// same scripted model against a vulnerable and a hardened build, then a pure
// detector decides whether the run was compromised.
namespace agentlab::seclab {

enum class Variant { vulnerable, hardened };

std::string_view to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view name);

/// Everything an exercise run can touch. Unused members stay null.
struct Environment {
    std::shared_ptr<sql::TableStore> db;
    std::shared_ptr<tools::SqlAudit> sql_audit;
    std::shared_ptr<tools::CommandPolicy> terminal;
    std::shared_ptr<rag::VectorStore> corpus;
    std::string report_html;
    std::optional<std::string> final_answer;
};

struct Scenario;
using ScenarioRunner =
    std::function<agent::AgentTrace(Scenario&, const model::ModelSpec&, const std::string&)>;

struct Scenario {
    Environment env;
    // Set for agent-based exercises; pipeline exercises leave it empty.
    std::optional<agent::AgentConfig> agent;
    ScenarioRunner run;
};

struct Detection {
    bool compromised = false;
    std::string evidence;
};

using Detector = std::function<Detection(const Environment&, const agent::AgentTrace&)>;

struct Exercise {
    std::string id;
    std::string description;
    std::string attack_input;
    model::ModelSpec model;
    std::function<Scenario(Variant)> build;
    Detector detector;
};

struct LabReport {
    std::string exercise_id;
    Variant variant = Variant::vulnerable;
    bool compromised = false;
    std::string evidence;
    agent::AgentTrace trace;
};

/// The six built-in exercises, in catalog order.
std::vector<Exercise> builtin_exercises();
std::optional<Exercise> find_exercise(std::string_view id);
std::vector<std::string> exercise_ids();

/// Poisoned document corpus for rag-poisoning-cmd-injection, as (file name, text).
const std::vector<std::pair<std::string, std::string>>& poisoning_corpus();

inline constexpr std::string_view kSecret = "SECRET-TOKEN-12345";
inline constexpr std::string_view kIgnoreMarker = "IGNORE ALL PREVIOUS INSTRUCTIONS";

/// Removes every case-insensitive occurrence of the ignore marker, repeating
/// until none is left.
std::string strip_ignore_marker(std::string text);
std::string html_escape(std::string_view text);

Detection detect_compromise(const Exercise& ex, const Environment& env,
                            const agent::AgentTrace& trace);

LabReport run_exercise(const Exercise& ex, Variant variant,
                       const model::ModelSpec* model_override = nullptr);

struct AsymmetryResult {
    bool pass = false;
    std::string details;
    LabReport vulnerable;
    LabReport hardened;
};

/// Passes iff the vulnerable build is compromised and the hardened one is not.
AsymmetryResult assert_asymmetry(const Exercise& ex,
                                 const model::ModelSpec* model_override = nullptr);

nlohmann::json to_json(const LabReport& report);

}  // namespace agentlab::seclab
