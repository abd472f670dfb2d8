#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scn/harness.hpp"

namespace scn {

struct AblationSettings {
    std::vector<Variant> variants{Variant::SCN, Variant::LinearOnly, Variant::MlpOnly,
                                  Variant::SCN_L, Variant::SCN_N, Variant::PseudoSCN};
    int eval_episodes = 100;
};

struct RobustnessSettings {
    RobustnessSpec spec;
    std::map<std::string, std::vector<std::string>> checkpoints;  // label -> checkpoint paths
};

struct SweepSettings {
    std::string family = "SCN";
    std::vector<int> widths{64, 32, 16, 8, 4};
};

/// A parsed experiment file. Unknown keys are rejected; errors carry the line
/// of the offending key.
struct ExperimentConfig {
    std::string env;
    nlohmann::json env_overrides = nlohmann::json::object();
    std::string preset;  // empty when the policy block spells out the streams
    Architecture arch;   // resolved against the environment's dimensions
    TrainerKind trainer = TrainerKind::es;
    EsConfig es;
    PgConfig pg;
    AblationSettings ablation;
    RobustnessSettings robustness;
    SweepSettings sweep;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string output_dir = "runs";

    TrainSpec train_spec() const;
    /// Every field with its effective value; parses back to an equal config.
    nlohmann::json to_json() const;
};

/// `source` names the text in error messages ("file.json:LINE: ...").
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-resolves the architecture after the environment, preset or trainer changed.
void resolve_architecture(ExperimentConfig& cfg);

/// Line (1-based) of every object key and array element in a JSON text, keyed
/// by JSON pointer. Assumes the text is valid JSON.
std::map<std::string, int> json_key_lines(const std::string& text);

}  // namespace scn
