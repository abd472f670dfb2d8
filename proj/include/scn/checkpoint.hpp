#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "scn/normalizer.hpp"
#include "scn/policy.hpp"
#include "scn/rollout.hpp"

namespace scn {

inline constexpr int kCheckpointVersion = 1;

/// A saved policy. On disk: one JSON header line, then little-endian float64
/// parameters in canonical order, then the normalizer mean and m2 if present.
/// See docs/checkpoint-format.md.
struct Checkpoint {
    Architecture arch;
    TrainMode mode = TrainMode::es;
    ParamVector params;
    std::optional<ObsNormalizer> normalizer;
    nlohmann::json meta = nlohmann::json::object();  // free-form provenance (env, seed, trainer)

    TrainedPolicy trained() const;
};

Checkpoint make_checkpoint(const TrainedPolicy& p, TrainMode mode, nlohmann::json meta = nlohmann::json::object());

void write_checkpoint(std::ostream& os, const Checkpoint& c);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
/// Throws MissingArtifactError when the file does not exist, ConfigError when it is malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scn
