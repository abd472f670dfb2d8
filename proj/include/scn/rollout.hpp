#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "scn/envs.hpp"
#include "scn/normalizer.hpp"
#include "scn/policy.hpp"

namespace scn {

/// A policy as deployed: parameters plus the (frozen) observation statistics it
/// was trained with.
struct TrainedPolicy {
    StructuredPolicy policy;
    std::optional<ObsNormalizer> normalizer;

    /// Deterministic mean action. `obs_noise`, when given, is added after normalization.
    Vec act(const Vec& obs, double t, StreamMask mask = {}, const Vec* obs_noise = nullptr) const;
};

/// Maps (raw observation, episode time, optional post-normalization noise) to an action.
using Actor = std::function<Vec(const Vec& obs, double t, const Vec* obs_noise)>;

Actor make_actor(const TrainedPolicy& p, StreamMask mask = {});

enum class NoiseTarget { action, observation };

struct InjectedNoise {
    NoiseTarget target = NoiseTarget::action;
    double sigma = 0.0;
};

struct EpisodeResult {
    double total_reward = 0.0;
    int steps = 0;
    bool terminal = false;
    std::map<std::string, double> last_info;
};

/// Runs one episode from env.reset(seed). Noise draws come from an RNG seeded
/// independently of the environment so the dynamics see the same randomness
/// with and without noise. `on_step` sees every transition.
EpisodeResult run_episode(const Actor& actor, Env& env, std::uint64_t seed, const InjectedNoise& noise = {},
                          const std::function<void(const Transition&)>& on_step = {});

/// Uniformly random actions within the action bounds.
EpisodeResult run_random_episode(Env& env, std::uint64_t seed);

}  // namespace scn
