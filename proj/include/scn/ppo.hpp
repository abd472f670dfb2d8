#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "scn/envs.hpp"
#include "scn/es.hpp"
#include "scn/mlp.hpp"
#include "scn/normalizer.hpp"
#include "scn/policy.hpp"
#include "scn/rollout.hpp"

namespace scn {

struct PgConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    int rollout_len = 2048;
    int epochs = 10;
    int minibatch = 64;
    double policy_lr = 3e-4;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double max_grad_norm = 0.5;
    std::int64_t total_timesteps = 1000000;
    std::uint64_t seed = 1;
    bool normalize_obs = true;

    void validate() const;
};

/// Scalar state-value function: tanh MLP with two hidden layers of 64 units and
/// an output bias.
class Critic {
public:
    Critic() = default;
    explicit Critic(int state_dim, std::vector<int> hidden = {64, 64});

    std::size_t param_count() const { return net_.param_count(); }
    ParamVector params() const;
    void set_params(std::span<const double> p);

    double value(const Vec& s) const;
    /// Adds scale * dV/dparams into `grad`.
    void accumulate_grad(const Vec& s, double scale, std::span<double> grad) const;

    /// Fan-in scaled uniform weights, zero biases.
    void init(Rng& rng);

    const Mlp& net() const { return net_; }

private:
    Mlp net_;
};

/// One rollout of on-policy data. States are stored already normalized.
struct RolloutBuffer {
    std::vector<Vec> states;
    std::vector<double> times;
    std::vector<Vec> actions;  // sampled, before the env clips them
    std::vector<double> rewards;
    std::vector<char> dones;   // episode ended after this step (terminal or truncated)
    std::vector<double> log_prob_old;
    std::vector<double> value_old;  // size() + 1 entries; the last is the bootstrap value
    std::vector<double> advantages;
    std::vector<double> return_targets;

    std::size_t size() const { return rewards.size(); }
};

struct Gae {
    std::vector<double> advantages;
    std::vector<double> return_targets;
};

/// `values` has rewards.size() + 1 entries.
/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t; A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}.
Gae compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
                double gamma, double lambda);

/// Shifts and scales to mean 0, std 1 (population). Leaves a constant vector at zero.
void standardize(std::vector<double>& x);

/// Environment state carried across rollouts: episodes continue over rollout boundaries.
struct RolloutState {
    std::unique_ptr<Env> env;
    Vec obs;
    bool need_reset = true;
    std::uint64_t seed = 1;
    std::uint64_t episodes_started = 0;
    double episode_reward = 0.0;
    std::int64_t steps_taken = 0;
    std::vector<EpisodeRecord> finished;  // completed episodes not yet drained by the caller
};

/// Collects cfg.rollout_len steps. On truncation the reward is augmented by
/// gamma V(s_next); terminal steps are not bootstrapped. Requires the Gaussian head.
RolloutBuffer collect_rollout(const StructuredPolicy& policy, const Critic& critic, RolloutState& state,
                              ObsNormalizer* normalizer, const PgConfig& cfg, Rng& rng);

/// Minibatch view into a rollout buffer.
struct PpoBatch {
    const RolloutBuffer* buffer = nullptr;
    std::vector<std::size_t> index;
};

struct PpoLoss {
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;  // before clipping
    ParamVector policy_grad;
    ParamVector critic_grad;
};

/// Clipped surrogate plus value_coef * MSE minus entropy_coef * entropy, averaged over
/// the batch, with exact gradients. The joint gradient is rescaled to max_grad_norm
/// when its norm exceeds it. Throws NumericalError on a non-finite loss or gradient.
PpoLoss ppo_loss(const PpoBatch& batch, const StructuredPolicy& policy, const Critic& critic, const PgConfig& cfg);

struct AdamState {
    Vec m;
    Vec v;
    std::int64_t t = 0;
};

/// Bias-corrected Adam step, beta = (0.9, 0.999), eps = 1e-8.
void adam_step(Vec& params, const Vec& grads, AdamState& state, double lr);

struct PgRecord {
    int update = 0;
    std::int64_t timesteps = 0;
    int episodes = 0;  // completed during this rollout
    double reward_mean = 0.0;
    double reward_min = 0.0;
    double reward_max = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double explained_variance = 0.0;
    double wall_seconds = 0.0;
};

struct PgResult {
    TrainedPolicy trained;
    Critic critic;
    std::vector<PgRecord> curve;
    std::vector<EpisodeRecord> episodes;  // training episodes, chronological
};

/// Full PPO run from the PG initialization of `arch` (must have a Gaussian head).
PgResult train_ppo(const Architecture& arch, const EnvFactory& make_env, const PgConfig& cfg,
                   const std::function<void(const PgRecord&)>& on_update = {});

}  // namespace scn
