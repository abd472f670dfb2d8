#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "scn/envs.hpp"
#include "scn/normalizer.hpp"
#include "scn/policy.hpp"
#include "scn/rollout.hpp"

namespace scn {

struct EsConfig {
    double sigma = 0.1;
    double lr = 0.01;
    int workers = 30;  // antithetic pairs per generation
    int generations = 100;
    int episodes_per_eval = 1;
    int eval_episodes = 5;  // unperturbed-center episodes logged per generation
    std::uint64_t master_seed = 1;
    bool normalize_obs = true;
    int jobs = 1;  // evaluation threads; never changes results
    std::int64_t max_timesteps = 0;  // 0 = no limit; otherwise stop before a generation could exceed it

    void validate() const;
};

/// Seed of antithetic pair `pair` in generation `gen`.
std::uint64_t es_pair_seed(std::uint64_t master_seed, int gen, int pair);
/// Seed of the environment for one perturbed evaluation (sign 0 = plus, 1 = minus).
std::uint64_t es_env_seed(std::uint64_t master_seed, int gen, int pair, int sign, int episode);

/// Standard-normal noise reconstructed from a pair seed.
ParamVector es_noise(std::uint64_t pair_seed, Eigen::Index dim);

struct Perturbation {
    ParamVector plus;
    ParamVector minus;
};

/// center +- sigma * eps, eps from `pair_seed`.
Perturbation perturb(const ParamVector& center, double sigma, std::uint64_t pair_seed);

/// Centered ranks in [-0.5, 0.5]; tied values share their average rank, so the
/// output always has mean zero and identical inputs map to zero.
std::vector<double> shape_fitness(std::span<const double> raw);

/// center + lr / (2 n sigma) * sum_j (shaped[2j] - shaped[2j+1]) eps_j, summed in
/// ascending pair order. `shaped` is laid out plus/minus per pair.
ParamVector es_update(const ParamVector& center, std::span<const double> shaped,
                      std::span<const std::uint64_t> pair_seeds, const EsConfig& cfg);

struct Generation {
    int index = 0;
    ParamVector center;            // before the update
    std::vector<double> fitness;   // 2 * workers, plus/minus per pair
    ParamVector update;            // new center - center
    std::int64_t timesteps = 0;    // environment steps consumed
};

/// Evaluates every perturbation of `center` (fresh env per evaluation, observation
/// statistics frozen at `normalizer`), merges the statistics gathered during the
/// evaluations into `normalizer` in pair order, and applies the update. The result
/// depends only on the inputs, not on cfg.jobs.
Generation run_generation(const ParamVector& center, ObsNormalizer* normalizer, const Architecture& arch,
                          const EnvFactory& make_env, const EsConfig& cfg, int gen_index);

using FitnessFn = std::function<double(const ParamVector&)>;

/// Same estimator on an arbitrary fitness function (no environment, no normalizer).
Generation run_generation(const ParamVector& center, const FitnessFn& fitness, const EsConfig& cfg, int gen_index);

struct EsRecord {
    int generation = 0;
    std::int64_t timesteps = 0;  // cumulative training steps
    double fitness_mean = 0.0;
    double fitness_min = 0.0;
    double fitness_max = 0.0;
    double eval_mean = 0.0;  // unperturbed center after the update
    double center_norm = 0.0;
    double wall_seconds = 0.0;
};

struct EpisodeRecord {
    std::int64_t timesteps = 0;  // training steps consumed when the episode was logged
    double reward = 0.0;
};

struct EsResult {
    TrainedPolicy trained;
    std::vector<EsRecord> curve;
    std::vector<EpisodeRecord> episodes;  // center evaluations, chronological
};

/// Full ES run from the ES initialization of `arch`.
EsResult train_es(const Architecture& arch, const EnvFactory& make_env, const EsConfig& cfg,
                  const std::function<void(const EsRecord&)>& on_generation = {});

/// Evaluates an unperturbed center; used for the per-generation log.
std::vector<double> es_evaluate_center(const TrainedPolicy& p, const EnvFactory& make_env, const EsConfig& cfg,
                                       int gen_index);

}  // namespace scn
