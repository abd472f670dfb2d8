#include "scn/es.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace scn {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kEvalTag = 0x6576616cULL;

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
template <class F>
void parallel_for(int n, int jobs, F&& body)
{
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&, w] {
            (void)w;
            for (int i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true))
                        error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

struct EvalOutcome {
    double fitness = 0.0;
    std::int64_t steps = 0;
    ObsNormalizer stats;
};

EvalOutcome evaluate_perturbation(const StructuredPolicy& policy, const ObsNormalizer* frozen, Env& env,
                                  const EsConfig& cfg, int gen, int pair, int sign)
{
    EvalOutcome out;
    if (frozen)
        out.stats = ObsNormalizer(env.spec().state_dim);
    double total = 0.0;
    for (int e = 0; e < cfg.episodes_per_eval; ++e) {
        Vec obs = env.reset(es_env_seed(cfg.master_seed, gen, pair, sign, e));
        while (!env.done()) {
            Vec s = obs;
            if (frozen) {
                out.stats.update(obs);
                s = frozen->apply(obs);
            }
            const Transition tr = env.step(policy.mean_action(s, env.time()));
            total += tr.reward;
            ++out.steps;
            obs = tr.next_state;
        }
    }
    out.fitness = total / cfg.episodes_per_eval;
    return out;
}

}  // namespace

void EsConfig::validate() const
{
    if (!(sigma > 0.0))
        throw ConfigError("es: sigma must be positive");
    if (!(lr > 0.0))
        throw ConfigError("es: lr must be positive");
    if (workers < 1)
        throw ConfigError("es: workers must be at least 1");
    if (generations < 0)
        throw ConfigError("es: generations must be non-negative");
    if (episodes_per_eval < 1)
        throw ConfigError("es: episodes_per_eval must be at least 1");
    if (eval_episodes < 0)
        throw ConfigError("es: eval_episodes must be non-negative");
    if (jobs < 1)
        throw ConfigError("es: jobs must be at least 1");
    if (max_timesteps < 0)
        throw ConfigError("es: max_timesteps must be non-negative");
}

std::uint64_t es_pair_seed(std::uint64_t master_seed, int gen, int pair)
{
    return derive_seed({master_seed, static_cast<std::uint64_t>(gen), static_cast<std::uint64_t>(pair)});
}

std::uint64_t es_env_seed(std::uint64_t master_seed, int gen, int pair, int sign, int episode)
{
    return derive_seed({master_seed, static_cast<std::uint64_t>(gen), static_cast<std::uint64_t>(pair),
                        static_cast<std::uint64_t>(sign), static_cast<std::uint64_t>(episode), 0x656e76ULL});
}

ParamVector es_noise(std::uint64_t pair_seed, Eigen::Index dim)
{
    Rng rng(pair_seed);
    return standard_normal(rng, dim);
}

Perturbation perturb(const ParamVector& center, double sigma, std::uint64_t pair_seed)
{
    const ParamVector eps = es_noise(pair_seed, center.size());
    return {center + sigma * eps, center - sigma * eps};
}

std::vector<double> shape_fitness(std::span<const double> raw)
{
    const std::size_t n = raw.size();
    std::vector<double> shaped(n, 0.0);
    if (n < 2)
        return shaped;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && raw[order[j + 1]] == raw[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k)
            shaped[order[k]] = rank / denom - 0.5;
        i = j + 1;
    }
    return shaped;
}

ParamVector es_update(const ParamVector& center, std::span<const double> shaped,
                      std::span<const std::uint64_t> pair_seeds, const EsConfig& cfg)
{
    if (shaped.size() != 2 * pair_seeds.size())
        throw ConfigError("es_update: expected two shaped values per pair");
    ParamVector sum = ParamVector::Zero(center.size());
    for (std::size_t j = 0; j < pair_seeds.size(); ++j) {
        const double w = shaped[2 * j] - shaped[2 * j + 1];
        if (w != 0.0)
            sum += w * es_noise(pair_seeds[j], center.size());
    }
    const double n = static_cast<double>(pair_seeds.size());
    return center + (cfg.lr / (2.0 * n * cfg.sigma)) * sum;
}

Generation run_generation(const ParamVector& center, ObsNormalizer* normalizer, const Architecture& arch,
                          const EnvFactory& make_env, const EsConfig& cfg, int gen_index)
{
    cfg.validate();
    const int pairs = cfg.workers;
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(pairs));
    for (int j = 0; j < pairs; ++j)
        seeds[static_cast<std::size_t>(j)] = es_pair_seed(cfg.master_seed, gen_index, j);

    std::vector<EvalOutcome> outcomes(static_cast<std::size_t>(2 * pairs));
    const ObsNormalizer* frozen = normalizer;
    parallel_for(pairs, cfg.jobs, [&](int j) {
        const Perturbation pert = perturb(center, cfg.sigma, seeds[static_cast<std::size_t>(j)]);
        StructuredPolicy policy(arch);
        std::unique_ptr<Env> env;
        try {
            env = make_env();
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("es: environment construction failed: ") + e.what());
        }
        policy.set_params(pert.plus);
        outcomes[static_cast<std::size_t>(2 * j)] = evaluate_perturbation(policy, frozen, *env, cfg, gen_index, j, 0);
        policy.set_params(pert.minus);
        outcomes[static_cast<std::size_t>(2 * j + 1)] =
            evaluate_perturbation(policy, frozen, *env, cfg, gen_index, j, 1);
    });

    Generation g;
    g.index = gen_index;
    g.center = center;
    g.fitness.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        g.fitness.push_back(o.fitness);
        g.timesteps += o.steps;
    }
    if (normalizer)
        for (const auto& o : outcomes)
            normalizer->merge(o.stats);

    const std::vector<double> shaped = shape_fitness(g.fitness);
    const ParamVector next = es_update(center, shaped, seeds, cfg);
    g.update = next - center;
    return g;
}

Generation run_generation(const ParamVector& center, const FitnessFn& fitness, const EsConfig& cfg, int gen_index)
{
    cfg.validate();
    const int pairs = cfg.workers;
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(pairs));
    for (int j = 0; j < pairs; ++j)
        seeds[static_cast<std::size_t>(j)] = es_pair_seed(cfg.master_seed, gen_index, j);
    Generation g;
    g.index = gen_index;
    g.center = center;
    g.fitness.assign(static_cast<std::size_t>(2 * pairs), 0.0);
    parallel_for(pairs, cfg.jobs, [&](int j) {
        const Perturbation pert = perturb(center, cfg.sigma, seeds[static_cast<std::size_t>(j)]);
        g.fitness[static_cast<std::size_t>(2 * j)] = fitness(pert.plus);
        g.fitness[static_cast<std::size_t>(2 * j + 1)] = fitness(pert.minus);
    });
    g.update = es_update(center, shape_fitness(g.fitness), seeds, cfg) - center;
    return g;
}

std::vector<double> es_evaluate_center(const TrainedPolicy& p, const EnvFactory& make_env, const EsConfig& cfg,
                                       int gen_index)
{
    std::vector<double> rewards;
    auto env = make_env();
    const Actor actor = make_actor(p);
    for (int e = 0; e < cfg.eval_episodes; ++e) {
        const std::uint64_t seed =
            derive_seed({cfg.master_seed, static_cast<std::uint64_t>(gen_index), kEvalTag, static_cast<std::uint64_t>(e)});
        rewards.push_back(run_episode(actor, *env, seed).total_reward);
    }
    return rewards;
}

EsResult train_es(const Architecture& arch, const EnvFactory& make_env, const EsConfig& cfg,
                  const std::function<void(const EsRecord&)>& on_generation)
{
    cfg.validate();
    arch.validate();
    if (arch.gaussian_head)
        throw ConfigError("es: architectures for ES act deterministically and take no Gaussian head");

    Rng init_rng(derive_seed({cfg.master_seed, kInitTag}));
    ParamVector center = init_params(arch, TrainMode::es, init_rng);
    EsResult res{TrainedPolicy{StructuredPolicy(arch), std::nullopt}, {}, {}};
    if (cfg.normalize_obs)
        res.trained.normalizer = ObsNormalizer(arch.state_dim);

    const auto start = std::chrono::steady_clock::now();
    std::int64_t timesteps = 0;
    const std::int64_t worst_case_steps = [&] {
        const auto env = make_env();
        return static_cast<std::int64_t>(2) * cfg.workers * cfg.episodes_per_eval * env->spec().max_steps;
    }();
    for (int gen = 0; gen < cfg.generations; ++gen) {
        if (cfg.max_timesteps > 0 && timesteps + worst_case_steps > cfg.max_timesteps)
            break;
        ObsNormalizer* norm = res.trained.normalizer ? &*res.trained.normalizer : nullptr;
        Generation g = run_generation(center, norm, arch, make_env, cfg, gen);
        center += g.update;
        timesteps += g.timesteps;
        res.trained.policy.set_params(center);

        EsRecord rec;
        rec.generation = gen;
        rec.timesteps = timesteps;
        rec.fitness_mean = std::accumulate(g.fitness.begin(), g.fitness.end(), 0.0) / g.fitness.size();
        rec.fitness_min = *std::min_element(g.fitness.begin(), g.fitness.end());
        rec.fitness_max = *std::max_element(g.fitness.begin(), g.fitness.end());
        const std::vector<double> evals = es_evaluate_center(res.trained, make_env, cfg, gen);
        rec.eval_mean = evals.empty() ? rec.fitness_mean
                                      : std::accumulate(evals.begin(), evals.end(), 0.0) / evals.size();
        for (double r : evals)
            res.episodes.push_back({timesteps, r});
        rec.center_norm = center.norm();
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.curve.push_back(rec);
        if (on_generation)
            on_generation(rec);
    }
    res.trained.policy.set_params(center);
    return res;
}

}  // namespace scn
