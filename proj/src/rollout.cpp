#include "scn/rollout.hpp"

namespace scn {

Vec TrainedPolicy::act(const Vec& obs, double t, StreamMask mask, const Vec* obs_noise) const
{
    if (!normalizer && !obs_noise)
        return policy.mean_action(obs, t, mask);
    Vec s = normalizer ? normalizer->apply(obs) : obs;
    if (obs_noise)
        s += *obs_noise;
    return policy.mean_action(s, t, mask);
}

Actor make_actor(const TrainedPolicy& p, StreamMask mask)
{
    return [&p, mask](const Vec& obs, double t, const Vec* obs_noise) { return p.act(obs, t, mask, obs_noise); };
}

EpisodeResult run_episode(const Actor& actor, Env& env, std::uint64_t seed, const InjectedNoise& noise,
                          const std::function<void(const Transition&)>& on_step)
{
    Vec obs = env.reset(seed);
    Rng noise_rng(derive_seed({seed, 0x6e6f697365ULL}));
    EpisodeResult res;
    const bool noisy = noise.sigma > 0.0;
    while (!env.done()) {
        Vec action;
        if (noisy && noise.target == NoiseTarget::observation) {
            const Vec n = noise.sigma * standard_normal(noise_rng, obs.size());
            action = actor(obs, env.time(), &n);
        } else {
            action = actor(obs, env.time(), nullptr);
        }
        if (noisy && noise.target == NoiseTarget::action)
            action += noise.sigma * standard_normal(noise_rng, action.size());
        Transition tr = env.step(action);
        res.total_reward += tr.reward;
        ++res.steps;
        res.terminal = tr.terminal;
        if (on_step)
            on_step(tr);
        if (tr.done)
            res.last_info = tr.info;
        obs = tr.next_state;
    }
    return res;
}

EpisodeResult run_random_episode(Env& env, std::uint64_t seed)
{
    env.reset(seed);
    Rng rng(derive_seed({seed, 0x72616e64ULL}));
    const EnvSpec& spec = env.spec();
    EpisodeResult res;
    while (!env.done()) {
        Vec a(spec.action_dim);
        for (int d = 0; d < spec.action_dim; ++d)
            a[d] = uniform(rng, spec.action_low[d], spec.action_high[d]);
        Transition tr = env.step(a);
        res.total_reward += tr.reward;
        ++res.steps;
        res.terminal = tr.terminal;
        if (tr.done)
            res.last_info = tr.info;
    }
    return res;
}

}  // namespace scn
