#include "scn/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace scn {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kCriticTag = 0x63726974ULL;
constexpr std::uint64_t kActionTag = 0x61637400ULL;
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;
constexpr std::uint64_t kEnvTag = 0x656e7600ULL;

double mean_of(const std::vector<double>& x, std::size_t n)
{
    if (n == 0)
        return 0.0;
    return std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

double explained_variance(const std::vector<double>& predicted, const std::vector<double>& target)
{
    const std::size_t n = target.size();
    if (n == 0)
        return 0.0;
    const double mt = mean_of(target, n);
    double var_t = 0.0, var_r = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mr += target[i] - predicted[i];
    mr /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        var_t += (target[i] - mt) * (target[i] - mt);
        const double r = target[i] - predicted[i] - mr;
        var_r += r * r;
    }
    if (var_t == 0.0)
        return 0.0;
    return 1.0 - var_r / var_t;
}

}  // namespace

void PgConfig::validate() const
{
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ConfigError("pg: gamma must lie in [0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
        throw ConfigError("pg: gae_lambda must lie in [0, 1]");
    if (!(clip_eps > 0.0 && clip_eps < 1.0))
        throw ConfigError("pg: clip_eps must lie in (0, 1)");
    if (rollout_len < 1)
        throw ConfigError("pg: rollout_len must be at least 1");
    if (epochs < 1)
        throw ConfigError("pg: epochs must be at least 1");
    if (minibatch < 1)
        throw ConfigError("pg: minibatch must be at least 1");
    if (!(policy_lr > 0.0))
        throw ConfigError("pg: policy_lr must be positive");
    if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0))
        throw ConfigError("pg: value_coef and entropy_coef must be non-negative");
    if (!(max_grad_norm > 0.0))
        throw ConfigError("pg: max_grad_norm must be positive");
    if (total_timesteps < 0)
        throw ConfigError("pg: total_timesteps must be non-negative");
}

Critic::Critic(int state_dim, std::vector<int> hidden) : net_(state_dim, std::move(hidden), 1, true) {}

ParamVector Critic::params() const
{
    ParamVector p(static_cast<Eigen::Index>(net_.param_count()));
    net_.write_params(std::span<double>(p.data(), static_cast<std::size_t>(p.size())));
    return p;
}

void Critic::set_params(std::span<const double> p)
{
    if (p.size() != net_.param_count())
        throw ConfigError("critic: parameter vector has wrong length");
    net_.read_params(p);
}

double Critic::value(const Vec& s) const
{
    return net_.forward(s)[0];
}

void Critic::accumulate_grad(const Vec& s, double scale, std::span<double> grad) const
{
    Mlp::Trace trace;
    net_.forward(s, trace);
    net_.backward(trace, Vec::Constant(1, scale), grad);
}

void Critic::init(Rng& rng)
{
    for (auto& w : net_.weights()) {
        const double bound = std::sqrt(3.0 / static_cast<double>(w.cols()));
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] = uniform(rng, -bound, bound);
    }
    for (auto& b : net_.biases())
        b.setZero();
}

Gae compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
                double gamma, double lambda)
{
    const std::size_t n = rewards.size();
    if (values.size() != n + 1 || dones.size() != n)
        throw ConfigError("compute_gae: expected values of length n + 1 and dones of length n");
    Gae out;
    out.advantages.assign(n, 0.0);
    out.return_targets.assign(n, 0.0);
    double next_adv = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double live = dones[k] ? 0.0 : 1.0;
        const double delta = rewards[k] + gamma * values[k + 1] * live - values[k];
        next_adv = delta + gamma * lambda * live * next_adv;
        out.advantages[k] = next_adv;
        out.return_targets[k] = next_adv + values[k];
    }
    return out;
}

void standardize(std::vector<double>& x)
{
    if (x.empty())
        return;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    for (double& v : x)
        v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

RolloutBuffer collect_rollout(const StructuredPolicy& policy, const Critic& critic, RolloutState& state,
                              ObsNormalizer* normalizer, const PgConfig& cfg, Rng& rng)
{
    if (!policy.head())
        throw ConfigError("collect_rollout: policy needs a Gaussian head");
    if (!state.env)
        throw UsageError("collect_rollout: rollout state has no environment");
    Env& env = *state.env;
    const auto view = [&](const Vec& obs) { return normalizer ? normalizer->apply(obs) : obs; };

    RolloutBuffer buf;
    const auto n = static_cast<std::size_t>(cfg.rollout_len);
    buf.states.reserve(n);
    buf.times.reserve(n);
    buf.actions.reserve(n);
    buf.rewards.reserve(n);
    buf.dones.reserve(n);
    buf.log_prob_old.reserve(n);
    buf.value_old.reserve(n + 1);

    for (std::size_t k = 0; k < n; ++k) {
        if (state.need_reset) {
            state.obs = env.reset(derive_seed({state.seed, kEnvTag, state.episodes_started++}));
            state.need_reset = false;
            state.episode_reward = 0.0;
        }
        const Vec s = normalizer ? normalizer->normalize(state.obs, true) : state.obs;
        const double t = env.time();
        const ActionSample sample = sample_action(policy.mean_action(s, t), *policy.head(), rng);
        const double v = critic.value(s);
        const Transition tr = env.step(sample.action);
        ++state.steps_taken;
        state.episode_reward += tr.reward;

        double r = tr.reward;
        if (tr.done) {
            state.finished.push_back({state.steps_taken, state.episode_reward});
            state.need_reset = true;
            if (tr.truncated && !tr.terminal)
                r += cfg.gamma * critic.value(view(tr.next_state));
        }
        buf.states.push_back(s);
        buf.times.push_back(t);
        buf.actions.push_back(sample.action);
        buf.rewards.push_back(r);
        buf.dones.push_back(tr.done ? 1 : 0);
        buf.log_prob_old.push_back(sample.log_prob);
        buf.value_old.push_back(v);
        state.obs = tr.next_state;
    }
    buf.value_old.push_back(state.need_reset ? 0.0 : critic.value(view(state.obs)));
    return buf;
}

PpoLoss ppo_loss(const PpoBatch& batch, const StructuredPolicy& policy, const Critic& critic, const PgConfig& cfg)
{
    if (!policy.head())
        throw ConfigError("ppo_loss: policy needs a Gaussian head");
    if (!batch.buffer || batch.index.empty())
        throw UsageError("ppo_loss: empty batch");
    const RolloutBuffer& b = *batch.buffer;
    const Vec& log_std = policy.head()->log_std;
    const double n = static_cast<double>(batch.index.size());

    PpoLoss out;
    out.policy_grad = ParamVector::Zero(static_cast<Eigen::Index>(policy.param_count()));
    out.critic_grad = ParamVector::Zero(static_cast<Eigen::Index>(critic.param_count()));
    std::span<double> cgrad(out.critic_grad.data(), static_cast<std::size_t>(out.critic_grad.size()));

    double clipped = 0.0;
    for (std::size_t i : batch.index) {
        const Vec& s = b.states[i];
        const double t = b.times[i];
        const Vec& a = b.actions[i];
        const double adv = b.advantages[i];

        const double lp = gaussian_log_prob(policy.mean_action(s, t), log_std, a);
        const double ratio = std::exp(lp - b.log_prob_old[i]);
        const double surr = ratio * adv;
        const double surr_clip = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        out.policy_loss -= std::min(surr, surr_clip);
        if (surr <= surr_clip)
            out.policy_grad += (-surr / n) * policy.log_prob_grad(s, t, a);
        if (std::abs(ratio - 1.0) > cfg.clip_eps)
            clipped += 1.0;
        out.approx_kl += b.log_prob_old[i] - lp;

        Mlp::Trace trace;
        const double err = critic.net().forward(s, trace)[0] - b.return_targets[i];
        out.value_loss += err * err;
        critic.net().backward(trace, Vec::Constant(1, cfg.value_coef * 2.0 * err / n), cgrad);
    }
    out.policy_loss /= n;
    out.value_loss /= n;
    out.approx_kl /= n;
    out.clip_fraction = clipped / n;
    out.entropy = log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * std::numbers::pi * std::numbers::e);
    out.loss = out.policy_loss + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;
    if (cfg.entropy_coef != 0.0)
        out.policy_grad.tail(log_std.size()).array() -= cfg.entropy_coef;

    out.grad_norm = std::sqrt(out.policy_grad.squaredNorm() + out.critic_grad.squaredNorm());
    if (!std::isfinite(out.loss) || !std::isfinite(out.grad_norm)) {
        std::ostringstream msg;
        msg << "ppo_loss: non-finite value (loss " << out.loss << ", policy " << out.policy_loss << ", value "
            << out.value_loss << ", grad norm " << out.grad_norm << ")";
        throw NumericalError(msg.str());
    }
    if (out.grad_norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / out.grad_norm;
        out.policy_grad *= scale;
        out.critic_grad *= scale;
    }
    return out;
}

void adam_step(Vec& params, const Vec& grads, AdamState& state, double lr)
{
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (grads.size() != params.size())
        throw ConfigError("adam_step: gradient and parameter sizes differ");
    if (state.m.size() != params.size()) {
        state.m = Vec::Zero(params.size());
        state.v = Vec::Zero(params.size());
        state.t = 0;
    }
    ++state.t;
    state.m = beta1 * state.m + (1.0 - beta1) * grads;
    state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

PgResult train_ppo(const Architecture& arch, const EnvFactory& make_env, const PgConfig& cfg,
                   const std::function<void(const PgRecord&)>& on_update)
{
    cfg.validate();
    arch.validate();
    if (!arch.gaussian_head)
        throw ConfigError("pg: architecture needs a Gaussian head (use mode pg)");
    const auto start = std::chrono::steady_clock::now();

    RolloutState rs;
    rs.env = make_env();
    rs.seed = cfg.seed;
    if (rs.env->spec().state_dim != arch.state_dim || rs.env->spec().action_dim != arch.action_dim)
        throw ConfigError("pg: architecture dimensions do not match the environment");

    Rng init_rng(derive_seed({cfg.seed, kInitTag}));
    StructuredPolicy policy(arch, [&] {
        const ParamVector p = init_params(arch, TrainMode::pg, init_rng);
        return std::vector<double>(p.data(), p.data() + p.size());
    }());
    Critic critic(arch.state_dim);
    Rng critic_rng(derive_seed({cfg.seed, kCriticTag}));
    critic.init(critic_rng);

    std::optional<ObsNormalizer> normalizer;
    if (cfg.normalize_obs)
        normalizer.emplace(arch.state_dim);
    Rng action_rng(derive_seed({cfg.seed, kActionTag}));
    Rng shuffle_rng(derive_seed({cfg.seed, kShuffleTag}));

    const auto np = static_cast<Eigen::Index>(policy.param_count());
    const auto nc = static_cast<Eigen::Index>(critic.param_count());
    Vec theta(np + nc);
    theta << policy.params(), critic.params();
    AdamState adam;

    std::vector<PgRecord> curve;
    std::vector<EpisodeRecord> episodes;
    std::int64_t steps = 0;
    for (int update = 0; steps < cfg.total_timesteps; ++update) {
        PgConfig step_cfg = cfg;
        step_cfg.rollout_len = static_cast<int>(std::min<std::int64_t>(cfg.rollout_len, cfg.total_timesteps - steps));
        RolloutBuffer buf = collect_rollout(policy, critic, rs, normalizer ? &*normalizer : nullptr, step_cfg,
                                            action_rng);
        steps += static_cast<std::int64_t>(buf.size());

        Gae gae = compute_gae(buf.rewards, buf.value_old, buf.dones, cfg.gamma, cfg.gae_lambda);
        buf.advantages = std::move(gae.advantages);
        buf.return_targets = std::move(gae.return_targets);
        standardize(buf.advantages);

        PgRecord rec;
        rec.update = update;
        rec.timesteps = steps;
        std::vector<std::size_t> order(buf.size());
        std::iota(order.begin(), order.end(), 0);
        int batches = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.minibatch)) {
                const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.minibatch));
                PpoBatch batch{&buf, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                                              order.begin() + static_cast<std::ptrdiff_t>(hi))};
                const PpoLoss loss = ppo_loss(batch, policy, critic, cfg);
                Vec grad(np + nc);
                grad << loss.policy_grad, loss.critic_grad;
                adam_step(theta, grad, adam, cfg.policy_lr);
                policy.set_params(std::span<const double>(theta.data(), static_cast<std::size_t>(np)));
                critic.set_params(std::span<const double>(theta.data() + np, static_cast<std::size_t>(nc)));
                rec.policy_loss += loss.policy_loss;
                rec.value_loss += loss.value_loss;
                rec.entropy += loss.entropy;
                rec.approx_kl += loss.approx_kl;
                rec.clip_fraction += loss.clip_fraction;
                ++batches;
            }
        }
        if (batches > 0) {
            rec.policy_loss /= batches;
            rec.value_loss /= batches;
            rec.entropy /= batches;
            rec.approx_kl /= batches;
            rec.clip_fraction /= batches;
        }
        std::vector<double> predicted(buf.value_old.begin(), buf.value_old.end() - 1);
        rec.explained_variance = explained_variance(predicted, buf.return_targets);

        rec.episodes = static_cast<int>(rs.finished.size());
        if (!rs.finished.empty()) {
            rec.reward_min = std::numeric_limits<double>::infinity();
            rec.reward_max = -std::numeric_limits<double>::infinity();
            for (const auto& e : rs.finished) {
                rec.reward_mean += e.reward;
                rec.reward_min = std::min(rec.reward_min, e.reward);
                rec.reward_max = std::max(rec.reward_max, e.reward);
                episodes.push_back(e);
            }
            rec.reward_mean /= static_cast<double>(rs.finished.size());
            rs.finished.clear();
        } else if (!curve.empty()) {
            rec.reward_mean = curve.back().reward_mean;
            rec.reward_min = curve.back().reward_min;
            rec.reward_max = curve.back().reward_max;
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        curve.push_back(rec);
        if (on_update)
            on_update(rec);
    }
    return PgResult{TrainedPolicy{policy, normalizer}, critic, std::move(curve), std::move(episodes)};
}

}  // namespace scn
