#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "scn/ppo.hpp"
#include "testing.hpp"

using namespace scn;
using namespace scn::testing;

namespace {

struct Fixture {
    Architecture arch;
    StructuredPolicy policy;
    Critic critic;
    RolloutBuffer buffer;
    std::vector<std::size_t> index;

    PpoBatch batch() const { return {&buffer, index}; }
};

/// Random policy, critic and batch; old log-probs jittered so ratios spread around 1.
Fixture random_fixture(Rng& rng, int n, double jitter)
{
    Architecture arch = random_arch(rng, true);
    StructuredPolicy policy(arch);
    policy.set_params(random_params(policy.param_count(), rng, 0.5));
    Critic critic(arch.state_dim, {5, 4});
    critic.set_params(std::span<const double>(random_params(critic.param_count(), rng, 0.5).data(),
                                              critic.param_count()));
    RolloutBuffer b;
    for (int i = 0; i < n; ++i) {
        const Vec s = random_vec(arch.state_dim, rng);
        const double t = uniform(rng, 0.0, 4.0);
        const Vec a = policy.mean_action(s, t) + random_vec(arch.action_dim, rng, 0.7);
        b.states.push_back(s);
        b.times.push_back(t);
        b.actions.push_back(a);
        b.log_prob_old.push_back(gaussian_log_prob(policy.mean_action(s, t), policy.head()->log_std, a)
                                 + uniform(rng, -jitter, jitter));
        b.advantages.push_back(uniform(rng, -2.0, 2.0));
        b.return_targets.push_back(uniform(rng, -3.0, 3.0));
        b.rewards.push_back(0.0);
        b.dones.push_back(0);
    }
    std::vector<std::size_t> index(static_cast<std::size_t>(n));
    std::iota(index.begin(), index.end(), 0);
    return Fixture{arch, policy, critic, std::move(b), std::move(index)};
}

PgConfig unclipped_grad_config()
{
    PgConfig cfg;
    cfg.max_grad_norm = std::numeric_limits<double>::infinity();
    return cfg;
}

}  // namespace

TEST_CASE("gae")
{
    const std::vector<double> zeros(4, 0.0);
    const std::vector<double> zero_values(5, 0.0);
    const std::vector<char> live(4, 0);
    const Gae z = compute_gae(zeros, zero_values, live, 0.99, 0.95);
    for (double a : z.advantages)
        CHECK(a == 0.0);

    const std::vector<double> r1{3.0};
    const std::vector<double> v1{1.25, 7.0};
    const std::vector<char> d1{1};
    CHECK(compute_gae(r1, v1, d1, 0.99, 0.95).advantages[0] == 3.0 - 1.25);

    // brute force: A_t = sum_k (gamma lambda)^k delta_{t+k}, cut after a done
    const double gamma = 0.9, lambda = 0.8;
    const std::vector<double> r{1.0, -0.5, 2.0, 0.3};
    const std::vector<double> v{0.2, 0.4, -0.1, 0.6, 0.9};
    const std::vector<char> d{0, 1, 0, 0};
    const Gae g = compute_gae(r, v, d, gamma, lambda);
    for (int t = 0; t < 4; ++t) {
        double expected = 0.0, weight = 1.0;
        for (int k = t; k < 4; ++k) {
            const double delta = r[k] + (d[k] ? 0.0 : gamma * v[k + 1]) - v[k];
            expected += weight * delta;
            if (d[k])
                break;
            weight *= gamma * lambda;
        }
        CAPTURE(t);
        CHECK(g.advantages[t] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(g.return_targets[t] == doctest::Approx(expected + v[t]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(compute_gae(r, r, d, gamma, lambda), ConfigError);
}

TEST_CASE("advantage standardization")
{
    Rng rng(1);
    std::vector<double> x(1000);
    for (double& v : x)
        v = uniform(rng, -5.0, 20.0);
    standardize(x);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x)
        var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(std::sqrt(var / x.size()) - 1.0) < 1e-10);

    std::vector<double> same(5, 2.0);
    standardize(same);
    for (double v : same)
        CHECK(v == 0.0);
}

TEST_CASE("adam")
{
    Vec x = Vec::Constant(1, 1.0);
    AdamState st;
    adam_step(x, Vec::Zero(1), st, 0.1);
    CHECK(x[0] == 1.0);

    // f(x) = x^2 from x0 = 1, lr 0.1, traced with scalar arithmetic
    x[0] = 1.0;
    st = {};
    double ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const double g = 2.0 * ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        adam_step(x, Vec::Constant(1, 2.0 * x[0]), st, 0.1);
        CHECK(x[0] == doctest::Approx(ref).epsilon(1e-14));
        if (t == 1)
            CHECK(x[0] == doctest::Approx(0.9));
    }

    Vec y = Vec::Zero(2);
    AdamState s2;
    const Vec g{{3.0, -0.01}};
    Vec before = y;
    for (int i = 0; i < 2000; ++i) {
        before = y;
        adam_step(y, g, s2, 0.01);
    }
    const Vec step = y - before;
    CHECK(step[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(step[1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("critic")
{
    Critic c(3);
    CHECK(c.param_count() == 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    CHECK(c.net().has_output_bias());
    Rng rng(2);
    c.init(rng);
    for (int i = 0; i < 10; ++i)
        CHECK(std::isfinite(c.value(random_vec(3, rng, 100.0))));

    ParamVector p = ParamVector::Zero(static_cast<Eigen::Index>(c.param_count()));
    p[p.size() - 1] = 1.5;
    c.set_params(std::span<const double>(p.data(), c.param_count()));
    CHECK(c.value(random_vec(3, rng)) == 1.5);

    Critic small(2, {3});
    const ParamVector q = random_params(small.param_count(), rng);
    small.set_params(std::span<const double>(q.data(), small.param_count()));
    const Vec s = random_vec(2, rng);
    ParamVector grad = ParamVector::Zero(q.size());
    small.accumulate_grad(s, 1.0, std::span<double>(grad.data(), small.param_count()));
    Critic probe(2, {3});
    const Vec fd = finite_diff([&](const Vec& x) {
        probe.set_params(std::span<const double>(x.data(), probe.param_count()));
        return probe.value(s);
    }, q);
    CHECK(relative_error(grad, fd) < 1e-6);
}

TEST_CASE("ppo loss by hand")
{
    Rng rng(5);
    Fixture f = random_fixture(rng, 2, 0.0);
    PgConfig cfg = unclipped_grad_config();
    auto& b = f.buffer;
    const double ratio[2] = {1.5, 0.5};
    const double adv[2] = {1.0, -1.0};
    const double err[2] = {1.0, -3.0};
    for (int i = 0; i < 2; ++i) {
        const double lp = gaussian_log_prob(f.policy.mean_action(b.states[i], b.times[i]), f.policy.head()->log_std,
                                            b.actions[i]);
        b.log_prob_old[i] = lp - std::log(ratio[i]);
        b.advantages[i] = adv[i];
        b.return_targets[i] = f.critic.value(b.states[i]) - err[i];
    }
    const PpoLoss l = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    // min(1.5, 1.2) * 1 = 1.2 and min(-0.5, -0.8) = -0.8
    CHECK(l.policy_loss == doctest::Approx(-(1.2 - 0.8) / 2).epsilon(1e-12));
    CHECK(l.value_loss == doctest::Approx((1.0 + 9.0) / 2).epsilon(1e-12));
    CHECK(l.loss == doctest::Approx(-0.2 + 0.5 * 5.0).epsilon(1e-12));
    CHECK(l.clip_fraction == 1.0);
    // both samples sit on the clipped branch, so no policy gradient flows
    CHECK(l.policy_grad.isZero(0));
}

TEST_CASE("on-policy identity and clip saturation")
{
    Rng rng(6);
    Fixture f = random_fixture(rng, 16, 0.0);
    standardize(f.buffer.advantages);
    PgConfig cfg = unclipped_grad_config();
    const PpoLoss l = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    CHECK(std::abs(l.policy_loss) < 1e-12);
    CHECK(std::abs(l.approx_kl) < 1e-12);
    CHECK(l.clip_fraction == 0.0);

    for (auto& lp : f.buffer.log_prob_old)
        lp -= 1.0;  // ratio e > 1 + eps everywhere
    for (auto& a : f.buffer.advantages)
        a = std::abs(a) + 0.1;
    const PpoLoss sat = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    CHECK(sat.policy_grad.isZero(0));
    CHECK(sat.policy_loss == doctest::Approx(-1.2 * std::accumulate(f.buffer.advantages.begin(),
                                                                     f.buffer.advantages.end(), 0.0) / 16));
}

TEST_CASE("unbounded clip range reduces to the vanilla policy gradient")
{
    Rng rng(8);
    Fixture f = random_fixture(rng, 12, 0.0);
    PgConfig cfg = unclipped_grad_config();
    cfg.clip_eps = 1e9;
    cfg.value_coef = 0.0;
    const PpoLoss l = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    ParamVector vanilla = ParamVector::Zero(static_cast<Eigen::Index>(f.policy.param_count()));
    for (std::size_t i = 0; i < 12; ++i)
        vanilla -= f.buffer.advantages[i] / 12.0
                   * f.policy.log_prob_grad(f.buffer.states[i], f.buffer.times[i], f.buffer.actions[i]);
    CHECK(relative_error(l.policy_grad, vanilla) < 1e-12);
}

TEST_CASE("ppo loss gradient matches finite differences")
{
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        Fixture f = random_fixture(rng, 6, 0.3);
        PgConfig cfg = unclipped_grad_config();
        cfg.entropy_coef = trial % 2 == 0 ? 0.0 : 0.01;
        const PpoLoss l = ppo_loss(f.batch(), f.policy, f.critic, cfg);
        const auto np = static_cast<Eigen::Index>(f.policy.param_count());
        const auto nc = static_cast<Eigen::Index>(f.critic.param_count());
        Vec theta(np + nc);
        theta << f.policy.params(), f.critic.params();
        Vec analytic(np + nc);
        analytic << l.policy_grad, l.critic_grad;
        StructuredPolicy p = f.policy;
        Critic c = f.critic;
        const Vec fd = finite_diff([&](const Vec& x) {
            p.set_params(std::span<const double>(x.data(), static_cast<std::size_t>(np)));
            c.set_params(std::span<const double>(x.data() + np, static_cast<std::size_t>(nc)));
            return ppo_loss(f.batch(), p, c, cfg).loss;
        }, theta);
        CAPTURE(trial);
        CHECK(relative_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("gradient clipping")
{
    Rng rng(21);
    Fixture f = random_fixture(rng, 8, 0.2);
    PgConfig cfg = unclipped_grad_config();
    const PpoLoss raw = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    cfg.max_grad_norm = raw.grad_norm / 4;
    const PpoLoss clipped = ppo_loss(f.batch(), f.policy, f.critic, cfg);
    const double norm = std::sqrt(clipped.policy_grad.squaredNorm() + clipped.critic_grad.squaredNorm());
    CHECK(norm == doctest::Approx(cfg.max_grad_norm).epsilon(1e-12));
    CHECK(clipped.grad_norm == raw.grad_norm);
    CHECK(relative_error(clipped.policy_grad * 4, raw.policy_grad) < 1e-12);
}

TEST_CASE("non-finite loss aborts the update")
{
    Rng rng(22);
    Fixture f = random_fixture(rng, 4, 0.0);
    f.buffer.advantages[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ppo_loss(f.batch(), f.policy, f.critic, PgConfig{}), NumericalError);
}

TEST_CASE("rollout collection matches a hand trace")
{
    const Architecture arch = preset_architecture("SCN-4", 3, 1, TrainMode::pg);
    Rng init(3);
    const StructuredPolicy policy = unflatten(init_params(arch, TrainMode::pg, init), arch);
    Critic critic(3, {8, 8});
    critic.init(init);

    PgConfig cfg;
    cfg.rollout_len = 3;
    RolloutState rs;
    rs.env = make_env("PendulumSwingUp", {{"max_steps", 3}});
    rs.obs = rs.env->reset(77);
    rs.need_reset = false;
    Rng rng(4);
    Rng replay_rng = rng;
    const RolloutBuffer b = collect_rollout(policy, critic, rs, nullptr, cfg, rng);
    REQUIRE(b.size() == 3);
    REQUIRE(b.value_old.size() == 4);

    auto env = make_env("PendulumSwingUp", {{"max_steps", 3}});
    Vec obs = env->reset(77);
    for (int k = 0; k < 3; ++k) {
        const double t = env->time();
        const ActionSample a = sample_action(policy.mean_action(obs, t), *policy.head(), replay_rng);
        CHECK(bit_equal(b.states[k], obs));
        CHECK(b.times[k] == t);
        CHECK(bit_equal(b.actions[k], a.action));
        CHECK(b.log_prob_old[k] == a.log_prob);
        CHECK(b.value_old[k] == critic.value(obs));
        const Transition tr = env->step(a.action);
        const double expected = tr.done ? tr.reward + cfg.gamma * critic.value(tr.next_state) : tr.reward;
        CHECK(b.rewards[k] == expected);
        CHECK(b.dones[k] == (k == 2 ? 1 : 0));
        obs = tr.next_state;
    }
    CHECK(b.value_old[3] == 0.0);
    REQUIRE(rs.finished.size() == 1);
    CHECK(rs.need_reset);
}

TEST_CASE("rollouts are deterministic and zero rewards give zero targets")
{
    const Architecture arch = preset_architecture("SCN-4", 8, 2, TrainMode::pg);
    Rng init(1);
    const StructuredPolicy policy = unflatten(init_params(arch, TrainMode::pg, init), arch);
    Critic critic(8, {4});
    critic.init(init);
    PgConfig cfg;
    cfg.rollout_len = 300;
    const auto collect = [&] {
        RolloutState rs;
        rs.env = make_env("PointMassTracking");
        rs.seed = 9;
        Rng rng(2);
        ObsNormalizer norm(8);
        return collect_rollout(policy, critic, rs, &norm, cfg, rng);
    };
    const RolloutBuffer a = collect();
    const RolloutBuffer b = collect();
    CHECK(a.rewards == b.rewards);
    CHECK(a.log_prob_old == b.log_prob_old);
    CHECK(a.dones == b.dones);
    CHECK(std::count(a.dones.begin(), a.dones.end(), 1) == 1);

    const std::vector<double> zeros(5, 0.0);
    const std::vector<char> d{0, 0, 1, 0, 0};
    const Gae g = compute_gae(zeros, std::vector<double>(6, 0.0), d, 0.99, 0.95);
    for (double r : g.return_targets)
        CHECK(r == 0.0);
}

TEST_CASE("short ppo runs are reproducible")
{
    const Architecture arch = preset_architecture("SCN-4", 3, 1, TrainMode::pg);
    PgConfig cfg;
    cfg.total_timesteps = 1000;
    cfg.rollout_len = 256;
    cfg.epochs = 2;
    const PgResult a = train_ppo(arch, env_factory("PendulumSwingUp"), cfg);
    const PgResult b = train_ppo(arch, env_factory("PendulumSwingUp"), cfg);
    CHECK(bit_equal(a.trained.policy.params(), b.trained.policy.params()));
    REQUIRE(a.curve.size() == 4);
    CHECK(a.curve.back().timesteps == 1000);
    CHECK(a.episodes.size() == 5);

    CHECK_THROWS_AS(train_ppo(preset_architecture("SCN-4", 3, 1, TrainMode::es), env_factory("PendulumSwingUp"), cfg),
                    ConfigError);
    cfg.clip_eps = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
