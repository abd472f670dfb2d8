#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "scn/envs.hpp"
#include "scn/normalizer.hpp"
#include "scn/rollout.hpp"
#include "testing.hpp"

using namespace scn;
using namespace scn::testing;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Transition> scripted(Env& env, std::uint64_t seed, int steps, std::uint64_t action_seed)
{
    Rng rng(action_seed);
    std::vector<Transition> out;
    env.reset(seed);
    for (int i = 0; i < steps && !env.done(); ++i) {
        Vec a(env.spec().action_dim);
        for (Eigen::Index k = 0; k < a.size(); ++k)
            a[k] = uniform(rng, -3.0, 3.0);
        out.push_back(env.step(a));
    }
    return out;
}

}  // namespace

TEST_CASE("env specs are valid")
{
    for (const auto& name : env_names()) {
        const auto env = make_env(name);
        CAPTURE(name);
        CHECK_NOTHROW(env->spec().validate());
        CHECK(env->spec().dt > 0.0);
        CHECK(env->spec().dt <= 0.1);
        CHECK(env->spec().gamma < 1.0);
    }
    CHECK_THROWS_AS(make_env("CartPole"), ConfigError);
    CHECK_THROWS_AS(make_env("PendulumSwingUp", {{"lenght", 2.0}}), ConfigError);
    CHECK(make_env("PendulumSwingUp", {{"max_steps", 50}})->spec().max_steps == 50);
}

TEST_CASE("reset and step are deterministic")
{
    for (const auto& name : env_names()) {
        CAPTURE(name);
        const auto a = make_env(name);
        const auto b = make_env(name);
        CHECK(bit_equal(a->reset(42), b->reset(42)));
        const auto ta = scripted(*a, 9, 500, 3);
        const auto tb = scripted(*b, 9, 500, 3);
        REQUIRE(ta.size() == tb.size());
        for (std::size_t i = 0; i < ta.size(); ++i) {
            CHECK(bit_equal(ta[i].next_state, tb[i].next_state));
            CHECK(std::memcmp(&ta[i].reward, &tb[i].reward, sizeof(double)) == 0);
            CHECK(ta[i].done == tb[i].done);
        }
    }
}

TEST_CASE("reset ranges")
{
    PendulumSwingUp pend;
    MergeDriving merge;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        pend.reset(seed);
        CHECK(pend.theta() >= -kPi);
        CHECK(pend.theta() < kPi);
        CHECK(std::abs(pend.theta_dot()) <= 1.0);
        merge.reset(seed);
        CHECK(merge.ego_speed() >= 5.0);
        CHECK(merge.ego_speed() <= 10.0);
    }
}

TEST_CASE("step counter, clock and done")
{
    PointMassTracking env;
    env.reset(1);
    CHECK(env.step_index() == 0);
    CHECK(env.time() == 0.0);
    for (int i = 0; i < 200; ++i) {
        REQUIRE_FALSE(env.done());
        const Transition tr = env.step(Vec::Zero(2));
        CHECK(tr.done == (i == 199));
        if (tr.done)
            CHECK(tr.truncated);
    }
    CHECK(env.time() == doctest::Approx(10.0));
    CHECK_THROWS_AS(env.step(Vec::Zero(2)), UsageError);
    env.reset(1);
    CHECK(env.step_index() == 0);
    CHECK_FALSE(env.done());
}

TEST_CASE("actions are clipped to their bounds")
{
    PendulumSwingUp env;
    env.reset(0);
    const Transition tr = env.step(Vec::Constant(1, 50.0));
    CHECK(tr.action[0] == 2.0);
    CHECK(env.clip_action(Vec::Constant(1, -9.0))[0] == -2.0);
}

TEST_CASE("wrap angle")
{
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(2 * kPi + 0.5) == doctest::Approx(0.5));
    CHECK(wrap_angle(-2 * kPi - 0.5) == doctest::Approx(-0.5));
    for (double x = -20.0; x < 20.0; x += 0.37) {
        const double w = wrap_angle(x);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
    }
}

TEST_CASE("pendulum upright equilibrium")
{
    PendulumSwingUp env;
    env.reset(0);
    env.set_state(0.0, 0.0);
    env.step(Vec::Zero(1));
    CHECK(std::abs(env.theta()) < 1e-6);
}

TEST_CASE("pendulum energy is conserved without torque")
{
    // Semi-implicit Euler wobbles by O(dt) mid-swing but has no secular drift, so
    // energy is compared at velocity reversals against the potential range m g l.
    for (double theta0 : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
        PendulumSwingUp env;
        env.reset(0);
        env.set_state(theta0, 0.0);
        const double e0 = env.energy();
        const double scale = env.params().m * env.params().g * env.params().l;
        double worst = 0.0;
        double prev = 0.0;
        int reversals = 0;
        for (int i = 0; i < 200; ++i) {
            env.step(Vec::Zero(1));
            const double w = env.theta_dot();
            if (i > 0 && (w > 0) != (prev > 0)) {
                worst = std::max(worst, std::abs(env.energy() - e0));
                ++reversals;
            }
            prev = w;
        }
        CAPTURE(theta0);
        CHECK(reversals >= 5);
        CHECK(worst / scale < 0.01);
    }

    PendulumSwingUp small;
    small.reset(0);
    small.set_state(3.0, 0.0);
    const double e0 = small.energy();
    for (int i = 0; i < 200; ++i) {
        small.step(Vec::Zero(1));
        CHECK(std::abs(small.energy() - e0) / std::abs(e0) < 0.01);
    }
}

TEST_CASE("pendulum reward")
{
    PendulumSwingUp env;
    env.reset(0);
    env.set_state(kPi, 2.0);
    const Transition tr = env.step(Vec::Constant(1, 1.0));
    CHECK(tr.reward == doctest::Approx(-(kPi * kPi + 0.1 * 4.0 + 0.001)));
}

TEST_CASE("point mass hand controller tracks the circle")
{
    PointMassTracking env;
    const Actor ctrl = [&](const Vec& obs, double t, const Vec*) {
        const Vec ep = obs.segment(0, 2);
        const Vec ev = obs.segment(2, 2);
        return Vec(-2.0 * ep - 2.0 * ev + env.desired_acceleration(t));
    };
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
        total += run_episode(ctrl, env, seed).total_reward;
    CHECK(total / 20 > -5.0);

    const Actor zero = [](const Vec&, double, const Vec*) { return Vec(Vec::Zero(2)); };
    CHECK(run_episode(zero, env, 1).total_reward < total / 20);
}

TEST_CASE("point mass reward")
{
    PointMassTracking env;
    env.reset(0);
    env.set_state(Vec::Zero(2), Vec::Zero(2), 0.0);
    const Vec pd = env.desired_position(0.0);
    const Vec vd = env.desired_velocity(0.0);
    Vec p = pd;
    p[0] += 0.3;
    env.set_state(p, vd, 0.0);
    const Vec obs = env.state();
    CHECK(obs[0] == doctest::Approx(0.3));
    CHECK(obs.segment(1, 3).isZero(1e-12));
    const Transition tr = env.step(Vec::Constant(2, 0.5));
    // semi-implicit Euler, error measured after the step
    const Vec v1 = vd + Vec::Constant(2, 0.5 * 0.05);
    const Vec e = p + v1 * 0.05 - Vec{{std::cos(0.05), std::sin(0.05)}};
    CHECK(tr.reward == doctest::Approx(-e.squaredNorm() - 0.01 * 0.5));
}

TEST_CASE("rhythm track reward")
{
    RhythmTrack env;
    env.reset(0);
    env.set_velocity(0.4);
    const Transition tr = env.step(Vec::Zero(1));
    const double v1 = 0.4 - 0.5 * 0.4 * 0.05;
    CHECK(tr.reward == doctest::Approx(-(v1 - std::sin(0.075)) * (v1 - std::sin(0.075))));
    CHECK(env.target(1.0) == doctest::Approx(std::sin(1.5)));
}

TEST_CASE("merge crash and goal terminals")
{
    MergeParams quiet;
    quiet.traffic_noise_std = 0.0;
    MergeDriving env(quiet);

    env.reset(0);
    env.set_scene({155.0, 10.0}, {{155.0 + 5.0 + 0.5, 10.0}});
    Transition tr = env.step(Vec::Zero(1));
    CHECK(tr.reward == -200.0);
    CHECK(tr.done);
    CHECK(tr.terminal);
    CHECK(tr.info.at("crash") == 1.0);

    env.reset(0);
    env.set_scene({249.5, 10.0}, {});
    tr = env.step(Vec::Zero(1));
    CHECK(tr.reward == 200.0);
    CHECK(tr.done);
    CHECK(tr.info.at("goal") == 1.0);
}

TEST_CASE("merge shaping terms")
{
    MergeParams quiet;
    quiet.traffic_noise_std = 0.0;
    MergeDriving env(quiet);

    env.reset(0);
    env.set_scene({100.0, 10.0}, {});
    Transition tr = env.step(Vec::Zero(1));
    CHECK(tr.reward == doctest::Approx(0.01 * 1.0));

    env.reset(0);
    env.set_scene({100.0, 20.0}, {});
    tr = env.step(Vec::Zero(1));
    CHECK(tr.reward == doctest::Approx(-0.1 + 0.01 * 2.0));

    env.reset(0);
    env.set_scene({160.0, 10.0}, {{160.0 + 5.0 + 3.0, 10.0}});
    tr = env.step(Vec::Zero(1));
    CHECK(tr.reward == doctest::Approx(-1.0 + 0.01 * 1.0));
}

TEST_CASE("merge observation")
{
    MergeParams quiet;
    quiet.traffic_noise_std = 0.0;
    MergeDriving env(quiet);
    env.reset(0);
    env.set_scene({120.0, 8.0}, {{140.0, 10.0}, {110.0, 11.0}});
    const Vec o = env.state();
    CHECK(o[0] == 8.0);
    CHECK(o[1] == 30.0);
    CHECK(o[2] == doctest::Approx(15.0));
    CHECK(o[3] == doctest::Approx(2.0));
    CHECK(o[4] == doctest::Approx(5.0));
    CHECK(o[5] == doctest::Approx(3.0));

    env.set_scene({120.0, 8.0}, {});
    CHECK(env.state()[2] == 100.0);
    CHECK(env.state()[3] == 0.0);
    CHECK(env.state()[4] == 100.0);
}

TEST_CASE("idm ego never crashes")
{
    MergeDriving env;
    const Actor idm = [](const Vec& obs, double, const Vec*) {
        return Vec(Vec::Constant(1, MergeDriving::idm_policy(obs)));
    };
    int crashes = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const EpisodeResult r = run_episode(idm, env, seed);
        if (r.last_info.count("crash"))
            ++crashes;
    }
    CHECK(crashes == 0);
}

TEST_CASE("idm acceleration")
{
    IdmParams p;
    CHECK(idm_acceleration(p, 0.0, std::numeric_limits<double>::infinity(), 0.0) == doctest::Approx(1.5));
    CHECK(idm_acceleration(p, 12.0, std::numeric_limits<double>::infinity(), 0.0) == doctest::Approx(0.0));
    CHECK(idm_acceleration(p, 10.0, 0.0, 0.0) == -9.0);
    // s* = 2 + 10 * 1.5 = 17, free term 1 - (10/12)^4
    const double expected = 1.5 * (1 - std::pow(10.0 / 12.0, 4) - (17.0 / 20.0) * (17.0 / 20.0));
    CHECK(idm_acceleration(p, 10.0, 20.0, 0.0) == doctest::Approx(expected));
}

TEST_CASE("rewards stay in the documented range")
{
    for (const auto& name : env_names()) {
        const auto env = make_env(name);
        CAPTURE(name);
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            for (const Transition& tr : scripted(*env, seed, 1000, seed + 100)) {
                CHECK(std::isfinite(tr.reward));
                CHECK(tr.reward >= env->spec().reward_min);
                CHECK(tr.reward <= env->spec().reward_max);
            }
    }
}

TEST_CASE("random episodes are seeded")
{
    PendulumSwingUp env;
    const double a = run_random_episode(env, 5).total_reward;
    const double b = run_random_episode(env, 5).total_reward;
    CHECK(a == b);
    CHECK(run_random_episode(env, 6).total_reward != a);
}

TEST_CASE("episode trace csv")
{
    PendulumSwingUp env;
    env.reset(0);
    std::ostringstream os;
    write_trace_header(os, env.spec());
    write_trace_row(os, 0, env.step(Vec::Constant(1, 0.5)));
    const std::string text = os.str();
    CHECK(text.rfind("step,s0,s1,s2,a0,reward,done\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("normalizer")
{
    ObsNormalizer n(2);
    const Vec x{{3.0, -4.0}};
    CHECK(n.apply(x) == x);
    n.update(x);
    CHECK(n.apply(x) == x);
    for (int i = 0; i < 50; ++i)
        n.update(x);
    CHECK(n.apply(x).norm() < 1e-12);

    ObsNormalizer m(3);
    Rng rng(4);
    for (int i = 0; i < 100000; ++i)
        m.normalize(standard_normal(rng, 3), true);
    CHECK(m.mean().cwiseAbs().maxCoeff() < 0.05);
    CHECK((m.variance().array() - 1.0).abs().maxCoeff() < 0.05);

    const std::int64_t before = m.count();
    m.normalize(Vec::Ones(3), false);
    CHECK(m.count() == before);
}

TEST_CASE("normalizer merge equals sequential updates")
{
    Rng rng(8);
    ObsNormalizer all(2), a(2), b(2);
    for (int i = 0; i < 300; ++i) {
        const Vec x = random_vec(2, rng, 5.0);
        all.update(x);
        (i < 120 ? a : b).update(x);
    }
    a.merge(b);
    CHECK(a.count() == all.count());
    CHECK((a.mean() - all.mean()).norm() < 1e-12);
    CHECK((a.variance() - all.variance()).norm() < 1e-10);

    ObsNormalizer empty(2);
    empty.merge(all);
    CHECK(empty == all);
}
