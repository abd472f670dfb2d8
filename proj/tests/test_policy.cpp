#include <doctest.h>

#include <cmath>
#include <numbers>

#include "scn/policy.hpp"
#include "testing.hpp"

using namespace scn;
using namespace scn::testing;

namespace {

Architecture arch_of(int s, int a, bool linear, NonlinearKind nl, std::vector<int> hidden = {})
{
    Architecture arch;
    arch.state_dim = s;
    arch.action_dim = a;
    arch.linear = linear;
    arch.nonlinear = nl;
    arch.hidden = std::move(hidden);
    return arch;
}

Vec vec(std::initializer_list<double> xs)
{
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("linear stream")
{
    LinearStream lin;
    lin.gain = Mat::Zero(2, 2);
    lin.bias = Vec::Zero(2);
    CHECK(lin.forward(vec({3, -7})).isZero(0));

    lin.gain = Mat::Identity(2, 2);
    CHECK(lin.forward(vec({1, 2})) == vec({1, 2}));

    lin.gain << 1, 2, 3, 4;
    lin.bias << 1, 1;
    const Vec out = lin.forward(vec({1, 1}));
    // row sums plus bias
    CHECK(out[0] == doctest::Approx(1 + 2 + 1));
    CHECK(out[1] == doctest::Approx(3 + 4 + 1));
    CHECK_THROWS_AS(lin.forward(vec({1, 2, 3})), ConfigError);
}

TEST_CASE("mlp stream has no output bias")
{
    StructuredPolicy p(arch_of(1, 1, false, NonlinearKind::mlp, {1}));
    REQUIRE(p.param_count() == 3);  // input weight, hidden bias, output weight

    p.set_params(vec({0, 0, 0}));
    for (double s : {-3.0, 0.0, 0.5, 10.0})
        CHECK(p.mean_action(vec({s}), 0.0)[0] == 0.0);

    p.set_params(vec({1, 0, 1}));
    CHECK(p.mean_action(vec({0}), 0.0)[0] == 0.0);

    p.set_params(vec({1, 0, 2}));
    CHECK(p.mean_action(vec({1}), 0.0)[0] == doctest::Approx(1.52318).epsilon(1e-5));
    CHECK(p.mean_action(vec({1}), 0.0)[0] == doctest::Approx(2 * std::tanh(1.0)));
    CHECK_THROWS_AS(p.mean_action(vec({1, 2}), 0.0), ConfigError);
}

TEST_CASE("cpg stream")
{
    CpgStream c;
    c.amplitude = Mat::Zero(1, 3);
    c.frequency = Mat::Constant(1, 3, 1.3);
    c.phase = Mat::Constant(1, 3, 0.4);
    CHECK(c.forward(2.7)[0] == 0.0);

    c.amplitude = Mat::Constant(1, 1, 1.0);
    c.frequency = Mat::Constant(1, 1, std::numbers::pi / 2);
    c.phase = Mat::Zero(1, 1);
    CHECK(c.forward(1.0)[0] == doctest::Approx(1.0));

    Rng rng(3);
    c.amplitude = Mat::Random(2, 4);
    c.frequency = Mat::Random(2, 4);
    c.phase = Mat::Zero(2, 4);
    CHECK(c.forward(0.0).isZero(0));

    c.amplitude = Mat::Zero(2, 4);
    c.amplitude(1, 2) = 0.8;
    c.frequency = Mat::Constant(2, 4, 1.0);
    c.frequency(1, 2) = 1.7;
    c.phase = Mat::Constant(2, 4, 0.3);
    const Vec out = c.forward(0.9);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.8 * std::sin(1.7 * 0.9 + 0.3));
}

TEST_CASE("cpg periodicity")
{
    CpgStream c;
    c.amplitude = Mat::Constant(1, 1, 1.4);
    c.frequency = Mat::Constant(1, 1, 1.25);
    c.phase = Mat::Constant(1, 1, 0.7);
    const double period = 2 * std::numbers::pi / 1.25;
    for (double t : {0.0, 0.33, 1.0, 4.2, 9.9})
        CHECK(std::abs(c.forward(t)[0] - c.forward(t + period)[0]) < 1e-12);
}

TEST_CASE("scn additivity")
{
    StructuredPolicy p(arch_of(2, 2, true, NonlinearKind::mlp, {3}));
    Rng rng(7);
    // linear part fixed to produce [1, -1] at s = [1, 0]
    ParamVector v = ParamVector::Zero(static_cast<Eigen::Index>(p.param_count()));
    v.head(6) << 1, 0, -1, 0, 0, 0;
    p.set_params(v);
    const Vec s = vec({1, 0});
    CHECK(p.mean_action(s, 0.0) == vec({1, -1}));

    // nonlinear output hand-set to [0.5, 0.5]: hidden unit 0 saturates to tanh(20) == 1 in double
    v.segment(6, 9).setZero();
    v[6] = 20.0;   // W1[0,0]
    v[15] = 0.5;   // W2[0,0]
    v[18] = 0.5;   // W2[1,0]
    p.set_params(v);
    const PolicyOutput out = p.forward(s, 0.0);
    CHECK(out.nonlinear[0] == doctest::Approx(0.5));
    CHECK(out.nonlinear[1] == doctest::Approx(0.5));
    CHECK(out.mean[0] == doctest::Approx(1.5));
    CHECK(out.mean[1] == doctest::Approx(-0.5));
    CHECK(out.mean == out.linear + out.nonlinear);
}

TEST_CASE("zero streams are additive identities")
{
    Rng rng(11);
    StructuredPolicy p(arch_of(3, 2, true, NonlinearKind::mlp, {4}));
    ParamVector v = random_params(p.param_count(), rng);
    v.tail(static_cast<Eigen::Index>(p.param_count() - 8)).head(16).setZero();  // hidden weights only
    v.tail(8).setZero();                                                       // output weights
    p.set_params(v);
    const Vec s = random_vec(3, rng);
    CHECK(p.mean_action(s, 0.0) == p.linear()->forward(s));

    v = random_params(p.param_count(), rng);
    v.head(8).setZero();
    p.set_params(v);
    CHECK(p.mean_action(s, 0.0) == p.mlp()->forward(s));
}

TEST_CASE("gaussian head log probability")
{
    GaussianHead head{Vec::Zero(1)};
    CHECK(sample_action_with_noise(vec({0}), head, vec({0})).log_prob == doctest::Approx(-0.91894).epsilon(1e-5));
    CHECK(sample_action_with_noise(vec({0}), head, vec({1})).log_prob == doctest::Approx(-1.41894).epsilon(1e-5));

    GaussianHead tight{Vec::Constant(2, -40.0)};
    Rng rng(1);
    const Vec mean = vec({0.3, -1.2});
    const ActionSample a = sample_action(mean, tight, rng);
    CHECK((a.action - mean).norm() < 1e-15);

    GaussianHead h2{vec({0.2, -0.5})};
    const double at_mean = gaussian_log_prob(mean, h2.log_std, mean);
    CHECK(at_mean == doctest::Approx(-0.2 + 0.5 - std::log(2 * std::numbers::pi)));
}

TEST_CASE("sampled actions follow the head")
{
    GaussianHead head{vec({std::log(0.5)})};
    Rng rng(5);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = sample_action(vec({1.0}), head, rng).action[0];
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    CHECK(sq / n - mean * mean == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("backprop")
{
    StructuredPolicy lin(arch_of(3, 2, true, NonlinearKind::none));
    Rng rng(2);
    lin.set_params(random_params(lin.param_count(), rng));
    const Vec s = random_vec(3, rng);
    CHECK(lin.backprop(s, 0.0, Vec::Zero(2)).isZero(0));

    const Vec g = vec({0.7, -1.1});
    const ParamVector grad = lin.backprop(s, 0.0, g);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j)
            CHECK(grad[i * 3 + j] == doctest::Approx(g[i] * s[j]));
        CHECK(grad[6 + i] == doctest::Approx(g[i]));
    }
}

TEST_CASE("backprop matches finite differences")
{
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const Architecture arch = random_arch(rng, false);
        StructuredPolicy p(arch);
        const ParamVector theta = random_params(p.param_count(), rng);
        p.set_params(theta);
        const Vec s = random_vec(arch.state_dim, rng);
        const Vec up = random_vec(arch.action_dim, rng);
        const double t = uniform(rng, 0.0, 5.0);
        const Vec analytic = p.backprop(s, t, up);
        StructuredPolicy probe(arch);
        const Vec numeric = finite_diff([&](const Vec& x) {
            probe.set_params(x);
            return probe.mean_action(s, t).dot(up);
        }, theta);
        CAPTURE(arch.describe());
        CHECK(relative_error(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("log_prob_grad matches finite differences")
{
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const Architecture arch = random_arch(rng, true);
        StructuredPolicy p(arch);
        const ParamVector theta = random_params(p.param_count(), rng, 0.5);
        p.set_params(theta);
        const Vec s = random_vec(arch.state_dim, rng);
        const Vec a = random_vec(arch.action_dim, rng);
        const double t = uniform(rng, 0.0, 3.0);
        StructuredPolicy probe(arch);
        const Vec numeric = finite_diff([&](const Vec& x) {
            probe.set_params(x);
            return gaussian_log_prob(probe.mean_action(s, t), probe.head()->log_std, a);
        }, theta);
        CHECK(relative_error(p.log_prob_grad(s, t, a), numeric) < 1e-5);
    }
}

TEST_CASE("parameter layout")
{
    Architecture a = preset_architecture("SCN-16", 11, 3, TrainMode::pg);
    a.gaussian_head = false;
    CHECK(a.param_count() == 548);
    CHECK(preset_architecture("SCN-16", 11, 3, TrainMode::pg).param_count() == 551);
    CHECK(preset_architecture("SCN-16", 11, 3, TrainMode::es).param_count() == 36 + 192 + 48);
    CHECK(preset_architecture("Linear", 11, 3, TrainMode::es).param_count() == 36);
    CHECK(preset_architecture("Locomotor", 1, 1, TrainMode::es).param_count() == 2 + 48);

    // canonical order: K row-major, b, then the MLP
    StructuredPolicy p(arch_of(2, 2, true, NonlinearKind::mlp, {2}));
    ParamVector v(static_cast<Eigen::Index>(p.param_count()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = static_cast<double>(i);
    p.set_params(v);
    CHECK(p.linear()->gain(0, 1) == 1.0);
    CHECK(p.linear()->gain(1, 0) == 2.0);
    CHECK(p.linear()->bias[1] == 5.0);
    CHECK(p.mlp()->net.weights()[0](0, 1) == 7.0);
    CHECK(p.mlp()->net.biases()[0][0] == 10.0);
    CHECK(p.mlp()->net.weights()[1](1, 0) == 14.0);

    Architecture cpg = arch_of(1, 2, true, NonlinearKind::cpg);
    cpg.cpg_components = 2;
    cpg.gaussian_head = true;
    StructuredPolicy q(cpg);
    ParamVector w(static_cast<Eigen::Index>(q.param_count()));
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w[i] = static_cast<double>(i);
    q.set_params(w);
    // per action dimension: A then w then phi
    CHECK(q.cpg()->amplitude(0, 1) == 5.0);
    CHECK(q.cpg()->frequency(0, 0) == 6.0);
    CHECK(q.cpg()->phase(0, 1) == 9.0);
    CHECK(q.cpg()->amplitude(1, 0) == 10.0);
    CHECK(q.head()->log_std[1] == 17.0);
    CHECK(q.head_offset() == 16);
}

TEST_CASE("flatten and unflatten round-trip")
{
    Rng rng(31);
    for (const char* name : {"SCN-16", "SCN-64", "SCN-4", "MLP-64", "MLP-8", "Linear", "Locomotor"}) {
        for (TrainMode mode : {TrainMode::es, TrainMode::pg}) {
            const Architecture a = preset_architecture(name, 6, 3, mode);
            const ParamVector v = random_params(a.param_count(), rng);
            CHECK(bit_equal(flatten(unflatten(v, a)), v));
        }
    }
    const Architecture a = preset_architecture("SCN-16", 6, 3, TrainMode::es);
    CHECK_THROWS_AS(unflatten(ParamVector::Zero(5), a), ConfigError);

    const StructuredPolicy zero = unflatten(ParamVector::Zero(static_cast<Eigen::Index>(a.param_count())), a);
    for (int i = 0; i < 10; ++i)
        CHECK(zero.mean_action(random_vec(6, rng, 10.0), 0.1 * i).isZero(0));
}

TEST_CASE("initialization")
{
    Rng rng(1);
    const Architecture scn = preset_architecture("SCN-16", 5, 2, TrainMode::es);
    StructuredPolicy p(scn, std::span<const double>(init_params(scn, TrainMode::es, rng).data(), scn.param_count()));
    for (int i = 0; i < 20; ++i)
        CHECK(p.mean_action(random_vec(5, rng, 5.0), 0.0).isZero(0));

    const Architecture loco = preset_architecture("Locomotor", 2, 2, TrainMode::es);
    const ParamVector lv = init_params(loco, TrainMode::es, rng);
    StructuredPolicy lp = unflatten(lv, loco);
    CHECK(lp.cpg()->frequency.minCoeff() >= 0.5);
    CHECK(lp.cpg()->frequency.maxCoeff() <= 2.0);
    CHECK(lp.cpg()->phase.minCoeff() >= 0.0);
    CHECK(lp.cpg()->phase.maxCoeff() < 2 * std::numbers::pi);
    for (double t : {0.0, 0.7, 3.3})
        CHECK(lp.mean_action(Vec::Ones(2), t).isZero(0));

    const Architecture pg = preset_architecture("SCN-16", 8, 3, TrainMode::pg);
    for (std::uint64_t seed : {1, 2, 3}) {
        Rng r(seed);
        const StructuredPolicy q = unflatten(init_params(pg, TrainMode::pg, r), pg);
        CHECK(q.head()->log_std.isZero(0));
        for (int i = 0; i < 10; ++i) {
            const Vec s = random_vec(8, r).normalized();
            CHECK(q.mean_action(s, 0.0).cwiseAbs().maxCoeff() < 0.1);
        }
    }
}

TEST_CASE("degenerate architectures are rejected")
{
    CHECK_THROWS_AS(StructuredPolicy(arch_of(0, 1, true, NonlinearKind::none)), ConfigError);
    CHECK_THROWS_AS(StructuredPolicy(arch_of(2, 0, true, NonlinearKind::none)), ConfigError);
    CHECK_THROWS_AS(StructuredPolicy(arch_of(2, 1, true, NonlinearKind::mlp, {0})), ConfigError);
    CHECK_THROWS_AS(StructuredPolicy(arch_of(2, 1, false, NonlinearKind::none)), ConfigError);
    CHECK_THROWS_AS(preset_architecture("SCN-x", 2, 1, TrainMode::es), ConfigError);
}

TEST_CASE("architecture json round-trip")
{
    for (const char* name : {"SCN-16", "MLP-64", "Linear", "Locomotor"}) {
        const Architecture a = preset_architecture(name, 4, 2, TrainMode::pg);
        CHECK(Architecture::from_json(a.to_json()) == a);
    }
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const Architecture a = random_arch(rng, i % 2 == 0);
        CHECK(Architecture::from_json(a.to_json()) == a);
    }

    Architecture cpg = preset_architecture("Locomotor", 4, 2, TrainMode::es);
    Architecture other = cpg;
    other.hidden = {7, 7};
    CHECK(other == cpg);
    other.cpg_components = 3;
    CHECK_FALSE(other == cpg);
}
