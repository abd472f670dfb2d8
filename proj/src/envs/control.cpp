#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "scn/envs.hpp"

namespace scn {

namespace {

EnvSpec box_spec(std::string name, int state_dim, int action_dim, double lo, double hi, double dt, int max_steps,
                 double gamma)
{
    EnvSpec s;
    s.name = std::move(name);
    s.state_dim = state_dim;
    s.action_dim = action_dim;
    s.action_low = Vec::Constant(action_dim, lo);
    s.action_high = Vec::Constant(action_dim, hi);
    s.dt = dt;
    s.max_steps = max_steps;
    s.gamma = gamma;
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// PointMassTracking

PointMassTracking::PointMassTracking(Params params, int max_steps, double dt, double gamma)
    : Env(box_spec("PointMassTracking", 8, 2, -1.0, 1.0, dt, max_steps, gamma)), params_(params)
{
    if (params_.mass <= 0.0 || params_.radius <= 0.0)
        throw ConfigError("PointMassTracking: mass and radius must be positive");
    spec_.reward_min = -std::numeric_limits<double>::infinity();
    spec_.reward_max = 0.0;
}

Vec PointMassTracking::desired_position(double t) const
{
    const double a = params_.angular_speed * t + phase_;
    return Vec{{params_.radius * std::cos(a), params_.radius * std::sin(a)}};
}

Vec PointMassTracking::desired_velocity(double t) const
{
    const double a = params_.angular_speed * t + phase_;
    const double s = params_.radius * params_.angular_speed;
    return Vec{{-s * std::sin(a), s * std::cos(a)}};
}

Vec PointMassTracking::desired_acceleration(double t) const
{
    return -params_.angular_speed * params_.angular_speed * desired_position(t);
}

void PointMassTracking::set_state(const Vec& position, const Vec& velocity, double phase)
{
    p_ = position;
    v_ = velocity;
    phase_ = phase;
    refresh_state();
}

void PointMassTracking::reset_dynamics(Rng& rng)
{
    phase_ = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double r = params_.init_offset;
    p_ = desired_position(0.0);
    v_ = desired_velocity(0.0);
    for (int i = 0; i < 2; ++i)
        p_[i] += uniform(rng, -r, r);
    for (int i = 0; i < 2; ++i)
        v_[i] += uniform(rng, -r, r);
}

Env::StepOutcome PointMassTracking::advance(const Vec& action)
{
    v_ += action * (spec_.dt / params_.mass);
    p_ += v_ * spec_.dt;
    const Vec e = p_ - desired_position(time() + spec_.dt);
    StepOutcome out;
    out.reward = -e.squaredNorm() - params_.action_cost * action.squaredNorm();
    out.info["tracking_error"] = e.norm();
    return out;
}

Vec PointMassTracking::observe() const
{
    const double t = time();
    const Vec pd = desired_position(t);
    const Vec vd = desired_velocity(t);
    Vec o(8);
    o << p_ - pd, v_ - vd, pd, vd;
    return o;
}

// ---------------------------------------------------------------------------
// PendulumSwingUp

PendulumSwingUp::PendulumSwingUp(Params params, int max_steps, double dt, double gamma)
    : Env(box_spec("PendulumSwingUp", 3, 1, -2.0, 2.0, dt, max_steps, gamma)), params_(params)
{
    if (params_.m <= 0.0 || params_.l <= 0.0 || params_.max_speed <= 0.0)
        throw ConfigError("PendulumSwingUp: m, l and max_speed must be positive");
    const double pi = std::numbers::pi;
    spec_.reward_min = -(pi * pi + 0.1 * params_.max_speed * params_.max_speed + 0.001 * 4.0);
    spec_.reward_max = 0.0;
}

void PendulumSwingUp::set_state(double theta, double theta_dot)
{
    theta_ = theta;
    theta_dot_ = theta_dot;
    refresh_state();
}

double PendulumSwingUp::energy() const
{
    const auto& p = params_;
    const double inertia = p.m * p.l * p.l / 3.0;
    return 0.5 * inertia * theta_dot_ * theta_dot_ + p.m * p.g * 0.5 * p.l * std::cos(theta_);
}

void PendulumSwingUp::reset_dynamics(Rng& rng)
{
    theta_ = uniform(rng, -std::numbers::pi, std::numbers::pi);
    theta_dot_ = uniform(rng, -1.0, 1.0);
}

Env::StepOutcome PendulumSwingUp::advance(const Vec& action)
{
    const auto& p = params_;
    const double u = action[0];
    const double th = wrap_angle(theta_);
    StepOutcome out;
    out.reward = -(th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

    const double accel = 3.0 * p.g / (2.0 * p.l) * std::sin(theta_) + 3.0 / (p.m * p.l * p.l) * u;
    theta_dot_ = std::clamp(theta_dot_ + accel * spec_.dt, -p.max_speed, p.max_speed);
    theta_ += theta_dot_ * spec_.dt;
    return out;
}

Vec PendulumSwingUp::observe() const
{
    return Vec{{std::cos(theta_), std::sin(theta_), theta_dot_}};
}

// ---------------------------------------------------------------------------
// RhythmTrack

RhythmTrack::RhythmTrack(Params params, int max_steps, double dt, double gamma)
    : Env(box_spec("RhythmTrack", 2, 1, -2.0, 2.0, dt, max_steps, gamma)), params_(params)
{
    // |v| stays within max(|v0|, a_max / damping), so the squared error is bounded.
    const double vmax = std::max(params_.init_velocity, 2.0 / params_.damping);
    const double emax = vmax + params_.target_amplitude;
    spec_.reward_min = -emax * emax;
    spec_.reward_max = 0.0;
}

double RhythmTrack::target(double t) const
{
    return params_.target_amplitude * std::sin(params_.target_frequency * t);
}

void RhythmTrack::set_velocity(double v)
{
    v_ = v;
    refresh_state();
}

void RhythmTrack::reset_dynamics(Rng& rng)
{
    v_ = uniform(rng, -params_.init_velocity, params_.init_velocity);
}

Env::StepOutcome RhythmTrack::advance(const Vec& action)
{
    v_ += (action[0] - params_.damping * v_) * spec_.dt;
    const double err = v_ - target(time() + spec_.dt);
    StepOutcome out;
    out.reward = -err * err;
    return out;
}

Vec RhythmTrack::observe() const
{
    return Vec{{v_, v_ - target(time())}};
}

}  // namespace scn
