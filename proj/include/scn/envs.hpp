#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "scn/rng.hpp"
#include "scn/types.hpp"

namespace scn {

struct EnvSpec {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    Vec action_low;
    Vec action_high;
    double dt = 0.05;  // seconds
    int max_steps = 200;
    double gamma = 0.99;
    double reward_min = 0.0;  // documented per-step reward range
    double reward_max = 0.0;

    void validate() const;
};

struct Transition {
    Vec state;
    Vec action;  // as applied, i.e. after clipping
    double reward = 0.0;
    Vec next_state;
    bool done = false;
    bool terminal = false;   // environment reached a terminal condition
    bool truncated = false;  // max_steps reached without a terminal condition
    std::map<std::string, double> info;
};

/// Reset/step contract shared by all environments. Actions are clipped to the
/// spec bounds; a done environment must be reset before stepping again.
class Env {
public:
    virtual ~Env() = default;

    const EnvSpec& spec() const { return spec_; }

    /// Deterministic in (configuration, seed). Resets the step counter and clock.
    Vec reset(std::uint64_t seed);
    Transition step(const Vec& action);

    bool done() const { return done_; }
    int step_index() const { return step_index_; }
    /// Episode time in seconds: step_index * dt.
    double time() const { return step_index_ * spec_.dt; }
    const Vec& state() const { return state_; }

    Vec clip_action(const Vec& action) const;

protected:
    explicit Env(EnvSpec spec);

    struct StepOutcome {
        double reward = 0.0;
        bool terminal = false;
        std::map<std::string, double> info;
    };

    virtual void reset_dynamics(Rng& rng) = 0;
    /// Advances one dt with an already clipped action; `time()` still refers to
    /// the pre-step time when this is called.
    virtual StepOutcome advance(const Vec& action) = 0;
    virtual Vec observe() const = 0;

    /// Re-reads the observation after a test or scenario helper edits the dynamics.
    void refresh_state() { state_ = observe(); }

    EnvSpec spec_;
    Rng rng_;

private:
    Vec state_;
    int step_index_ = 0;
    bool done_ = true;
};

/// Maps an angle onto (-pi, pi].
double wrap_angle(double theta);

struct PointMassParams {
    double mass = 1.0;
    double radius = 1.0;
    double angular_speed = 1.0;
    double init_offset = 0.25;  // uniform half-width of initial position/velocity error
    double action_cost = 0.01;
};

/// 2-D double integrator tracking a unit circle at 1 rad/s.
/// Observation [p - pd, v - vd, pd, vd].
class PointMassTracking : public Env {
public:
    using Params = PointMassParams;

    explicit PointMassTracking(Params params = {}, int max_steps = 200, double dt = 0.05, double gamma = 0.99);

    Vec desired_position(double t) const;
    Vec desired_velocity(double t) const;
    /// Feed-forward acceleration of the reference (-omega^2 pd).
    Vec desired_acceleration(double t) const;

    void set_state(const Vec& position, const Vec& velocity, double phase);
    const Vec& position() const { return p_; }
    const Vec& velocity() const { return v_; }

protected:
    void reset_dynamics(Rng& rng) override;
    StepOutcome advance(const Vec& action) override;
    Vec observe() const override;

private:
    Params params_;
    double phase_ = 0.0;
    Vec p_ = Vec::Zero(2);
    Vec v_ = Vec::Zero(2);
};

struct PendulumParams {
    double g = 10.0;
    double m = 1.0;
    double l = 1.0;
    double max_speed = 8.0;
};

/// Torque-limited pendulum swing-up, theta = 0 upright.
/// Observation [cos theta, sin theta, theta_dot].
class PendulumSwingUp : public Env {
public:
    using Params = PendulumParams;

    explicit PendulumSwingUp(Params params = {}, int max_steps = 200, double dt = 0.05, double gamma = 0.99);

    void set_state(double theta, double theta_dot);
    double theta() const { return theta_; }
    double theta_dot() const { return theta_dot_; }
    /// Mechanical energy of a uniform rod pivoted at one end (upright = max potential).
    double energy() const;
    const Params& params() const { return params_; }

protected:
    void reset_dynamics(Rng& rng) override;
    StepOutcome advance(const Vec& action) override;
    Vec observe() const override;

private:
    Params params_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
};

struct RhythmParams {
    double damping = 0.5;
    double target_frequency = 1.5;  // rad/s
    double target_amplitude = 1.0;
    double init_velocity = 0.5;  // uniform half-width
};

/// First-order velocity tracking of sin(1.5 t): v' = a - 0.5 v.
/// Observation [v, v - v*(t)].
class RhythmTrack : public Env {
public:
    using Params = RhythmParams;

    explicit RhythmTrack(Params params = {}, int max_steps = 400, double dt = 0.05, double gamma = 0.99);

    double target(double t) const;
    void set_velocity(double v);
    double velocity() const { return v_; }

protected:
    void reset_dynamics(Rng& rng) override;
    StepOutcome advance(const Vec& action) override;
    Vec observe() const override;

private:
    Params params_;
    double v_ = 0.0;
};

struct IdmParams {
    double desired_speed = 12.0;  // m/s
    double headway = 1.5;         // s
    double a_max = 1.5;           // m/s^2
    double b_comf = 2.0;          // m/s^2
    double s0 = 2.0;              // m
    double delta = 4.0;
    double max_brake = 9.0;       // m/s^2, physical deceleration limit
};

/// Intelligent driver model acceleration for a follower at speed `v`, with
/// bumper-to-bumper `gap` and approach rate `dv` = v - v_lead. A non-positive
/// gap returns the maximal braking.
double idm_acceleration(const IdmParams& p, double v, double gap, double dv);

struct MergeParams {
    int num_vehicles = 6;
    double merge_point = 150.0;   // m
    double goal_distance = 100.0; // past the merge point
    double ego_start = 100.0;     // m
    double ego_speed_low = 5.0;
    double ego_speed_high = 10.0;
    double ego_max_speed = 30.0;
    double vehicle_length = 5.0;
    double lead_low = 140.0;      // initial position range of the first main-lane vehicle
    double lead_high = 200.0;
    double spacing_low = 17.0;    // front-to-front spacing of the main-lane platoon
    double spacing_high = 35.0;
    double traffic_speed_low = 9.0;
    double traffic_speed_high = 12.0;
    double traffic_noise_std = 0.3;  // m/s^2 per step
    double yield_zone = 30.0;        // main-lane vehicles yield to an ego this close to the merge
    double crash_gap = 1.0;
    double close_gap = 5.0;
    double speed_low = 3.0;
    double speed_high = 15.0;
    double sensor_range = 100.0;
    IdmParams idm{};
};

/// Longitudinal merge from an on-ramp into a lane of IDM traffic.
///
/// Observation [v_ego, s_merge - s_ego, gap_lead, dv_lead, gap_lag, dv_lag]
/// where gaps are bumper-to-bumper, dv = v_other - v_ego, and absent
/// neighbours read as gap 100 m, dv 0. Before the merge point the neighbours are
/// the main-lane vehicles nearest in longitudinal position.
class MergeDriving : public Env {
public:
    using Params = MergeParams;

    struct Vehicle {
        double s = 0.0;  // front bumper position
        double v = 0.0;
    };

    explicit MergeDriving(Params params = {}, int max_steps = 250, double dt = 0.1, double gamma = 0.99);

    const Params& params() const { return params_; }
    double ego_position() const { return ego_.s; }
    double ego_speed() const { return ego_.v; }
    const std::vector<Vehicle>& traffic() const { return traffic_; }
    bool merged() const { return ego_.s >= params_.merge_point; }

    /// Places the ego and the traffic explicitly (scenario construction, tests).
    void set_scene(Vehicle ego, std::vector<Vehicle> traffic);

    /// IDM applied to the observation's lead gap; a safe reference driver.
    static double idm_policy(const Vec& observation, const IdmParams& p = {});

protected:
    void reset_dynamics(Rng& rng) override;
    StepOutcome advance(const Vec& action) override;
    Vec observe() const override;

private:
    struct Neighbours {
        int lead = -1;
        int lag = -1;
    };
    Neighbours neighbours() const;
    double gap_to(const Vehicle& front, const Vehicle& back) const;

    Params params_;
    Vehicle ego_;
    std::vector<Vehicle> traffic_;
};

using EnvFactory = std::function<std::unique_ptr<Env>()>;

std::vector<std::string> env_names();

/// Builds an environment by name. `overrides` may set max_steps, dt, gamma and
/// any numeric field of the environment's Params; unknown keys are rejected.
std::unique_ptr<Env> make_env(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object());
EnvFactory env_factory(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object());

/// CSV episode trace: step, s0.., a0.., reward, done.
void write_trace_header(std::ostream& os, const EnvSpec& spec);
void write_trace_row(std::ostream& os, int step, const Transition& tr);

}  // namespace scn
