#include <algorithm>
#include <cmath>
#include <limits>

#include "scn/envs.hpp"

namespace scn {

double idm_acceleration(const IdmParams& p, double v, double gap, double dv)
{
    if (gap <= 0.0)
        return -p.max_brake;
    const double s_star = p.s0 + std::max(0.0, v * p.headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    const double free = 1.0 - std::pow(v / p.desired_speed, p.delta);
    const double interact = std::isinf(gap) ? 0.0 : (s_star / gap) * (s_star / gap);
    return std::max(-p.max_brake, p.a_max * (free - interact));
}

namespace {

EnvSpec merge_spec(int max_steps, double dt, double gamma)
{
    EnvSpec s;
    s.name = "MergeDriving";
    s.state_dim = 6;
    s.action_dim = 1;
    s.action_low = Vec::Constant(1, -4.0);
    s.action_high = Vec::Constant(1, 3.0);
    s.dt = dt;
    s.max_steps = max_steps;
    s.gamma = gamma;
    s.reward_min = -200.0;
    s.reward_max = 200.0;
    return s;
}

}  // namespace

MergeDriving::MergeDriving(Params params, int max_steps, double dt, double gamma)
    : Env(merge_spec(max_steps, dt, gamma)), params_(params)
{
    if (params_.num_vehicles < 0)
        throw ConfigError("MergeDriving: num_vehicles must be non-negative");
    if (params_.spacing_low <= params_.vehicle_length || params_.spacing_high < params_.spacing_low)
        throw ConfigError("MergeDriving: platoon spacing must exceed the vehicle length");
    if (params_.ego_speed_high < params_.ego_speed_low || params_.traffic_speed_high < params_.traffic_speed_low)
        throw ConfigError("MergeDriving: speed ranges must be ordered");
}

void MergeDriving::set_scene(Vehicle ego, std::vector<Vehicle> traffic)
{
    ego_ = ego;
    traffic_ = std::move(traffic);
    std::sort(traffic_.begin(), traffic_.end(), [](const Vehicle& a, const Vehicle& b) { return a.s > b.s; });
    refresh_state();
}

void MergeDriving::reset_dynamics(Rng& rng)
{
    const auto& p = params_;
    traffic_.clear();
    double s = uniform(rng, p.lead_low, p.lead_high);
    for (int i = 0; i < p.num_vehicles; ++i) {
        if (i > 0)
            s -= uniform(rng, p.spacing_low, p.spacing_high);
        traffic_.push_back({s, uniform(rng, p.traffic_speed_low, p.traffic_speed_high)});
    }
    ego_ = {p.ego_start, uniform(rng, p.ego_speed_low, p.ego_speed_high)};
}

double MergeDriving::gap_to(const Vehicle& front, const Vehicle& back) const
{
    return front.s - params_.vehicle_length - back.s;
}

MergeDriving::Neighbours MergeDriving::neighbours() const
{
    // traffic_ is sorted front to back.
    Neighbours n;
    for (int i = 0; i < static_cast<int>(traffic_.size()); ++i) {
        if (traffic_[static_cast<std::size_t>(i)].s > ego_.s)
            n.lead = i;
        else if (n.lag < 0)
            n.lag = i;
    }
    return n;
}

Env::StepOutcome MergeDriving::advance(const Vec& action)
{
    const auto& p = params_;
    const double dt = spec_.dt;
    const bool ego_visible = ego_.s >= p.merge_point - p.yield_zone;

    // Main-lane accelerations from the current state; the ego counts as a leader
    // once it is close to (or past) the merge point and ahead of the follower.
    std::normal_distribution<double> noise(0.0, p.traffic_noise_std);
    std::vector<double> accel(traffic_.size());
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        const Vehicle& me = traffic_[i];
        double gap = std::numeric_limits<double>::infinity();
        double dv = 0.0;
        if (i > 0) {
            gap = gap_to(traffic_[i - 1], me);
            dv = me.v - traffic_[i - 1].v;
        }
        if (ego_visible && ego_.s > me.s) {
            const double g = gap_to(ego_, me);
            if (g < gap) {
                gap = g;
                dv = me.v - ego_.v;
            }
        }
        accel[i] = idm_acceleration(p.idm, me.v, gap, dv) + (p.traffic_noise_std > 0.0 ? noise(rng_) : 0.0);
    }

    const double s_before = ego_.s;
    ego_.v = std::clamp(ego_.v + action[0] * dt, 0.0, p.ego_max_speed);
    ego_.s += ego_.v * dt;
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        traffic_[i].v = std::max(0.0, traffic_[i].v + accel[i] * dt);
        traffic_[i].s += traffic_[i].v * dt;
    }
    std::stable_sort(traffic_.begin(), traffic_.end(), [](const Vehicle& a, const Vehicle& b) { return a.s > b.s; });

    StepOutcome out;
    if (merged()) {
        const Neighbours n = neighbours();
        double min_gap = std::numeric_limits<double>::infinity();
        if (n.lead >= 0)
            min_gap = std::min(min_gap, gap_to(traffic_[static_cast<std::size_t>(n.lead)], ego_));
        if (n.lag >= 0)
            min_gap = std::min(min_gap, gap_to(ego_, traffic_[static_cast<std::size_t>(n.lag)]));
        out.info["min_gap"] = std::isinf(min_gap) ? p.sensor_range : min_gap;
        if (min_gap < p.crash_gap) {
            out.reward = -200.0;
            out.terminal = true;
            out.info["crash"] = 1.0;
            return out;
        }
        if (ego_.s > p.merge_point + p.goal_distance) {
            out.reward = 200.0;
            out.terminal = true;
            out.info["goal"] = 1.0;
            return out;
        }
        if (min_gap < p.close_gap)
            out.reward -= 1.0;
    }
    if (ego_.v < p.speed_low || ego_.v > p.speed_high)
        out.reward -= 0.1;
    out.reward += 0.01 * (ego_.s - s_before);
    return out;
}

Vec MergeDriving::observe() const
{
    const auto& p = params_;
    const Neighbours n = neighbours();
    Vec o(6);
    o[0] = ego_.v;
    o[1] = p.merge_point - ego_.s;
    o[2] = p.sensor_range;
    o[3] = 0.0;
    o[4] = p.sensor_range;
    o[5] = 0.0;
    if (n.lead >= 0) {
        const Vehicle& l = traffic_[static_cast<std::size_t>(n.lead)];
        const double g = gap_to(l, ego_);
        if (g < p.sensor_range) {
            o[2] = g;
            o[3] = l.v - ego_.v;
        }
    }
    if (n.lag >= 0) {
        const Vehicle& l = traffic_[static_cast<std::size_t>(n.lag)];
        const double g = gap_to(ego_, l);
        if (g < p.sensor_range) {
            o[4] = g;
            o[5] = l.v - ego_.v;
        }
    }
    return o;
}

double MergeDriving::idm_policy(const Vec& observation, const IdmParams& p)
{
    const double v = observation[0];
    const double gap = observation[2];
    const double dv = -observation[3];
    return idm_acceleration(p, v, gap, dv);
}

}  // namespace scn
