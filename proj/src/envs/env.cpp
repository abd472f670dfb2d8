#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "scn/csv.hpp"
#include "scn/envs.hpp"

namespace scn {

void EnvSpec::validate() const
{
    if (state_dim <= 0 || action_dim <= 0)
        throw ConfigError(name + ": state and action dimensions must be positive");
    if (action_low.size() != action_dim || action_high.size() != action_dim)
        throw ConfigError(name + ": action bounds must match action_dim");
    if ((action_low.array() >= action_high.array()).any())
        throw ConfigError(name + ": action_low must be below action_high");
    if (!(dt > 0.0 && dt <= 0.1))
        throw ConfigError(name + ": dt must lie in (0, 0.1]");
    if (max_steps <= 0)
        throw ConfigError(name + ": max_steps must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw ConfigError(name + ": gamma must lie in [0, 1)");
}

Env::Env(EnvSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

Vec Env::reset(std::uint64_t seed)
{
    rng_.seed(seed);
    step_index_ = 0;
    done_ = false;
    reset_dynamics(rng_);
    state_ = observe();
    return state_;
}

Vec Env::clip_action(const Vec& action) const
{
    return action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
}

Transition Env::step(const Vec& action)
{
    if (done_)
        throw UsageError(spec_.name + ": step() called on a finished episode; call reset() first");
    if (action.size() != spec_.action_dim)
        throw ConfigError(spec_.name + ": expected action of size " + std::to_string(spec_.action_dim) + ", got "
                          + std::to_string(action.size()));
    if (!action.allFinite())
        throw UsageError(spec_.name + ": action must be finite");

    Transition tr;
    tr.state = state_;
    tr.action = clip_action(action);
    StepOutcome out = advance(tr.action);
    ++step_index_;
    state_ = observe();
    if (!std::isfinite(out.reward))
        throw std::runtime_error(spec_.name + ": non-finite reward");

    tr.reward = out.reward;
    tr.next_state = state_;
    tr.terminal = out.terminal;
    tr.truncated = !out.terminal && step_index_ >= spec_.max_steps;
    tr.done = tr.terminal || tr.truncated;
    tr.info = std::move(out.info);
    done_ = tr.done;
    return tr;
}

double wrap_angle(double theta)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(theta + std::numbers::pi, two_pi);
    if (w < 0.0)
        w += two_pi;
    // w in [0, 2pi); shift to [-pi, pi) then move the -pi tie to +pi.
    w -= std::numbers::pi;
    if (w <= -std::numbers::pi)
        w = std::numbers::pi;
    return w;
}

void write_trace_header(std::ostream& os, const EnvSpec& spec)
{
    os << "step";
    for (int i = 0; i < spec.state_dim; ++i)
        os << ",s" << i;
    for (int i = 0; i < spec.action_dim; ++i)
        os << ",a" << i;
    os << ",reward,done\n";
}

void write_trace_row(std::ostream& os, int step, const Transition& tr)
{
    os << step;
    for (Eigen::Index i = 0; i < tr.state.size(); ++i)
        os << ',' << format_double(tr.state[i]);
    for (Eigen::Index i = 0; i < tr.action.size(); ++i)
        os << ',' << format_double(tr.action[i]);
    os << ',' << format_double(tr.reward) << ',' << (tr.done ? 1 : 0) << '\n';
}

}  // namespace scn
