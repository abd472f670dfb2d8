#include <map>
#include <string>

#include "scn/envs.hpp"

namespace scn {

namespace {

struct Common {
    int max_steps;
    double dt;
    double gamma;
};

using FieldMap = std::map<std::string, double*>;

/// Applies `overrides` to the common fields and to `fields`; rejects unknown keys.
void apply_overrides(const std::string& env, const nlohmann::json& overrides, Common& common, const FieldMap& fields,
                     int* num_vehicles = nullptr)
{
    if (overrides.is_null())
        return;
    if (!overrides.is_object())
        throw ConfigError("env.overrides must be an object");
    for (const auto& [key, value] : overrides.items()) {
        if (!value.is_number())
            throw ConfigError("env.overrides." + key + " must be a number");
        if (key == "max_steps") {
            if (!value.is_number_integer())
                throw ConfigError("env.overrides.max_steps must be an integer");
            common.max_steps = value.get<int>();
        } else if (key == "dt") {
            common.dt = value.get<double>();
        } else if (key == "gamma") {
            common.gamma = value.get<double>();
        } else if (key == "num_vehicles" && num_vehicles) {
            if (!value.is_number_integer())
                throw ConfigError("env.overrides.num_vehicles must be an integer");
            *num_vehicles = value.get<int>();
        } else if (auto it = fields.find(key); it != fields.end()) {
            *it->second = value.get<double>();
        } else {
            throw ConfigError("env.overrides: unknown key '" + key + "' for " + env);
        }
    }
}

}  // namespace

std::vector<std::string> env_names()
{
    return {"PointMassTracking", "PendulumSwingUp", "RhythmTrack", "MergeDriving"};
}

std::unique_ptr<Env> make_env(const std::string& name, const nlohmann::json& overrides)
{
    if (name == "PointMassTracking") {
        PointMassTracking::Params p;
        Common c{200, 0.05, 0.99};
        apply_overrides(name, overrides, c,
                        {{"mass", &p.mass},
                         {"radius", &p.radius},
                         {"angular_speed", &p.angular_speed},
                         {"init_offset", &p.init_offset},
                         {"action_cost", &p.action_cost}});
        return std::make_unique<PointMassTracking>(p, c.max_steps, c.dt, c.gamma);
    }
    if (name == "PendulumSwingUp") {
        PendulumSwingUp::Params p;
        Common c{200, 0.05, 0.99};
        apply_overrides(name, overrides, c, {{"g", &p.g}, {"m", &p.m}, {"l", &p.l}, {"max_speed", &p.max_speed}});
        return std::make_unique<PendulumSwingUp>(p, c.max_steps, c.dt, c.gamma);
    }
    if (name == "RhythmTrack") {
        RhythmTrack::Params p;
        Common c{400, 0.05, 0.99};
        apply_overrides(name, overrides, c,
                        {{"damping", &p.damping},
                         {"target_frequency", &p.target_frequency},
                         {"target_amplitude", &p.target_amplitude},
                         {"init_velocity", &p.init_velocity}});
        return std::make_unique<RhythmTrack>(p, c.max_steps, c.dt, c.gamma);
    }
    if (name == "MergeDriving") {
        MergeDriving::Params p;
        Common c{250, 0.1, 0.99};
        apply_overrides(name, overrides, c,
                        {{"merge_point", &p.merge_point},
                         {"goal_distance", &p.goal_distance},
                         {"ego_start", &p.ego_start},
                         {"ego_speed_low", &p.ego_speed_low},
                         {"ego_speed_high", &p.ego_speed_high},
                         {"lead_low", &p.lead_low},
                         {"lead_high", &p.lead_high},
                         {"spacing_low", &p.spacing_low},
                         {"spacing_high", &p.spacing_high},
                         {"traffic_speed_low", &p.traffic_speed_low},
                         {"traffic_speed_high", &p.traffic_speed_high},
                         {"traffic_noise_std", &p.traffic_noise_std},
                         {"yield_zone", &p.yield_zone}},
                        &p.num_vehicles);
        return std::make_unique<MergeDriving>(p, c.max_steps, c.dt, c.gamma);
    }
    throw ConfigError("unknown environment '" + name + "' (expected PointMassTracking, PendulumSwingUp, "
                      "RhythmTrack or MergeDriving)");
}

EnvFactory env_factory(const std::string& name, const nlohmann::json& overrides)
{
    make_env(name, overrides);  // validate eagerly
    return [name, overrides]() { return make_env(name, overrides); };
}

}  // namespace scn
