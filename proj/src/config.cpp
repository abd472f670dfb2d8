#include "scn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace scn {

namespace {

std::string escape_pointer_token(const std::string& key)
{
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

/// Strict reader over one JSON object.
class Block {
public:
    Block(const nlohmann::json& j, std::string pointer, const std::string& source, const std::map<std::string, int>& lines)
        : j_(j), pointer_(std::move(pointer)), source_(source), lines_(lines)
    {
        if (!j_.is_object())
            fail(pointer_, "expected an object" + where());
    }

    [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const
    {
        std::string p = pointer;
        auto it = lines_.find(p);
        while (it == lines_.end() && !p.empty()) {
            p = p.substr(0, p.rfind('/'));
            it = lines_.find(p);
        }
        const int line = it == lines_.end() ? 1 : it->second;
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
    }

    std::string where() const { return pointer_.empty() ? "" : " at '" + pointer_ + "'"; }
    std::string key_pointer(const std::string& key) const { return pointer_ + "/" + escape_pointer_token(key); }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key);
    }

    const nlohmann::json& raw(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    Block child(const std::string& key)
    {
        seen_.insert(key);
        return Block(j_.at(key), key_pointer(key), source_, lines_);
    }

    template <class T>
    void read(const std::string& key, T& out)
    {
        if (!has(key))
            return;
        const nlohmann::json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean())
                    throw std::invalid_argument("expected true or false");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer())
                    throw std::invalid_argument("expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned())
                        throw std::invalid_argument("expected a non-negative integer");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number())
                    throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string())
                    throw std::invalid_argument("expected a string");
            }
            out = v.get<T>();
        } catch (const std::exception& e) {
            fail(key_pointer(key), "'" + key + "'" + where() + ": " + e.what());
        }
    }

    template <class T>
    void read_list(const std::string& key, std::vector<T>& out)
    {
        if (!has(key))
            return;
        const nlohmann::json& v = j_.at(key);
        if (!v.is_array())
            fail(key_pointer(key), "'" + key + "'" + where() + ": expected an array");
        std::vector<T> tmp;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& e = v[i];
            const std::string ptr = key_pointer(key) + "/" + std::to_string(i);
            bool ok = false;
            if constexpr (std::is_integral_v<T>)
                ok = e.is_number_integer() && (!std::is_unsigned_v<T> || e.is_number_unsigned());
            else if constexpr (std::is_floating_point_v<T>)
                ok = e.is_number();
            else
                ok = e.is_string();
            if (!ok)
                fail(ptr, "'" + key + "'" + where() + ": element " + std::to_string(i) + " has the wrong type");
            tmp.push_back(e.get<T>());
        }
        out = std::move(tmp);
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                fail(key_pointer(it.key()), "unknown key '" + it.key() + "'" + where());
    }

    const std::string& pointer() const { return pointer_; }

private:
    const nlohmann::json& j_;
    std::string pointer_;
    const std::string& source_;
    const std::map<std::string, int>& lines_;
    std::set<std::string> seen_;
};

void read_es(Block& b, EsConfig& es)
{
    b.read("sigma", es.sigma);
    b.read("lr", es.lr);
    b.read("workers", es.workers);
    b.read("generations", es.generations);
    b.read("episodes_per_eval", es.episodes_per_eval);
    b.read("eval_episodes", es.eval_episodes);
    b.read("normalize_obs", es.normalize_obs);
    b.read("max_timesteps", es.max_timesteps);
    b.read("jobs", es.jobs);
}

void read_pg(Block& b, PgConfig& pg)
{
    b.read("gamma", pg.gamma);
    b.read("gae_lambda", pg.gae_lambda);
    b.read("clip_eps", pg.clip_eps);
    b.read("rollout_len", pg.rollout_len);
    b.read("epochs", pg.epochs);
    b.read("minibatch", pg.minibatch);
    b.read("policy_lr", pg.policy_lr);
    b.read("value_coef", pg.value_coef);
    b.read("entropy_coef", pg.entropy_coef);
    b.read("max_grad_norm", pg.max_grad_norm);
    b.read("total_timesteps", pg.total_timesteps);
    b.read("normalize_obs", pg.normalize_obs);
}

}  // namespace

std::map<std::string, int> json_key_lines(const std::string& text)
{
    struct Frame {
        bool is_array;
        std::string pointer;
        int index;
    };
    std::map<std::string, int> lines;
    std::vector<Frame> stack;
    int line = 1;
    std::string pending_key;
    bool have_key = false;
    lines[""] = 1;

    const auto value_pointer = [&]() -> std::string {
        if (stack.empty())
            return "";
        Frame& f = stack.back();
        if (f.is_array)
            return f.pointer + "/" + std::to_string(f.index);
        return f.pointer + "/" + escape_pointer_token(pending_key);
    };
    const auto begin_value = [&]() -> std::string {
        const std::string p = value_pointer();
        if (!stack.empty() && stack.back().is_array)
            lines.emplace(p, line);
        have_key = false;
        return p;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
        } else if (c == '"') {
            std::string s;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) {
                    ++i;
                    s += text[i];
                } else {
                    s += text[i];
                }
            }
            std::size_t k = i + 1;
            while (k < text.size() && (text[k] == ' ' || text[k] == '\t' || text[k] == '\r' || text[k] == '\n'))
                ++k;
            const bool is_key = !stack.empty() && !stack.back().is_array && !have_key && k < text.size()
                                && text[k] == ':';
            if (is_key) {
                pending_key = s;
                have_key = true;
                lines.emplace(stack.back().pointer + "/" + escape_pointer_token(s), line);
            } else {
                begin_value();
            }
        } else if (c == '{' || c == '[') {
            const std::string p = begin_value();
            stack.push_back({c == '[', p, 0});
        } else if (c == '}' || c == ']') {
            if (!stack.empty())
                stack.pop_back();
        } else if (c == ',') {
            if (!stack.empty() && stack.back().is_array)
                ++stack.back().index;
            have_key = false;
        } else if (c == ':' || c == ' ' || c == '\t' || c == '\r') {
        } else {
            // number, true, false, null
            begin_value();
            while (i + 1 < text.size() && std::string(",]}\n \t\r").find(text[i + 1]) == std::string::npos)
                ++i;
        }
    }
    return lines;
}

void resolve_architecture(ExperimentConfig& cfg)
{
    const auto env = make_env(cfg.env, cfg.env_overrides);
    const TrainMode mode = train_mode(cfg.trainer);
    if (!cfg.preset.empty()) {
        cfg.arch = preset_architecture(cfg.preset, env->spec().state_dim, env->spec().action_dim, mode);
    } else {
        cfg.arch.state_dim = env->spec().state_dim;
        cfg.arch.action_dim = env->spec().action_dim;
        cfg.arch.gaussian_head = mode == TrainMode::pg;
    }
    cfg.arch.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::string& source)
{
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // the library message already carries "line L, column C"
        throw ConfigError(source + ": " + e.what());
    }
    const auto lines = json_key_lines(text);
    ExperimentConfig cfg;
    Block top(root, "", source, lines);

    if (!top.has("env"))
        top.fail("", "missing required block 'env'");
    {
        Block env = top.child("env");
        if (!env.has("name"))
            env.fail(env.pointer(), "missing required field 'env.name'");
        env.read("name", cfg.env);
        if (env.has("overrides")) {
            const auto& o = env.raw("overrides");
            if (!o.is_object())
                env.fail(env.key_pointer("overrides"), "'overrides' at '/env': expected an object");
            cfg.env_overrides = o;
        }
        env.finish();
        try {
            make_env(cfg.env, cfg.env_overrides);
        } catch (const ConfigError& e) {
            env.fail(env.key_pointer(cfg.env_overrides.empty() ? "name" : "overrides"), e.what());
        }
    }

    if (top.has("trainer")) {
        Block t = top.child("trainer");
        std::string type = "es";
        t.read("type", type);
        try {
            cfg.trainer = parse_trainer_kind(type);
        } catch (const ConfigError& e) {
            t.fail(t.key_pointer("type"), e.what());
        }
        if (cfg.trainer == TrainerKind::es)
            read_es(t, cfg.es);
        else
            read_pg(t, cfg.pg);
        t.finish();
        try {
            cfg.es.validate();
            cfg.pg.validate();
        } catch (const ConfigError& e) {
            t.fail(t.pointer(), e.what());
        }
    }

    cfg.preset = "SCN-16";
    if (top.has("policy")) {
        Block p = top.child("policy");
        if (p.has("preset")) {
            p.read("preset", cfg.preset);
            p.finish();
        } else {
            cfg.preset.clear();
            p.read("linear", cfg.arch.linear);
            std::string kind = "mlp";
            p.read("nonlinear", kind);
            try {
                cfg.arch.nonlinear = parse_nonlinear_kind(kind);
            } catch (const ConfigError& e) {
                p.fail(p.key_pointer("nonlinear"), e.what());
            }
            p.read_list("hidden", cfg.arch.hidden);
            p.read("cpg_components", cfg.arch.cpg_components);
            p.finish();
        }
        try {
            resolve_architecture(cfg);
        } catch (const ConfigError& e) {
            p.fail(p.pointer(), e.what());
        }
    } else {
        resolve_architecture(cfg);
    }

    if (top.has("harness")) {
        Block h = top.child("harness");
        if (h.has("ablation")) {
            Block a = h.child("ablation");
            std::vector<std::string> names;
            a.read_list("variants", names);
            if (a.has("variants")) {
                cfg.ablation.variants.clear();
                for (std::size_t i = 0; i < names.size(); ++i) {
                    try {
                        cfg.ablation.variants.push_back(parse_variant(names[i]));
                    } catch (const ConfigError& e) {
                        a.fail(a.key_pointer("variants") + "/" + std::to_string(i), e.what());
                    }
                }
            }
            a.read("eval_episodes", cfg.ablation.eval_episodes);
            a.finish();
            if (cfg.ablation.eval_episodes < 1)
                a.fail(a.key_pointer("eval_episodes"), "eval_episodes must be at least 1");
        }
        if (h.has("robustness")) {
            Block r = h.child("robustness");
            std::string target = "action";
            r.read("noise", target);
            if (target == "action")
                cfg.robustness.spec.target = NoiseTarget::action;
            else if (target == "observation" || target == "obs")
                cfg.robustness.spec.target = NoiseTarget::observation;
            else
                r.fail(r.key_pointer("noise"), "unknown noise target '" + target + "' (expected action or observation)");
            r.read_list("sigma_levels", cfg.robustness.spec.sigma_levels);
            r.read("episodes_per_level", cfg.robustness.spec.episodes_per_level);
            r.read("relative_to_action_range", cfg.robustness.spec.relative_to_action_range);
            if (r.has("checkpoints")) {
                Block c = r.child("checkpoints");
                const auto& obj = r.raw("checkpoints");
                for (auto it = obj.begin(); it != obj.end(); ++it) {
                    std::vector<std::string> paths;
                    c.read_list(it.key(), paths);
                    cfg.robustness.checkpoints[it.key()] = paths;
                }
                c.finish();
            }
            r.finish();
            try {
                cfg.robustness.spec.validate();
            } catch (const ConfigError& e) {
                r.fail(r.pointer(), e.what());
            }
        }
        if (h.has("sweep")) {
            Block s = h.child("sweep");
            s.read("family", cfg.sweep.family);
            s.read_list("widths", cfg.sweep.widths);
            s.finish();
            if (cfg.sweep.family != "SCN" && cfg.sweep.family != "MLP")
                s.fail(s.key_pointer("family"), "family must be SCN or MLP");
            if (cfg.sweep.widths.empty())
                s.fail(s.key_pointer("widths"), "widths must not be empty");
            for (std::size_t i = 0; i < cfg.sweep.widths.size(); ++i)
                if (cfg.sweep.widths[i] < 1)
                    s.fail(s.key_pointer("widths") + "/" + std::to_string(i), "widths must be positive");
        }
        h.finish();
    }

    if (top.has("resolved_architecture")) {
        // informational, written by to_json; must agree with the policy block
        try {
            if (!(Architecture::from_json(top.raw("resolved_architecture")) == cfg.arch))
                top.fail("/resolved_architecture", "resolved_architecture does not match the policy block");
        } catch (const nlohmann::json::exception& e) {
            top.fail("/resolved_architecture", std::string("malformed resolved_architecture: ") + e.what());
        }
    }
    top.read_list("seeds", cfg.seeds);
    if (top.has("seeds") && cfg.seeds.empty())
        top.fail("/seeds", "seeds must not be empty");
    top.read("output_dir", cfg.output_dir);
    top.finish();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw MissingArtifactError("config not found: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

TrainSpec ExperimentConfig::train_spec() const
{
    TrainSpec s;
    s.env = env;
    s.env_overrides = env_overrides;
    s.arch = arch;
    s.trainer = trainer;
    s.es = es;
    s.pg = pg;
    return s;
}

nlohmann::json ExperimentConfig::to_json() const
{
    nlohmann::json j;
    j["env"] = {{"name", env}, {"overrides", env_overrides}};
    if (!preset.empty())
        j["policy"] = {{"preset", preset}};
    else
        j["policy"] = {{"linear", arch.linear},
                       {"nonlinear", std::string(to_string(arch.nonlinear))},
                       {"hidden", arch.hidden},
                       {"cpg_components", arch.cpg_components}};
    j["resolved_architecture"] = arch.to_json();
    if (trainer == TrainerKind::es)
        j["trainer"] = {{"type", "es"},
                        {"sigma", es.sigma},
                        {"lr", es.lr},
                        {"workers", es.workers},
                        {"generations", es.generations},
                        {"episodes_per_eval", es.episodes_per_eval},
                        {"eval_episodes", es.eval_episodes},
                        {"normalize_obs", es.normalize_obs},
                        {"max_timesteps", es.max_timesteps},
                        {"jobs", es.jobs}};
    else
        j["trainer"] = {{"type", "pg"},
                        {"gamma", pg.gamma},
                        {"gae_lambda", pg.gae_lambda},
                        {"clip_eps", pg.clip_eps},
                        {"rollout_len", pg.rollout_len},
                        {"epochs", pg.epochs},
                        {"minibatch", pg.minibatch},
                        {"policy_lr", pg.policy_lr},
                        {"value_coef", pg.value_coef},
                        {"entropy_coef", pg.entropy_coef},
                        {"max_grad_norm", pg.max_grad_norm},
                        {"total_timesteps", pg.total_timesteps},
                        {"normalize_obs", pg.normalize_obs}};
    std::vector<std::string> variants;
    for (Variant v : ablation.variants)
        variants.emplace_back(to_string(v));
    j["harness"] = {
        {"ablation", {{"variants", variants}, {"eval_episodes", ablation.eval_episodes}}},
        {"robustness",
         {{"noise", robustness.spec.target == NoiseTarget::action ? "action" : "observation"},
          {"sigma_levels", robustness.spec.sigma_levels},
          {"episodes_per_level", robustness.spec.episodes_per_level},
          {"relative_to_action_range", robustness.spec.relative_to_action_range},
          {"checkpoints", robustness.checkpoints}}},
        {"sweep", {{"family", sweep.family}, {"widths", sweep.widths}}},
    };
    j["seeds"] = seeds;
    j["output_dir"] = output_dir;
    return j;
}

}  // namespace scn
