#include "scn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace scn {

namespace {

constexpr std::uint64_t kEvalSeedTag = 0x68657661ULL;

const Variant kAllVariants[] = {Variant::SCN,   Variant::LinearOnly, Variant::MlpOnly,
                                Variant::SCN_L, Variant::SCN_N,      Variant::PseudoSCN};

std::string cell(double x)
{
    return format_double(x);
}

std::string optional_cell(const std::vector<double>& v, bool std_dev)
{
    if (v.empty())
        return "";
    const Stat s = mean_std(v);
    return cell(std_dev ? s.std : s.mean);
}

void say(const std::function<void(const std::string&)>& log, const std::string& msg)
{
    if (log)
        log(msg);
}

}  // namespace

std::string_view to_string(TrainerKind k)
{
    return k == TrainerKind::es ? "es" : "pg";
}

TrainerKind parse_trainer_kind(std::string_view s)
{
    if (s == "es")
        return TrainerKind::es;
    if (s == "pg" || s == "ppo")
        return TrainerKind::pg;
    throw ConfigError("unknown trainer '" + std::string(s) + "' (expected es or pg)");
}

TrainMode train_mode(TrainerKind k)
{
    return k == TrainerKind::es ? TrainMode::es : TrainMode::pg;
}

TrainSpec TrainSpec::with_arch(Architecture a) const
{
    TrainSpec s = *this;
    s.arch = std::move(a);
    return s;
}

CsvTable es_curve_table(const std::vector<EsRecord>& curve)
{
    CsvTable t;
    t.schema = "scn-es-curve/1";
    t.columns = {"generation", "timesteps", "reward", "fitness_mean", "fitness_min", "fitness_max", "center_norm"};
    for (const auto& r : curve)
        t.rows.push_back({static_cast<double>(r.generation), static_cast<double>(r.timesteps), r.eval_mean,
                          r.fitness_mean, r.fitness_min, r.fitness_max, r.center_norm});
    return t;
}

CsvTable pg_curve_table(const std::vector<PgRecord>& curve)
{
    CsvTable t;
    t.schema = "scn-pg-curve/1";
    t.columns = {"update",      "timesteps",  "reward",  "reward_min",    "reward_max",        "episodes",
                 "policy_loss", "value_loss", "entropy", "approx_kl",     "clip_fraction",     "explained_variance"};
    for (const auto& r : curve)
        t.rows.push_back({static_cast<double>(r.update), static_cast<double>(r.timesteps), r.reward_mean,
                          r.reward_min, r.reward_max, static_cast<double>(r.episodes), r.policy_loss, r.value_loss,
                          r.entropy, r.approx_kl, r.clip_fraction, r.explained_variance});
    return t;
}

CsvTable episodes_table(const std::vector<EpisodeRecord>& episodes)
{
    CsvTable t;
    t.schema = "scn-episodes/1";
    t.columns = {"timesteps", "reward"};
    for (const auto& e : episodes)
        t.rows.push_back({static_cast<double>(e.timesteps), e.reward});
    return t;
}

double final_reward(const std::vector<double>& episode_rewards, std::size_t last)
{
    if (episode_rewards.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = std::min(last, episode_rewards.size());
    return std::accumulate(episode_rewards.end() - static_cast<std::ptrdiff_t>(n), episode_rewards.end(), 0.0) / n;
}

RunResult train_run(const TrainSpec& spec, std::uint64_t seed, const std::function<void(const std::string&)>& log)
{
    const EnvFactory factory = spec.factory();
    std::vector<EpisodeRecord> episodes;
    std::vector<double> wall;
    std::optional<RunResult> out;
    if (spec.trainer == TrainerKind::es) {
        EsConfig cfg = spec.es;
        cfg.master_seed = seed;
        const int every = std::max(1, cfg.generations / 10);
        EsResult r = train_es(spec.arch, factory, cfg, [&](const EsRecord& rec) {
            if (rec.generation % every == 0 || rec.generation + 1 == cfg.generations) {
                std::ostringstream os;
                os << "gen " << rec.generation << " timesteps " << rec.timesteps << " reward " << rec.eval_mean;
                say(log, os.str());
            }
        });
        for (const auto& rec : r.curve)
            wall.push_back(rec.wall_seconds);
        out.emplace(RunResult{std::move(r.trained), TrainMode::es, es_curve_table(r.curve), {}, {}, 0.0, 0.0});
        episodes = std::move(r.episodes);
    } else {
        PgConfig cfg = spec.pg;
        cfg.seed = seed;
        PgResult r = train_ppo(spec.arch, factory, cfg, [&](const PgRecord& rec) {
            if (rec.update % 10 == 0) {
                std::ostringstream os;
                os << "update " << rec.update << " timesteps " << rec.timesteps << " reward " << rec.reward_mean;
                say(log, os.str());
            }
        });
        for (const auto& rec : r.curve)
            wall.push_back(rec.wall_seconds);
        out.emplace(RunResult{std::move(r.trained), TrainMode::pg, pg_curve_table(r.curve), {}, {}, 0.0, 0.0});
        episodes = std::move(r.episodes);
    }
    RunResult& res = *out;
    res.timing.schema = "scn-timing/1";
    res.timing.columns = {"row", "wall_seconds"};
    for (std::size_t i = 0; i < wall.size(); ++i)
        res.timing.rows.push_back({static_cast<double>(i), wall[i]});
    res.episodes = episodes_table(episodes);
    std::vector<double> rewards;
    for (const auto& e : episodes)
        rewards.push_back(e.reward);
    res.final_reward = final_reward(rewards);
    res.average_reward = final_reward(rewards, rewards.size());
    return std::move(res);
}

void save_run(const std::filesystem::path& stem, const RunResult& r, const nlohmann::json& meta)
{
    if (stem.has_parent_path())
        std::filesystem::create_directories(stem.parent_path());
    const std::string base = stem.string();
    save_checkpoint(base + ".ckpt", make_checkpoint(r.trained, r.mode, meta));
    write_csv(base + ".csv", r.curve);
    write_csv(base + ".episodes.csv", r.episodes);
    write_csv(base + ".timing.csv", r.timing);
}

EvalStats summarize_rewards(std::vector<double> rewards)
{
    EvalStats s;
    s.rewards = std::move(rewards);
    if (s.rewards.empty()) {
        s.mean = s.std = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    const double n = static_cast<double>(s.rewards.size());
    s.mean = std::accumulate(s.rewards.begin(), s.rewards.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : s.rewards)
        ss += (r - s.mean) * (r - s.mean);
    s.std = std::sqrt(ss / n);
    s.min = *std::min_element(s.rewards.begin(), s.rewards.end());
    s.max = *std::max_element(s.rewards.begin(), s.rewards.end());
    return s;
}

std::uint64_t eval_seed(std::uint64_t seed, int episode)
{
    return derive_seed({kEvalSeedTag, seed, static_cast<std::uint64_t>(episode)});
}

EvalStats evaluate_actor(const Actor& actor, const EnvFactory& make_env, int episodes, std::uint64_t seed,
                         const InjectedNoise& noise)
{
    auto env = make_env();
    std::vector<double> rewards;
    for (int e = 0; e < episodes; ++e)
        rewards.push_back(run_episode(actor, *env, eval_seed(seed, e), noise).total_reward);
    return summarize_rewards(std::move(rewards));
}

EvalStats evaluate_random(const EnvFactory& make_env, int episodes, std::uint64_t seed)
{
    auto env = make_env();
    std::vector<double> rewards;
    for (int e = 0; e < episodes; ++e)
        rewards.push_back(run_random_episode(*env, eval_seed(seed, e)).total_reward);
    return summarize_rewards(std::move(rewards));
}

Actor sum_actor(const TrainedPolicy& a, const TrainedPolicy& b)
{
    return [&a, &b](const Vec& obs, double t, const Vec* noise) -> Vec {
        return a.act(obs, t, {}, noise) + b.act(obs, t, {}, noise);
    };
}

std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::SCN: return "SCN";
    case Variant::LinearOnly: return "LinearOnly";
    case Variant::MlpOnly: return "MlpOnly";
    case Variant::SCN_L: return "SCN_L";
    case Variant::SCN_N: return "SCN_N";
    case Variant::PseudoSCN: return "PseudoSCN";
    }
    return "?";
}

Variant parse_variant(std::string_view s)
{
    for (Variant v : kAllVariants)
        if (to_string(v) == s)
            return v;
    throw ConfigError("unknown variant '" + std::string(s)
                      + "' (expected SCN, LinearOnly, MlpOnly, SCN_L, SCN_N or PseudoSCN)");
}

bool is_trained(Variant v)
{
    return v == Variant::SCN || v == Variant::LinearOnly || v == Variant::MlpOnly;
}

Architecture variant_architecture(const Architecture& base, Variant v)
{
    Architecture a = base;
    if (v == Variant::LinearOnly) {
        a.linear = true;
        a.nonlinear = NonlinearKind::none;
    } else if (v == Variant::MlpOnly) {
        if (a.nonlinear == NonlinearKind::none)
            throw ConfigError("MlpOnly: base architecture has no nonlinear stream");
        a.linear = false;
    }
    a.validate();
    return a;
}

void AblationSpec::validate() const
{
    if (variants.empty())
        throw ConfigError("ablation: no variants");
    if (seeds.empty())
        throw ConfigError("ablation: no seeds");
    if (eval_episodes < 1)
        throw ConfigError("ablation: eval_episodes must be at least 1");
    if (output_dir.empty())
        throw ConfigError("ablation: output_dir is required");
    if (!base.arch.linear || base.arch.nonlinear == NonlinearKind::none)
        throw ConfigError("ablation: base architecture must have both streams");
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Variant v, std::uint64_t seed)
{
    return dir / std::string(to_string(v)) / ("seed" + std::to_string(seed) + ".ckpt");
}

std::vector<double> AblationResult::values(Variant v, bool use_final_reward) const
{
    std::vector<double> out;
    for (const auto& r : runs) {
        if (r.variant != v)
            continue;
        if (use_final_reward) {
            if (r.final_reward)
                out.push_back(*r.final_reward);
        } else {
            out.push_back(r.eval.mean);
        }
    }
    return out;
}

double AblationResult::eval_mean(Variant v) const
{
    const auto vals = values(v, false);
    if (vals.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return mean_std(vals).mean;
}

double AblationResult::random_mean() const
{
    std::vector<double> m;
    for (const auto& r : random)
        m.push_back(r.mean);
    return m.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_std(m).mean;
}

TextTable AblationResult::table() const
{
    TextTable t;
    t.schema = "scn-ablation/1";
    t.columns = {"env",        "variant",          "seeds",           "eval_mean", "eval_std", "final_reward_mean",
                 "final_reward_std", "shifted_ratio_to_SCN"};
    const double ref = eval_mean(Variant::SCN);
    const double rnd = random_mean();
    for (Variant v : kAllVariants) {
        const auto evals = values(v, false);
        if (evals.empty())
            continue;
        const Stat s = mean_std(evals);
        const auto finals = values(v, true);
        t.rows.push_back({env, std::string(to_string(v)), std::to_string(s.n), cell(s.mean), cell(s.std),
                          optional_cell(finals, false), optional_cell(finals, true),
                          std::isnan(ref) ? "" : cell(shifted_ratio(s.mean, ref, rnd))});
    }
    t.rows.push_back({env, "Random", std::to_string(random.size()), cell(rnd), "", "", "", ""});
    return t;
}

AblationResult run_ablation(const AblationSpec& spec, const std::function<void(const std::string&)>& log)
{
    spec.validate();
    const EnvFactory factory = spec.base.factory();
    const auto wants = [&](Variant v) {
        return std::find(spec.variants.begin(), spec.variants.end(), v) != spec.variants.end();
    };
    const auto load = [&](Variant v, std::uint64_t seed) {
        const auto path = checkpoint_path(spec.output_dir, v, seed);
        if (!std::filesystem::exists(path))
            throw MissingArtifactError("ablation: " + std::string(to_string(v)) + " checkpoint required but missing: "
                                       + path.string());
        return load_checkpoint(path).trained();
    };

    AblationResult result;
    result.env = spec.base.env;
    for (std::uint64_t seed : spec.seeds) {
        for (Variant v : kAllVariants) {
            if (!wants(v) || !is_trained(v))
                continue;
            say(log, std::string(to_string(v)) + " seed " + std::to_string(seed));
            const TrainSpec ts = spec.base.with_arch(variant_architecture(spec.base.arch, v));
            const RunResult run = train_run(ts, seed, log);
            const auto stem = checkpoint_path(spec.output_dir, v, seed).replace_extension();
            save_run(stem, run,
                     {{"env", spec.base.env}, {"variant", to_string(v)}, {"seed", seed},
                      {"trainer", to_string(spec.base.trainer)}});
            VariantRun vr;
            vr.variant = v;
            vr.seed = seed;
            vr.eval = evaluate_actor(make_actor(run.trained), factory, spec.eval_episodes, seed);
            vr.final_reward = run.final_reward;
            vr.average_reward = run.average_reward;
            vr.curve = curve_from_table(run.curve);
            result.runs.push_back(std::move(vr));
        }
        for (Variant v : kAllVariants) {
            if (!wants(v) || is_trained(v))
                continue;
            VariantRun vr;
            vr.variant = v;
            vr.seed = seed;
            if (v == Variant::PseudoSCN) {
                const TrainedPolicy lin = load(Variant::LinearOnly, seed);
                const TrainedPolicy mlp = load(Variant::MlpOnly, seed);
                vr.eval = evaluate_actor(sum_actor(lin, mlp), factory, spec.eval_episodes, seed);
            } else {
                const TrainedPolicy scn = load(Variant::SCN, seed);
                const StreamMask mask = v == Variant::SCN_L ? StreamMask{true, false} : StreamMask{false, true};
                vr.eval = evaluate_actor(make_actor(scn, mask), factory, spec.eval_episodes, seed);
            }
            result.runs.push_back(std::move(vr));
        }
        result.random.push_back(evaluate_random(factory, spec.eval_episodes, seed));
    }
    return result;
}

IsolationReport isolation_report(const std::vector<AblationResult>& results)
{
    IsolationReport rep;
    const Variant shown[] = {Variant::LinearOnly, Variant::MlpOnly, Variant::SCN_L, Variant::SCN_N,
                             Variant::PseudoSCN};
    for (Variant v : shown) {
        double num = 0.0, den = 0.0, sum = 0.0;
        int count = 0;
        for (const auto& r : results) {
            const double value = r.eval_mean(v);
            const double ref = r.eval_mean(Variant::SCN);
            if (std::isnan(value) || std::isnan(ref))
                continue;
            const double rnd = r.random_mean();
            const double ratio = shifted_ratio(value, ref, rnd);
            rep.per_env.push_back({r.env, v, ratio});
            num += value - rnd;
            den += ref - rnd;
            sum += ratio;
            ++count;
        }
        if (count > 0) {
            rep.mean_of_envs.emplace_back(v, sum / count);
            rep.pooled.emplace_back(v, num / den);
        }
    }
    return rep;
}

TextTable IsolationReport::table() const
{
    TextTable t;
    t.schema = "scn-isolation/1";
    t.columns = {"scope", "variant", "shifted_ratio_to_SCN"};
    for (const auto& r : per_env)
        t.rows.push_back({r.env, std::string(to_string(r.variant)), cell(r.ratio)});
    for (const auto& [v, x] : mean_of_envs)
        t.rows.push_back({"mean_of_envs", std::string(to_string(v)), cell(x)});
    for (const auto& [v, x] : pooled)
        t.rows.push_back({"pooled", std::string(to_string(v)), cell(x)});
    return t;
}

void RobustnessSpec::validate() const
{
    if (sigma_levels.empty())
        throw ConfigError("robustness: sigma_levels is empty");
    for (std::size_t i = 0; i < sigma_levels.size(); ++i) {
        if (!(sigma_levels[i] >= 0.0))
            throw ConfigError("robustness: sigma levels must be non-negative");
        if (i > 0 && !(sigma_levels[i] > sigma_levels[i - 1]))
            throw ConfigError("robustness: sigma levels must be strictly ascending");
    }
    if (episodes_per_level < 1)
        throw ConfigError("robustness: episodes_per_level must be at least 1");
    if (relative_to_action_range && target != NoiseTarget::action)
        throw ConfigError("robustness: relative sigma applies to action noise only");
}

RobustnessResult run_robustness(const TrainedPolicy& policy, const EnvFactory& make_env, const RobustnessSpec& spec)
{
    spec.validate();
    double scale = 1.0;
    if (spec.relative_to_action_range) {
        const EnvSpec es = make_env()->spec();
        scale = (es.action_high - es.action_low).mean();
    }
    const Actor actor = make_actor(policy);
    const EvalStats ref = evaluate_actor(actor, make_env, spec.episodes_per_level, spec.seed);
    RobustnessResult res;
    res.reference = ref.mean;
    res.random = evaluate_random(make_env, spec.episodes_per_level, spec.seed).mean;
    for (double level : spec.sigma_levels) {
        RobustnessRow row;
        row.level = level;
        row.sigma = level * scale;
        if (level == 0.0) {
            row.stats = ref;
            row.degradation_pct = 0.0;
        } else {
            row.stats = evaluate_actor(actor, make_env, spec.episodes_per_level, spec.seed,
                                       InjectedNoise{spec.target, row.sigma});
            row.degradation_pct = (res.reference - row.stats.mean) / (res.reference - res.random) * 100.0;
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

TextTable RobustnessResult::table() const
{
    TextTable t;
    t.schema = "scn-robustness/1";
    t.columns = {"level", "sigma", "mean", "std", "min", "max", "degradation_pct", "reference", "random"};
    for (const auto& r : rows)
        t.rows.push_back({cell(r.level), cell(r.sigma), cell(r.stats.mean), cell(r.stats.std), cell(r.stats.min),
                          cell(r.stats.max), cell(r.degradation_pct), cell(reference), cell(random)});
    return t;
}

void SweepSpec::validate() const
{
    if (family != "SCN" && family != "MLP")
        throw ConfigError("sweep: family must be SCN or MLP");
    if (widths.empty())
        throw ConfigError("sweep: no widths");
    for (int w : widths)
        if (w < 1)
            throw ConfigError("sweep: widths must be positive");
    if (seeds.empty())
        throw ConfigError("sweep: no seeds");
}

std::vector<SweepRow> run_size_sweep(const SweepSpec& spec, const std::function<void(const std::string&)>& log)
{
    spec.validate();
    std::vector<SweepRow> rows;
    for (int w : spec.widths) {
        SweepRow row;
        row.width = w;
        const std::string name = spec.family + "-" + std::to_string(w);
        row.arch = preset_architecture(name, spec.base.arch.state_dim, spec.base.arch.action_dim,
                                       train_mode(spec.base.trainer));
        row.param_count = row.arch.param_count();
        for (std::uint64_t seed : spec.seeds) {
            say(log, name + " seed " + std::to_string(seed));
            const RunResult run = train_run(spec.base.with_arch(row.arch), seed, log);
            if (!spec.output_dir.empty())
                save_run(spec.output_dir / name / ("seed" + std::to_string(seed)), run,
                         {{"env", spec.base.env}, {"preset", name}, {"seed", seed},
                          {"trainer", to_string(spec.base.trainer)}});
            row.final_rewards.push_back(run.final_reward);
            row.average_rewards.push_back(run.average_reward);
            row.curves.push_back(curve_from_table(run.curve));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

TextTable sweep_table(const std::vector<SweepRow>& rows)
{
    TextTable t;
    t.schema = "scn-sweep/1";
    t.columns = {"width", "param_count", "seeds", "final_reward_mean", "final_reward_std", "average_reward_mean",
                 "average_reward_std"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.width), std::to_string(r.param_count),
                          std::to_string(r.final_rewards.size()), optional_cell(r.final_rewards, false),
                          optional_cell(r.final_rewards, true), optional_cell(r.average_rewards, false),
                          optional_cell(r.average_rewards, true)});
    return t;
}

std::vector<DimPair> preset_dim_pairs()
{
    std::vector<DimPair> out;
    for (const auto& name : env_names()) {
        const auto env = make_env(name);
        out.push_back({name, env->spec().state_dim, env->spec().action_dim});
    }
    const DimPair mujoco[] = {{"Hopper", 11, 3},  {"HalfCheetah", 17, 6}, {"Walker2d", 17, 6},
                              {"Swimmer", 8, 2},  {"Ant", 111, 8},       {"Humanoid", 376, 17}};
    out.insert(out.end(), std::begin(mujoco), std::end(mujoco));
    return out;
}

std::vector<SizeRatio> size_ratios(std::string_view small, std::string_view large)
{
    std::vector<SizeRatio> out;
    for (const auto& d : preset_dim_pairs()) {
        SizeRatio r;
        r.dims = d;
        r.small = preset_architecture(small, d.state_dim, d.action_dim, TrainMode::es).param_count();
        r.large = preset_architecture(large, d.state_dim, d.action_dim, TrainMode::es).param_count();
        r.ratio = static_cast<double>(r.small) / static_cast<double>(r.large);
        out.push_back(r);
    }
    return out;
}

}  // namespace scn
