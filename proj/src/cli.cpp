#include "scn/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "scn/config.hpp"
#include "scn/plot.hpp"

namespace scn {

namespace {

namespace fs = std::filesystem;

fs::path output_root(const std::string& flag, const std::string& configured)
{
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("SCN_LAB_OUTPUT_DIR"); env && *env)
        return env;
    return configured;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << text;
}

void write_table(const fs::path& path, const TextTable& t)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    write_csv(path.string(), t);
}

void write_resolved(const fs::path& dir, const ExperimentConfig& cfg)
{
    write_text(dir / "config.resolved.json", cfg.to_json().dump(2) + "\n");
}

void print_table(std::ostream& out, const TextTable& t)
{
    std::vector<std::size_t> width(t.columns.size(), 0);
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        width[c] = t.columns[c].size();
    for (const auto& r : t.rows)
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c)
            width[c] = std::max(width[c], r[c].size());
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c)
            out << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
        out << '\n';
    };
    line(t.columns);
    for (const auto& r : t.rows)
        line(r);
}

std::string fmt(double x)
{
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

struct Common {
    int jobs = 1;
    std::string output;
    bool quiet = false;
};

std::function<void(const std::string&)> logger(const Common& c, std::ostream& err)
{
    if (c.quiet)
        return {};
    return [&err](const std::string& msg) { err << msg << '\n'; };
}

// train

struct TrainArgs {
    std::string config;
    std::string env;
    std::string preset;
    std::string trainer;
    std::vector<std::uint64_t> seeds;
    int generations = -1;
    std::int64_t timesteps = -1;
};

ExperimentConfig config_from_args(const std::string& path, const std::string& env)
{
    if (!path.empty())
        return load_config(path);
    if (env.empty())
        throw ConfigError("train: give a config file or --env");
    nlohmann::json j = {{"env", {{"name", env}}}};
    return parse_config(j.dump(), "<command line>");
}

int cmd_train(const TrainArgs& a, const Common& c, std::ostream& out, std::ostream& err)
{
    ExperimentConfig cfg = config_from_args(a.config, a.env);
    if (!a.env.empty())
        cfg.env = a.env;
    if (!a.trainer.empty())
        cfg.trainer = parse_trainer_kind(a.trainer);
    if (!a.preset.empty())
        cfg.preset = a.preset;
    if (a.generations >= 0)
        cfg.es.generations = a.generations;
    if (a.timesteps >= 0) {
        cfg.pg.total_timesteps = a.timesteps;
        cfg.es.max_timesteps = a.timesteps;
    }
    if (!a.seeds.empty())
        cfg.seeds = a.seeds;
    cfg.es.jobs = c.jobs;
    resolve_architecture(cfg);
    cfg.es.validate();
    cfg.pg.validate();

    const fs::path dir = output_root(c.output, cfg.output_dir);
    cfg.output_dir = dir.string();
    fs::create_directories(dir);
    write_resolved(dir, cfg);
    const TrainSpec spec = cfg.train_spec();
    out << "training " << cfg.arch.describe() << " on " << cfg.env << " with " << to_string(cfg.trainer) << '\n';
    for (std::uint64_t seed : cfg.seeds) {
        const RunResult r = train_run(spec, seed, logger(c, err));
        const fs::path stem = dir / ("seed" + std::to_string(seed));
        save_run(stem, r,
                 {{"env", cfg.env},
                  {"env_overrides", cfg.env_overrides},
                  {"seed", seed},
                  {"trainer", to_string(cfg.trainer)},
                  {"preset", cfg.preset}});
        out << "seed " << seed << ": final_reward " << fmt(r.final_reward) << " average_reward "
            << fmt(r.average_reward) << " -> " << stem.string() << ".ckpt\n";
    }
    return kExitOk;
}

// eval

struct EvalArgs {
    std::string checkpoint;
    std::string env;
    int episodes = 10;
    std::uint64_t seed = 1;
    std::string disable;
    std::string noise;
    std::optional<double> sigma;
};

std::string env_of_checkpoint(const Checkpoint& ck, const std::string& flag)
{
    if (!flag.empty())
        return flag;
    if (ck.meta.contains("env") && ck.meta["env"].is_string())
        return ck.meta["env"].get<std::string>();
    throw ConfigError("eval: checkpoint does not record its environment; pass --env");
}

nlohmann::json overrides_of_checkpoint(const Checkpoint& ck, const std::string& flag)
{
    if (flag.empty() && ck.meta.contains("env_overrides") && ck.meta["env_overrides"].is_object())
        return ck.meta["env_overrides"];
    return nlohmann::json::object();
}

void check_dims(const Checkpoint& ck, const Env& env, const std::string& name)
{
    const EnvSpec& s = env.spec();
    if (ck.arch.state_dim != s.state_dim || ck.arch.action_dim != s.action_dim)
        throw ConfigError("checkpoint architecture (state " + std::to_string(ck.arch.state_dim) + ", action "
                          + std::to_string(ck.arch.action_dim) + ") does not match " + name + " (state "
                          + std::to_string(s.state_dim) + ", action " + std::to_string(s.action_dim) + ")");
}

int cmd_eval(const EvalArgs& a, const Common& c, std::ostream& out)
{
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const std::string env_name = env_of_checkpoint(ck, a.env);
    const EnvFactory factory = env_factory(env_name, overrides_of_checkpoint(ck, a.env));
    check_dims(ck, *factory(), env_name);
    if (a.episodes < 1)
        throw ConfigError("eval: --episodes must be at least 1");

    StreamMask mask;
    if (a.disable == "linear")
        mask.linear = false;
    else if (a.disable == "nonlinear")
        mask.nonlinear = false;
    else if (!a.disable.empty())
        throw ConfigError("eval: --disable-stream must be linear or nonlinear");

    InjectedNoise noise;
    if (!a.noise.empty()) {
        if (a.noise == "action")
            noise.target = NoiseTarget::action;
        else if (a.noise == "obs" || a.noise == "observation")
            noise.target = NoiseTarget::observation;
        else
            throw ConfigError("eval: --noise must be action or obs");
        noise.sigma = a.sigma.value_or(0.0);
    } else if (a.sigma) {
        throw ConfigError("eval: --sigma needs --noise");
    }
    if (!(noise.sigma >= 0.0))
        throw ConfigError("eval: --sigma must be non-negative");

    const TrainedPolicy p = ck.trained();
    const EvalStats s = evaluate_actor(make_actor(p, mask), factory, a.episodes, a.seed, noise);
    TextTable t;
    t.schema = "scn-eval/1";
    t.columns = {"env", "episodes", "seed", "disabled_stream", "noise", "sigma", "mean", "std", "min", "max"};
    t.rows.push_back({env_name, std::to_string(a.episodes), std::to_string(a.seed),
                      a.disable.empty() ? "none" : a.disable, a.noise.empty() ? "none" : a.noise,
                      format_double(noise.sigma), format_double(s.mean), format_double(s.std), format_double(s.min),
                      format_double(s.max)});
    print_table(out, t);
    fs::path dest = c.output.empty() ? fs::path(a.checkpoint).replace_extension(".eval.csv") : fs::path(c.output);
    write_table(dest, t);
    return kExitOk;
}

// ablate

int cmd_ablate(const std::string& config, const Common& c, std::ostream& out, std::ostream& err)
{
    ExperimentConfig cfg = load_config(config);
    cfg.es.jobs = c.jobs;
    const fs::path dir = output_root(c.output, cfg.output_dir);
    cfg.output_dir = dir.string();
    fs::create_directories(dir);
    write_resolved(dir, cfg);

    AblationSpec spec;
    spec.variants = cfg.ablation.variants;
    spec.base = cfg.train_spec();
    spec.seeds = cfg.seeds;
    spec.eval_episodes = cfg.ablation.eval_episodes;
    spec.output_dir = dir;
    const AblationResult res = run_ablation(spec, logger(c, err));

    const TextTable table = res.table();
    write_table(dir / "ablation.csv", table);
    const TextTable iso = isolation_report({res}).table();
    write_table(dir / "isolation.csv", iso);

    std::vector<VariantValues> finals, averages;
    std::vector<Band> bands;
    for (Variant v : spec.variants) {
        if (!is_trained(v))
            continue;
        VariantValues f{std::string(to_string(v)), {}}, avg{std::string(to_string(v)), {}};
        std::vector<Curve> curves;
        for (const auto& r : res.runs)
            if (r.variant == v) {
                f.values.push_back(*r.final_reward);
                avg.values.push_back(*r.average_reward);
                curves.push_back(*r.curve);
            }
        finals.push_back(f);
        averages.push_back(avg);
        bands.push_back(aggregate_curves(f.label, curves));
    }
    if (!finals.empty()) {
        write_table(dir / "summary_final.csv", summary_table(finals, "SCN", Metric::final));
        write_table(dir / "summary_average.csv", summary_table(averages, "SCN", Metric::average));
        write_text(dir / "curves.svg", render_svg(bands, {cfg.env + " ablation", "timesteps", "episodic reward"}));
    }
    print_table(out, table);
    out << "ratios are (reward - random) / (SCN - random); random = uniform random actions\n";
    print_table(out, iso);
    return kExitOk;
}

// robustness

int cmd_robustness(const std::string& config, const std::vector<std::string>& extra, const Common& c,
                   std::ostream& out)
{
    ExperimentConfig cfg = load_config(config);
    for (const auto& item : extra) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("robustness: --checkpoint expects LABEL=PATH, got '" + item + "'");
        cfg.robustness.checkpoints[item.substr(0, eq)].push_back(item.substr(eq + 1));
    }
    if (cfg.robustness.checkpoints.empty())
        throw ConfigError("robustness: no checkpoints (harness.robustness.checkpoints or --checkpoint LABEL=PATH)");
    const fs::path dir = output_root(c.output, cfg.output_dir);
    cfg.output_dir = dir.string();
    fs::create_directories(dir);
    write_resolved(dir, cfg);

    const EnvFactory factory = env_factory(cfg.env, cfg.env_overrides);
    TextTable all;
    all.schema = "scn-robustness/1";
    TextTable summary;
    summary.schema = "scn-robustness-summary/1";
    summary.columns = {"label", "level", "checkpoints", "degradation_pct_mean", "degradation_pct_std"};
    for (const auto& [label, paths] : cfg.robustness.checkpoints) {
        std::vector<std::vector<double>> per_level(cfg.robustness.spec.sigma_levels.size());
        for (const auto& path : paths) {
            const Checkpoint ck = load_checkpoint(path);
            check_dims(ck, *factory(), cfg.env);
            const RobustnessResult r = run_robustness(ck.trained(), factory, cfg.robustness.spec);
            TextTable t = r.table();
            if (all.columns.empty()) {
                all.columns = {"label", "checkpoint"};
                all.columns.insert(all.columns.end(), t.columns.begin(), t.columns.end());
            }
            for (std::size_t i = 0; i < t.rows.size(); ++i) {
                std::vector<std::string> row{label, path};
                row.insert(row.end(), t.rows[i].begin(), t.rows[i].end());
                all.rows.push_back(row);
                per_level[i].push_back(r.rows[i].degradation_pct);
            }
        }
        for (std::size_t i = 0; i < per_level.size(); ++i) {
            const Stat s = mean_std(per_level[i]);
            summary.rows.push_back({label, format_double(cfg.robustness.spec.sigma_levels[i]), std::to_string(s.n),
                                    format_double(s.mean), format_double(s.std)});
        }
    }
    write_table(dir / "robustness.csv", all);
    write_table(dir / "robustness_summary.csv", summary);
    out << "degradation = (R0 - R_sigma) / (R0 - R_random) * 100\n";
    print_table(out, summary);
    return kExitOk;
}

// sweep

int cmd_sweep(const std::string& config, const Common& c, std::ostream& out, std::ostream& err)
{
    ExperimentConfig cfg = load_config(config);
    cfg.es.jobs = c.jobs;
    const fs::path dir = output_root(c.output, cfg.output_dir);
    cfg.output_dir = dir.string();
    fs::create_directories(dir);
    write_resolved(dir, cfg);

    SweepSpec spec;
    spec.family = cfg.sweep.family;
    spec.widths = cfg.sweep.widths;
    spec.base = cfg.train_spec();
    spec.seeds = cfg.seeds;
    spec.output_dir = dir;
    const auto rows = run_size_sweep(spec, logger(c, err));
    const TextTable t = sweep_table(rows);
    write_table(dir / "sweep.csv", t);
    std::vector<Band> bands;
    for (const auto& r : rows)
        bands.push_back(aggregate_curves(spec.family + "-" + std::to_string(r.width), r.curves));
    write_text(dir / "sweep.svg", render_svg(bands, {cfg.env + " size sweep", "timesteps", "episodic reward"}));
    print_table(out, t);
    return kExitOk;
}

// plot

struct PlotArgs {
    std::vector<std::string> files;
    std::vector<std::string> series;
    std::string x = "timesteps";
    std::string y = "reward";
    std::string title;
    int points = 100;
};

int cmd_plot(const PlotArgs& a, const Common& c, std::ostream& out)
{
    if (a.files.empty() && a.series.empty())
        throw ConfigError("plot: no input curves");
    if (c.output.empty())
        throw ConfigError("plot: --output is required");
    const auto load = [&](const std::string& path) {
        if (!fs::exists(path))
            throw MissingArtifactError("plot: curve not found: " + path);
        return curve_from_table(read_csv(path), a.x, a.y);
    };
    std::vector<Band> bands;
    for (const auto& f : a.files) {
        const Curve curve = load(f);
        Band b;
        b.label = fs::path(f).stem().string();
        b.x = curve.x;
        b.mean = curve.y;
        b.std.assign(curve.y.size(), 0.0);
        bands.push_back(std::move(b));
    }
    for (const auto& s : a.series) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("plot: --series expects LABEL=FILE[,FILE...], got '" + s + "'");
        std::vector<Curve> curves;
        std::stringstream ss(s.substr(eq + 1));
        std::string path;
        while (std::getline(ss, path, ','))
            if (!path.empty())
                curves.push_back(load(path));
        if (curves.empty())
            throw ConfigError("plot: series '" + s.substr(0, eq) + "' has no files");
        bands.push_back(aggregate_curves(s.substr(0, eq), curves, a.points));
    }
    write_text(c.output, render_svg(bands, {a.title, a.x, a.y}));
    out << "wrote " << c.output << '\n';
    return kExitOk;
}

// info

int cmd_info(const std::string& env_name, const std::string& checkpoint, std::ostream& out)
{
    if (!checkpoint.empty()) {
        const Checkpoint ck = load_checkpoint(checkpoint);
        out << "architecture: " << ck.arch.describe() << '\n';
        out << "mode: " << to_string(ck.mode) << '\n';
        out << "parameters: " << ck.params.size() << '\n';
        out << "normalizer: " << (ck.normalizer ? "count " + std::to_string(ck.normalizer->count()) : "none") << '\n';
        out << "meta: " << ck.meta.dump() << '\n';
        return kExitOk;
    }
    TextTable envs;
    envs.columns = {"env", "state_dim", "action_dim", "dt", "max_steps", "reward_min", "reward_max"};
    for (const auto& name : env_names()) {
        if (!env_name.empty() && name != env_name)
            continue;
        const EnvSpec s = make_env(name)->spec();
        envs.rows.push_back({name, std::to_string(s.state_dim), std::to_string(s.action_dim), format_double(s.dt),
                             std::to_string(s.max_steps), format_double(s.reward_min), format_double(s.reward_max)});
    }
    if (envs.rows.empty())
        throw ConfigError("info: unknown environment '" + env_name + "'");
    print_table(out, envs);
    out << '\n';
    TextTable presets;
    presets.columns = {"env", "preset", "mode", "architecture", "params"};
    for (const auto& row : envs.rows) {
        const int s = std::stoi(row[1]);
        const int a = std::stoi(row[2]);
        for (const char* p : {"Linear", "SCN-16", "MLP-64", "Locomotor"})
            for (TrainMode m : {TrainMode::es, TrainMode::pg}) {
                const Architecture arch = preset_architecture(p, s, a, m);
                presets.rows.push_back(
                    {row[0], p, std::string(to_string(m)), arch.describe(), std::to_string(arch.param_count())});
            }
    }
    print_table(out, presets);
    out << '\n';
    TextTable ratios;
    ratios.columns = {"dims", "state_dim", "action_dim", "SCN-16", "MLP-64", "ratio"};
    for (const auto& r : size_ratios())
        ratios.rows.push_back({r.dims.name, std::to_string(r.dims.state_dim), std::to_string(r.dims.action_dim),
                               std::to_string(r.small), std::to_string(r.large), fmt(r.ratio)});
    print_table(out, ratios);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Structured control net laboratory: train, evaluate and ablate SCN policies", "scn-lab"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--jobs", common.jobs, "worker threads for ES evaluation")->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", common.quiet, "no progress output");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a policy; writes checkpoint, curve and resolved config");
    train->add_option("config", ta.config, "experiment JSON");
    train->add_option("--env", ta.env, "environment (overrides the config)");
    train->add_option("--preset", ta.preset, "policy preset, e.g. SCN-16, MLP-64, Linear, Locomotor");
    train->add_option("--trainer", ta.trainer, "es or pg");
    train->add_option("--seed", ta.seeds, "seed(s); replaces the config's list");
    train->add_option("--generations", ta.generations, "ES generations");
    train->add_option("--timesteps", ta.timesteps, "environment step budget");
    train->add_option("-o,--output", common.output, "output directory");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("checkpoint", ea.checkpoint)->required();
    eval->add_option("--env", ea.env, "environment (default: the one recorded in the checkpoint)");
    eval->add_option("--episodes", ea.episodes, "episodes");
    eval->add_option("--seed", ea.seed, "evaluation seed");
    eval->add_option("--disable-stream", ea.disable, "linear or nonlinear");
    eval->add_option("--noise", ea.noise, "action or obs");
    eval->add_option("--sigma", ea.sigma, "noise standard deviation");
    eval->add_option("-o,--output", common.output, "stats CSV (default: next to the checkpoint)");

    std::string ablate_cfg;
    auto* ablate = app.add_subcommand("ablate", "train and evaluate the ablation variants");
    ablate->add_option("config", ablate_cfg)->required();
    ablate->add_option("-o,--output", common.output, "output directory");

    std::string rob_cfg;
    std::vector<std::string> rob_ckpts;
    auto* robust = app.add_subcommand("robustness", "noise-injection degradation table");
    robust->add_option("config", rob_cfg)->required();
    robust->add_option("--checkpoint", rob_ckpts, "LABEL=PATH, repeatable");
    robust->add_option("-o,--output", common.output, "output directory");

    std::string sweep_cfg;
    auto* sweep = app.add_subcommand("sweep", "hidden-width sweep");
    sweep->add_option("config", sweep_cfg)->required();
    sweep->add_option("-o,--output", common.output, "output directory");

    PlotArgs pa;
    auto* plot = app.add_subcommand("plot", "render curve CSVs to SVG");
    plot->add_option("files", pa.files, "curve CSVs, one line each");
    plot->add_option("--series", pa.series, "LABEL=FILE[,FILE...]: mean and std band across files");
    plot->add_option("--x", pa.x, "x column");
    plot->add_option("--y", pa.y, "y column");
    plot->add_option("--title", pa.title, "plot title");
    plot->add_option("-o,--output", common.output, "SVG path")->required();

    std::string info_env, info_ckpt;
    auto* info = app.add_subcommand("info", "environments, presets and parameter counts");
    info->add_option("--env", info_env, "restrict to one environment");
    info->add_option("--checkpoint", info_ckpt, "describe a checkpoint instead");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        if (*train)
            return cmd_train(ta, common, out, err);
        if (*eval)
            return cmd_eval(ea, common, out);
        if (*ablate)
            return cmd_ablate(ablate_cfg, common, out, err);
        if (*robust)
            return cmd_robustness(rob_cfg, rob_ckpts, common, out);
        if (*sweep)
            return cmd_sweep(sweep_cfg, common, out, err);
        if (*plot)
            return cmd_plot(pa, common, out);
        if (*info)
            return cmd_info(info_env, info_ckpt, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MissingArtifactError& e) {
        err << "error: " << e.what() << '\n';
        return kExitMissing;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace scn
