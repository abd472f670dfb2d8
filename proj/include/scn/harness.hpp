#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scn/aggregate.hpp"
#include "scn/checkpoint.hpp"
#include "scn/csv.hpp"
#include "scn/envs.hpp"
#include "scn/es.hpp"
#include "scn/ppo.hpp"
#include "scn/rollout.hpp"

namespace scn {

enum class TrainerKind { es, pg };

std::string_view to_string(TrainerKind k);
TrainerKind parse_trainer_kind(std::string_view s);  // "es", "pg" or "ppo"
TrainMode train_mode(TrainerKind k);

/// Everything needed to train one policy, except the seed.
struct TrainSpec {
    std::string env;
    nlohmann::json env_overrides = nlohmann::json::object();
    Architecture arch;
    TrainerKind trainer = TrainerKind::es;
    EsConfig es;
    PgConfig pg;

    EnvFactory factory() const { return env_factory(env, env_overrides); }
    TrainSpec with_arch(Architecture a) const;
};

struct RunResult {
    TrainedPolicy trained;
    TrainMode mode = TrainMode::es;
    CsvTable curve;     // includes "timesteps" and "reward" columns
    CsvTable timing;    // wall-clock per curve row, kept apart so curves are reproducible
    CsvTable episodes;  // timesteps, reward
    double final_reward = 0.0;    // mean of the last 100 logged episodes
    double average_reward = 0.0;  // mean of every logged episode
};

/// ES logs unperturbed-center evaluation episodes; PPO logs its training episodes.
RunResult train_run(const TrainSpec& spec, std::uint64_t seed, const std::function<void(const std::string&)>& log = {});

CsvTable es_curve_table(const std::vector<EsRecord>& curve);
CsvTable pg_curve_table(const std::vector<PgRecord>& curve);
CsvTable episodes_table(const std::vector<EpisodeRecord>& episodes);

double final_reward(const std::vector<double>& episode_rewards, std::size_t last = 100);

/// Writes <stem>.ckpt, <stem>.csv, <stem>.episodes.csv and <stem>.timing.csv.
void save_run(const std::filesystem::path& stem, const RunResult& r, const nlohmann::json& meta);

struct EvalStats {
    std::vector<double> rewards;
    double mean = 0.0;
    double std = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
};

EvalStats summarize_rewards(std::vector<double> rewards);

/// Seed of evaluation episode `episode` for run seed `seed`; shared by every
/// variant so comparisons are paired.
std::uint64_t eval_seed(std::uint64_t seed, int episode);

EvalStats evaluate_actor(const Actor& actor, const EnvFactory& make_env, int episodes, std::uint64_t seed,
                         const InjectedNoise& noise = {});
EvalStats evaluate_random(const EnvFactory& make_env, int episodes, std::uint64_t seed);

/// Acts with the sum of both policies' actions (each with its own normalizer).
Actor sum_actor(const TrainedPolicy& a, const TrainedPolicy& b);

// Ablation

enum class Variant { SCN, LinearOnly, MlpOnly, SCN_L, SCN_N, PseudoSCN };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
bool is_trained(Variant v);
/// LinearOnly drops the nonlinear stream, MlpOnly drops the linear stream.
Architecture variant_architecture(const Architecture& base, Variant v);

struct AblationSpec {
    std::vector<Variant> variants{Variant::SCN, Variant::LinearOnly, Variant::MlpOnly,
                                  Variant::SCN_L, Variant::SCN_N, Variant::PseudoSCN};
    TrainSpec base;  // base.arch is the SCN architecture
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int eval_episodes = 100;
    std::filesystem::path output_dir;  // checkpoints live in <output_dir>/<variant>/seed<k>.ckpt

    void validate() const;
};

struct VariantRun {
    Variant variant = Variant::SCN;
    std::uint64_t seed = 0;
    EvalStats eval;  // post-training evaluation on eval_seed(seed, .)
    std::optional<double> final_reward;    // trained variants only
    std::optional<double> average_reward;  // trained variants only
    std::optional<Curve> curve;            // trained variants only
};

struct AblationResult {
    std::string env;
    std::vector<VariantRun> runs;
    std::vector<EvalStats> random;  // per seed, on the same evaluation seeds

    std::vector<double> values(Variant v, bool use_final_reward) const;
    double eval_mean(Variant v) const;  // mean over seeds of the evaluation means
    double random_mean() const;
    TextTable table() const;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Variant v, std::uint64_t seed);

/// Trains the trained variants in the list, then evaluates every variant. SCN_L,
/// SCN_N and PseudoSCN load their prerequisites from disk and throw
/// MissingArtifactError naming the missing file.
AblationResult run_ablation(const AblationSpec& spec, const std::function<void(const std::string&)>& log = {});

/// Baseline-shifted fractions of full-SCN performance, per environment, as the
/// mean of the per-environment ratios, and pooled over environments.
struct IsolationReport {
    struct Row {
        std::string env;
        Variant variant;
        double ratio;
    };
    std::vector<Row> per_env;
    std::vector<std::pair<Variant, double>> mean_of_envs;
    std::vector<std::pair<Variant, double>> pooled;

    TextTable table() const;
};

IsolationReport isolation_report(const std::vector<AblationResult>& results);

// Robustness

struct RobustnessSpec {
    NoiseTarget target = NoiseTarget::action;
    std::vector<double> sigma_levels{0.0, 0.05, 0.1, 0.25, 0.5};
    int episodes_per_level = 10;
    bool relative_to_action_range = false;  // action noise: sigma = level * (high - low)
    std::uint64_t seed = 1;

    void validate() const;
};

struct RobustnessRow {
    double level = 0.0;
    double sigma = 0.0;
    EvalStats stats;
    double degradation_pct = 0.0;
};

struct RobustnessResult {
    double reference = 0.0;  // sigma = 0
    double random = 0.0;
    std::vector<RobustnessRow> rows;

    TextTable table() const;
};

/// Percent degradation = (R0 - R_sigma) / (R0 - R_random) * 100.
RobustnessResult run_robustness(const TrainedPolicy& policy, const EnvFactory& make_env, const RobustnessSpec& spec);

// Size sweep

struct SweepSpec {
    std::string family = "SCN";  // preset family: SCN or MLP
    std::vector<int> widths{64, 32, 16, 8, 4};
    TrainSpec base;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::filesystem::path output_dir;

    void validate() const;
};

struct SweepRow {
    int width = 0;
    Architecture arch;
    std::size_t param_count = 0;
    std::vector<double> final_rewards;
    std::vector<double> average_rewards;
    std::vector<Curve> curves;
};

std::vector<SweepRow> run_size_sweep(const SweepSpec& spec, const std::function<void(const std::string&)>& log = {});
TextTable sweep_table(const std::vector<SweepRow>& rows);

struct DimPair {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
};

/// Built-in environments followed by the usual MuJoCo locomotion dimensions.
std::vector<DimPair> preset_dim_pairs();

struct SizeRatio {
    DimPair dims;
    std::size_t small = 0;
    std::size_t large = 0;
    double ratio = 0.0;
};

/// Parameter count of `small` over `large` (ES presets) for every preset dim pair.
std::vector<SizeRatio> size_ratios(std::string_view small = "SCN-16", std::string_view large = "MLP-64");

}  // namespace scn
