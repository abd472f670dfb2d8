#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scn/mlp.hpp"
#include "scn/rng.hpp"
#include "scn/types.hpp"

namespace scn {

enum class NonlinearKind { none, mlp, cpg };
enum class TrainMode { es, pg };

std::string_view to_string(NonlinearKind k);
std::string_view to_string(TrainMode m);
NonlinearKind parse_nonlinear_kind(std::string_view s);
TrainMode parse_train_mode(std::string_view s);

/// Architecture description. The parameter layout is a pure function of it.
struct Architecture {
    int state_dim = 0;
    int action_dim = 0;
    bool linear = true;
    NonlinearKind nonlinear = NonlinearKind::mlp;
    std::vector<int> hidden{16};  // MLP stream only
    int cpg_components = 16;      // CPG stream only
    bool gaussian_head = false;

    /// Throws ConfigError for degenerate shapes or an architecture with no stream.
    void validate() const;
    std::size_t param_count() const;
    std::string describe() const;

    nlohmann::json to_json() const;
    static Architecture from_json(const nlohmann::json& j);

    /// Fields of an absent stream (hidden widths of a CPG, say) do not take part.
    bool operator==(const Architecture& o) const;
};

/// Named presets: "SCN-<h>", "MLP-<h>", "Linear", "Locomotor" (linear + CPG, c = 16).
///
/// SCN-h uses one hidden layer of width h in ES mode and two in PG mode. MLP-h is
/// the baseline MLP and always has two hidden layers. PG mode attaches the
/// Gaussian head.
Architecture preset_architecture(std::string_view name, int state_dim, int action_dim, TrainMode mode);

/// u_l = K s + b.
struct LinearStream {
    Mat gain;  // action_dim x state_dim
    Vec bias;  // action_dim

    Vec forward(const Vec& s) const;
};

/// tanh MLP without an output bias.
struct MlpStream {
    Mlp net;

    Vec forward(const Vec& s) const { return net.forward(s); }
};

/// Per action dimension d: sum_i A[d,i] sin(w[d,i] t + phi[d,i]).
struct CpgStream {
    Mat amplitude;  // action_dim x components
    Mat frequency;  // rad/s
    Mat phase;      // rad

    Vec forward(double t) const;
};

struct GaussianHead {
    Vec log_std;
};

struct StreamMask {
    bool linear = true;
    bool nonlinear = true;

    bool operator==(const StreamMask&) const = default;
};

/// Mean action together with the per-stream contributions (after masking).
struct PolicyOutput {
    Vec mean;
    Vec linear;
    Vec nonlinear;
};

struct ActionSample {
    Vec action;
    double log_prob = 0.0;
};

/// Diagonal Gaussian log density of `action` under N(mean, exp(log_std)^2).
double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action);

/// action = mean + exp(log_std) * noise.
ActionSample sample_action_with_noise(const Vec& mean, const GaussianHead& head, const Vec& noise);
ActionSample sample_action(const Vec& mean, const GaussianHead& head, Rng& rng);

/// Additive composition of a linear stream and a nonlinear (MLP or CPG) stream,
/// with an optional Gaussian head for policy-gradient training.
///
/// Canonical parameter layout: K row-major then b; MLP layers in order (weights
/// row-major, then hidden bias; output layer has weights only); CPG per action
/// dimension A then w then phi; log_std last.
///
/// Forward and backprop are const and safe to call concurrently. set_params must
/// not race with them.
class StructuredPolicy {
public:
    explicit StructuredPolicy(Architecture arch);
    StructuredPolicy(Architecture arch, std::span<const double> params);

    const Architecture& arch() const { return arch_; }
    std::size_t param_count() const { return param_count_; }

    ParamVector params() const;
    void set_params(std::span<const double> params);
    void set_params(const ParamVector& params) { set_params(std::span<const double>(params.data(), params.size())); }

    PolicyOutput forward(const Vec& s, double t, StreamMask mask = {}) const;
    Vec mean_action(const Vec& s, double t, StreamMask mask = {}) const { return forward(s, t, mask).mean; }

    /// Exact gradient of (mean_action . upstream) w.r.t. every parameter, in
    /// canonical order. Head entries are zero.
    ParamVector backprop(const Vec& s, double t, const Vec& upstream, StreamMask mask = {}) const;

    /// Gradient of log pi(action | s) w.r.t. every parameter, including log_std.
    /// Requires the Gaussian head.
    ParamVector log_prob_grad(const Vec& s, double t, const Vec& action, StreamMask mask = {}) const;

    const std::optional<LinearStream>& linear() const { return linear_; }
    std::optional<LinearStream>& linear() { return linear_; }
    const MlpStream* mlp() const { return std::get_if<MlpStream>(&nonlinear_); }
    MlpStream* mlp() { return std::get_if<MlpStream>(&nonlinear_); }
    const CpgStream* cpg() const { return std::get_if<CpgStream>(&nonlinear_); }
    CpgStream* cpg() { return std::get_if<CpgStream>(&nonlinear_); }
    const std::optional<GaussianHead>& head() const { return head_; }
    std::optional<GaussianHead>& head() { return head_; }

    /// Offset of the log_std block (== param_count() - action_dim when a head exists).
    std::size_t head_offset() const;

private:
    void check_state(const Vec& s) const;

    Architecture arch_;
    std::size_t param_count_ = 0;
    std::optional<LinearStream> linear_;
    std::variant<std::monostate, MlpStream, CpgStream> nonlinear_;
    std::optional<GaussianHead> head_;
};

/// Canonical flatten / unflatten.
ParamVector flatten(const StructuredPolicy& p);
StructuredPolicy unflatten(const ParamVector& v, const Architecture& arch);

/// ES: all zero except CPG w ~ U[0.5, 2] and phi ~ U[0, 2pi).
/// PG: fan-in scaled uniform hidden weights, output weights and K scaled by
/// 0.01, zero biases, zero amplitudes, log_std = 0.
ParamVector init_params(const Architecture& arch, TrainMode mode, Rng& rng);

}  // namespace scn
