#include "scn/policy.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace scn {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

int parse_width(std::string_view name, std::string_view prefix)
{
    std::string_view digits = name.substr(prefix.size());
    int h = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), h);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || h <= 0)
        throw ConfigError("unknown policy preset '" + std::string(name) + "'");
    return h;
}

}  // namespace

std::string_view to_string(NonlinearKind k)
{
    switch (k) {
    case NonlinearKind::none: return "none";
    case NonlinearKind::mlp: return "mlp";
    case NonlinearKind::cpg: return "cpg";
    }
    return "none";
}

std::string_view to_string(TrainMode m)
{
    return m == TrainMode::es ? "es" : "pg";
}

NonlinearKind parse_nonlinear_kind(std::string_view s)
{
    if (s == "none") return NonlinearKind::none;
    if (s == "mlp") return NonlinearKind::mlp;
    if (s == "cpg") return NonlinearKind::cpg;
    throw ConfigError("unknown nonlinear stream kind '" + std::string(s) + "' (expected none, mlp or cpg)");
}

TrainMode parse_train_mode(std::string_view s)
{
    if (s == "es") return TrainMode::es;
    if (s == "pg" || s == "ppo") return TrainMode::pg;
    throw ConfigError("unknown training mode '" + std::string(s) + "' (expected es or pg)");
}

// ---------------------------------------------------------------------------
// Architecture

void Architecture::validate() const
{
    if (state_dim <= 0)
        throw ConfigError("architecture: state_dim must be positive");
    if (action_dim <= 0)
        throw ConfigError("architecture: action_dim must be positive");
    if (!linear && nonlinear == NonlinearKind::none)
        throw ConfigError("architecture: at least one stream is required");
    if (nonlinear == NonlinearKind::mlp)
        for (int h : hidden)
            if (h <= 0)
                throw ConfigError("architecture: hidden width must be positive");
    if (nonlinear == NonlinearKind::cpg && cpg_components <= 0)
        throw ConfigError("architecture: cpg_components must be positive");
}

std::size_t Architecture::param_count() const
{
    validate();
    const std::size_t s = static_cast<std::size_t>(state_dim);
    const std::size_t a = static_cast<std::size_t>(action_dim);
    std::size_t n = 0;
    if (linear)
        n += a * s + a;
    if (nonlinear == NonlinearKind::mlp)
        n += Mlp::param_count(state_dim, hidden, action_dim, false);
    if (nonlinear == NonlinearKind::cpg)
        n += 3 * a * static_cast<std::size_t>(cpg_components);
    if (gaussian_head)
        n += a;
    return n;
}

std::string Architecture::describe() const
{
    std::ostringstream os;
    os << state_dim << "->" << action_dim << " [";
    bool first = true;
    if (linear) {
        os << "linear";
        first = false;
    }
    if (nonlinear == NonlinearKind::mlp) {
        os << (first ? "" : " + ") << "mlp(";
        for (std::size_t i = 0; i < hidden.size(); ++i)
            os << (i ? "x" : "") << hidden[i];
        os << ")";
    } else if (nonlinear == NonlinearKind::cpg) {
        os << (first ? "" : " + ") << "cpg(" << cpg_components << ")";
    }
    if (gaussian_head)
        os << " | gaussian";
    os << "]";
    return os.str();
}

nlohmann::json Architecture::to_json() const
{
    nlohmann::json j;
    j["state_dim"] = state_dim;
    j["action_dim"] = action_dim;
    j["linear"] = linear;
    j["nonlinear"] = std::string(to_string(nonlinear));
    j["hidden"] = nonlinear == NonlinearKind::mlp ? hidden : std::vector<int>{};
    j["cpg_components"] = nonlinear == NonlinearKind::cpg ? cpg_components : 0;
    j["gaussian_head"] = gaussian_head;
    return j;
}

bool Architecture::operator==(const Architecture& o) const
{
    return state_dim == o.state_dim && action_dim == o.action_dim && linear == o.linear && nonlinear == o.nonlinear
           && gaussian_head == o.gaussian_head && (nonlinear != NonlinearKind::mlp || hidden == o.hidden)
           && (nonlinear != NonlinearKind::cpg || cpg_components == o.cpg_components);
}

Architecture Architecture::from_json(const nlohmann::json& j)
{
    Architecture a;
    try {
        a.state_dim = j.at("state_dim").get<int>();
        a.action_dim = j.at("action_dim").get<int>();
        a.linear = j.at("linear").get<bool>();
        a.nonlinear = parse_nonlinear_kind(j.at("nonlinear").get<std::string>());
        a.hidden = j.at("hidden").get<std::vector<int>>();
        a.cpg_components = j.at("cpg_components").get<int>();
        a.gaussian_head = j.at("gaussian_head").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("architecture: ") + e.what());
    }
    if (a.nonlinear != NonlinearKind::cpg)
        a.cpg_components = 16;
    a.validate();
    return a;
}

Architecture preset_architecture(std::string_view name, int state_dim, int action_dim, TrainMode mode)
{
    Architecture a;
    a.state_dim = state_dim;
    a.action_dim = action_dim;
    a.gaussian_head = mode == TrainMode::pg;
    if (name.starts_with("SCN-")) {
        const int h = parse_width(name, "SCN-");
        a.linear = true;
        a.nonlinear = NonlinearKind::mlp;
        a.hidden = mode == TrainMode::es ? std::vector<int>{h} : std::vector<int>{h, h};
    } else if (name.starts_with("MLP-")) {
        const int h = parse_width(name, "MLP-");
        a.linear = false;
        a.nonlinear = NonlinearKind::mlp;
        a.hidden = {h, h};
    } else if (name == "Linear") {
        a.linear = true;
        a.nonlinear = NonlinearKind::none;
        a.hidden.clear();
    } else if (name == "Locomotor") {
        a.linear = true;
        a.nonlinear = NonlinearKind::cpg;
        a.hidden.clear();
        a.cpg_components = 16;
    } else {
        throw ConfigError("unknown policy preset '" + std::string(name)
                          + "' (expected SCN-<h>, MLP-<h>, Linear or Locomotor)");
    }
    a.validate();
    return a;
}

// ---------------------------------------------------------------------------
// Streams

Vec LinearStream::forward(const Vec& s) const
{
    if (s.size() != gain.cols())
        throw ConfigError("linear stream: expected state of size " + std::to_string(gain.cols()) + ", got "
                          + std::to_string(s.size()));
    return gain * s + bias;
}

Vec CpgStream::forward(double t) const
{
    Vec out(amplitude.rows());
    for (Eigen::Index d = 0; d < amplitude.rows(); ++d) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < amplitude.cols(); ++i)
            sum += amplitude(d, i) * std::sin(frequency(d, i) * t + phase(d, i));
        out[d] = sum;
    }
    return out;
}

double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action)
{
    double lp = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double z = (action[d] - mean[d]) * std::exp(-log_std[d]);
        lp += -0.5 * z * z - log_std[d] - 0.5 * kLog2Pi;
    }
    return lp;
}

ActionSample sample_action_with_noise(const Vec& mean, const GaussianHead& head, const Vec& noise)
{
    ActionSample out;
    out.action = mean + (head.log_std.array().exp() * noise.array()).matrix();
    out.log_prob = gaussian_log_prob(mean, head.log_std, out.action);
    return out;
}

ActionSample sample_action(const Vec& mean, const GaussianHead& head, Rng& rng)
{
    return sample_action_with_noise(mean, head, standard_normal(rng, mean.size()));
}

// ---------------------------------------------------------------------------
// StructuredPolicy

StructuredPolicy::StructuredPolicy(Architecture arch) : arch_(std::move(arch))
{
    arch_.validate();
    param_count_ = arch_.param_count();
    const int s = arch_.state_dim;
    const int a = arch_.action_dim;
    if (arch_.linear)
        linear_ = LinearStream{Mat::Zero(a, s), Vec::Zero(a)};
    if (arch_.nonlinear == NonlinearKind::mlp)
        nonlinear_ = MlpStream{Mlp(s, arch_.hidden, a, false)};
    else if (arch_.nonlinear == NonlinearKind::cpg) {
        const int c = arch_.cpg_components;
        nonlinear_ = CpgStream{Mat::Zero(a, c), Mat::Zero(a, c), Mat::Zero(a, c)};
    }
    if (arch_.gaussian_head)
        head_ = GaussianHead{Vec::Zero(a)};
}

StructuredPolicy::StructuredPolicy(Architecture arch, std::span<const double> params)
    : StructuredPolicy(std::move(arch))
{
    set_params(params);
}

std::size_t StructuredPolicy::head_offset() const
{
    return param_count_ - (head_ ? static_cast<std::size_t>(arch_.action_dim) : 0);
}

ParamVector StructuredPolicy::params() const
{
    ParamVector v(static_cast<Eigen::Index>(param_count_));
    std::size_t k = 0;
    if (linear_) {
        const Mat& g = linear_->gain;
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                v[k++] = g(r, c);
        for (Eigen::Index r = 0; r < linear_->bias.size(); ++r)
            v[k++] = linear_->bias[r];
    }
    if (const auto* m = mlp()) {
        const std::size_t n = m->net.param_count();
        m->net.write_params(std::span<double>(v.data() + k, n));
        k += n;
    }
    if (const auto* c = cpg()) {
        for (Eigen::Index d = 0; d < c->amplitude.rows(); ++d) {
            for (Eigen::Index i = 0; i < c->amplitude.cols(); ++i) v[k++] = c->amplitude(d, i);
            for (Eigen::Index i = 0; i < c->frequency.cols(); ++i) v[k++] = c->frequency(d, i);
            for (Eigen::Index i = 0; i < c->phase.cols(); ++i) v[k++] = c->phase(d, i);
        }
    }
    if (head_)
        for (Eigen::Index d = 0; d < head_->log_std.size(); ++d)
            v[k++] = head_->log_std[d];
    return v;
}

void StructuredPolicy::set_params(std::span<const double> v)
{
    if (v.size() != param_count_)
        throw ConfigError("parameter vector has length " + std::to_string(v.size()) + ", architecture "
                          + arch_.describe() + " expects " + std::to_string(param_count_));
    std::size_t k = 0;
    if (linear_) {
        Mat& g = linear_->gain;
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                g(r, c) = v[k++];
        for (Eigen::Index r = 0; r < linear_->bias.size(); ++r)
            linear_->bias[r] = v[k++];
    }
    if (auto* m = mlp()) {
        const std::size_t n = m->net.param_count();
        m->net.read_params(v.subspan(k, n));
        k += n;
    }
    if (auto* c = cpg()) {
        for (Eigen::Index d = 0; d < c->amplitude.rows(); ++d) {
            for (Eigen::Index i = 0; i < c->amplitude.cols(); ++i) c->amplitude(d, i) = v[k++];
            for (Eigen::Index i = 0; i < c->frequency.cols(); ++i) c->frequency(d, i) = v[k++];
            for (Eigen::Index i = 0; i < c->phase.cols(); ++i) c->phase(d, i) = v[k++];
        }
    }
    if (head_)
        for (Eigen::Index d = 0; d < head_->log_std.size(); ++d)
            head_->log_std[d] = v[k++];
}

void StructuredPolicy::check_state(const Vec& s) const
{
    if (s.size() != arch_.state_dim)
        throw ConfigError("policy: expected state of size " + std::to_string(arch_.state_dim) + ", got "
                          + std::to_string(s.size()));
}

PolicyOutput StructuredPolicy::forward(const Vec& s, double t, StreamMask mask) const
{
    check_state(s);
    const Eigen::Index a = arch_.action_dim;
    PolicyOutput out;
    const bool use_linear = linear_ && mask.linear;
    const bool use_nonlinear = !std::holds_alternative<std::monostate>(nonlinear_) && mask.nonlinear;

    out.linear = use_linear ? linear_->forward(s) : Vec::Zero(a);
    if (use_nonlinear) {
        if (const auto* m = mlp())
            out.nonlinear = m->forward(s);
        else
            out.nonlinear = cpg()->forward(t);
    } else {
        out.nonlinear = Vec::Zero(a);
    }

    // A disabled stream contributes nothing, so the mean is the other stream's
    // output untouched.
    if (use_linear && use_nonlinear)
        out.mean = out.linear + out.nonlinear;
    else if (use_linear)
        out.mean = out.linear;
    else
        out.mean = out.nonlinear;
    return out;
}

ParamVector StructuredPolicy::backprop(const Vec& s, double t, const Vec& upstream, StreamMask mask) const
{
    check_state(s);
    if (upstream.size() != arch_.action_dim)
        throw ConfigError("policy: upstream gradient has wrong size");
    ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(param_count_));
    std::size_t k = 0;
    if (linear_) {
        const Eigen::Index rows = linear_->gain.rows();
        const Eigen::Index cols = linear_->gain.cols();
        if (mask.linear) {
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    grad[static_cast<Eigen::Index>(k) + r * cols + c] = upstream[r] * s[c];
            for (Eigen::Index r = 0; r < rows; ++r)
                grad[static_cast<Eigen::Index>(k) + rows * cols + r] = upstream[r];
        }
        k += static_cast<std::size_t>(rows * cols + rows);
    }
    if (const auto* m = mlp()) {
        const std::size_t n = m->net.param_count();
        if (mask.nonlinear) {
            Mlp::Trace trace;
            m->net.forward(s, trace);
            m->net.backward(trace, upstream, std::span<double>(grad.data() + k, n));
        }
        k += n;
    }
    if (const auto* c = cpg()) {
        const Eigen::Index comps = c->amplitude.cols();
        for (Eigen::Index d = 0; d < c->amplitude.rows(); ++d) {
            const Eigen::Index base = static_cast<Eigen::Index>(k) + d * 3 * comps;
            if (mask.nonlinear) {
                for (Eigen::Index i = 0; i < comps; ++i) {
                    const double arg = c->frequency(d, i) * t + c->phase(d, i);
                    const double sn = std::sin(arg);
                    const double cs = std::cos(arg);
                    grad[base + i] = upstream[d] * sn;
                    grad[base + comps + i] = upstream[d] * c->amplitude(d, i) * cs * t;
                    grad[base + 2 * comps + i] = upstream[d] * c->amplitude(d, i) * cs;
                }
            }
        }
        k += static_cast<std::size_t>(3 * comps * c->amplitude.rows());
    }
    return grad;
}

ParamVector StructuredPolicy::log_prob_grad(const Vec& s, double t, const Vec& action, StreamMask mask) const
{
    if (!head_)
        throw UsageError("log_prob_grad requires a Gaussian head");
    const Vec mean = mean_action(s, t, mask);
    const Vec inv_var = (-2.0 * head_->log_std.array()).exp().matrix();
    const Vec diff = action - mean;
    // d/dmean = (a - mu) / sigma^2 ; d/dlog_std = (a - mu)^2 / sigma^2 - 1
    ParamVector grad = backprop(s, t, (diff.array() * inv_var.array()).matrix(), mask);
    const std::size_t off = head_offset();
    for (Eigen::Index d = 0; d < diff.size(); ++d)
        grad[static_cast<Eigen::Index>(off) + d] = diff[d] * diff[d] * inv_var[d] - 1.0;
    return grad;
}

ParamVector flatten(const StructuredPolicy& p)
{
    return p.params();
}

StructuredPolicy unflatten(const ParamVector& v, const Architecture& arch)
{
    return StructuredPolicy(arch, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

ParamVector init_params(const Architecture& arch, TrainMode mode, Rng& rng)
{
    StructuredPolicy p(arch);
    if (auto* c = p.cpg()) {
        for (Eigen::Index d = 0; d < c->frequency.rows(); ++d)
            for (Eigen::Index i = 0; i < c->frequency.cols(); ++i) {
                c->frequency(d, i) = uniform(rng, 0.5, 2.0);
                c->phase(d, i) = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            }
    }
    if (mode == TrainMode::pg) {
        auto fill = [&rng](Mat& w, double scale) {
            const double bound = std::sqrt(3.0 / static_cast<double>(w.cols()));
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c)
                    w(r, c) = scale * uniform(rng, -bound, bound);
        };
        if (auto& lin = p.linear())
            fill(lin->gain, 0.01);
        if (auto* m = p.mlp()) {
            auto& ws = m->net.weights();
            for (std::size_t l = 0; l < ws.size(); ++l)
                fill(ws[l], l + 1 == ws.size() ? 0.01 : 1.0);
        }
    }
    return p.params();
}

}  // namespace scn
