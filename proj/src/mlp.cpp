#include "scn/mlp.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace scn {

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim, bool output_bias)
    : input_dim_(input_dim), output_dim_(output_dim), hidden_(std::move(hidden)), output_bias_(output_bias)
{
    if (input_dim_ <= 0 || output_dim_ <= 0)
        throw ConfigError("mlp: input and output dimensions must be positive");
    for (int h : hidden_)
        if (h <= 0)
            throw ConfigError("mlp: hidden width must be positive, got " + std::to_string(h));

    int prev = input_dim_;
    for (int h : hidden_) {
        weights_.push_back(Mat::Zero(h, prev));
        biases_.push_back(Vec::Zero(h));
        prev = h;
    }
    weights_.push_back(Mat::Zero(output_dim_, prev));
    if (output_bias_)
        biases_.push_back(Vec::Zero(output_dim_));
}

std::size_t Mlp::param_count(int input_dim, const std::vector<int>& hidden, int output_dim, bool output_bias)
{
    std::size_t n = 0;
    std::size_t prev = static_cast<std::size_t>(input_dim);
    for (int h : hidden) {
        n += prev * h + h;
        prev = static_cast<std::size_t>(h);
    }
    n += prev * output_dim;
    if (output_bias)
        n += static_cast<std::size_t>(output_dim);
    return n;
}

std::size_t Mlp::param_count() const
{
    return param_count(input_dim_, hidden_, output_dim_, output_bias_);
}

Vec Mlp::forward(const Vec& x) const
{
    Trace unused;
    return forward(x, unused);
}

Vec Mlp::forward(const Vec& x, Trace& trace) const
{
    if (x.size() != input_dim_)
        throw ConfigError("mlp: expected input of size " + std::to_string(input_dim_) + ", got "
                          + std::to_string(x.size()));
    trace.activations.clear();
    trace.activations.reserve(hidden_.size() + 1);
    trace.activations.push_back(x);
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        Vec z = weights_[l] * trace.activations.back() + biases_[l];
        trace.activations.push_back(z.array().tanh().matrix());
    }
    Vec out = weights_.back() * trace.activations.back();
    if (output_bias_)
        out += biases_.back();
    return out;
}

Vec Mlp::backward(const Trace& trace, const Vec& upstream, std::span<double> grad) const
{
    assert(grad.size() == param_count());
    assert(trace.activations.size() == hidden_.size() + 1);

    // Offsets of each layer's block in the flat layout.
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        offsets.push_back(off);
        off += static_cast<std::size_t>(weights_[l].size());
        if (l < hidden_.size() || output_bias_)
            off += static_cast<std::size_t>(weights_[l].rows());
    }

    Vec delta = upstream;
    for (std::size_t li = weights_.size(); li-- > 0;) {
        const Mat& w = weights_[li];
        const Vec& in = trace.activations[li];
        double* g = grad.data() + offsets[li];
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(g, w.rows(), w.cols())
            .noalias() += delta * in.transpose();
        if (li < hidden_.size() || output_bias_) {
            double* gb = g + w.size();
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                gb[r] += delta[r];
        }
        Vec back = w.transpose() * delta;
        if (li > 0) {
            // in = tanh(z), dtanh = 1 - in^2
            delta = back.array() * (1.0 - in.array().square());
        } else {
            delta = back;
        }
    }
    return delta;
}

void Mlp::write_params(std::span<double> out) const
{
    assert(out.size() == param_count());
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const Mat& w = weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                out[k++] = w(r, c);
        if (l < biases_.size())
            for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
                out[k++] = biases_[l][r];
    }
}

void Mlp::read_params(std::span<const double> in)
{
    if (in.size() != param_count())
        throw ConfigError("mlp: parameter block has length " + std::to_string(in.size()) + ", expected "
                          + std::to_string(param_count()));
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Mat& w = weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = in[k++];
        if (l < biases_.size())
            for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
                biases_[l][r] = in[k++];
    }
}

}  // namespace scn
