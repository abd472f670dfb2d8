#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scn/types.hpp"

namespace scn {

/// Fully-connected network with tanh hidden layers and a linear output layer.
///
/// Parameter layout, layer by layer: weights row-major (out x in), then the
/// layer bias. Hidden layers always carry a bias; the output layer carries one
/// only when `output_bias` is set.
class Mlp {
public:
    struct Trace {
        std::vector<Vec> activations;  // [0] is the input, then each hidden tanh output
    };

    Mlp() = default;
    Mlp(int input_dim, std::vector<int> hidden, int output_dim, bool output_bias);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    const std::vector<int>& hidden() const { return hidden_; }
    bool has_output_bias() const { return output_bias_; }

    static std::size_t param_count(int input_dim, const std::vector<int>& hidden, int output_dim,
                                   bool output_bias);
    std::size_t param_count() const;

    Vec forward(const Vec& x) const;
    Vec forward(const Vec& x, Trace& trace) const;

    /// Adds d(output . upstream)/d(params) into `grad` (length param_count()).
    /// Returns d(output . upstream)/d(input).
    Vec backward(const Trace& trace, const Vec& upstream, std::span<double> grad) const;

    void write_params(std::span<double> out) const;
    void read_params(std::span<const double> in);

    std::vector<Mat>& weights() { return weights_; }
    const std::vector<Mat>& weights() const { return weights_; }
    std::vector<Vec>& biases() { return biases_; }
    const std::vector<Vec>& biases() const { return biases_; }

private:
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<int> hidden_;
    bool output_bias_ = false;
    std::vector<Mat> weights_;  // one per layer, including output
    std::vector<Vec> biases_;   // one per hidden layer, plus output when enabled
};

}  // namespace scn
