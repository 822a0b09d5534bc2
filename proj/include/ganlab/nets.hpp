#pragma once

#include "ganlab/autodiff.hpp"
#include "ganlab/random.hpp"

#include <array>
#include <string>

namespace ganlab::nets {

using ad::Matrix;
using ad::Tensor;

inline constexpr int kLayers = 4;

// in_dim -> h1 -> h2 -> h3 -> out_dim; leaky ReLU after the three hidden
// linear layers, optional sigmoid after the last one.
struct MlpSpec {
    int in_dim = 2;
    std::array<int, 3> hidden_dims{128, 128, 128};
    int out_dim = 1;
    bool final_sigmoid = false;
    double leaky_slope = 0.2;

    void validate() const;
    int fan_in(int layer) const;
    int fan_out(int layer) const;
};

// weights[l] is fan_in x fan_out (inputs are row vectors); biases[l] is 1 x fan_out.
struct MlpParams {
    std::array<Matrix, kLayers> weights;
    std::array<Matrix, kLayers> biases;

    static MlpParams zeros_like(const MlpParams& other);
    static std::string name_of(int layer, bool bias);
};

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    MlpParams m;
    MlpParams v;
    long long t = 0;

    static AdamState fresh(const MlpParams& params);
};

// Tape handles for one network's parameters.
struct MlpNodes {
    std::array<Tensor, kLayers> weights;
    std::array<Tensor, kLayers> biases;
};

// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero. Draws layer by
// layer, row-major within each weight matrix.
MlpParams build_mlp(const MlpSpec& spec, Rng& rng);

// Registers params on the tape, as variables when trainable, otherwise as constants.
MlpNodes bind(ad::Tape& tape, const MlpParams& params, bool trainable);

Tensor mlp_forward(const MlpNodes& params, const Tensor& x, const MlpSpec& spec);

// Same computation without a tape, for evaluation and plotting.
Matrix mlp_apply(const MlpParams& params, const Matrix& x, const MlpSpec& spec);

MlpParams gradients_of(const ad::Gradients& grads, const MlpNodes& nodes);

// Bias-corrected Adam. Throws NonFiniteError naming the offending parameter
// before touching any state.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& cfg);

// m x dim i.i.d. standard normal, row-major draw order.
Matrix sample_z(int m, int dim, Rng& rng);

} // namespace ganlab::nets
