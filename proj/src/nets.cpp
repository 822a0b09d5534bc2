#include "ganlab/nets.hpp"

#include "ganlab/errors.hpp"

#include <cmath>
#include <string>

namespace ganlab::nets {

void MlpSpec::validate() const
{
    if (in_dim < 1 || out_dim < 1)
        throw ConfigError("mlp spec: in_dim and out_dim must be >= 1");
    for (int h : hidden_dims)
        if (h < 1)
            throw ConfigError("mlp spec: hidden dims must be >= 1");
    if (!std::isfinite(leaky_slope))
        throw ConfigError("mlp spec: leaky_slope must be finite");
}

int MlpSpec::fan_in(int layer) const { return layer == 0 ? in_dim : hidden_dims[layer - 1]; }

int MlpSpec::fan_out(int layer) const { return layer == kLayers - 1 ? out_dim : hidden_dims[layer]; }

MlpParams MlpParams::zeros_like(const MlpParams& other)
{
    MlpParams z;
    for (int l = 0; l < kLayers; ++l) {
        z.weights[l].setZero(other.weights[l].rows(), other.weights[l].cols());
        z.biases[l].setZero(other.biases[l].rows(), other.biases[l].cols());
    }
    return z;
}

std::string MlpParams::name_of(int layer, bool bias)
{
    return (bias ? "bias[" : "weight[") + std::to_string(layer) + "]";
}

AdamState AdamState::fresh(const MlpParams& params)
{
    return AdamState{MlpParams::zeros_like(params), MlpParams::zeros_like(params), 0};
}

MlpParams build_mlp(const MlpSpec& spec, Rng& rng)
{
    spec.validate();
    MlpParams p;
    for (int l = 0; l < kLayers; ++l) {
        const int in = spec.fan_in(l);
        const int out = spec.fan_out(l);
        const double bound = std::sqrt(1.0 / in);
        std::uniform_real_distribution<double> unif(-bound, bound);
        p.weights[l].resize(in, out);
        for (Eigen::Index i = 0; i < p.weights[l].size(); ++i)
            p.weights[l].data()[i] = unif(rng);
        p.biases[l].setZero(1, out);
    }
    return p;
}

MlpNodes bind(ad::Tape& tape, const MlpParams& params, bool trainable)
{
    MlpNodes n;
    for (int l = 0; l < kLayers; ++l) {
        n.weights[l] = trainable ? tape.variable(params.weights[l]) : tape.constant(params.weights[l]);
        n.biases[l] = trainable ? tape.variable(params.biases[l]) : tape.constant(params.biases[l]);
    }
    return n;
}

Tensor mlp_forward(const MlpNodes& params, const Tensor& x, const MlpSpec& spec)
{
    if (x.cols() != spec.in_dim)
        throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, expected "
                         + std::to_string(spec.in_dim));
    Tensor h = x;
    for (int l = 0; l < kLayers; ++l) {
        h = ad::add(ad::matmul(h, params.weights[l]), params.biases[l]);
        if (l + 1 < kLayers)
            h = ad::leaky_relu(h, spec.leaky_slope);
    }
    return spec.final_sigmoid ? ad::sigmoid(h) : h;
}

Matrix mlp_apply(const MlpParams& params, const Matrix& x, const MlpSpec& spec)
{
    if (x.cols() != spec.in_dim)
        throw ShapeError("mlp_apply: input has " + std::to_string(x.cols()) + " columns, expected "
                         + std::to_string(spec.in_dim));
    Matrix h = x;
    for (int l = 0; l < kLayers; ++l) {
        Matrix next = h * params.weights[l];
        next.rowwise() += params.biases[l].row(0);
        if (l + 1 < kLayers)
            next = ad::leaky_relu_value(next, spec.leaky_slope);
        h = std::move(next);
    }
    if (spec.final_sigmoid)
        h = (1.0 / (1.0 + (-h.array()).exp())).matrix();
    return h;
}

MlpParams gradients_of(const ad::Gradients& grads, const MlpNodes& nodes)
{
    MlpParams g;
    for (int l = 0; l < kLayers; ++l) {
        g.weights[l] = grads[nodes.weights[l]];
        g.biases[l] = grads[nodes.biases[l]];
    }
    return g;
}

namespace {

void check_finite(const Matrix& g, const Matrix& p, int layer, bool bias)
{
    if (g.rows() != p.rows() || g.cols() != p.cols())
        throw ShapeError("adam_step: gradient shape mismatch for " + MlpParams::name_of(layer, bias));
    if (!g.allFinite())
        throw NonFiniteError("adam_step: non-finite gradient for " + MlpParams::name_of(layer, bias),
                             MlpParams::name_of(layer, bias));
}

void update(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, const AdamConfig& cfg, double c1, double c2)
{
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    p.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
}

} // namespace

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& cfg)
{
    if (!(cfg.lr > 0.0))
        throw ConfigError("adam_step: lr must be positive");
    for (int l = 0; l < kLayers; ++l) {
        check_finite(grads.weights[l], params.weights[l], l, false);
        check_finite(grads.biases[l], params.biases[l], l, true);
    }

    state.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (int l = 0; l < kLayers; ++l) {
        update(params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l], cfg, c1, c2);
        update(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l], cfg, c1, c2);
    }
}

Matrix sample_z(int m, int dim, Rng& rng)
{
    if (m < 1 || dim < 1)
        throw ConfigError("sample_z: m and dim must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(m, dim);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z.data()[i] = normal(rng);
    return z;
}

} // namespace ganlab::nets
