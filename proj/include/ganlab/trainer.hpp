#pragma once

#include "ganlab/data_metrics.hpp"
#include "ganlab/gan_losses.hpp"
#include "ganlab/nets.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ganlab::train {

using ad::Matrix;

int default_n_d(losses::DObjectiveKind kind);
nets::MlpSpec default_generator_spec(int latent_dim = 2);
nets::MlpSpec default_discriminator_spec(losses::DObjectiveKind kind);

struct TrainConfig {
    losses::DObjective d_objective{};
    losses::GLossSpec g_loss{};
    int n_d = 1;
    int batch_m = 256;
    int cycles = 5000;
    double lr_d = 5e-5;
    double lr_g = 5e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    nets::MlpSpec gen_spec = default_generator_spec();
    nets::MlpSpec disc_spec = default_discriminator_spec(losses::DObjectiveKind::CrossEntropy);
    data::SwissRollConfig data{};
    int latent_dim = 2;
    std::uint64_t seed = 1;
    int eval_every = 250;
    int eval_n = 1000;

    // Throws ConfigError on any invalid field or pairing.
    void validate() const;
};

struct TracePoint {
    int cycle = 0;
    double value = 0.0;
};

struct RunResult {
    TrainConfig config;
    std::uint64_t seed = 0;
    std::vector<TracePoint> nnrmse_trace;
    double final_nnrmse = std::numeric_limits<double>::infinity();
    // D objective (without penalty) on the last D batch, right after the D
    // updates of a cycle and again right after that cycle's G update.
    std::vector<TracePoint> d_obj_after_d_step;
    std::vector<TracePoint> d_obj_after_g_step;
    bool diverged = false;
    int diverged_cycle = -1;
    std::string divergence_reason;
    double wall_time = 0.0;
    nets::MlpParams generator;
};

enum class TrainEvent { DBatchSample, DAscent, GLatentSample, GRealSample, GDescent, Evaluate };

const char* to_string(TrainEvent e);

using EventHook = std::function<void(TrainEvent, int cycle)>;

// One training run. Random numbers come from a single stream seeded with
// config.seed, consumed in this order:
//   construction: generator weights, then discriminator weights;
//   each D iteration: real batch (m draws of t), latent batch (m x latent_dim
//     normals), and for Wasserstein objectives m interpolation weights;
//   G step: latent batch, then a real batch for DM and EDM only.
// Evaluation samples come from a separate stream derived from (seed, cycle),
// so the evaluation schedule never changes the training trajectory.
class Trainer {
public:
    explicit Trainer(const TrainConfig& config);

    // One discriminator update on the given batches; returns the objective
    // (without penalty) before the update.
    double d_step(const Matrix& real, const Matrix& z);
    // One generator update. `real` is required for DM and EDM only.
    double g_step(const Matrix& z, const Matrix* real);

    double d_objective_value(const Matrix& real, const Matrix& z);

    // NNRMSE of eval_n fresh real and fake samples.
    double evaluate(int cycle) const;
    data::PointSet sample_fake(int n, Rng& rng) const;

    RunResult run(const EventHook& hook = {});

    const TrainConfig& config() const noexcept { return cfg_; }
    const nets::MlpParams& generator() const noexcept { return gen_; }
    const nets::MlpParams& discriminator() const noexcept { return disc_; }
    Rng& rng() noexcept { return rng_; }

private:
    TrainConfig cfg_;
    losses::LabelConvention labels_;
    Rng rng_;
    nets::MlpParams gen_;
    nets::MlpParams disc_;
    nets::AdamState gen_adam_;
    nets::AdamState disc_adam_;
    ad::Tape tape_;
    ad::Gradients grads_;
};

RunResult train(const TrainConfig& config, const EventHook& hook = {});

// The eval_n real and fake samples scored at `cycle`. They come from a stream
// derived from (config.seed, cycle) and are independent of training.
struct EvaluationSamples {
    data::PointSet real;
    data::PointSet fake;
};
EvaluationSamples evaluation_samples(const TrainConfig& config, const nets::MlpParams& generator, int cycle);

// Median with +inf for diverged runs; even counts average the middle pair.
double median(std::vector<double> values);

} // namespace ganlab::train
