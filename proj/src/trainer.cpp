#include "ganlab/trainer.hpp"

#include "ganlab/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace ganlab::train {

using losses::DObjectiveKind;

int default_n_d(DObjectiveKind kind) { return kind == DObjectiveKind::WassersteinGP ? 10 : 1; }

nets::MlpSpec default_generator_spec(int latent_dim)
{
    return nets::MlpSpec{latent_dim, {128, 128, 128}, 2, false, 0.2};
}

nets::MlpSpec default_discriminator_spec(DObjectiveKind kind)
{
    return nets::MlpSpec{2, {128, 128, 128}, 1, kind == DObjectiveKind::CrossEntropy, 0.2};
}

void TrainConfig::validate() const
{
    losses::validate_pairing(g_loss, d_objective);
    if (n_d < 1)
        throw ConfigError("n_d must be >= 1");
    if (batch_m < 1)
        throw ConfigError("batch_m must be >= 1");
    if (cycles < 1)
        throw ConfigError("cycles must be >= 1");
    if (!(lr_d > 0.0) || !(lr_g > 0.0))
        throw ConfigError("learning rates must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    if (!(adam_eps > 0.0))
        throw ConfigError("adam_eps must be positive");
    if (latent_dim < 1)
        throw ConfigError("latent_dim must be >= 1");
    if (eval_every < 1 || eval_n < 1)
        throw ConfigError("eval_every and eval_n must be >= 1");
    gen_spec.validate();
    disc_spec.validate();
    data.validate();
    if (gen_spec.in_dim != latent_dim || gen_spec.out_dim != 2)
        throw ConfigError("gen_spec must map latent_dim inputs to 2 outputs");
    if (gen_spec.final_sigmoid)
        throw ConfigError("gen_spec.final_sigmoid must be false for swiss-roll data");
    if (disc_spec.in_dim != 2 || disc_spec.out_dim != 1)
        throw ConfigError("disc_spec must map 2 inputs to 1 output");
    if (disc_spec.final_sigmoid != (d_objective.kind == DObjectiveKind::CrossEntropy))
        throw ConfigError("disc_spec.final_sigmoid must be true exactly for the cross_entropy objective");
}

const char* to_string(TrainEvent e)
{
    switch (e) {
    case TrainEvent::DBatchSample: return "d_batch_sample";
    case TrainEvent::DAscent: return "d_ascent";
    case TrainEvent::GLatentSample: return "g_latent_sample";
    case TrainEvent::GRealSample: return "g_real_sample";
    case TrainEvent::GDescent: return "g_descent";
    case TrainEvent::Evaluate: return "evaluate";
    }
    return "?";
}

namespace {

double checked(double v, const char* what)
{
    if (!std::isfinite(v))
        throw NonFiniteError(std::string(what) + " is not finite", what);
    return v;
}

Rng evaluation_stream(std::uint64_t seed, int cycle)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(cycle), 0xe7a1u};
    return Rng(seq);
}

} // namespace

Trainer::Trainer(const TrainConfig& config)
  : cfg_(config)
{
    cfg_.validate();
    labels_ = losses::labels_for(cfg_.d_objective);
    rng_.seed(cfg_.seed);
    gen_ = nets::build_mlp(cfg_.gen_spec, rng_);
    disc_ = nets::build_mlp(cfg_.disc_spec, rng_);
    gen_adam_ = nets::AdamState::fresh(gen_);
    disc_adam_ = nets::AdamState::fresh(disc_);
}

double Trainer::d_step(const Matrix& real, const Matrix& z)
{
    tape_.clear();
    const nets::MlpNodes d = nets::bind(tape_, disc_, true);
    const Matrix fake = nets::mlp_apply(gen_, z, cfg_.gen_spec);
    const ad::Tensor d_real = nets::mlp_forward(d, tape_.constant(real), cfg_.disc_spec);
    const ad::Tensor d_fake = nets::mlp_forward(d, tape_.constant(fake), cfg_.disc_spec);
    const ad::Tensor objective = losses::d_objective(cfg_.d_objective, d_real, d_fake);
    const double value = checked(objective.item(), "d_objective");

    ad::Tensor loss = ad::neg(objective);
    if (cfg_.d_objective.kind == DObjectiveKind::WassersteinGP) {
        loss = ad::add(loss, losses::gradient_penalty(tape_, d, cfg_.disc_spec, real, fake, rng_,
                                                      cfg_.d_objective.lambda, cfg_.d_objective.sided));
        checked(loss.item(), "d_loss");
    }
    tape_.backward(loss, grads_);
    nets::adam_step(disc_, nets::gradients_of(grads_, d), disc_adam_,
                    {cfg_.lr_d, cfg_.beta1, cfg_.beta2, cfg_.adam_eps});
    return value;
}

double Trainer::g_step(const Matrix& z, const Matrix* real)
{
    if (cfg_.g_loss.needs_real() && real == nullptr)
        throw ConfigError("g_step: " + losses::to_string(cfg_.g_loss.family) + " needs a real batch");
    tape_.clear();
    const nets::MlpNodes g = nets::bind(tape_, gen_, true);
    const nets::MlpNodes d = nets::bind(tape_, disc_, false);
    const ad::Tensor fake = nets::mlp_forward(g, tape_.constant(z), cfg_.gen_spec);
    const ad::Tensor d_fake = nets::mlp_forward(d, fake, cfg_.disc_spec);
    std::optional<ad::Tensor> d_real;
    if (cfg_.g_loss.needs_real())
        d_real = tape_.constant(nets::mlp_apply(disc_, *real, cfg_.disc_spec));
    const ad::Tensor loss = losses::g_loss(cfg_.g_loss, labels_, d_fake, d_real);
    const double value = checked(loss.item(), "g_loss");

    tape_.backward(loss, grads_);
    nets::adam_step(gen_, nets::gradients_of(grads_, g), gen_adam_, {cfg_.lr_g, cfg_.beta1, cfg_.beta2, cfg_.adam_eps});
    return value;
}

double Trainer::d_objective_value(const Matrix& real, const Matrix& z)
{
    tape_.clear();
    const nets::MlpNodes d = nets::bind(tape_, disc_, false);
    const Matrix fake = nets::mlp_apply(gen_, z, cfg_.gen_spec);
    const ad::Tensor d_real = nets::mlp_forward(d, tape_.constant(real), cfg_.disc_spec);
    const ad::Tensor d_fake = nets::mlp_forward(d, tape_.constant(fake), cfg_.disc_spec);
    return losses::d_objective(cfg_.d_objective, d_real, d_fake).item();
}

data::PointSet Trainer::sample_fake(int n, Rng& rng) const
{
    return data::PointSet(nets::mlp_apply(gen_, nets::sample_z(n, cfg_.latent_dim, rng), cfg_.gen_spec));
}

double Trainer::evaluate(int cycle) const
{
    const EvaluationSamples s = evaluation_samples(cfg_, gen_, cycle);
    return data::nnrmse(s.real, s.fake);
}

RunResult Trainer::run(const EventHook& hook)
{
    const auto start = std::chrono::steady_clock::now();
    const auto emit = [&](TrainEvent e, int cycle) {
        if (hook)
            hook(e, cycle);
    };

    RunResult r;
    r.config = cfg_;
    r.seed = cfg_.seed;
    const int m = cfg_.batch_m;
    const bool needs_real = cfg_.g_loss.needs_real();

    for (int cycle = 1; cycle <= cfg_.cycles; ++cycle) {
        try {
            Matrix real;
            Matrix z;
            for (int t = 0; t < cfg_.n_d; ++t) {
                real = data::sample_swiss_roll(m, cfg_.data, rng_).xy();
                z = nets::sample_z(m, cfg_.latent_dim, rng_);
                emit(TrainEvent::DBatchSample, cycle);
                d_step(real, z);
                emit(TrainEvent::DAscent, cycle);
            }
            const bool record = cycle % cfg_.eval_every == 0 || cycle == cfg_.cycles;
            if (record)
                r.d_obj_after_d_step.push_back({cycle, d_objective_value(real, z)});

            const Matrix z_g = nets::sample_z(m, cfg_.latent_dim, rng_);
            emit(TrainEvent::GLatentSample, cycle);
            Matrix real_g;
            if (needs_real) {
                real_g = data::sample_swiss_roll(m, cfg_.data, rng_).xy();
                emit(TrainEvent::GRealSample, cycle);
            }
            g_step(z_g, needs_real ? &real_g : nullptr);
            emit(TrainEvent::GDescent, cycle);

            if (record) {
                r.d_obj_after_g_step.push_back({cycle, d_objective_value(real, z)});
                r.nnrmse_trace.push_back({cycle, evaluate(cycle)});
                emit(TrainEvent::Evaluate, cycle);
            }
        } catch (const Error& e) {
            r.diverged = true;
            r.diverged_cycle = cycle;
            r.divergence_reason = e.what();
            r.nnrmse_trace.push_back({cycle, std::numeric_limits<double>::infinity()});
            break;
        }
    }

    r.final_nnrmse = r.nnrmse_trace.back().value;
    r.generator = gen_;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

RunResult train(const TrainConfig& config, const EventHook& hook)
{
    Trainer trainer(config);
    return trainer.run(hook);
}

EvaluationSamples evaluation_samples(const TrainConfig& config, const nets::MlpParams& generator, int cycle)
{
    Rng rng = evaluation_stream(config.seed, cycle);
    data::PointSet real = data::sample_swiss_roll(config.eval_n, config.data, rng);
    const Matrix z = nets::sample_z(config.eval_n, config.latent_dim, rng);
    return {std::move(real), data::PointSet(nets::mlp_apply(generator, z, config.gen_spec))};
}

double median(std::vector<double> values)
{
    if (values.empty())
        throw ConfigError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1)
        return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace ganlab::train
