#pragma once

// Discriminator objectives, label conventions, distance functions and the
// generator-loss families (classic, DM, LM, EDM, ELM).

#include "ganlab/autodiff.hpp"
#include "ganlab/nets.hpp"
#include "ganlab/random.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace ganlab::losses {

using ad::Matrix;
using ad::Tensor;

enum class DObjectiveKind { CrossEntropy, LeastSquares, WassersteinGP };
enum class Sided { OneSided, TwoSided };

struct DObjective {
    DObjectiveKind kind = DObjectiveKind::CrossEntropy;
    // Only meaningful for WassersteinGP.
    double lambda = 10.0;
    Sided sided = Sided::OneSided;

    void validate() const;
    bool operator==(const DObjective&) const = default;
};

// Discriminator outputs at the label positions. WassersteinGP has none.
struct LabelConvention {
    std::optional<double> y_real;
    std::optional<double> y_fake;
    std::optional<double> y_mid;

    double mid() const;
    double real() const;
};

enum class DistanceKind { AbsLogDiff, SqLogDiff, Abs, Square, PseudoHuber };

enum class Family { ClassicSaturating, ClassicNonSaturating, ClassicLSGAN, ClassicWGAN, DM, LM, EDM, ELM };

// The label the generator pushes D(fake) toward in LM/ELM.
enum class Target { Mid, Real };

struct GLossSpec {
    Family family = Family::ClassicNonSaturating;
    DistanceKind distance = DistanceKind::Square;
    Target target = Target::Mid;

    bool is_classic() const;
    // DM and EDM compare against D on a real batch.
    bool needs_real() const { return family == Family::DM || family == Family::EDM; }
    bool uses_target() const { return family == Family::LM || family == Family::ELM; }
    bool operator==(const GLossSpec&) const = default;
};

LabelConvention labels_for(const DObjective& objective);

// Throws ConfigError when the generator loss cannot be paired with the
// discriminator objective (missing label, log distance on unbounded D, ...).
void validate_pairing(const GLossSpec& g, const DObjective& d);

// Value the discriminator maximizes, excluding any gradient penalty.
Tensor d_objective(const DObjective& objective, const Tensor& d_real, const Tensor& d_fake);

// Elementwise d(x, y); y must match x's shape.
Tensor distance(DistanceKind kind, const Tensor& x, const Tensor& y);
Tensor distance(DistanceKind kind, const Tensor& x, double y);

// Value the generator minimizes. d_real must be present exactly when the
// family needs it, and should be a constant on the tape.
Tensor g_loss(const GLossSpec& spec, const LabelConvention& labels, const Tensor& d_fake,
              const std::optional<Tensor>& d_real);

// x_hat = alpha * real + (1 - alpha) * fake with one alpha ~ U(0,1) per row.
Matrix interpolate(const Matrix& real, const Matrix& fake, Rng& rng);

// lambda * mean(phi(||grad_x D(x_hat)|| - 1)) with phi = square (two-sided)
// or square of the positive part (one-sided). Differentiable w.r.t. D's params.
// A zero gradient norm has an infinite sqrt derivative; the resulting
// non-finite parameter gradient is reported by the optimizer.
Tensor gradient_penalty_at(ad::Tape& tape, const nets::MlpNodes& d_params, const nets::MlpSpec& d_spec,
                           const Matrix& x_hat, double lambda, Sided sided);

Tensor gradient_penalty(ad::Tape& tape, const nets::MlpNodes& d_params, const nets::MlpSpec& d_spec,
                        const Matrix& x_real, const Matrix& x_fake, Rng& rng, double lambda, Sided sided);

std::string to_string(DObjectiveKind k);
std::string to_string(Sided s);
std::string to_string(DistanceKind k);
std::string to_string(Family f);
std::string to_string(Target t);

DObjectiveKind parse_d_objective_kind(std::string_view s);
Sided parse_sided(std::string_view s);
DistanceKind parse_distance(std::string_view s);
Family parse_family(std::string_view s);
Target parse_target(std::string_view s);

} // namespace ganlab::losses
