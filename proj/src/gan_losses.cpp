#include "ganlab/gan_losses.hpp"

#include "ganlab/errors.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace ganlab::losses {

namespace {

Tensor one_minus(const Tensor& x)
{
    return ad::neg(ad::sub(x, x.tape()->filled(1, 1, 1.0)));
}

template <class E, std::size_t N>
E parse_name(std::string_view s, const std::array<std::pair<const char*, E>, N>& table, const char* what)
{
    for (const auto& [name, value] : table)
        if (s == name)
            return value;
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <class E, std::size_t N>
std::string name_of(E e, const std::array<std::pair<const char*, E>, N>& table)
{
    for (const auto& [name, value] : table)
        if (value == e)
            return name;
    return "?";
}

constexpr std::array<std::pair<const char*, DObjectiveKind>, 3> kObjectiveNames{{
    {"cross_entropy", DObjectiveKind::CrossEntropy},
    {"least_squares", DObjectiveKind::LeastSquares},
    {"wasserstein_gp", DObjectiveKind::WassersteinGP},
}};

constexpr std::array<std::pair<const char*, Sided>, 2> kSidedNames{{
    {"one_sided", Sided::OneSided},
    {"two_sided", Sided::TwoSided},
}};

constexpr std::array<std::pair<const char*, DistanceKind>, 5> kDistanceNames{{
    {"abs_log_diff", DistanceKind::AbsLogDiff},
    {"sq_log_diff", DistanceKind::SqLogDiff},
    {"abs", DistanceKind::Abs},
    {"square", DistanceKind::Square},
    {"pseudo_huber", DistanceKind::PseudoHuber},
}};

constexpr std::array<std::pair<const char*, Family>, 8> kFamilyNames{{
    {"saturating", Family::ClassicSaturating},
    {"non_saturating", Family::ClassicNonSaturating},
    {"lsgan", Family::ClassicLSGAN},
    {"wgan", Family::ClassicWGAN},
    {"dm", Family::DM},
    {"lm", Family::LM},
    {"edm", Family::EDM},
    {"elm", Family::ELM},
}};

constexpr std::array<std::pair<const char*, Target>, 2> kTargetNames{{
    {"mid", Target::Mid},
    {"real", Target::Real},
}};

bool is_log_distance(DistanceKind k) { return k == DistanceKind::AbsLogDiff || k == DistanceKind::SqLogDiff; }

} // namespace

void DObjective::validate() const
{
    if (kind == DObjectiveKind::WassersteinGP && !(lambda > 0.0 && std::isfinite(lambda)))
        throw ConfigError("wasserstein_gp: lambda must be positive and finite");
}

double LabelConvention::mid() const
{
    if (!y_mid)
        throw ConfigError("discriminator objective has no y_mid");
    return *y_mid;
}

double LabelConvention::real() const
{
    if (!y_real || !std::isfinite(*y_real))
        throw ConfigError("discriminator objective has no finite y_real");
    return *y_real;
}

bool GLossSpec::is_classic() const
{
    switch (family) {
    case Family::ClassicSaturating:
    case Family::ClassicNonSaturating:
    case Family::ClassicLSGAN:
    case Family::ClassicWGAN: return true;
    default: return false;
    }
}

LabelConvention labels_for(const DObjective& objective)
{
    switch (objective.kind) {
    case DObjectiveKind::CrossEntropy:
    case DObjectiveKind::LeastSquares: return LabelConvention{1.0, 0.0, 0.5};
    case DObjectiveKind::WassersteinGP: return LabelConvention{};
    }
    return {};
}

void validate_pairing(const GLossSpec& g, const DObjective& d)
{
    d.validate();
    const bool ce = d.kind == DObjectiveKind::CrossEntropy;
    if ((g.family == Family::ClassicSaturating || g.family == Family::ClassicNonSaturating) && !ce)
        throw ConfigError(to_string(g.family) + " generator loss needs a cross_entropy discriminator");
    if (!g.is_classic() && is_log_distance(g.distance) && !ce)
        throw ConfigError(to_string(g.distance) + " needs discriminator outputs in (0,1) (cross_entropy)");
    if (g.uses_target()) {
        const LabelConvention labels = labels_for(d);
        if (g.target == Target::Mid)
            (void)labels.mid();
        else
            (void)labels.real();
    }
}

Tensor d_objective(const DObjective& objective, const Tensor& d_real, const Tensor& d_fake)
{
    switch (objective.kind) {
    case DObjectiveKind::CrossEntropy:
        return ad::add(ad::mean(ad::log(d_real)), ad::mean(ad::log(one_minus(d_fake))));
    case DObjectiveKind::LeastSquares: {
        ad::Tape& tape = *d_real.tape();
        const Tensor real_term = ad::mean(ad::square(ad::sub(d_real, tape.filled(1, 1, 1.0))));
        const Tensor fake_term = ad::mean(ad::square(d_fake));
        return ad::neg(ad::add(real_term, fake_term));
    }
    case DObjectiveKind::WassersteinGP:
        return ad::sub(ad::mean(d_real), ad::mean(d_fake));
    }
    throw ConfigError("unknown discriminator objective");
}

Tensor distance(DistanceKind kind, const Tensor& x, const Tensor& y)
{
    switch (kind) {
    case DistanceKind::AbsLogDiff: return ad::abs(ad::sub(ad::log(x), ad::log(y)));
    case DistanceKind::SqLogDiff: return ad::square(ad::sub(ad::log(x), ad::log(y)));
    case DistanceKind::Abs: return ad::abs(ad::sub(x, y));
    case DistanceKind::Square: return ad::square(ad::sub(x, y));
    case DistanceKind::PseudoHuber: return ad::pseudo_huber_unit(ad::sub(x, y));
    }
    throw ConfigError("unknown distance");
}

Tensor distance(DistanceKind kind, const Tensor& x, double y)
{
    return distance(kind, x, x.tape()->filled(x.rows(), x.cols(), y));
}

Tensor g_loss(const GLossSpec& spec, const LabelConvention& labels, const Tensor& d_fake,
              const std::optional<Tensor>& d_real)
{
    if (spec.needs_real() != d_real.has_value())
        throw ConfigError(to_string(spec.family) + (spec.needs_real() ? " needs" : " does not take")
                          + " discriminator outputs on real data");
    const auto target = [&] { return spec.target == Target::Mid ? labels.mid() : labels.real(); };

    switch (spec.family) {
    case Family::ClassicSaturating: return ad::mean(ad::log(one_minus(d_fake)));
    case Family::ClassicNonSaturating: return ad::neg(ad::mean(ad::log(d_fake)));
    case Family::ClassicLSGAN:
        return ad::mean(ad::square(ad::sub(d_fake, d_fake.tape()->filled(1, 1, 1.0))));
    case Family::ClassicWGAN: return ad::neg(ad::mean(d_fake));
    case Family::DM: return ad::mean(distance(spec.distance, *d_real, d_fake));
    case Family::LM: return ad::mean(distance(spec.distance, d_fake, target()));
    case Family::EDM: return distance(spec.distance, ad::mean(*d_real), ad::mean(d_fake));
    case Family::ELM: return distance(spec.distance, ad::mean(d_fake), target());
    }
    throw ConfigError("unknown generator loss family");
}

Matrix interpolate(const Matrix& real, const Matrix& fake, Rng& rng)
{
    if (real.rows() != fake.rows() || real.cols() != fake.cols())
        throw ShapeError("interpolate: real and fake batches differ in shape");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix out(real.rows(), real.cols());
    for (Eigen::Index i = 0; i < real.rows(); ++i) {
        const double alpha = unif(rng);
        out.row(i) = alpha * real.row(i) + (1.0 - alpha) * fake.row(i);
    }
    return out;
}

Tensor gradient_penalty_at(ad::Tape& tape, const nets::MlpNodes& d_params, const nets::MlpSpec& d_spec,
                           const Matrix& x_hat, double lambda, Sided sided)
{
    const Tensor x = tape.constant(x_hat);
    // Rows are independent, so the gradient of the batch sum holds each
    // sample's own input gradient in its row.
    const Tensor total = ad::sum(nets::mlp_forward(d_params, x, d_spec));
    const Tensor grad = ad::input_gradient(total, x);
    const Tensor norm = ad::sqrt(ad::sum(ad::square(grad), ad::Axis::Cols));
    Tensor excess = ad::sub(norm, tape.filled(1, 1, 1.0));
    if (sided == Sided::OneSided)
        excess = ad::leaky_relu(excess, 0.0);
    return ad::scale(ad::mean(ad::square(excess)), lambda);
}

Tensor gradient_penalty(ad::Tape& tape, const nets::MlpNodes& d_params, const nets::MlpSpec& d_spec,
                        const Matrix& x_real, const Matrix& x_fake, Rng& rng, double lambda, Sided sided)
{
    return gradient_penalty_at(tape, d_params, d_spec, interpolate(x_real, x_fake, rng), lambda, sided);
}

std::string to_string(DObjectiveKind k) { return name_of(k, kObjectiveNames); }
std::string to_string(Sided s) { return name_of(s, kSidedNames); }
std::string to_string(DistanceKind k) { return name_of(k, kDistanceNames); }
std::string to_string(Family f) { return name_of(f, kFamilyNames); }
std::string to_string(Target t) { return name_of(t, kTargetNames); }

DObjectiveKind parse_d_objective_kind(std::string_view s) { return parse_name(s, kObjectiveNames, "d_objective kind"); }
Sided parse_sided(std::string_view s) { return parse_name(s, kSidedNames, "penalty siding"); }
DistanceKind parse_distance(std::string_view s) { return parse_name(s, kDistanceNames, "distance"); }
Family parse_family(std::string_view s) { return parse_name(s, kFamilyNames, "g_loss family"); }
Target parse_target(std::string_view s) { return parse_name(s, kTargetNames, "target"); }

} // namespace ganlab::losses
