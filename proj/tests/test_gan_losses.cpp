#include "ganlab/errors.hpp"
#include "ganlab/gan_losses.hpp"
#include "ganlab/gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace ganlab;
using namespace ganlab::losses;
using ad::Matrix;
using ad::Tape;
using ad::Tensor;

namespace {

Matrix col(std::initializer_list<double> v)
{
    Matrix m(static_cast<ad::Index>(v.size()), 1);
    ad::Index i = 0;
    for (double x : v)
        m(i++, 0) = x;
    return m;
}

const DObjective kCe{DObjectiveKind::CrossEntropy};
const DObjective kLs{DObjectiveKind::LeastSquares};
const DObjective kWgan{DObjectiveKind::WassersteinGP, 10.0, Sided::OneSided};

constexpr DistanceKind kAllDistances[] = {DistanceKind::AbsLogDiff, DistanceKind::SqLogDiff, DistanceKind::Abs,
                                          DistanceKind::Square, DistanceKind::PseudoHuber};

// Linear critic x -> x . a through an MLP with identity activations.
nets::MlpSpec linear_spec()
{
    nets::MlpSpec s;
    s.hidden_dims = {1, 1, 1};
    s.leaky_slope = 1.0;
    return s;
}

nets::MlpParams linear_params(double a0, double a1)
{
    nets::MlpParams p;
    p.weights[0] = (Matrix(2, 1) << a0, a1).finished();
    p.biases[0] = Matrix::Constant(1, 1, 0.3);
    for (int l = 1; l < nets::kLayers; ++l) {
        p.weights[l] = Matrix::Ones(1, 1);
        p.biases[l] = Matrix::Constant(1, 1, -0.1);
    }
    return p;
}

double penalty(const nets::MlpParams& p, const nets::MlpSpec& spec, const Matrix& x_hat, Sided sided)
{
    Tape t;
    return gradient_penalty_at(t, nets::bind(t, p, false), spec, x_hat, 10.0, sided).item();
}

} // namespace

TEST_CASE("label conventions")
{
    for (const DObjective& d : {kCe, kLs}) {
        const LabelConvention l = labels_for(d);
        CHECK(l.real() == 1.0);
        CHECK(*l.y_fake == 0.0);
        CHECK(l.mid() == 0.5);
    }
    const LabelConvention w = labels_for(kWgan);
    CHECK_FALSE(w.y_mid.has_value());
    CHECK_THROWS_AS(w.mid(), ConfigError);
    CHECK_THROWS_AS(w.real(), ConfigError);
}

TEST_CASE("pairing rules")
{
    CHECK_THROWS_AS(validate_pairing({Family::LM, DistanceKind::Abs, Target::Mid}, kWgan), ConfigError);
    CHECK_THROWS_AS(validate_pairing({Family::ELM, DistanceKind::Square, Target::Real}, kWgan), ConfigError);
    CHECK_THROWS_AS(validate_pairing({Family::ClassicNonSaturating}, kLs), ConfigError);
    CHECK_THROWS_AS(validate_pairing({Family::DM, DistanceKind::AbsLogDiff}, kWgan), ConfigError);
    CHECK_THROWS_AS(validate_pairing({Family::DM, DistanceKind::SqLogDiff}, kLs), ConfigError);
    CHECK_NOTHROW(validate_pairing({Family::DM, DistanceKind::Abs}, kWgan));
    CHECK_NOTHROW(validate_pairing({Family::EDM, DistanceKind::Abs}, kWgan));
    CHECK_NOTHROW(validate_pairing({Family::ClassicWGAN}, kWgan));
    CHECK_NOTHROW(validate_pairing({Family::LM, DistanceKind::AbsLogDiff, Target::Real}, kCe));
    CHECK_NOTHROW(validate_pairing({Family::ClassicLSGAN}, kLs));
    CHECK_THROWS_AS(validate_pairing({Family::ClassicWGAN}, DObjective{DObjectiveKind::WassersteinGP, 0.0}),
                    ConfigError);
}

TEST_CASE("d_objective oracles")
{
    Tape t;
    const Tensor half = t.constant(Matrix::Constant(4, 1, 0.5));
    CHECK(d_objective(kCe, half, half).item() == doctest::Approx(-std::log(4.0)).epsilon(1e-15));

    const Tensor ones = t.constant(Matrix::Ones(4, 1));
    const Tensor zeros = t.constant(Matrix::Zero(4, 1));
    CHECK(d_objective(kLs, ones, zeros).item() == 0.0);
    CHECK(d_objective(kLs, zeros, ones).item() == -2.0);

    const Tensor r = t.constant(col({0.3, -2.0, 7.0}));
    CHECK(d_objective(kWgan, r, r).item() == 0.0);
    CHECK(d_objective(kWgan, r, t.constant(col({0.0, 0.0, 0.0}))).item() == doctest::Approx(5.3 / 3));
}

TEST_CASE("distance oracles")
{
    Tape t;
    const auto d = [&](DistanceKind k, double x, double y) {
        return distance(k, t.constant(col({x})), y).item();
    };
    CHECK(d(DistanceKind::PseudoHuber, 3, 3) == 0.0);
    CHECK(d(DistanceKind::Square, 0.8, 0.2) == doctest::Approx(0.36));
    CHECK(d(DistanceKind::AbsLogDiff, std::numbers::e, 1) == doctest::Approx(1.0));
    CHECK(d(DistanceKind::SqLogDiff, std::numbers::e, 1) == doctest::Approx(1.0));
    CHECK(d(DistanceKind::Abs, -0.25, 0.5) == 0.75);
    CHECK_THROWS_AS(d(DistanceKind::AbsLogDiff, 0.0, 0.5), DomainError);
}

TEST_CASE("distances are positive definite and symmetric")
{
    Rng rng(17);
    std::uniform_real_distribution<double> pos(1e-3, 1.0);
    std::uniform_real_distribution<double> any(-3.0, 3.0);
    for (DistanceKind k : kAllDistances) {
        CAPTURE(to_string(k));
        const bool log_domain = k == DistanceKind::AbsLogDiff || k == DistanceKind::SqLogDiff;
        Matrix x(1000, 1), y(1000, 1);
        for (int i = 0; i < 1000; ++i) {
            x(i, 0) = log_domain ? pos(rng) : any(rng);
            do
                y(i, 0) = log_domain ? pos(rng) : any(rng);
            while (y(i, 0) == x(i, 0));
        }
        Tape t;
        const Tensor tx = t.constant(x), ty = t.constant(y);
        const Matrix dxy = distance(k, tx, ty).value();
        const Matrix dyx = distance(k, ty, tx).value();
        CHECK(dxy.minCoeff() > 0.0);
        CHECK(dxy == dyx);
        CHECK(distance(k, tx, tx).value().isZero(0.0));
    }
}

TEST_CASE("g_loss oracles")
{
    const LabelConvention ce = labels_for(kCe);
    Tape t;

    const Tensor fake_one = t.constant(Matrix::Ones(3, 1));
    CHECK(g_loss({Family::LM, DistanceKind::Square, Target::Real}, ce, fake_one, std::nullopt).item() == 0.0);

    const Tensor real = t.constant(col({0.8, 0.6}));
    const Tensor fake = t.constant(col({0.2, 0.6}));
    CHECK(g_loss({Family::DM, DistanceKind::Square}, ce, fake, real).item() == doctest::Approx(0.18));

    const Tensor real07 = t.constant(col({0.9, 0.5}));
    const Tensor fake04 = t.constant(col({0.1, 0.7}));
    CHECK(g_loss({Family::EDM, DistanceKind::Abs}, ce, fake04, real07).item() == doctest::Approx(0.3));

    const Tensor half = t.constant(Matrix::Constant(5, 1, 0.5));
    CHECK(g_loss({Family::LM, DistanceKind::Square, Target::Real}, ce, half, std::nullopt).item() == 0.25);
    CHECK(g_loss({Family::LM, DistanceKind::Square, Target::Mid}, ce, half, std::nullopt).item() == 0.0);
    CHECK(g_loss({Family::ELM, DistanceKind::Abs, Target::Mid}, ce, half, std::nullopt).item() == 0.0);

    const Tensor f = t.constant(col({0.25, 0.75}));
    CHECK(g_loss({Family::ClassicSaturating}, ce, f, std::nullopt).item()
          == doctest::Approx((std::log(0.75) + std::log(0.25)) / 2));
    CHECK(g_loss({Family::ClassicNonSaturating}, ce, f, std::nullopt).item()
          == doctest::Approx(-(std::log(0.25) + std::log(0.75)) / 2));
    CHECK(g_loss({Family::ClassicLSGAN}, ce, f, std::nullopt).item() == doctest::Approx((0.5625 + 0.0625) / 2));
    CHECK(g_loss({Family::ClassicWGAN}, ce, f, std::nullopt).item() == -0.5);

    // DM/EDM need the real batch, the others refuse it.
    CHECK_THROWS_AS(g_loss({Family::DM, DistanceKind::Abs}, ce, f, std::nullopt), ConfigError);
    CHECK_THROWS_AS(g_loss({Family::ClassicWGAN}, ce, f, f), ConfigError);
}

TEST_CASE("matching losses are non-negative on random batches")
{
    Rng rng(23);
    std::uniform_real_distribution<double> u(1e-3, 1.0 - 1e-3);
    const LabelConvention ce = labels_for(kCe);
    for (const GLossSpec& g : gradcheck::all_generator_losses()) {
        if (g.is_classic())
            continue;
        for (int trial = 0; trial < 50; ++trial) {
            Matrix r(8, 1), f(8, 1);
            for (int i = 0; i < 8; ++i) {
                r(i, 0) = u(rng);
                f(i, 0) = u(rng);
            }
            Tape t;
            const std::optional<Tensor> real = g.needs_real() ? std::optional(t.constant(r)) : std::nullopt;
            CHECK(g_loss(g, ce, t.constant(f), real).item() >= 0.0);
        }
    }
}

TEST_CASE("gradient penalty on linear critics")
{
    const nets::MlpSpec spec = linear_spec();
    Rng rng(2);
    const Matrix x_hat = Matrix::Random(16, 2);

    const nets::MlpParams unit = linear_params(0.6, 0.8);
    CHECK(penalty(unit, spec, x_hat, Sided::TwoSided) == doctest::Approx(0.0).epsilon(1e-20));
    CHECK(penalty(unit, spec, x_hat, Sided::OneSided) == doctest::Approx(0.0).epsilon(1e-20));

    const nets::MlpParams half = linear_params(0.3, 0.4);
    CHECK(penalty(half, spec, x_hat, Sided::TwoSided) == doctest::Approx(10.0 * 0.25).epsilon(1e-12));
    CHECK(penalty(half, spec, x_hat, Sided::OneSided) == 0.0);

    const nets::MlpParams steep = linear_params(1.2, 1.6);
    CHECK(penalty(steep, spec, x_hat, Sided::OneSided) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(penalty(steep, spec, x_hat, Sided::TwoSided) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("one-sided penalty never exceeds two-sided")
{
    nets::MlpSpec spec;
    spec.hidden_dims = {16, 16, 16};
    Rng rng(31);
    std::uniform_real_distribution<double> gain(0.5, 4.0);
    for (int trial = 0; trial < 30; ++trial) {
        nets::MlpParams p = nets::build_mlp(spec, rng);
        const double g = gain(rng);
        for (Matrix& w : p.weights)
            w *= g;
        const Matrix real = Matrix::Random(32, 2);
        const Matrix fake = Matrix::Random(32, 2);
        const Matrix x_hat = interpolate(real, fake, rng);
        CHECK(penalty(p, spec, x_hat, Sided::OneSided) <= penalty(p, spec, x_hat, Sided::TwoSided));
    }
}

TEST_CASE("interpolate draws one weight per row")
{
    const Matrix real = Matrix::Zero(100, 2);
    const Matrix fake = (Matrix(1, 2) << 1.0, 2.0).finished().replicate(100, 1);
    Rng rng(6);
    const Matrix x = interpolate(real, fake, rng);
    for (int i = 0; i < 100; ++i) {
        CHECK(x(i, 1) == doctest::Approx(2.0 * x(i, 0)));
        CHECK(x(i, 0) >= 0.0);
        CHECK(x(i, 0) <= 1.0);
    }
    CHECK_THROWS_AS(interpolate(real, Matrix::Zero(3, 2), rng), ShapeError);
}

TEST_CASE("generator-loss and penalty gradients pass the finite-difference suite")
{
    Rng rng(77);
    const gradcheck::GradcheckReport r = gradcheck::run_gradcheck(34 * 4, rng);
    CHECK(r.missing_coverage.empty());
    CHECK(r.failures() == 0);
    CHECK(r.worst() < gradcheck::kKinkTolerance);

    const gradcheck::GradcheckReport p = gradcheck::run_penalty_gradcheck(10, rng);
    CHECK(p.checks.size() == 20);
    CHECK(p.ok());
}

TEST_CASE("name round trips")
{
    for (Family f : {Family::ClassicSaturating, Family::ClassicNonSaturating, Family::ClassicLSGAN,
                     Family::ClassicWGAN, Family::DM, Family::LM, Family::EDM, Family::ELM})
        CHECK(parse_family(to_string(f)) == f);
    for (DistanceKind k : kAllDistances)
        CHECK(parse_distance(to_string(k)) == k);
    CHECK(parse_target(to_string(Target::Real)) == Target::Real);
    CHECK(parse_sided(to_string(Sided::TwoSided)) == Sided::TwoSided);
    CHECK(parse_d_objective_kind(to_string(DObjectiveKind::WassersteinGP)) == DObjectiveKind::WassersteinGP);
    CHECK_THROWS_AS(parse_family("hinge"), ConfigError);
}
