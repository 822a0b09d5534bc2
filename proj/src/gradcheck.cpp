#include "ganlab/gradcheck.hpp"

#include "ganlab/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace ganlab::gradcheck {

using ad::Index;
using ad::Matrix;
using ad::Tensor;
using losses::DistanceKind;
using losses::DObjective;
using losses::DObjectiveKind;
using losses::Family;
using losses::GLossSpec;
using losses::Sided;
using losses::Target;

namespace {

constexpr int kBatch = 6;
constexpr int kMaxAttempts = 1000;
// Entries below this are too close to a structural zero for a relative
// error to mean anything; such draws are resampled like near-kink ones.
constexpr double kGradientFloor = 1e-7;
constexpr std::array<DistanceKind, 5> kDistances{DistanceKind::AbsLogDiff, DistanceKind::SqLogDiff, DistanceKind::Abs,
                                                 DistanceKind::Square, DistanceKind::PseudoHuber};

std::string describe(const DObjective& d)
{
    std::string s = losses::to_string(d.kind);
    if (d.kind == DObjectiveKind::WassersteinGP)
        s += "/" + losses::to_string(d.sided);
    return s;
}

std::string describe(const GLossSpec& g)
{
    std::string s = losses::to_string(g.family);
    if (!g.is_classic())
        s += "/" + losses::to_string(g.distance);
    if (g.uses_target())
        s += "/" + losses::to_string(g.target);
    return s;
}

nets::MlpSpec small_disc(DObjectiveKind kind) { return {2, {6, 6, 6}, 1, kind == DObjectiveKind::CrossEntropy, 0.2}; }
nets::MlpSpec small_gen() { return {2, {5, 5, 5}, 2, false, 0.2}; }

Matrix normal(int rows, int cols, double sd, Rng& rng)
{
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = n(rng);
    return m;
}

nets::MlpParams random_params(const nets::MlpSpec& spec, double max_gain, Rng& rng)
{
    nets::MlpParams p = nets::build_mlp(spec, rng);
    std::uniform_real_distribution<double> gain(1.0, max_gain);
    std::uniform_real_distribution<double> bias(-0.3, 0.3);
    for (int l = 0; l < nets::kLayers; ++l) {
        p.weights[l] *= gain(rng);
        for (Index i = 0; i < p.biases[l].size(); ++i)
            p.biases[l].data()[i] = bias(rng);
    }
    return p;
}

// Re-draws hidden biases so that every hidden unit sits near the middle of
// its pre-activation range over `x`. Units that stay on one side of the kink
// for the whole batch make some losses exactly invariant to their bias, and
// a relative error is meaningless at such structural zeros.
void straddle_kinks(nets::MlpParams& p, const nets::MlpSpec& spec, const Matrix& x, Rng& rng)
{
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);
    Matrix h = x;
    for (int l = 0; l + 1 < nets::kLayers; ++l) {
        Matrix pre = h * p.weights[l];
        for (Index j = 0; j < pre.cols(); ++j) {
            std::vector<double> col(static_cast<std::size_t>(pre.rows()));
            for (Index i = 0; i < pre.rows(); ++i)
                col[static_cast<std::size_t>(i)] = pre(i, j);
            std::sort(col.begin(), col.end());
            const double lo = col.front();
            const double hi = col.back();
            const double mid = col[col.size() / 2];
            p.biases[l](0, j) = -(mid + jitter(rng) * (hi - lo));
        }
        pre.rowwise() += p.biases[l].row(0);
        h = ad::leaky_relu_value(pre, spec.leaky_slope);
    }
}

// Loss as a function of one parameter matrix, everything else constant.
using NetLoss = std::function<Tensor(ad::Tape&, const nets::MlpNodes&)>;

ad::ScalarFunction with_param(const nets::MlpParams& params, int layer, bool bias, NetLoss loss)
{
    return [&params, layer, bias, loss = std::move(loss)](ad::Tape& tape, const Tensor& x) {
        nets::MlpNodes nodes = nets::bind(tape, params, false);
        (bias ? nodes.biases : nodes.weights)[layer] = x;
        return loss(tape, nodes);
    };
}

const Matrix& param_of(const nets::MlpParams& p, int layer, bool bias)
{
    return bias ? p.biases[layer] : p.weights[layer];
}

// Conditioning of the loss at the given params: smallest |kink input|,
// finiteness, and smallest |gradient| entry. The bias of `skip_bias_layer`
// is left out of the gradient floor.
struct Probe {
    double margin = 0.0;
    bool finite = false;
    double value = 0.0;
    double min_grad = 0.0;
};

Probe probe(const nets::MlpParams& params, const NetLoss& loss, int skip_bias_layer = -1)
{
    ad::Tape tape;
    const nets::MlpNodes nodes = nets::bind(tape, params, true);
    const Tensor out = loss(tape, nodes);
    Probe p{tape.min_kink_distance(), std::isfinite(out.item()), out.item(), 0.0};
    if (!p.finite)
        return p;
    const ad::Gradients g = ad::backward(out);
    p.min_grad = std::numeric_limits<double>::infinity();
    for (int l = 0; l < nets::kLayers; ++l) {
        p.min_grad = std::min(p.min_grad, g[nodes.weights[l]].cwiseAbs().minCoeff());
        if (l != skip_bias_layer)
            p.min_grad = std::min(p.min_grad, g[nodes.biases[l]].cwiseAbs().minCoeff());
    }
    return p;
}

struct Composition {
    DObjective objective;
    GLossSpec g;
    nets::MlpSpec d_spec;
    nets::MlpSpec g_spec;
    nets::MlpParams d;
    nets::MlpParams gen;
    Matrix real;
    Matrix z;
    Matrix fake;
    Matrix x_hat;
};

NetLoss d_loss(const Composition& c)
{
    return [&c](ad::Tape& tape, const nets::MlpNodes& d) {
        const Tensor d_real = nets::mlp_forward(d, tape.constant(c.real), c.d_spec);
        const Tensor d_fake = nets::mlp_forward(d, tape.constant(c.fake), c.d_spec);
        Tensor loss = ad::neg(losses::d_objective(c.objective, d_real, d_fake));
        if (c.objective.kind == DObjectiveKind::WassersteinGP)
            loss = ad::add(loss, losses::gradient_penalty_at(tape, d, c.d_spec, c.x_hat, c.objective.lambda,
                                                             c.objective.sided));
        return loss;
    };
}

NetLoss g_loss(const Composition& c)
{
    return [&c](ad::Tape& tape, const nets::MlpNodes& g) {
        const nets::MlpNodes d = nets::bind(tape, c.d, false);
        const Tensor fake = nets::mlp_forward(g, tape.constant(c.z), c.g_spec);
        const Tensor d_fake = nets::mlp_forward(d, fake, c.d_spec);
        std::optional<Tensor> d_real;
        if (c.g.needs_real())
            d_real = tape.constant(nets::mlp_apply(c.d, c.real, c.d_spec));
        return losses::g_loss(c.g, losses::labels_for(c.objective), d_fake, d_real);
    };
}

bool draw(Composition& c, Rng& rng, double margin)
{
    const bool wgan = c.objective.kind == DObjectiveKind::WassersteinGP;
    c.d_spec = small_disc(c.objective.kind);
    c.g_spec = small_gen();
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        c.d = random_params(c.d_spec, wgan ? 2.0 : 1.5, rng);
        c.gen = random_params(c.g_spec, 1.5, rng);
        c.real = normal(kBatch, 2, 0.6, rng);
        c.z = normal(kBatch, 2, 1.0, rng);
        straddle_kinks(c.gen, c.g_spec, c.z, rng);
        c.fake = nets::mlp_apply(c.gen, c.z, c.g_spec);
        c.x_hat = losses::interpolate(c.real, c.fake, rng);
        Matrix seen(3 * kBatch, 2);
        seen << c.real, c.fake, c.x_hat;
        straddle_kinks(c.d, c.d_spec, seen, rng);
        const Probe pd = probe(c.d, d_loss(c), wgan ? nets::kLayers - 1 : -1);
        const Probe pg = probe(c.gen, g_loss(c));
        if (pd.finite && pg.finite && pd.margin >= margin && pg.margin >= margin && pd.min_grad >= kGradientFloor
            && pg.min_grad >= kGradientFloor)
            return true;
    }
    return false;
}

// Max relative error over all parameter matrices of one network. The bias of
// `exact_zero_layer` must instead have an identically zero gradient.
double check_network(const nets::MlpParams& params, const NetLoss& loss, double eps, int exact_zero_layer = -1)
{
    double worst = 0.0;
    for (int l = 0; l < nets::kLayers; ++l) {
        for (bool bias : {false, true}) {
            const ad::ScalarFunction f = with_param(params, l, bias, loss);
            if (bias && l == exact_zero_layer) {
                ad::Tape tape;
                const Tensor x = tape.variable(param_of(params, l, bias));
                const Matrix g = ad::backward(f(tape, x))[x];
                if (g.cwiseAbs().maxCoeff() > 1e-12)
                    worst = std::max(worst, 1.0);
                continue;
            }
            worst = std::max(worst, ad::finite_difference_check(f, param_of(params, l, bias), eps));
        }
    }
    return worst;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

} // namespace

int GradcheckReport::failures() const
{
    return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

double GradcheckReport::worst() const
{
    double w = 0.0;
    for (const CheckResult& c : checks)
        w = std::max(w, c.max_rel_error);
    return w;
}

std::string GradcheckReport::text() const
{
    std::ostringstream os;
    for (const CheckResult& c : checks)
        os << (c.passed ? "PASS " : "FAIL ") << c.name << "  max_rel_error=" << fmt(c.max_rel_error)
           << "  tol=" << fmt(c.tolerance) << (c.has_kinks ? "  (kinks)" : "") << '\n';
    for (const std::string& m : missing_coverage)
        os << "MISSING " << m << '\n';
    os << checks.size() << " checks, " << failures() << " failed, worst " << fmt(worst()) << '\n';
    return os.str();
}

std::vector<GLossSpec> all_generator_losses()
{
    std::vector<GLossSpec> out;
    for (Family f : {Family::ClassicSaturating, Family::ClassicNonSaturating, Family::ClassicLSGAN, Family::ClassicWGAN})
        out.push_back({f, DistanceKind::Square, Target::Mid});
    for (Family f : {Family::DM, Family::EDM})
        for (DistanceKind d : kDistances)
            out.push_back({f, d, Target::Mid});
    for (Family f : {Family::LM, Family::ELM})
        for (DistanceKind d : kDistances)
            for (Target t : {Target::Mid, Target::Real})
                out.push_back({f, d, t});
    return out;
}

std::vector<DObjective> objectives_for(const GLossSpec& g)
{
    const std::array<DObjective, 4> all{{
        {DObjectiveKind::CrossEntropy, 10.0, Sided::OneSided},
        {DObjectiveKind::LeastSquares, 10.0, Sided::OneSided},
        {DObjectiveKind::WassersteinGP, 10.0, Sided::OneSided},
        {DObjectiveKind::WassersteinGP, 10.0, Sided::TwoSided},
    }};
    std::vector<DObjective> out;
    for (const DObjective& d : all) {
        try {
            losses::validate_pairing(g, d);
            out.push_back(d);
        } catch (const ConfigError&) {
        }
    }
    return out;
}

GradcheckReport run_gradcheck(int compositions, Rng& rng, double eps)
{
    if (compositions < 1)
        throw ConfigError("gradcheck: compositions must be >= 1");
    const std::vector<GLossSpec> specs = all_generator_losses();
    const double margin = 100.0 * eps;

    GradcheckReport report;
    std::set<std::string> seen_g;
    std::set<DObjectiveKind> seen_d;
    for (int i = 0; i < compositions; ++i) {
        Composition c;
        c.g = specs[static_cast<std::size_t>(i) % specs.size()];
        const std::vector<DObjective> objs = objectives_for(c.g);
        c.objective = objs[(static_cast<std::size_t>(i) / specs.size()) % objs.size()];

        CheckResult r;
        r.name = "d:" + describe(c.objective) + " g:" + describe(c.g);
        if (!draw(c, rng, margin)) {
            r.name += " (no kink-free sample)";
            r.max_rel_error = std::numeric_limits<double>::infinity();
            report.checks.push_back(r);
            continue;
        }
        r.has_kinks = true; // every MLP applies leaky ReLU
        r.tolerance = r.has_kinks ? kKinkTolerance : kSmoothTolerance;
        const bool wgan = c.objective.kind == DObjectiveKind::WassersteinGP;
        // The Wasserstein objective and the penalty are both invariant to
        // the output bias of D, so that gradient must vanish exactly.
        r.max_rel_error = std::max(check_network(c.d, d_loss(c), eps, wgan ? nets::kLayers - 1 : -1),
                                   check_network(c.gen, g_loss(c), eps));
        r.passed = r.max_rel_error < r.tolerance;
        report.checks.push_back(r);
        seen_g.insert(describe(c.g));
        seen_d.insert(c.objective.kind);
    }

    for (const GLossSpec& g : specs)
        if (!seen_g.count(describe(g)))
            report.missing_coverage.push_back("g:" + describe(g));
    for (DObjectiveKind k : {DObjectiveKind::CrossEntropy, DObjectiveKind::LeastSquares, DObjectiveKind::WassersteinGP})
        if (!seen_d.count(k))
            report.missing_coverage.push_back("d:" + losses::to_string(k));
    return report;
}

GradcheckReport run_penalty_gradcheck(int discriminators, Rng& rng, double eps)
{
    if (discriminators < 1)
        throw ConfigError("penalty gradcheck: discriminators must be >= 1");
    const nets::MlpSpec spec = small_disc(DObjectiveKind::WassersteinGP);
    const double margin = 100.0 * eps;

    GradcheckReport report;
    for (int i = 0; i < discriminators; ++i) {
        nets::MlpParams d;
        Matrix x_hat;
        const auto penalty = [&](Sided sided) -> NetLoss {
            return [&x_hat, &spec, sided](ad::Tape& tape, const nets::MlpNodes& nodes) {
                return losses::gradient_penalty_at(tape, nodes, spec, x_hat, 10.0, sided);
            };
        };
        // Draw until the one-sided penalty is active on some rows and no
        // kink input (including ||grad|| - 1) sits near zero.
        bool found = false;
        for (int attempt = 0; attempt < kMaxAttempts && !found; ++attempt) {
            d = random_params(spec, 2.5, rng);
            x_hat = normal(kBatch, 2, 0.6, rng);
            const Probe one = probe(d, penalty(Sided::OneSided));
            const Probe two = probe(d, penalty(Sided::TwoSided));
            found = one.finite && two.finite && one.value > 0.0 && one.margin >= margin && two.margin >= margin;
        }
        for (Sided sided : {Sided::OneSided, Sided::TwoSided}) {
            CheckResult r;
            r.name = "penalty/" + losses::to_string(sided) + " #" + std::to_string(i + 1);
            r.has_kinks = true;
            r.tolerance = kPenaltyTolerance;
            r.max_rel_error = found ? check_network(d, penalty(sided), eps) : std::numeric_limits<double>::infinity();
            r.passed = r.max_rel_error < r.tolerance;
            report.checks.push_back(r);
        }
    }
    return report;
}

} // namespace ganlab::gradcheck
