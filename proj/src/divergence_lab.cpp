#include "ganlab/divergence_lab.hpp"

#include "ganlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace ganlab::divergence {

namespace {

bool in_support(const DiscreteDist& p, const DiscreteDist& q, std::size_t i) { return p[i] + q[i] > 0.0; }

void check_pair(const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d)
{
    if (p.size() != q.size())
        throw ShapeError("distributions have different atom counts");
    if (d.values.size() != p.size())
        throw ShapeError("discriminator table does not match the atom count");
}

double max_abs_diff(const DiscreteDist& p, const DiscreteDist& q)
{
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        m = std::max(m, std::abs(p[i] - q[i]));
    return m;
}

// Dirichlet(1,...,1) over k atoms; with `sparse`, each atom is zeroed with
// probability 1/3 (at least one atom stays positive).
std::vector<double> random_weights(std::size_t k, bool sparse, Rng& rng)
{
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution drop(1.0 / 3.0);
    std::vector<double> w(k);
    for (auto& x : w)
        x = expo(rng) + 1e-3;
    if (sparse) {
        for (auto& x : w)
            if (drop(rng))
                x = 0.0;
        if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }))
            w[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = expo(rng) + 1e-3;
    }
    return w;
}

std::vector<double> normalized(std::vector<double> w, double mass = 1.0)
{
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w)
        x = x / total * mass;
    return w;
}

// p arbitrary (possibly sparse); q copies p on a random subset of atoms and
// spreads the remaining mass over the rest, so p and q may agree on some
// atoms and differ in support.
std::pair<DiscreteDist, DiscreteDist> general_pair(std::size_t k, Rng& rng)
{
    std::vector<double> p = normalized(random_weights(k, true, rng));
    std::bernoulli_distribution copy(0.3);
    std::vector<double> q(k, 0.0);
    std::vector<std::size_t> rest;
    double copied = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (copy(rng)) {
            q[i] = p[i];
            copied += p[i];
        } else {
            rest.push_back(i);
        }
    }
    if (rest.empty() || copied >= 1.0)
        return {DiscreteDist(p), DiscreteDist(p)};
    const std::vector<double> spread = normalized(random_weights(rest.size(), true, rng), 1.0 - copied);
    for (std::size_t j = 0; j < rest.size(); ++j)
        q[rest[j]] = spread[j];
    return {DiscreteDist(p), DiscreteDist(q)};
}

// p and q positive on exactly the same atoms.
std::pair<DiscreteDist, DiscreteDist> same_support_pair(std::size_t k, Rng& rng)
{
    const std::vector<double> mask = random_weights(k, true, rng);
    std::vector<double> p = random_weights(k, false, rng);
    std::vector<double> q = random_weights(k, false, rng);
    for (std::size_t i = 0; i < k; ++i) {
        if (mask[i] == 0.0)
            p[i] = q[i] = 0.0;
    }
    return {DiscreteDist(normalized(p)), DiscreteDist(normalized(q))};
}

// p and q with at least one atom in exactly one of the two supports.
std::pair<DiscreteDist, DiscreteDist> differing_support_pair(std::size_t k, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> atom(0, k - 1);
    std::vector<double> p = random_weights(k, true, rng);
    std::vector<double> q = random_weights(k, true, rng);
    const std::size_t only = atom(rng);
    std::size_t other = atom(rng);
    while (other == only)
        other = atom(rng);
    // `only` lies in supp(p) \ supp(q); `other` keeps q non-empty.
    p[only] = std::max(p[only], 1e-3);
    q[only] = 0.0;
    q[other] = std::max(q[other], 1e-3);
    return {DiscreteDist(normalized(p)), DiscreteDist(normalized(q))};
}

std::uniform_real_distribution<double> offset_dist() { return std::uniform_real_distribution<double>(1e-3, 0.5); }

// y_mid where p == q, y_mid +/- u (random sign) elsewhere.
TabularDiscriminator random_equilibrium_discriminator(const DiscreteDist& p, const DiscreteDist& q, Rng& rng)
{
    auto u = offset_dist();
    std::bernoulli_distribution up(0.5);
    TabularDiscriminator d{std::vector<double>(p.size(), 0.5), 0.5};
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != q[i])
            d.values[i] = d.y_mid + (up(rng) ? 1.0 : -1.0) * u(rng);
    return d;
}

// y_mid + u where p > q, y_mid - u where p < q.
TabularDiscriminator random_optimal_discriminator(const DiscreteDist& p, const DiscreteDist& q, Rng& rng)
{
    auto u = offset_dist();
    TabularDiscriminator d{std::vector<double>(p.size(), 0.5), 0.5};
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > q[i])
            d.values[i] = d.y_mid + u(rng);
        else if (p[i] < q[i])
            d.values[i] = d.y_mid - u(rng);
    }
    return d;
}

class Tally {
public:
    enum class Worst { Min, Max };

    Tally(std::string name, Worst worst)
      : worst_(worst)
    {
        r_.name = std::move(name);
        r_.worst_value = worst == Worst::Min ? std::numeric_limits<double>::infinity()
                                             : -std::numeric_limits<double>::infinity();
    }

    void observe(double value, bool violated)
    {
        ++r_.trials;
        if (violated)
            ++r_.violations;
        r_.worst_value = worst_ == Worst::Min ? std::min(r_.worst_value, value) : std::max(r_.worst_value, value);
    }

    PropertyResult result() const { return r_; }

private:
    PropertyResult r_;
    Worst worst_;
};

} // namespace

DiscreteDist::DiscreteDist(std::vector<double> probs)
  : probs_(std::move(probs))
{
    if (probs_.empty())
        throw ConfigError("discrete distribution needs at least one atom");
    double total = 0.0;
    for (double x : probs_) {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw DomainError("discrete distribution: probabilities must be finite and non-negative");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DomainError("discrete distribution: probabilities must sum to 1");
}

std::string to_string(LossFamily f)
{
    switch (f) {
    case LossFamily::DM: return "dm";
    case LossFamily::LM: return "lm";
    case LossFamily::EDM: return "edm";
    case LossFamily::ELM: return "elm";
    }
    return "?";
}

double scalar_distance(DistanceKind kind, double x, double y)
{
    const bool log_kind = kind == DistanceKind::AbsLogDiff || kind == DistanceKind::SqLogDiff;
    if (log_kind && !(x > 0.0 && y > 0.0))
        throw DomainError("log distance needs strictly positive arguments");
    switch (kind) {
    case DistanceKind::AbsLogDiff: return std::abs(std::log(x) - std::log(y));
    case DistanceKind::SqLogDiff: {
        const double t = std::log(x) - std::log(y);
        return t * t;
    }
    case DistanceKind::Abs: return std::abs(x - y);
    case DistanceKind::Square: return (x - y) * (x - y);
    case DistanceKind::PseudoHuber: return std::sqrt((x - y) * (x - y) + 1.0) - 1.0;
    }
    return 0.0;
}

TabularDiscriminator optimal_discriminator(const DiscreteDist& p, const DiscreteDist& q)
{
    if (p.size() != q.size())
        throw ShapeError("optimal_discriminator: distributions have different atom counts");
    TabularDiscriminator d{std::vector<double>(p.size(), 0.5), 0.5};
    for (std::size_t i = 0; i < p.size(); ++i)
        if (in_support(p, q, i))
            d.values[i] = p[i] / (p[i] + q[i]);
    return d;
}

bool optimal_at_equilibrium(const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d)
{
    check_pair(p, q, d);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!in_support(p, q, i))
            continue;
        if ((p[i] == q[i]) != (d.values[i] == d.y_mid))
            return false;
    }
    return true;
}

bool optimal(const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d)
{
    if (!optimal_at_equilibrium(p, q, d))
        return false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!in_support(p, q, i))
            continue;
        if (p[i] > q[i] && !(d.values[i] > d.y_mid))
            return false;
        if (p[i] < q[i] && !(d.values[i] < d.y_mid))
            return false;
    }
    return true;
}

double exact_loss(LossFamily family, const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d,
                  DistanceKind distance, double y_hat)
{
    check_pair(p, q, d);
    const std::size_t k = p.size();
    switch (family) {
    case LossFamily::DM: {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (p[i] == 0.0)
                continue;
            for (std::size_t j = 0; j < k; ++j)
                if (q[j] > 0.0)
                    total += p[i] * q[j] * scalar_distance(distance, d.values[i], d.values[j]);
        }
        return total;
    }
    case LossFamily::LM: {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!in_support(p, q, i))
                continue;
            const double di = scalar_distance(distance, d.values[i], y_hat);
            total += p[i] * di + q[i] * di;
        }
        return total;
    }
    case LossFamily::EDM:
    case LossFamily::ELM: {
        double ep = 0.0;
        double eq = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!in_support(p, q, i))
                continue;
            ep += p[i] * d.values[i];
            eq += q[i] * d.values[i];
        }
        if (family == LossFamily::EDM)
            return scalar_distance(distance, ep, eq);
        return scalar_distance(distance, eq, y_hat) + scalar_distance(distance, ep, y_hat);
    }
    }
    return 0.0;
}

long DivergenceReport::total_violations() const
{
    long n = 0;
    for (const auto& p : properties)
        n += p.violations;
    return n;
}

std::string DivergenceReport::text() const
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-40s %8s %10s %14s\n", "property", "trials", "violations", "worst_value");
    os << line;
    for (const auto& p : properties) {
        std::snprintf(line, sizeof line, "%-40s %8ld %10ld %14.6g\n", p.name.c_str(), p.trials, p.violations,
                      p.worst_value);
        os << line;
    }
    os << (ok() ? "all properties hold\n" : "VIOLATIONS FOUND\n");
    return os.str();
}

std::string DivergenceReport::csv() const
{
    std::ostringstream os;
    os << "name,trials,violations,worst_value\n";
    char buf[64];
    for (const auto& p : properties) {
        std::snprintf(buf, sizeof buf, "%.9g", p.worst_value);
        os << p.name << ',' << p.trials << ',' << p.violations << ',' << buf << '\n';
    }
    return os.str();
}

DivergenceReport verify_divergence_properties(int trials, int max_k, Rng& rng)
{
    if (trials < 1)
        throw ConfigError("verify_divergence_properties: trials must be >= 1");
    if (max_k < 1)
        throw ConfigError("verify_divergence_properties: max_k must be >= 1");

    using W = Tally::Worst;
    constexpr double tol = kZeroTolerance;
    constexpr double y_mid = 0.5;
    constexpr double y_real = 1.0;
    constexpr DistanceKind kinds[] = {DistanceKind::AbsLogDiff, DistanceKind::SqLogDiff, DistanceKind::Abs,
                                      DistanceKind::Square, DistanceKind::PseudoHuber};

    Tally nonneg("a_all_losses_nonnegative", W::Min);
    Tally dm_zero("b_dm_zero_implies_equal", W::Min);
    Tally lm_zero("b_lm_mid_zero_implies_equal", W::Min);
    Tally edm_iff("c_edm_zero_iff_equal_same_support", W::Min);
    Tally elm_iff("c_elm_mid_zero_iff_equal_same_support", W::Min);
    Tally equal_zero("d_equal_implies_all_zero", W::Max);
    Tally lm_real("lm_real_positive_at_equality", W::Min);
    Tally elm_real("elm_real_positive_at_equality", W::Min);

    std::uniform_int_distribution<int> atoms(1, max_k);
    const auto all_losses = [&](const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d,
                                DistanceKind kind) {
        return std::array<double, 6>{exact_loss(LossFamily::DM, p, q, d, kind, y_mid),
                                     exact_loss(LossFamily::LM, p, q, d, kind, y_mid),
                                     exact_loss(LossFamily::EDM, p, q, d, kind, y_mid),
                                     exact_loss(LossFamily::ELM, p, q, d, kind, y_mid),
                                     exact_loss(LossFamily::LM, p, q, d, kind, y_real),
                                     exact_loss(LossFamily::ELM, p, q, d, kind, y_real)};
    };

    for (int t = 0; t < trials; ++t) {
        const DistanceKind kind = kinds[t % 5];
        const auto k = static_cast<std::size_t>(atoms(rng));

        // Arbitrary supports, discriminator only optimal at equilibrium.
        {
            const auto [p, q] = general_pair(k, rng);
            const TabularDiscriminator d = random_equilibrium_discriminator(p, q, rng);
            const auto l = all_losses(p, q, d, kind);
            for (double v : l)
                nonneg.observe(v, v < -tol);
            if (max_abs_diff(p, q) > tol) {
                dm_zero.observe(l[0], l[0] <= tol);
                lm_zero.observe(l[1], l[1] <= tol);
            }
        }
        // Same support, fully optimal discriminator.
        {
            const auto [p, q] = same_support_pair(k, rng);
            const TabularDiscriminator d = random_optimal_discriminator(p, q, rng);
            const auto l = all_losses(p, q, d, kind);
            for (double v : l)
                nonneg.observe(v, v < -tol);
            const bool equal = max_abs_diff(p, q) <= tol;
            if (!equal) {
                edm_iff.observe(l[2], l[2] <= tol);
                elm_iff.observe(l[3], l[3] <= tol);
            }
        }
        // Forced equality; the only discriminator optimal at equilibrium is y_mid everywhere.
        {
            const DiscreteDist p(normalized(random_weights(k, true, rng)));
            const DiscreteDist& q = p;
            const TabularDiscriminator d = random_optimal_discriminator(p, q, rng);
            const auto l = all_losses(p, q, d, kind);
            for (double v : l)
                nonneg.observe(v, v < -tol);
            for (int i = 0; i < 4; ++i)
                equal_zero.observe(l[i], l[i] > tol);
            // Converse direction of (c) on the equal pair.
            edm_iff.observe(l[2], l[2] > tol);
            elm_iff.observe(l[3], l[3] > tol);
            lm_real.observe(l[4], !(l[4] > tol));
            elm_real.observe(l[5], !(l[5] > tol));
        }
    }

    return DivergenceReport{{nonneg.result(), dm_zero.result(), lm_zero.result(), edm_iff.result(), elm_iff.result(),
                             equal_zero.result(), lm_real.result(), elm_real.result()}};
}

std::optional<EdmInstance> find_edm_support_counterexample(Rng& rng, long budget, SupportMode mode)
{
    if (budget < 1)
        throw ConfigError("find_edm_support_counterexample: budget must be >= 1");
    std::uniform_int_distribution<int> atoms(mode == SupportMode::Differing ? 2 : 1, 6);
    auto u = offset_dist();

    for (long n = 0; n < budget; ++n) {
        const auto k = static_cast<std::size_t>(atoms(rng));
        auto [p, q] = mode == SupportMode::Differing ? differing_support_pair(k, rng) : same_support_pair(k, rng);
        if (max_abs_diff(p, q) <= kZeroTolerance)
            continue;

        std::vector<std::size_t> unequal;
        for (std::size_t i = 0; i < k; ++i)
            if (p[i] != q[i])
                unequal.push_back(i);
        const std::size_t last = unequal[std::uniform_int_distribution<std::size_t>(0, unequal.size() - 1)(rng)];

        // sum_i (p_i - q_i)(D_i - y_mid) = 0 with D_i - y_mid = sign(p_i - q_i) * u_i.
        TabularDiscriminator d{std::vector<double>(k, 0.5), 0.5};
        double balance = 0.0;
        for (std::size_t i : unequal) {
            if (i == last)
                continue;
            const double sign = p[i] > q[i] ? 1.0 : -1.0;
            const double offset = u(rng);
            d.values[i] = d.y_mid + sign * offset;
            balance += (p[i] - q[i]) * sign * offset;
        }
        const double gap = p[last] - q[last];
        const double sign = gap > 0.0 ? 1.0 : -1.0;
        const double needed = -balance / (gap * sign);
        d.values[last] = d.y_mid + sign * needed;

        if (!optimal(p, q, d))
            continue;
        const double edm = exact_loss(LossFamily::EDM, p, q, d, DistanceKind::Abs, d.y_mid);
        if (edm <= kZeroTolerance)
            return EdmInstance{std::move(p), std::move(q), std::move(d), edm};
    }
    return std::nullopt;
}

} // namespace ganlab::divergence
