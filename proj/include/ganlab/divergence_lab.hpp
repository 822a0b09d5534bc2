#pragma once

// Exact evaluation of the DM / LM / EDM / ELM generator losses on discrete
// distributions with tabular discriminators, and randomized checks of when
// those losses behave as divergences.

#include "ganlab/gan_losses.hpp"
#include "ganlab/random.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ganlab::divergence {

using losses::DistanceKind;

// Probability vector over k >= 1 atoms; sums to 1 within 1e-12.
class DiscreteDist {
public:
    explicit DiscreteDist(std::vector<double> probs);

    const std::vector<double>& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }

private:
    std::vector<double> probs_;
};

// Per-atom discriminator output. Offsets values[i] - y_mid play the role of
// +d1 (where p > q) and -d2 (where p < q).
struct TabularDiscriminator {
    std::vector<double> values;
    double y_mid = 0.5;
};

enum class LossFamily { DM, LM, EDM, ELM };

std::string to_string(LossFamily f);

double scalar_distance(DistanceKind kind, double x, double y);

// D = p / (p + q) on the union support, y_mid elsewhere.
TabularDiscriminator optimal_discriminator(const DiscreteDist& p, const DiscreteDist& q);

// D(i) == y_mid exactly where p_i == q_i, over the union support.
bool optimal_at_equilibrium(const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d);
// Additionally D(i) > y_mid where p_i > q_i and D(i) < y_mid where p_i < q_i.
bool optimal(const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d);

// Exact expectations over the union support. LM and ELM include both the
// real and the fake term:
//   DM  = sum_ij p_i q_j d(D_i, D_j)
//   LM  = sum_i p_i d(D_i, y) + sum_j q_j d(D_j, y)
//   EDM = d(E_p D, E_q D)
//   ELM = d(E_q D, y) + d(E_p D, y)
double exact_loss(LossFamily family, const DiscreteDist& p, const DiscreteDist& q, const TabularDiscriminator& d,
                  DistanceKind distance, double y_hat);

struct PropertyResult {
    std::string name;
    long trials = 0;
    long violations = 0;
    // Closest observed approach to a violation (meaning depends on the property).
    double worst_value = 0.0;
};

struct DivergenceReport {
    std::vector<PropertyResult> properties;

    long total_violations() const;
    bool ok() const { return total_violations() == 0; }
    std::string text() const;
    std::string csv() const;
};

inline constexpr double kZeroTolerance = 1e-9;

DivergenceReport verify_divergence_properties(int trials, int max_k, Rng& rng);

enum class SupportMode { Differing, Same };

struct EdmInstance {
    DiscreteDist p;
    DiscreteDist q;
    TabularDiscriminator d;
    double edm = 0.0;
};

// Searches for p != q and a discriminator satisfying optimal() with EDM = 0
// (within kZeroTolerance). Each candidate draws all but one offset at random
// and solves the expectation balance for the last one.
std::optional<EdmInstance> find_edm_support_counterexample(Rng& rng, long budget,
                                                           SupportMode mode = SupportMode::Differing);

} // namespace ganlab::divergence
