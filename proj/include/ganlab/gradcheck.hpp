#pragma once

// Randomized finite-difference checks of the autodiff engine on small MLPs
// wired into every discriminator objective and generator loss.

#include "ganlab/gan_losses.hpp"
#include "ganlab/random.hpp"

#include <string>
#include <vector>

namespace ganlab::gradcheck {

struct CheckResult {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool has_kinks = false;
    bool passed = false;
};

struct GradcheckReport {
    std::vector<CheckResult> checks;
    // Empty when every objective kind and every family x distance (x target)
    // appeared at least once.
    std::vector<std::string> missing_coverage;

    int failures() const;
    bool ok() const { return failures() == 0 && missing_coverage.empty(); }
    double worst() const;
    std::string text() const;
};

inline constexpr double kSmoothTolerance = 1e-4;
inline constexpr double kKinkTolerance = 1e-3;
inline constexpr double kPenaltyTolerance = 1e-3;

// Every generator loss spec that is meaningful for some objective:
// four classic losses, DM/EDM per distance, LM/ELM per distance and target.
std::vector<losses::GLossSpec> all_generator_losses();

// Discriminator objectives compatible with g, in a fixed order.
std::vector<losses::DObjective> objectives_for(const losses::GLossSpec& g);

// `compositions` random (D objective, generator loss, MLP pair) draws. Each
// checks d(D loss)/d(D params) and d(G loss)/d(G params) by central
// differences with step `eps`, resampling inputs that land near a kink.
GradcheckReport run_gradcheck(int compositions, Rng& rng, double eps = 1e-5);

// d(gradient penalty)/d(D params) on `discriminators` random networks, each
// with both sidings.
GradcheckReport run_penalty_gradcheck(int discriminators, Rng& rng, double eps = 1e-5);

} // namespace ganlab::gradcheck
