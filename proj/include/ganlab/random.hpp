#pragma once

#include <cstdint>
#include <random>

namespace ganlab {

// The single generator type used for every stochastic choice in the project.
using Rng = std::mt19937_64;

} // namespace ganlab
