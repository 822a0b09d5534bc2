#pragma once

#include "ganlab/autodiff.hpp"
#include "ganlab/random.hpp"

#include <filesystem>
#include <numbers>
#include <string>

namespace ganlab::data {

using ad::Matrix;

struct SwissRollConfig {
    double t_min = 1.5 * std::numbers::pi;
    double t_max = 4.5 * std::numbers::pi;
    double scale = 1.0 / 15.0;
    double noise_sd = 0.0;

    void validate() const;
};

// n x 2 finite coordinates.
class PointSet {
public:
    PointSet() : xy_(0, 2) { }
    explicit PointSet(Matrix xy);

    const Matrix& xy() const noexcept { return xy_; }
    Eigen::Index size() const noexcept { return xy_.rows(); }
    bool empty() const noexcept { return xy_.rows() == 0; }

private:
    Matrix xy_;
};

// scale * (t cos t, t sin t), noise free.
Eigen::RowVector2d swiss_roll_point(double t, const SwissRollConfig& cfg);

// Fresh samples on every call. Per sample: t ~ U(t_min, t_max), then, if
// noise_sd > 0, two normal draws for the x and y noise.
PointSet sample_swiss_roll(int n, const SwissRollConfig& cfg, Rng& rng);

// Mean nearest-neighbour distance from real to fake plus the mean from fake
// to real. Exact O(n_real * n_fake).
double nnrmse(const PointSet& real, const PointSet& fake);

// Standalone SVG 1.1 scatter over the fixed window [-1.1, 1.1]^2, real points
// orange, fake points green, with a legend and the NNRMSE of the two sets.
std::string render_scatter_svg(const PointSet& real, const PointSet& fake);
void scatter_svg(const PointSet& real, const PointSet& fake, const std::filesystem::path& path);

} // namespace ganlab::data
