#include "ganlab/data_metrics.hpp"

#include "ganlab/errors.hpp"

#include <cmath>

namespace ganlab::data {

void SwissRollConfig::validate() const
{
    if (!(t_min > 0.0 && t_max > t_min))
        throw ConfigError("swiss roll: need t_max > t_min > 0");
    if (!(scale > 0.0))
        throw ConfigError("swiss roll: scale must be positive");
    if (!(noise_sd >= 0.0))
        throw ConfigError("swiss roll: noise_sd must be non-negative");
}

PointSet::PointSet(Matrix xy)
  : xy_(std::move(xy))
{
    if (xy_.cols() != 2)
        throw ShapeError("point set: expected 2 columns, got " + std::to_string(xy_.cols()));
    if (!xy_.allFinite())
        throw DomainError("point set: non-finite coordinate");
}

Eigen::RowVector2d swiss_roll_point(double t, const SwissRollConfig& cfg)
{
    return {cfg.scale * t * std::cos(t), cfg.scale * t * std::sin(t)};
}

PointSet sample_swiss_roll(int n, const SwissRollConfig& cfg, Rng& rng)
{
    if (n < 1)
        throw ConfigError("sample_swiss_roll: n must be >= 1");
    cfg.validate();
    std::uniform_real_distribution<double> param(cfg.t_min, cfg.t_max);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix xy(n, 2);
    for (int i = 0; i < n; ++i) {
        xy.row(i) = swiss_roll_point(param(rng), cfg);
        if (cfg.noise_sd > 0.0) {
            xy(i, 0) += cfg.noise_sd * noise(rng);
            xy(i, 1) += cfg.noise_sd * noise(rng);
        }
    }
    return PointSet(std::move(xy));
}

} // namespace ganlab::data
