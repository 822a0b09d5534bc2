#include "ganlab/data_metrics.hpp"

#include "ganlab/errors.hpp"

#include <cmath>
#include <limits>

namespace ganlab::data {

namespace {

// Mean over rows of `from` of the distance to the nearest row of `to`.
double mean_nearest(const Matrix& from, const Matrix& to)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
        const double x = from(i, 0);
        const double y = from(i, 1);
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < to.rows(); ++j) {
            const double dx = x - to(j, 0);
            const double dy = y - to(j, 1);
            best = std::min(best, dx * dx + dy * dy);
        }
        total += std::sqrt(best);
    }
    return total / static_cast<double>(from.rows());
}

} // namespace

double nnrmse(const PointSet& real, const PointSet& fake)
{
    if (real.empty() || fake.empty())
        throw DomainError("nnrmse: point sets must be non-empty");
    return mean_nearest(real.xy(), fake.xy()) + mean_nearest(fake.xy(), real.xy());
}

} // namespace ganlab::data
