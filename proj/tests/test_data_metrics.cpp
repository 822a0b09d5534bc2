#include "ganlab/data_metrics.hpp"
#include "ganlab/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace ganlab;
using namespace ganlab::data;

namespace {

PointSet points(std::initializer_list<std::pair<double, double>> v)
{
    Matrix m(static_cast<Eigen::Index>(v.size()), 2);
    Eigen::Index i = 0;
    for (auto [x, y] : v) {
        m(i, 0) = x;
        m(i, 1) = y;
        ++i;
    }
    return PointSet(m);
}

PointSet random_points(int n, Rng& rng)
{
    std::normal_distribution<double> g(0.0, 0.5);
    Matrix m(n, 2);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = g(rng);
    return PointSet(m);
}

} // namespace

TEST_CASE("swiss roll point at the inner end")
{
    const Eigen::RowVector2d p = swiss_roll_point(1.5 * std::numbers::pi, SwissRollConfig{});
    CHECK(p(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(p(0)) < 1e-15);
    CHECK(p(1) == doctest::Approx(-0.31416).epsilon(1e-5));
    CHECK(p(1) == doctest::Approx(-1.5 * std::numbers::pi / 15));
}

TEST_CASE("swiss roll radii are uniform on [scale t_min, scale t_max]")
{
    const SwissRollConfig cfg;
    Rng rng(1);
    const PointSet s = sample_swiss_roll(10000, cfg, rng);
    std::vector<double> r(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        r[i] = s.xy().row(i).norm();
    const double lo = cfg.scale * cfg.t_min, hi = cfg.scale * cfg.t_max;
    CHECK(*std::max_element(r.begin(), r.end()) <= hi + 1e-12);
    CHECK(hi == doctest::Approx(0.942).epsilon(1e-3));

    // Kolmogorov-Smirnov statistic against the uniform CDF; 1.95/sqrt(n) is
    // the 0.1% critical value.
    std::sort(r.begin(), r.end());
    const double n = static_cast<double>(r.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double cdf = (r[i] - lo) / (hi - lo);
        ks = std::max({ks, (i + 1) / n - cdf, cdf - i / n});
    }
    CHECK(ks < 1.95 / std::sqrt(n));
}

TEST_CASE("swiss roll sampling is reproducible and validated")
{
    SwissRollConfig cfg;
    cfg.noise_sd = 0.02;
    Rng a(5), b(5);
    CHECK(sample_swiss_roll(500, cfg, a).xy() == sample_swiss_roll(500, cfg, b).xy());

    SwissRollConfig bad;
    bad.t_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SwissRollConfig{};
    bad.noise_sd = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(sample_swiss_roll(0, cfg, a), ConfigError);
}

TEST_CASE("PointSet rejects bad coordinates")
{
    CHECK_THROWS_AS(PointSet(Matrix::Zero(3, 3)), ShapeError);
    Matrix m = Matrix::Zero(2, 2);
    m(1, 1) = std::nan("");
    CHECK_THROWS_AS(PointSet{m}, DomainError);
}

TEST_CASE("nnrmse oracles")
{
    CHECK(nnrmse(points({{0, 0}}), points({{3, 4}})) == 10.0);
    Rng rng(3);
    const PointSet s = random_points(200, rng);
    CHECK(nnrmse(s, s) == 0.0);
    const PointSet t = random_points(150, rng);
    CHECK(nnrmse(s, t) == doctest::Approx(nnrmse(t, s)).epsilon(1e-15));
    CHECK(nnrmse(s, t) > 0.0);
    // Directional averages: real {0, 2} vs fake {0}: (0 + 2)/2 + 0 = 1.
    CHECK(nnrmse(points({{0, 0}, {2, 0}}), points({{0, 0}})) == 1.0);
    CHECK_THROWS_AS(nnrmse(PointSet{}, s), DomainError);
}

TEST_CASE("nnrmse is zero exactly for equal multisets of positions")
{
    const PointSet a = points({{0, 0}, {1, 1}, {1, 1}});
    const PointSet b = points({{1, 1}, {0, 0}});
    CHECK(nnrmse(a, b) == 0.0);
    CHECK(nnrmse(a, points({{1, 1}, {0, 1e-9}})) > 0.0);
}

TEST_CASE("nnrmse is invariant under rigid motions")
{
    Rng rng(8);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        const PointSet a = random_points(100, rng);
        const PointSet b = random_points(120, rng);
        const double th = angle(rng);
        Eigen::Matrix2d rot;
        rot << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
        const Eigen::RowVector2d off(shift(rng), shift(rng));
        const auto move = [&](const PointSet& p) {
            Matrix m = p.xy() * rot;
            m.rowwise() += off;
            return PointSet(m);
        };
        CHECK(std::abs(nnrmse(move(a), move(b)) - nnrmse(a, b)) < 1e-9);
    }
}

TEST_CASE("scatter svg")
{
    Rng rng(2);
    const PointSet real = sample_swiss_roll(1000, SwissRollConfig{}, rng);
    const PointSet fake = random_points(1000, rng);
    const std::string a = render_scatter_svg(real, fake);
    CHECK(a == render_scatter_svg(real, fake));
    CHECK(a.rfind("<?xml", 0) == 0);
    CHECK(a.find("</svg>") != std::string::npos);
    CHECK(std::count(a.begin(), a.end(), '\n') > 2000);
    CHECK_THROWS_AS(render_scatter_svg(real, PointSet{}), DomainError);
    CHECK_THROWS_AS(scatter_svg(real, fake, "/nonexistent-dir/x.svg"), IoError);
}
