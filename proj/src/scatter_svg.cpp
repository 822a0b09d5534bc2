#include "ganlab/data_metrics.hpp"

#include "ganlab/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ganlab::data {

namespace {

constexpr double kExtent = 1.1;
constexpr double kCanvas = 600.0;
constexpr double kMargin = 20.0;
constexpr double kPlot = kCanvas - 2.0 * kMargin;
constexpr const char* kRealColor = "#ff7f0e";
constexpr const char* kFakeColor = "#2ca02c";

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

double to_px_x(double x) { return kMargin + (x + kExtent) / (2.0 * kExtent) * kPlot; }
double to_px_y(double y) { return kMargin + (kExtent - y) / (2.0 * kExtent) * kPlot; }

void emit_points(std::ostringstream& svg, const Matrix& xy, const char* color, const char* id)
{
    svg << "  <g id=\"" << id << "\" fill=\"" << color << "\" fill-opacity=\"0.6\" clip-path=\"url(#window)\">\n";
    for (Eigen::Index i = 0; i < xy.rows(); ++i)
        svg << "    <circle cx=\"" << num(to_px_x(xy(i, 0))) << "\" cy=\"" << num(to_px_y(xy(i, 1)))
            << "\" r=\"2\"/>\n";
    svg << "  </g>\n";
}

} // namespace

std::string render_scatter_svg(const PointSet& real, const PointSet& fake)
{
    if (real.empty() || fake.empty())
        throw DomainError("scatter_svg: point sets must be non-empty");

    char score[64];
    std::snprintf(score, sizeof score, "NNRMSE = %.4f", nnrmse(real, fake));

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kCanvas << "\" height=\""
        << kCanvas << "\" viewBox=\"0 0 " << kCanvas << ' ' << kCanvas << "\">\n"
        << "  <defs>\n"
        << "    <clipPath id=\"window\"><rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot
        << "\" height=\"" << kPlot << "\"/></clipPath>\n"
        << "  </defs>\n"
        << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot << "\" height=\"" << kPlot
        << "\" fill=\"none\" stroke=\"#999999\"/>\n";
    emit_points(svg, real.xy(), kRealColor, "real");
    emit_points(svg, fake.xy(), kFakeColor, "fake");
    svg << "  <g id=\"legend\" font-family=\"sans-serif\" font-size=\"14\">\n"
        << "    <circle cx=\"40\" cy=\"40\" r=\"5\" fill=\"" << kRealColor << "\"/>\n"
        << "    <text x=\"52\" y=\"45\">real (" << real.size() << ")</text>\n"
        << "    <circle cx=\"40\" cy=\"62\" r=\"5\" fill=\"" << kFakeColor << "\"/>\n"
        << "    <text x=\"52\" y=\"67\">fake (" << fake.size() << ")</text>\n"
        << "    <text x=\"40\" y=\"90\">" << score << "</text>\n"
        << "  </g>\n"
        << "</svg>\n";
    return svg.str();
}

void scatter_svg(const PointSet& real, const PointSet& fake, const std::filesystem::path& path)
{
    const std::string doc = render_scatter_svg(real, fake);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc;
    if (!out)
        throw IoError("failed writing " + path.string());
}

} // namespace ganlab::data
