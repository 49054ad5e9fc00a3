#include "arcfit/svg.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>

#include "arcfit/io.hpp"

namespace arcfit {

namespace {

// All numbers go through one fixed-precision formatter so output bytes are
// reproducible.
void append(std::string& out, const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    out += buf;
}

struct Box {
    double min_x, min_y, max_x, max_y;
};

}  // namespace

std::string render_svg_text(std::span<const DataPoint> points, const ArcSpline* spline,
                            double confidence) {
    if (points.empty()) throw InputError("cannot render an empty dataset");

    Box box{points[0].pos.x, points[0].pos.y, points[0].pos.x, points[0].pos.y};
    for (const DataPoint& p : points) {
        box.min_x = std::min(box.min_x, p.pos.x);
        box.min_y = std::min(box.min_y, p.pos.y);
        box.max_x = std::max(box.max_x, p.pos.x);
        box.max_y = std::max(box.max_y, p.pos.y);
    }
    const double span = std::max({box.max_x - box.min_x, box.max_y - box.min_y, 1.0});
    const double margin = 0.05 * span;

    // World y flips to SVG y.
    const double vx = box.min_x - margin;
    const double vy = -box.max_y - margin;
    const double vw = box.max_x - box.min_x + 2.0 * margin;
    const double vh = box.max_y - box.min_y + 2.0 * margin;

    const double stroke = 0.002 * span;
    const double point_r = 0.004 * span;
    const double node_r = 0.008 * span;
    const double q = chi2_quantile_2dof(confidence);

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    append(out,
           "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.6f %.6f %.6f %.6f\">\n",
           vx, vy, vw, vh);

    // Confidence ellipses behind everything else.
    append(out, "<g fill=\"#9ecae1\" fill-opacity=\"0.25\" stroke=\"#9ecae1\" "
                "stroke-width=\"%.6f\">\n", 0.5 * stroke);
    for (const DataPoint& p : points) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p.cov.matrix());
        const double minor = std::sqrt(q * es.eigenvalues()[0]);
        const double major = std::sqrt(q * es.eigenvalues()[1]);
        const Eigen::Vector2d axis = es.eigenvectors().col(1);
        const double angle = -std::atan2(axis.y(), axis.x()) * 180.0 / M_PI;
        append(out,
               "<ellipse cx=\"0\" cy=\"0\" rx=\"%.6f\" ry=\"%.6f\" "
               "transform=\"translate(%.6f %.6f) rotate(%.6f)\"/>\n",
               major, minor, p.pos.x, -p.pos.y, angle);
    }
    out += "</g>\n";

    append(out, "<g fill=\"#333333\">\n");
    for (const DataPoint& p : points)
        append(out, "<circle cx=\"%.6f\" cy=\"%.6f\" r=\"%.6f\"/>\n", p.pos.x, -p.pos.y, point_r);
    out += "</g>\n";

    if (spline != nullptr && spline->segments() > 0) {
        append(out, "<g fill=\"none\" stroke=\"#d62728\" stroke-width=\"%.6f\">\n", 2.0 * stroke);
        for (int i = 0; i < spline->segments(); ++i) {
            const ArcParams params = spline->nodes.segment_params(i);
            if (spline->geometry[i]) {
                const ArcGeometry& g = *spline->geometry[i];
                const ArcAngles ang = arc_angles(params, g);
                const int large = std::abs(ang.sweep) > M_PI ? 1 : 0;
                const int flag = ang.sweep > 0.0 ? 0 : 1;  // flipped with the y-axis
                append(out, "<path d=\"M %.6f %.6f A %.6f %.6f 0 %d %d %.6f %.6f\"/>\n",
                       params.a1.x, -params.a1.y, g.radius, g.radius, large, flag, params.a2.x,
                       -params.a2.y);
            } else {
                append(out, "<path d=\"M %.6f %.6f L %.6f %.6f L %.6f %.6f\"/>\n", params.a1.x,
                       -params.a1.y, params.n.x, -params.n.y, params.a2.x, -params.a2.y);
            }
        }
        out += "</g>\n";

        append(out, "<g fill=\"#d62728\">\n");
        for (int i = 0; i <= spline->segments(); ++i) {
            const Point2 a = spline->nodes.arc(i);
            append(out, "<rect x=\"%.6f\" y=\"%.6f\" width=\"%.6f\" height=\"%.6f\"/>\n",
                   a.x - node_r, -a.y - node_r, 2.0 * node_r, 2.0 * node_r);
        }
        out += "</g>\n";

        append(out, "<g fill=\"#ffffff\" stroke=\"#2ca02c\" stroke-width=\"%.6f\">\n",
               1.5 * stroke);
        for (int i = 0; i < spline->segments(); ++i) {
            const Point2 nmid = spline->nodes.mid(i);
            append(out, "<circle cx=\"%.6f\" cy=\"%.6f\" r=\"%.6f\"/>\n", nmid.x, -nmid.y,
                   node_r);
        }
        out += "</g>\n";
    }

    out += "</svg>\n";
    return out;
}

void render_svg(const std::string& path, std::span<const DataPoint> points,
                const ArcSpline* spline, double confidence) {
    atomic_write_text(path, render_svg_text(points, spline, confidence));
}

}  // namespace arcfit
