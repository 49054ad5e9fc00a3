#include "arcfit/geometry.hpp"

#include <algorithm>

namespace arcfit {

std::pair<double, double> Cov2::eigenvalues() const {
    const double mean = 0.5 * (xx + yy);
    const double disc = std::hypot(0.5 * (xx - yy), xy);
    return {mean - disc, mean + disc};
}

Eigen::Matrix2d Cov2::matrix() const {
    Eigen::Matrix2d m;
    m << xx, xy, xy, yy;
    return m;
}

Eigen::Matrix2d Cov2::inverse() const {
    const double d = det();
    Eigen::Matrix2d m;
    m << yy / d, -xy / d, -xy / d, xx / d;
    return m;
}

Eigen::Matrix2d Cov2::inv_sqrt() const {
    // For SPD M: sqrt(M) = (M + s*I)/t with s = sqrt(det M), t = sqrt(tr M + 2s),
    // and det(M + s*I) = s*t^2, so M^(-1/2) = adj(M + s*I)/(s*t).
    const double s = std::sqrt(det());
    const double t = std::sqrt(trace() + 2.0 * s);
    const double denom = s * t;
    Eigen::Matrix2d m;
    m << (yy + s) / denom, -xy / denom, -xy / denom, (xx + s) / denom;
    return m;
}

CovRepair validate_cov(const Eigen::Matrix2d& raw, double sigma_min) {
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            if (!std::isfinite(raw(r, c))) throw NonFiniteValue(r, c);

    bool repaired = std::abs(raw(0, 1) - raw(1, 0)) > 1e-12;
    const double off = 0.5 * (raw(0, 1) + raw(1, 0));

    Cov2 sym{raw(0, 0), off, raw(1, 1)};
    auto [lo, hi] = sym.eigenvalues();
    const double floor = sigma_min * sigma_min;
    if (lo < floor) {
        repaired = true;
        // Clamp eigenvalues and rebuild V * diag * V'.
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym.matrix());
        Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
        Eigen::Matrix2d m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        sym = Cov2{m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1)};
        (void)hi;
    }
    return {sym, repaired};
}

double sagitta(const ArcParams& p) {
    const Point2 chord = p.a2 - p.a1;
    const double len = chord.norm();
    if (len < 1e-30) return 0.0;
    return std::abs(chord.cross(p.n - p.a1)) / len;
}

ArcGeometry circumcenter(const ArcParams& p, double s_min) {
    const double sag = sagitta(p);
    if (sag < s_min) throw DegenerateArc(sag);

    // Perpendicular-bisector system: u . x = u . (a1+a2)/2, v . x = v . (a1+n)/2.
    const Point2 u = p.a2 - p.a1;
    const Point2 v = p.n - p.a1;
    const double b1 = u.dot((p.a1 + p.a2) * 0.5);
    const double b2 = v.dot((p.a1 + p.n) * 0.5);
    const double det = u.cross(v);

    const Point2 center{(b1 * v.y - b2 * u.y) / det, (u.x * b2 - v.x * b1) / det};
    return {center, (p.a1 - center).norm()};
}

Point2 virtual_point(const ArcGeometry& g, const Point2& p) {
    const Point2 d = p - g.center;
    const double dist = d.norm();
    if (dist <= 1e-12) throw AmbiguousProjection();
    return g.center + d * (g.radius / dist);
}

double mahalanobis_sq(const Point2& r, const Cov2& c) {
    const double d = c.det();
    return (c.yy * r.x * r.x - 2.0 * c.xy * r.x * r.y + c.xx * r.y * r.y) / d;
}

}  // namespace arcfit
