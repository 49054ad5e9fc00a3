#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "arcfit/errors.hpp"

namespace arcfit {

/// Collinearity tolerance: minimum sagitta (perpendicular distance of the
/// middle node from the chord) below which an arc is treated as degenerate.
inline constexpr double kSagittaMin = 1e-6;  // meters

/// Covariance eigenvalue floor sigma: eigenvalues are clamped to >= kSigmaMin^2.
inline constexpr double kSigmaMin = 1e-3;  // meters

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2() = default;
    constexpr Point2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Point2 operator+(const Point2& r) const { return {x + r.x, y + r.y}; }
    constexpr Point2 operator-(const Point2& r) const { return {x - r.x, y - r.y}; }
    constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
    friend constexpr Point2 operator*(double s, const Point2& v) { return {v.x * s, v.y * s}; }

    constexpr double dot(const Point2& r) const { return x * r.x + y * r.y; }
    constexpr double cross(const Point2& r) const { return x * r.y - y * r.x; }
    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }

    Eigen::Vector2d vec() const { return {x, y}; }
    static Point2 from(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }
};

/// Counterclockwise perpendicular (rotation by +90 degrees).
constexpr Point2 perp(const Point2& v) { return {-v.y, v.x}; }

/// Symmetric 2x2 covariance in meters^2. Valid instances are symmetric with
/// eigenvalues >= kSigmaMin^2; untrusted input goes through validate_cov.
struct Cov2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    static Cov2 identity() { return {1.0, 0.0, 1.0}; }
    static Cov2 diagonal(double sxx, double syy) { return {sxx, 0.0, syy}; }
    static Cov2 isotropic(double s2) { return {s2, 0.0, s2}; }

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }

    /// Eigenvalues in ascending order.
    std::pair<double, double> eigenvalues() const;

    Eigen::Matrix2d matrix() const;
    Eigen::Matrix2d inverse() const;

    /// Symmetric inverse square root, closed form for 2x2 SPD matrices.
    Eigen::Matrix2d inv_sqrt() const;

    Cov2 scaled(double k) const { return {k * xx, k * xy, k * yy}; }
};

struct CovRepair {
    Cov2 cov;
    bool repaired = false;
};

/// Symmetrize and clamp eigenvalues to >= sigma_min^2.
/// Throws NonFiniteValue naming the offending entry.
CovRepair validate_cov(const Eigen::Matrix2d& raw, double sigma_min = kSigmaMin);

/// Three-point arc parameterization: two arc nodes and a middle node.
struct ArcParams {
    Point2 a1;
    Point2 a2;
    Point2 n;
};

struct ArcGeometry {
    Point2 center;
    double radius = 0.0;
};

/// Perpendicular distance of the middle node from the chord a1-a2.
double sagitta(const ArcParams& p);

/// Center and radius of the circle through the three points, computed from
/// the 2x2 perpendicular-bisector linear system. Throws DegenerateArc
/// (carrying the sagitta) when the points are collinear beyond s_min.
ArcGeometry circumcenter(const ArcParams& p, double s_min = kSagittaMin);

/// Radial projection of p onto the circle: the intersection of ray
/// center->p with the circle. Throws AmbiguousProjection when p is at
/// the center.
Point2 virtual_point(const ArcGeometry& g, const Point2& p);

/// Squared Mahalanobis distance r' * c^-1 * r.
double mahalanobis_sq(const Point2& r, const Cov2& c);

}  // namespace arcfit
