#pragma once

#include <optional>
#include <span>
#include <vector>

#include "arcfit/cnls_solver.hpp"
#include "arcfit/models.hpp"

namespace arcfit {

/// Closed-form chi-squared quantile for 2 degrees of freedom: -2 ln(1 - p).
double chi2_quantile_2dof(double p);

enum class ReassociationMode { AcceptedStep, OuterRound };

struct FitConfig {
    double epsilon = 0.3;              // linearization threshold, meters
    AnchorConfig anchor;
    double l_min = 5.0;                // minimum arc length, meters
    double confidence = 0.99;          // chi-squared confidence level
    int invalid_count_threshold = 2;   // N: invalid points tolerated per segment
    int max_segments = 0;              // 0 = ceil(n/3)
    SolverSettings solver;
    JacobianMode jacobian_mode = JacobianMode::Analytic;
    ReassociationMode reassociation = ReassociationMode::AcceptedStep;

    double chi2_threshold() const { return chi2_quantile_2dof(confidence); }
};

/// Start angle and signed sweep of the arc from a1 to a2 passing through the
/// middle node. Angles use atan2 convention, counterclockwise positive.
struct ArcAngles {
    double start = 0.0;
    double sweep = 0.0;  // positive = counterclockwise

    double end() const { return start + sweep; }
};

ArcAngles arc_angles(const ArcParams& p, const ArcGeometry& g);

/// A multi-segment arc spline: shared-node parameterization plus cached
/// per-segment geometry and validation state.
struct ArcSpline {
    NodeVector nodes;
    Association assoc;
    std::vector<std::optional<ArcGeometry>> geometry;  // nullopt = degenerate
    std::vector<bool> segment_valid;
    std::vector<int> invalid_counts;

    int segments() const { return nodes.segments(); }
    double segment_length(int i) const;
    double total_length() const;
    int control_points() const { return 2 * segments() + 1; }
};

/// Build a spline from nodes and an association, caching circumscribed
/// geometry (degenerate segments cache nullopt).
ArcSpline make_spline(NodeVector nodes, Association assoc);

/// Angle gap between the tangent lines of segments j and j+1 at their shared
/// node, recomputed from cached geometry (radians, 0 = exactly tangent).
double junction_tangent_gap(const ArcSpline& spline, int junction);

struct SegmentValidation {
    int invalid_count = 0;
    int worst_ordinal = 0;       // 1-based ordinal of the worst point
    double worst_statistic = 0.0;
    bool valid = true;
    bool degenerate = false;
    std::vector<double> statistics;  // per owned point, ordinal order
};

struct ValidationReport {
    std::vector<SegmentValidation> segments;
    double threshold = 0.0;
    bool all_valid = true;

    int total_invalid() const;
    double pass_rate() const;
};

struct SingleArcResult {
    ArcParams params;
    SolveReport report;
};

/// Initial guess for a single arc: endpoints at the first/last data point,
/// middle node at the point of maximum perpendicular distance from the chord
/// (or laterally offset from the chord midpoint when the data is collinear).
ArcParams initial_single_arc(std::span<const DataPoint> points);

/// Fit one arc by constrained nonlinear least squares: endpoint anchors
/// (sigma_ac1 on both), measurement cost, middle-node equality constraint.
SingleArcResult fit_single_arc(std::span<const DataPoint> points, const FitConfig& cfg);

/// Standard error of the fitted radius, from the Gauss-Newton covariance of
/// the cost residuals at the solution propagated through the radius gradient.
double radius_std_error(const ArcParams& params, std::span<const DataPoint> points,
                        const FitConfig& cfg);

struct IndexInterval {
    int lb = 0;
    int ub = 0;  // inclusive, 1-based
};

/// Divide-and-conquer recursive linear approximation: split at the point of
/// maximum perpendicular distance from the chord until every interval is
/// within epsilon. Adjacent intervals share their boundary index.
std::vector<IndexInterval> recursive_linearize(std::span<const DataPoint> points, double epsilon);

/// Perpendicular distance from p to the line through a and b.
double chord_distance(const Point2& a, const Point2& b, const Point2& p);

/// Greedy forward merge of linearization intervals: extend each interval
/// along boundaries while a single-arc fit over it passes chi-squared
/// validation; emit on failure and continue from the last valid boundary.
std::vector<IndexInterval> merge_intervals(std::span<const DataPoint> points,
                                           const std::vector<IndexInterval>& intervals,
                                           const FitConfig& cfg);

/// Fit one arc per interval and join them with common nodes at interior
/// junctions (the mean of the two overlapping fitted arc nodes).
NodeVector init_multi_params(std::span<const DataPoint> points,
                             const std::vector<IndexInterval>& intervals, const FitConfig& cfg);

/// Nearest-point data association: interior boundaries at the data ordinal
/// closest to each interior arc node (ties to the lower ordinal), endpoints
/// pinned to 1 and n, then repaired to keep boundaries strictly increasing
/// with at least 3 points per segment.
Association associate(std::span<const DataPoint> points, const NodeVector& nodes);

/// Chi-squared validation: a point is invalid when the squared Mahalanobis
/// distance of its measurement residual exceeds the confidence threshold; a
/// segment is invalid when its invalid count exceeds the configured N.
ValidationReport validate(const ArcSpline& spline, std::span<const DataPoint> points,
                          const FitConfig& cfg);

/// Split the segment with the most invalid points (ties to the lower index):
/// the old middle node becomes an arc node and the two halves get middle
/// nodes at their circular-arc midpoints.
NodeVector split_worst(const ArcSpline& spline, const ValidationReport& report);

enum class FitVerdict { Valid, Capped };

const char* to_string(FitVerdict v);

struct FitRound {
    int segments = 0;
    double cost = 0.0;
    int invalid_total = 0;
};

struct MultiArcResult {
    ArcSpline spline;
    ValidationReport validation;
    std::vector<FitRound> history;
    FitVerdict verdict = FitVerdict::Valid;
    SolveReport last_report;
};

/// Two-phase multiple-arc approximation: recursive linearization, interval
/// merging and per-interval initialization, then rounds of
/// associate / solve / validate with worst-segment splitting until every
/// segment is valid or the segment cap is reached.
MultiArcResult fit_multi(std::span<const DataPoint> points, const FitConfig& cfg);

}  // namespace arcfit
