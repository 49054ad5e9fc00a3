#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "arcfit/geometry.hpp"

namespace arcfit {

/// An ordered 2D observation with its measurement covariance.
struct DataPoint {
    Point2 pos;
    Cov2 cov;
    int index = 0;  // 1-based ordinal within its dataset
};

/// Stacked optimization variables for m arc segments: arc nodes A_1..A_{m+1}
/// followed by middle nodes N_1..N_m, flattened as
/// [A_1.x, A_1.y, ..., A_{m+1}.x, A_{m+1}.y, N_1.x, N_1.y, ..., N_m.x, N_m.y].
/// The stacking order is part of the public contract: Jacobian columns
/// reference it.
class NodeVector {
public:
    explicit NodeVector(int segments)
        : m_(segments), arcs_(segments + 1), mids_(segments) {}

    static NodeVector from_vector(const Eigen::VectorXd& x);

    int segments() const { return m_; }
    int dim() const { return 2 * (2 * m_ + 1); }

    const Point2& arc(int i) const { return arcs_[i]; }          // i in [0, m]
    const Point2& mid(int i) const { return mids_[i]; }          // i in [0, m-1]
    void set_arc(int i, const Point2& p) { arcs_[i] = p; }
    void set_mid(int i, const Point2& p) { mids_[i] = p; }

    /// First flat column of arc node i / middle node i.
    int arc_col(int i) const { return 2 * i; }
    int mid_col(int i) const { return 2 * (m_ + 1) + 2 * i; }

    ArcParams segment_params(int i) const { return {arcs_[i], arcs_[i + 1], mids_[i]}; }

    Eigen::VectorXd to_vector() const;

private:
    int m_;
    std::vector<Point2> arcs_;
    std::vector<Point2> mids_;
};

/// Data-point index boundaries mapping points to segments. Boundaries are
/// 1-based data ordinals; segment i (0-based) owns ordinals
/// [ordinals[i], ordinals[i+1]] inclusive, so adjacent segments share their
/// boundary point.
struct Association {
    std::vector<int> ordinals;

    int segments() const { return static_cast<int>(ordinals.size()) - 1; }
    int first(int seg) const { return ordinals[seg]; }
    int last(int seg) const { return ordinals[seg + 1]; }
    int owned(int seg) const { return last(seg) - first(seg) + 1; }

    /// Throws IndexError unless ordinals are {1, ..., n} with strictly
    /// increasing boundaries separated by at least 2.
    void check(int n) const;
};

/// Anchor covariances: tight at the dataset endpoints, loose at interior
/// junctions so those nodes can drift with re-association.
struct AnchorConfig {
    Cov2 sigma_ac1 = Cov2::isotropic(0.1 * 0.1);      // endpoint anchors
    Cov2 sigma_ac2 = Cov2::isotropic(100.0 * 100.0);  // interior anchors
};

enum class BlockKind { WeightedCost, Equality, Inequality };

/// One stacked residual block. Weighted-cost blocks are pre-whitened:
/// values = Sigma^(-1/2) * r, so squaredNorm() equals the Mahalanobis cost.
struct ResidualBlock {
    Eigen::VectorXd values;
    Eigen::MatrixXd jacobian;  // rows = residual dim, cols = NodeVector dim
    BlockKind kind = BlockKind::WeightedCost;

    double cost() const { return values.squaredNorm(); }
};

enum class JacobianMode { Analytic, ForwardDifference };

/// Derivatives of the circumcenter and radius with respect to the three
/// defining points; building block for measurement and tangency Jacobians.
struct CircleDerivatives {
    ArcGeometry geom;
    Eigen::Matrix2d dc_da1, dc_da2, dc_dn;     // center w.r.t. a1, a2, n
    Eigen::RowVector2d dr_da1, dr_da2, dr_dn;  // radius w.r.t. a1, a2, n
};

CircleDerivatives circle_derivatives(const ArcParams& p);

/// Gradient of the fitted radius with respect to the flat single-segment
/// node vector [a1, a2, n] (1x6).
Eigen::RowVectorXd radius_gradient(const ArcParams& p);

/// Anchor residuals: endpoints whitened by sigma_ac1, interior arc nodes
/// whitened by sigma_ac2, stacked as [P_1 - A_1; P_n - A_{m+1};
/// P_Idx(2) - A_2; ...; P_Idx(m) - A_m].
ResidualBlock anchor_block(const NodeVector& nodes, std::span<const DataPoint> points,
                           const Association& assoc, const AnchorConfig& cfg);

/// Arc measurement residuals: for each segment and each owned point, the
/// whitened offset between the point and its radial projection onto the
/// fitted circle. Boundary points shared by two segments contribute to both.
ResidualBlock measurement_block(const NodeVector& nodes, std::span<const DataPoint> points,
                                const Association& assoc,
                                JacobianMode mode = JacobianMode::Analytic);

/// Values of measurement_block without the Jacobian (line-search path).
Eigen::VectorXd measurement_values(const NodeVector& nodes, std::span<const DataPoint> points,
                                   const Association& assoc);

/// Values of g1_constraint without the Jacobian.
Eigen::VectorXd g1_values(const NodeVector& nodes);

/// Equality constraint (dim m): the middle node lies on the perpendicular
/// bisector of its chord. Component i = (A_{i+1} - A_i) . (N_i - (A_i + A_{i+1})/2).
ResidualBlock middle_node_constraint(const NodeVector& nodes);

/// Equality constraint (dim 2m-2): tangent continuity at interior junctions,
/// written as the two inner products of the perpendicular/radial vector pairs
/// at each shared node. Empty block when m < 2.
ResidualBlock g1_constraint(const NodeVector& nodes, JacobianMode mode = JacobianMode::Analytic);

/// Inequality constraint (dim m), feasible when <= 0:
/// component i = 1 - (|A_i - N_i| + |N_i - A_{i+1}|) / l_min.
ResidualBlock min_length_constraint(const NodeVector& nodes, double l_min);

}  // namespace arcfit
