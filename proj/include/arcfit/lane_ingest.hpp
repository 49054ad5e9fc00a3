#pragma once

#include <Eigen/Dense>

#include "arcfit/models.hpp"

namespace arcfit {

using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Matrix3x9d = Eigen::Matrix<double, 3, 9>;

enum class LaneSide { Left, Right };

/// Skew-symmetric cross-product matrix: skew(v) * w = v x w.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Exponential map from a rotation vector to SO(3) (Rodrigues formula,
/// second-order series below 1e-8 radians).
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& phi);

/// True iff R'R = I and det(R) = 1 within tol.
bool is_rotation(const Eigen::Matrix3d& rot, double tol = 1e-9);

/// Symmetrize and clamp eigenvalues to >= 0.
Matrix9d repair_psd(const Matrix9d& raw);

/// One vehicle pose with body-frame lane measurements and the joint
/// covariance over (dp, dphi, dL) blocks; dphi is a rotation-vector
/// perturbation applied as rot * exp_so3(dphi).
struct VehicleState {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d lane_left = Eigen::Vector3d::Zero();
    Eigen::Vector3d lane_right = Eigen::Vector3d::Zero();
    Matrix9d joint_cov = Matrix9d::Zero();

    const Eigen::Vector3d& lane(LaneSide side) const {
        return side == LaneSide::Left ? lane_left : lane_right;
    }
};

struct LanePoint3 {
    Eigen::Vector3d pos = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov3 = Eigen::Matrix3d::Zero();
};

/// World-frame lane point: p + R * L.
Eigen::Vector3d lane_point(const VehicleState& state, LaneSide side);

/// 3x9 Jacobian of lane_point with respect to (dp, dphi, dL):
/// [R, -R * skew(L), R].
Matrix3x9d lane_point_jacobian(const VehicleState& state, LaneSide side);

/// First-order covariance propagation: cov3 = J * joint_cov * J'.
LanePoint3 propagate(const VehicleState& state, LaneSide side);

/// Planar reduction: keep (x, y) and the upper-left 2x2 covariance block,
/// repaired through validate_cov.
DataPoint to_planar(const LanePoint3& lp, int index);

}  // namespace arcfit
