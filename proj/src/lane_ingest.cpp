#include "arcfit/lane_ingest.hpp"

namespace arcfit {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& phi) {
    const double angle = phi.norm();
    const Eigen::Matrix3d cross = skew(phi);
    if (angle < 1e-8) {
        return Eigen::Matrix3d::Identity() + cross + 0.5 * cross * cross;
    }
    const double s = std::sin(angle) / angle;
    const double c = (1.0 - std::cos(angle)) / (angle * angle);
    return Eigen::Matrix3d::Identity() + s * cross + c * cross * cross;
}

bool is_rotation(const Eigen::Matrix3d& rot, double tol) {
    const Eigen::Matrix3d gram = rot.transpose() * rot;
    return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rot.determinant() - 1.0) <= tol;
}

Matrix9d repair_psd(const Matrix9d& raw) {
    const Matrix9d sym = 0.5 * (raw + raw.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix9d> es(sym);
    const Eigen::Matrix<double, 9, 1> ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::Vector3d lane_point(const VehicleState& state, LaneSide side) {
    return state.position + state.rotation * state.lane(side);
}

Matrix3x9d lane_point_jacobian(const VehicleState& state, LaneSide side) {
    Matrix3x9d jac;
    jac.block<3, 3>(0, 0) = state.rotation;
    jac.block<3, 3>(0, 3) = -state.rotation * skew(state.lane(side));
    jac.block<3, 3>(0, 6) = state.rotation;
    return jac;
}

LanePoint3 propagate(const VehicleState& state, LaneSide side) {
    const Matrix3x9d jac = lane_point_jacobian(state, side);
    return {lane_point(state, side), jac * state.joint_cov * jac.transpose()};
}

DataPoint to_planar(const LanePoint3& lp, int index) {
    const Eigen::Matrix2d block = lp.cov3.topLeftCorner<2, 2>();
    return {Point2{lp.pos.x(), lp.pos.y()}, validate_cov(block).cov, index};
}

}  // namespace arcfit
