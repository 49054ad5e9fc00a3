#include <doctest.h>

#include <cmath>

#include "arcfit/generate.hpp"
#include "arcfit/lane_ingest.hpp"

using namespace arcfit;

namespace {

Eigen::Vector3d random_vec3(Rng& rng, double scale) {
    return {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
}

VehicleState random_state(Rng& rng) {
    VehicleState st;
    st.position = random_vec3(rng, 50.0);
    st.rotation = exp_so3(random_vec3(rng, 2.0));
    st.lane_left = {rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.5), rng.uniform(-0.2, 0.2)};
    st.lane_right = {rng.uniform(-0.5, 0.5), rng.uniform(-2.5, -1.0), rng.uniform(-0.2, 0.2)};
    Matrix9d raw;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) raw(i, j) = rng.uniform(-0.3, 0.3);
    st.joint_cov = repair_psd(raw * raw.transpose() * 0.1);
    return st;
}

}  // namespace

TEST_CASE("skew implements the cross product") {
    const Eigen::Vector3d z(0.0, 0.0, 1.0);
    const Eigen::Vector3d x(1.0, 0.0, 0.0);
    CHECK(((skew(z) * x) - Eigen::Vector3d(0.0, 1.0, 0.0)).norm() <= 1e-15);

    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d v = random_vec3(rng, 5.0);
        const Eigen::Vector3d w = random_vec3(rng, 5.0);
        CHECK((skew(v) * v).norm() <= 1e-12);
        CHECK(((skew(v) * w) - v.cross(w)).norm() <= 1e-12);
        CHECK((skew(v).transpose() + skew(v)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("exp_so3 basics") {
    CHECK((exp_so3(Eigen::Vector3d::Zero()) - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() == 0.0);

    const Eigen::Matrix3d quarter = exp_so3({0.0, 0.0, M_PI / 2.0});
    CHECK(((quarter * Eigen::Vector3d(1.0, 0.0, 0.0)) - Eigen::Vector3d(0.0, 1.0, 0.0)).norm() <=
          1e-12);

    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d phi = random_vec3(rng, 3.0);
        const Eigen::Matrix3d r = exp_so3(phi);
        CHECK(is_rotation(r, 1e-9));
        CHECK(((r * exp_so3(-phi)) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
    }

    // Small-angle series path.
    const Eigen::Matrix3d tiny = exp_so3({1e-9, -2e-9, 5e-10});
    CHECK(is_rotation(tiny, 1e-12));
}

TEST_CASE("lane_point offsets the vehicle position in the body frame") {
    VehicleState st;
    st.lane_left = {0.0, 1.8, 0.0};
    CHECK((lane_point(st, LaneSide::Left) - Eigen::Vector3d(0.0, 1.8, 0.0)).norm() <= 1e-15);

    st.rotation = exp_so3({0.0, 0.0, M_PI / 2.0});
    st.position = {5.0, -2.0, 1.0};
    const Eigen::Vector3d expected = st.position + Eigen::Vector3d(-1.8, 0.0, 0.0);
    CHECK((lane_point(st, LaneSide::Left) - expected).norm() <= 1e-12);

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const VehicleState s = random_state(rng);
        // Direct arithmetic oracle.
        Eigen::Vector3d oracle = s.position;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) oracle[r] += s.rotation(r, c) * s.lane_right[c];
        CHECK((lane_point(s, LaneSide::Right) - oracle).norm() <= 1e-12);
    }
}

TEST_CASE("lane_point is equivariant under world rotations") {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        VehicleState s = random_state(rng);
        const Eigen::Matrix3d q = exp_so3(random_vec3(rng, 3.0));
        VehicleState moved = s;
        moved.position = q * s.position;
        moved.rotation = q * s.rotation;
        CHECK((lane_point(moved, LaneSide::Left) - q * lane_point(s, LaneSide::Left)).norm() <=
              1e-10);
    }
}

TEST_CASE("lane_point_jacobian blocks") {
    VehicleState st;
    st.lane_left = {0.0, 1.0, 0.0};
    const Matrix3x9d jac = lane_point_jacobian(st, LaneSide::Left);

    // With R = I the rotation block is -skew(L).
    const Eigen::Matrix3d expected_mid = -skew(st.lane_left);
    CHECK((jac.block<3, 3>(0, 3) - expected_mid).cwiseAbs().maxCoeff() <= 1e-15);

    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const VehicleState s = random_state(rng);
        const Matrix3x9d j = lane_point_jacobian(s, LaneSide::Left);
        CHECK((j.block<3, 3>(0, 0) - s.rotation).cwiseAbs().maxCoeff() == 0.0);
        CHECK((j.block<3, 3>(0, 6) - s.rotation).cwiseAbs().maxCoeff() == 0.0);
        CHECK((j.block<3, 3>(0, 3) + s.rotation * skew(s.lane_left)).cwiseAbs().maxCoeff() <=
              1e-12);
    }
}

TEST_CASE("lane_point_jacobian matches central finite differences") {
    Rng rng(6);
    const double h = 1e-5;
    for (int i = 0; i < 100; ++i) {
        for (const LaneSide side : {LaneSide::Left, LaneSide::Right}) {
            const VehicleState s = random_state(rng);
            const Matrix3x9d jac = lane_point_jacobian(s, side);

            Matrix3x9d fd;
            for (int k = 0; k < 9; ++k) {
                Eigen::Vector3d delta = Eigen::Vector3d::Zero();
                delta[k % 3] = h;
                VehicleState plus = s, minus = s;
                if (k < 3) {
                    // Position perturbations live in the body frame.
                    plus.position += s.rotation * delta;
                    minus.position -= s.rotation * delta;
                } else if (k < 6) {
                    // Rotation perturbations apply on the right: R * Exp(dphi).
                    plus.rotation = s.rotation * exp_so3(delta);
                    minus.rotation = s.rotation * exp_so3(-delta);
                } else {
                    if (side == LaneSide::Left) {
                        plus.lane_left += delta;
                        minus.lane_left -= delta;
                    } else {
                        plus.lane_right += delta;
                        minus.lane_right -= delta;
                    }
                }
                fd.col(k) = (lane_point(plus, side) - lane_point(minus, side)) / (2.0 * h);
            }
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 9; ++c)
                    CHECK(std::abs(jac(r, c) - fd(r, c)) <= 1e-6 * std::max(1.0, std::abs(fd(r, c))));
        }
    }
}

TEST_CASE("propagate on the identity-covariance fixture") {
    VehicleState st;
    st.lane_left = {0.0, 1.0, 0.0};
    st.joint_cov = Matrix9d::Identity();
    const LanePoint3 lp = propagate(st, LaneSide::Left);

    // J J' = 2 I + skew(L) skew(L)' = diag(3, 2, 3) for L = (0, 1, 0).
    Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
    expected.diagonal() << 3.0, 2.0, 3.0;
    CHECK((lp.cov3 - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("propagate of a zero covariance is zero") {
    Rng rng(7);
    VehicleState st = random_state(rng);
    st.joint_cov = Matrix9d::Zero();
    CHECK(propagate(st, LaneSide::Right).cov3.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("propagate preserves positive semidefiniteness") {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const VehicleState s = random_state(rng);
        const LanePoint3 lp = propagate(s, LaneSide::Left);
        CHECK((lp.cov3 - lp.cov3.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(lp.cov3);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("to_planar extracts the upper-left covariance block") {
    LanePoint3 lp;
    lp.pos = {3.0, -4.0, 2.0};
    lp.cov3 = Eigen::Vector3d(4.0, 9.0, 1.0).asDiagonal();
    const DataPoint p = to_planar(lp, 7);
    CHECK(p.index == 7);
    CHECK(p.pos.x == doctest::Approx(3.0));
    CHECK(p.pos.y == doctest::Approx(-4.0));
    CHECK(p.cov.xx == doctest::Approx(4.0));
    CHECK(p.cov.yy == doctest::Approx(9.0));
    CHECK(p.cov.xy == doctest::Approx(0.0));

    // z correlations do not leak into the planar block.
    lp.cov3(0, 2) = lp.cov3(2, 0) = 0.7;
    const DataPoint q = to_planar(lp, 8);
    CHECK(q.cov.xx == doctest::Approx(4.0));
    CHECK(q.cov.xy == doctest::Approx(0.0));

    // A planar problem embedded in 3D round-trips exactly.
    LanePoint3 planar;
    planar.cov3 = Eigen::Matrix3d::Zero();
    planar.cov3(0, 0) = 2.0;
    planar.cov3(0, 1) = planar.cov3(1, 0) = 0.5;
    planar.cov3(1, 1) = 1.5;
    const DataPoint r = to_planar(planar, 1);
    CHECK(r.cov.xx == doctest::Approx(2.0));
    CHECK(r.cov.xy == doctest::Approx(0.5));
    CHECK(r.cov.yy == doctest::Approx(1.5));
}

TEST_CASE("repair_psd clamps negative eigenvalues") {
    Matrix9d raw = Matrix9d::Identity();
    raw(0, 0) = -2.0;
    raw(1, 2) = 0.3;  // asymmetric on purpose
    const Matrix9d fixed = repair_psd(raw);
    CHECK((fixed - fixed.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix9d> es(fixed);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("is_rotation rejects non-orthonormal matrices") {
    CHECK(is_rotation(Eigen::Matrix3d::Identity()));
    Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
    bad(0, 0) = 1.001;
    CHECK(!is_rotation(bad, 1e-6));
    Eigen::Matrix3d mirror = Eigen::Matrix3d::Identity();
    mirror(2, 2) = -1.0;  // determinant -1
    CHECK(!is_rotation(mirror));
}
