#include "arcfit/models.hpp"

#include <cmath>
#include <functional>

namespace arcfit {

namespace {

const DataPoint& point_at(std::span<const DataPoint> points, int ordinal) {
    return points[static_cast<size_t>(ordinal - 1)];
}

/// Forward-difference Jacobian with h = 1e-6 * max(1, |x_j|).
Eigen::MatrixXd forward_difference(
    const std::function<Eigen::VectorXd(const NodeVector&)>& eval, const NodeVector& nodes,
    Eigen::Index rows) {
    Eigen::VectorXd x = nodes.to_vector();
    const Eigen::VectorXd f0 = eval(nodes);
    Eigen::MatrixXd jac(rows, x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd xp = x;
        xp[j] += h;
        jac.col(j) = (eval(NodeVector::from_vector(xp)) - f0) / h;
    }
    return jac;
}

}  // namespace

Eigen::VectorXd measurement_values(const NodeVector& nodes, std::span<const DataPoint> points,
                                   const Association& assoc) {
    const int m = nodes.segments();
    const int n = static_cast<int>(points.size());
    if (assoc.segments() != m) throw IndexError("association/segment count mismatch");
    Eigen::Index rows = 0;
    for (int i = 0; i < m; ++i) {
        if (assoc.first(i) < 1 || assoc.last(i) > n)
            throw IndexError("segment " + std::to_string(i) + " boundaries out of range");
        if (assoc.owned(i) < 3) throw EmptySegment(i);
        rows += 2 * assoc.owned(i);
    }

    Eigen::VectorXd values(rows);
    Eigen::Index row = 0;
    for (int i = 0; i < m; ++i) {
        ArcGeometry geom;
        try {
            geom = circumcenter(nodes.segment_params(i));
        } catch (const DegenerateArc& e) {
            throw DegenerateArc(e.sagitta, i);
        }
        for (int j = assoc.first(i); j <= assoc.last(i); ++j, row += 2) {
            const DataPoint& pt = point_at(points, j);
            const Point2 r = virtual_point(geom, pt.pos) - pt.pos;
            values.segment<2>(row) = pt.cov.inv_sqrt() * r.vec();
        }
    }
    return values;
}

Eigen::VectorXd g1_values(const NodeVector& nodes) {
    const int m = nodes.segments();
    Eigen::VectorXd values(m < 2 ? 0 : 2 * (m - 1));
    if (m < 2) return values;

    std::vector<Point2> centers(m);
    for (int i = 0; i < m; ++i) {
        try {
            centers[i] = circumcenter(nodes.segment_params(i)).center;
        } catch (const DegenerateArc& e) {
            throw DegenerateArc(e.sagitta, i);
        }
    }
    for (int j = 0; j + 1 < m; ++j) {
        const Point2 shared = nodes.arc(j + 1);
        const Point2 c1 = centers[j];
        const Point2 c2 = centers[j + 1];
        const Point2 vb1{shared.y - c1.y, c1.x - shared.x};
        const Point2 vb2 = shared - c2;
        const Point2 vg1{shared.y - c2.y, c2.x - shared.x};
        const Point2 vg2 = shared - c1;
        values[2 * j] = vb1.dot(vb2);
        values[2 * j + 1] = vg1.dot(vg2);
    }
    return values;
}

NodeVector NodeVector::from_vector(const Eigen::VectorXd& x) {
    const int m = static_cast<int>((x.size() / 2 - 1) / 2);
    NodeVector nodes(m);
    for (int i = 0; i <= m; ++i) nodes.arcs_[i] = {x[2 * i], x[2 * i + 1]};
    const int base = 2 * (m + 1);
    for (int i = 0; i < m; ++i) nodes.mids_[i] = {x[base + 2 * i], x[base + 2 * i + 1]};
    return nodes;
}

Eigen::VectorXd NodeVector::to_vector() const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i <= m_; ++i) {
        x[2 * i] = arcs_[i].x;
        x[2 * i + 1] = arcs_[i].y;
    }
    const int base = 2 * (m_ + 1);
    for (int i = 0; i < m_; ++i) {
        x[base + 2 * i] = mids_[i].x;
        x[base + 2 * i + 1] = mids_[i].y;
    }
    return x;
}

void Association::check(int n) const {
    if (ordinals.size() < 2) throw IndexError("association needs at least 2 boundaries");
    if (ordinals.front() != 1)
        throw IndexError("association must start at ordinal 1, got " +
                         std::to_string(ordinals.front()));
    if (ordinals.back() != n)
        throw IndexError("association must end at ordinal " + std::to_string(n) + ", got " +
                         std::to_string(ordinals.back()));
    for (size_t i = 0; i + 1 < ordinals.size(); ++i) {
        if (ordinals[i + 1] - ordinals[i] < 2)
            throw IndexError("association boundaries " + std::to_string(ordinals[i]) + ", " +
                             std::to_string(ordinals[i + 1]) + " leave segment " +
                             std::to_string(i) + " with fewer than 3 points");
    }
}

CircleDerivatives circle_derivatives(const ArcParams& p) {
    CircleDerivatives out;
    out.geom = circumcenter(p);

    const Point2 u = p.a2 - p.a1;
    const Point2 v = p.n - p.a1;
    Eigen::Matrix2d M;
    M << u.x, u.y, v.x, v.y;
    const Eigen::Matrix2d Minv = M.inverse();

    // Perturbing a node shifts the bisector system M*c = b; each derivative
    // is rank one: (Minv * e) * (difference vector)'.
    const Eigen::Vector2d w1 = Minv * Eigen::Vector2d(1.0, 1.0);
    const Eigen::Vector2d e1 = Minv.col(0);
    const Eigen::Vector2d e2 = Minv.col(1);
    const Eigen::Vector2d c = out.geom.center.vec();
    out.dc_da1 = w1 * (c - p.a1.vec()).transpose();
    out.dc_da2 = e1 * (p.a2.vec() - c).transpose();
    out.dc_dn = e2 * (p.n.vec() - c).transpose();

    const Eigen::RowVector2d radial = (p.a1.vec() - c).transpose() / out.geom.radius;
    out.dr_da1 = radial * (Eigen::Matrix2d::Identity() - out.dc_da1);
    out.dr_da2 = -radial * out.dc_da2;
    out.dr_dn = -radial * out.dc_dn;
    return out;
}

Eigen::RowVectorXd radius_gradient(const ArcParams& p) {
    const CircleDerivatives d = circle_derivatives(p);
    Eigen::RowVectorXd g(6);
    g << d.dr_da1, d.dr_da2, d.dr_dn;
    return g;
}

ResidualBlock anchor_block(const NodeVector& nodes, std::span<const DataPoint> points,
                           const Association& assoc, const AnchorConfig& cfg) {
    const int m = nodes.segments();
    const int n = static_cast<int>(points.size());
    if (assoc.segments() != m)
        throw IndexError("association has " + std::to_string(assoc.segments()) +
                         " segments, nodes have " + std::to_string(m));
    for (int ord : assoc.ordinals)
        if (ord < 1 || ord > n)
            throw IndexError("association boundary " + std::to_string(ord) + " out of range 1.." +
                             std::to_string(n));

    ResidualBlock block;
    block.kind = BlockKind::WeightedCost;
    block.values.resize(2 * (m + 1));
    block.jacobian = Eigen::MatrixXd::Zero(2 * (m + 1), nodes.dim());

    const Eigen::Matrix2d w1 = cfg.sigma_ac1.inv_sqrt();
    const Eigen::Matrix2d w2 = cfg.sigma_ac2.inv_sqrt();

    auto emit = [&](int row, const Eigen::Matrix2d& w, int ordinal, int arc_index) {
        const Eigen::Vector2d r =
            point_at(points, ordinal).pos.vec() - nodes.arc(arc_index).vec();
        block.values.segment<2>(row) = w * r;
        block.jacobian.block<2, 2>(row, nodes.arc_col(arc_index)) = -w;
    };

    emit(0, w1, assoc.first(0), 0);
    emit(2, w1, assoc.last(m - 1), m);
    for (int i = 1; i < m; ++i) emit(2 + 2 * i, w2, assoc.ordinals[i], i);
    return block;
}

ResidualBlock measurement_block(const NodeVector& nodes, std::span<const DataPoint> points,
                                const Association& assoc, JacobianMode mode) {
    const int m = nodes.segments();
    const int n = static_cast<int>(points.size());
    if (assoc.segments() != m) throw IndexError("association/segment count mismatch");

    Eigen::Index rows = 0;
    for (int i = 0; i < m; ++i) {
        if (assoc.first(i) < 1 || assoc.last(i) > n)
            throw IndexError("segment " + std::to_string(i) + " boundaries out of range");
        if (assoc.owned(i) < 3) throw EmptySegment(i);
        rows += 2 * assoc.owned(i);
    }

    ResidualBlock block;
    block.kind = BlockKind::WeightedCost;
    block.values.resize(rows);
    const bool analytic = mode == JacobianMode::Analytic;
    if (analytic) block.jacobian = Eigen::MatrixXd::Zero(rows, nodes.dim());

    Eigen::Index row = 0;
    for (int i = 0; i < m; ++i) {
        CircleDerivatives cd;
        try {
            cd = circle_derivatives(nodes.segment_params(i));
        } catch (const DegenerateArc& e) {
            throw DegenerateArc(e.sagitta, i);
        }
        const Eigen::Vector2d c = cd.geom.center.vec();
        const double rad = cd.geom.radius;

        for (int j = assoc.first(i); j <= assoc.last(i); ++j, row += 2) {
            const DataPoint& pt = point_at(points, j);
            const Eigen::Vector2d d = pt.pos.vec() - c;
            const double dist = d.norm();
            if (dist <= 1e-12) throw AmbiguousProjection();
            const Eigen::Matrix2d w = pt.cov.inv_sqrt();
            const double ratio = rad / dist;
            block.values.segment<2>(row) = w * ((ratio - 1.0) * d);

            if (!analytic) continue;

            // r = (rad/dist - 1) * d with d = P - c:
            //   dr = u*drad + (rad/dist)*u*(u' dc) - (rad/dist - 1)*dc,  u = d/dist.
            const Eigen::Vector2d u = d / dist;
            auto fill = [&](int col, const Eigen::Matrix2d& dc, const Eigen::RowVector2d& drad) {
                const Eigen::Matrix2d dres =
                    u * drad + ratio * (u * (u.transpose() * dc)) - (ratio - 1.0) * dc;
                block.jacobian.block<2, 2>(row, col) = w * dres;
            };
            fill(nodes.arc_col(i), cd.dc_da1, cd.dr_da1);
            fill(nodes.arc_col(i + 1), cd.dc_da2, cd.dr_da2);
            fill(nodes.mid_col(i), cd.dc_dn, cd.dr_dn);
        }
    }

    if (!analytic) {
        block.jacobian = forward_difference(
            [&points, &assoc](const NodeVector& nv) {
                return measurement_values(nv, points, assoc);
            },
            nodes, rows);
    }
    return block;
}

ResidualBlock middle_node_constraint(const NodeVector& nodes) {
    const int m = nodes.segments();
    ResidualBlock block;
    block.kind = BlockKind::Equality;
    block.values.resize(m);
    block.jacobian = Eigen::MatrixXd::Zero(m, nodes.dim());

    for (int i = 0; i < m; ++i) {
        const Point2 a = nodes.arc(i);
        const Point2 b = nodes.arc(i + 1);
        const Point2 nmid = nodes.mid(i);
        const Point2 chord = b - a;
        const Point2 offset = nmid - (a + b) * 0.5;
        block.values[i] = chord.dot(offset);

        block.jacobian.block<1, 2>(i, nodes.arc_col(i)) =
            (-offset.vec() - 0.5 * chord.vec()).transpose();
        block.jacobian.block<1, 2>(i, nodes.arc_col(i + 1)) =
            (offset.vec() - 0.5 * chord.vec()).transpose();
        block.jacobian.block<1, 2>(i, nodes.mid_col(i)) = chord.vec().transpose();
    }
    return block;
}

ResidualBlock g1_constraint(const NodeVector& nodes, JacobianMode mode) {
    const int m = nodes.segments();
    ResidualBlock block;
    block.kind = BlockKind::Equality;
    const Eigen::Index rows = m < 2 ? 0 : 2 * (m - 1);
    block.values.resize(rows);
    block.jacobian = Eigen::MatrixXd::Zero(rows, nodes.dim());
    if (m < 2) return block;

    const bool analytic = mode == JacobianMode::Analytic;
    std::vector<CircleDerivatives> circles(m);
    for (int i = 0; i < m; ++i) {
        try {
            circles[i] = circle_derivatives(nodes.segment_params(i));
        } catch (const DegenerateArc& e) {
            throw DegenerateArc(e.sagitta, i);
        }
    }

    for (int j = 0; j + 1 < m; ++j) {
        const Point2 shared = nodes.arc(j + 1);
        const Point2 c1 = circles[j].geom.center;
        const Point2 c2 = circles[j + 1].geom.center;

        // Perpendicular/radial vector pairs at the shared node; both inner
        // products vanish exactly when the circles are mutually tangent there.
        const Point2 vb1{shared.y - c1.y, c1.x - shared.x};
        const Point2 vb2 = shared - c2;
        const Point2 vg1{shared.y - c2.y, c2.x - shared.x};
        const Point2 vg2 = shared - c1;
        block.values[2 * j] = vb1.dot(vb2);
        block.values[2 * j + 1] = vg1.dot(vg2);

        if (!analytic) continue;

        // With w = shared - c1, u = shared - c2 the first component is
        // cross(u, w); differentiate through both circumcenters.
        const Eigen::Vector2d w = (shared - c1).vec();
        const Eigen::Vector2d u = (shared - c2).vec();
        const Eigen::RowVector2d perp_r_w(w.y(), -w.x());   // cross(a, w) = a . perp_r(w)
        const Eigen::RowVector2d perp_l_u(-u.y(), u.x());   // cross(u, b) = b . perp_l(u)

        Eigen::RowVectorXd drow = Eigen::RowVectorXd::Zero(nodes.dim());
        auto add = [&](int col, const Eigen::RowVector2d& g) {
            drow.segment<2>(col) += g;
        };
        // Direct dependence on the shared node.
        add(nodes.arc_col(j + 1), perp_r_w + perp_l_u);
        // Through c1 (segment j nodes).
        add(nodes.arc_col(j), -perp_l_u * circles[j].dc_da1);
        add(nodes.arc_col(j + 1), -perp_l_u * circles[j].dc_da2);
        add(nodes.mid_col(j), -perp_l_u * circles[j].dc_dn);
        // Through c2 (segment j+1 nodes).
        add(nodes.arc_col(j + 1), -perp_r_w * circles[j + 1].dc_da1);
        add(nodes.arc_col(j + 2), -perp_r_w * circles[j + 1].dc_da2);
        add(nodes.mid_col(j + 1), -perp_r_w * circles[j + 1].dc_dn);

        block.jacobian.row(2 * j) = drow;
        block.jacobian.row(2 * j + 1) = -drow;
    }

    if (!analytic) {
        block.jacobian = forward_difference(
            [](const NodeVector& nv) { return g1_values(nv); }, nodes, rows);
    }
    return block;
}

ResidualBlock min_length_constraint(const NodeVector& nodes, double l_min) {
    const int m = nodes.segments();
    ResidualBlock block;
    block.kind = BlockKind::Inequality;
    block.values.resize(m);
    block.jacobian = Eigen::MatrixXd::Zero(m, nodes.dim());

    for (int i = 0; i < m; ++i) {
        const Point2 a = nodes.arc(i);
        const Point2 b = nodes.arc(i + 1);
        const Point2 nmid = nodes.mid(i);
        const double len1 = std::max((a - nmid).norm(), 1e-30);
        const double len2 = std::max((nmid - b).norm(), 1e-30);
        block.values[i] = 1.0 - (len1 + len2) / l_min;

        const Eigen::RowVector2d u1 = (a - nmid).vec().transpose() / len1;
        const Eigen::RowVector2d u2 = (nmid - b).vec().transpose() / len2;
        block.jacobian.block<1, 2>(i, nodes.arc_col(i)) = -u1 / l_min;
        block.jacobian.block<1, 2>(i, nodes.arc_col(i + 1)) = u2 / l_min;
        block.jacobian.block<1, 2>(i, nodes.mid_col(i)) = (u1 - u2) / l_min;
    }
    return block;
}

}  // namespace arcfit
