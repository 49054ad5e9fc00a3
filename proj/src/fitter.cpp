#include "arcfit/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace arcfit {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_ccw(double angle) {
    double a = std::fmod(angle, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

Eigen::VectorXd stack(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

bool usable(const SolveReport& report) {
    return report.termination == Termination::Converged ||
           report.termination == Termination::MaxIterations;
}

std::span<const DataPoint> slice(std::span<const DataPoint> points, int lb, int ub) {
    return points.subspan(static_cast<size_t>(lb - 1), static_cast<size_t>(ub - lb + 1));
}

/// Single-arc CNLS problem: [anchor; measurement] cost, middle-node equality.
CnlsProblem single_arc_problem(std::span<const DataPoint> points, const FitConfig& cfg) {
    const int n = static_cast<int>(points.size());
    auto assoc = std::make_shared<Association>(Association{{1, n}});

    CnlsProblem p;
    p.dim = 6;
    p.residuals = [points, assoc, cfg](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(anchor_block(nv, points, *assoc, cfg.anchor).values,
                     measurement_values(nv, points, *assoc));
    };
    p.residual_jacobian = [points, assoc, cfg](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(anchor_block(nv, points, *assoc, cfg.anchor).jacobian,
                     measurement_block(nv, points, *assoc, cfg.jacobian_mode).jacobian);
    };
    p.eq = [](const Eigen::VectorXd& x) {
        return middle_node_constraint(NodeVector::from_vector(x)).values;
    };
    p.eq_jacobian = [](const Eigen::VectorXd& x) {
        return middle_node_constraint(NodeVector::from_vector(x)).jacobian;
    };
    return p;
}

/// Geometric initialization per association interval, with shared boundary
/// points as the common nodes.
NodeVector geometric_init(std::span<const DataPoint> points, const Association& assoc) {
    const int m = assoc.segments();
    NodeVector nodes(m);
    std::vector<ArcParams> fits(m);
    for (int i = 0; i < m; ++i)
        fits[i] = initial_single_arc(slice(points, assoc.first(i), assoc.last(i)));
    nodes.set_arc(0, fits[0].a1);
    nodes.set_arc(m, fits[m - 1].a2);
    for (int i = 1; i < m; ++i)
        nodes.set_arc(i, (fits[i - 1].a2 + fits[i].a1) * 0.5);
    for (int i = 0; i < m; ++i) nodes.set_mid(i, fits[i].n);
    return nodes;
}

}  // namespace

double chi2_quantile_2dof(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("confidence must be in (0, 1)");
    return -2.0 * std::log(1.0 - p);
}

const char* to_string(FitVerdict v) {
    return v == FitVerdict::Valid ? "valid" : "capped";
}

ArcAngles arc_angles(const ArcParams& p, const ArcGeometry& g) {
    const double start = std::atan2(p.a1.y - g.center.y, p.a1.x - g.center.x);
    const double theta_n = std::atan2(p.n.y - g.center.y, p.n.x - g.center.x);
    const double theta_b = std::atan2(p.a2.y - g.center.y, p.a2.x - g.center.x);

    // Traverse in the direction that passes the middle node.
    const double ccw_n = wrap_ccw(theta_n - start);
    const double ccw_b = wrap_ccw(theta_b - start);
    if (ccw_n <= ccw_b) return {start, ccw_b};
    return {start, -wrap_ccw(start - theta_b)};
}

double ArcSpline::segment_length(int i) const {
    if (geometry[i]) {
        const ArcAngles ang = arc_angles(nodes.segment_params(i), *geometry[i]);
        return geometry[i]->radius * std::abs(ang.sweep);
    }
    // Degenerate segment: fall back to the chord path through the middle node.
    const ArcParams p = nodes.segment_params(i);
    return (p.a1 - p.n).norm() + (p.n - p.a2).norm();
}

double ArcSpline::total_length() const {
    double sum = 0.0;
    for (int i = 0; i < segments(); ++i) sum += segment_length(i);
    return sum;
}

ArcSpline make_spline(NodeVector nodes, Association assoc) {
    ArcSpline spline{std::move(nodes), std::move(assoc), {}, {}, {}};
    const int m = spline.nodes.segments();
    spline.geometry.resize(m);
    spline.segment_valid.assign(m, true);
    spline.invalid_counts.assign(m, 0);
    for (int i = 0; i < m; ++i) {
        try {
            spline.geometry[i] = circumcenter(spline.nodes.segment_params(i));
        } catch (const DegenerateArc&) {
            spline.geometry[i] = std::nullopt;
        }
    }
    return spline;
}

double junction_tangent_gap(const ArcSpline& spline, int junction) {
    const auto& g1 = spline.geometry[junction];
    const auto& g2 = spline.geometry[junction + 1];
    if (!g1 || !g2) return M_PI / 2.0;
    const Point2 shared = spline.nodes.arc(junction + 1);
    const Point2 r1 = shared - g1->center;
    const Point2 r2 = shared - g2->center;
    const double denom = r1.norm() * r2.norm();
    if (denom < 1e-30) return M_PI / 2.0;
    // Tangents are perpendicular to the radius vectors; the angle between the
    // tangent lines equals the angle between the radius lines.
    const double s = std::abs(r1.cross(r2)) / denom;
    return std::asin(std::min(1.0, s));
}

int ValidationReport::total_invalid() const {
    int sum = 0;
    for (const auto& s : segments) sum += s.invalid_count;
    return sum;
}

double ValidationReport::pass_rate() const {
    int owned = 0;
    int invalid = 0;
    for (const auto& s : segments) {
        owned += s.degenerate ? s.invalid_count : static_cast<int>(s.statistics.size());
        invalid += s.invalid_count;
    }
    return owned == 0 ? 1.0 : 1.0 - static_cast<double>(invalid) / owned;
}

ArcParams initial_single_arc(std::span<const DataPoint> points) {
    const size_t n = points.size();
    if (n < 2) throw InputError("need at least 2 points to seed an arc");
    const Point2 first = points.front().pos;
    const Point2 last = points.back().pos;
    const Point2 chord = last - first;
    const double chord_len = chord.norm();
    if (chord_len < kSagittaMin) throw DegenerateArc(0.0);

    double best_dist = 0.0;
    size_t best = 0;
    double signed_sum = 0.0;
    for (size_t i = 1; i + 1 < n; ++i) {
        const double d = chord_distance(first, last, points[i].pos);
        if (d > best_dist) {
            best_dist = d;
            best = i;
        }
        signed_sum += chord.cross(points[i].pos - first);
    }

    if (best_dist >= kSagittaMin) return {first, last, points[best].pos};

    // Collinear data: offset the chord midpoint laterally toward the side
    // with the greater summed signed deviation.
    const Point2 lateral = perp(chord) * (1.0 / chord_len);
    const double offset = std::max(10.0 * kSagittaMin, 0.01 * chord_len);
    const double side = signed_sum >= 0.0 ? 1.0 : -1.0;
    return {first, last, (first + last) * 0.5 + lateral * (side * offset)};
}

SingleArcResult fit_single_arc(std::span<const DataPoint> points, const FitConfig& cfg) {
    if (points.size() < 3) throw InputError("need >= 3 points");
    const ArcParams init = initial_single_arc(points);
    NodeVector nodes(1);
    nodes.set_arc(0, init.a1);
    nodes.set_arc(1, init.a2);
    nodes.set_mid(0, init.n);

    const CnlsProblem problem = single_arc_problem(points, cfg);
    const SolveReport report = solve(problem, nodes.to_vector(), cfg.solver);
    const NodeVector out = NodeVector::from_vector(report.x);
    return {out.segment_params(0), report};
}

double radius_std_error(const ArcParams& params, std::span<const DataPoint> points,
                        const FitConfig& cfg) {
    NodeVector nodes(1);
    nodes.set_arc(0, params.a1);
    nodes.set_arc(1, params.a2);
    nodes.set_mid(0, params.n);
    const Association assoc{{1, static_cast<int>(points.size())}};

    const Eigen::MatrixXd jac =
        stack(anchor_block(nodes, points, assoc, cfg.anchor).jacobian,
              measurement_block(nodes, points, assoc).jacobian);
    const Eigen::RowVectorXd g = radius_gradient(params);
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd sol = normal.ldlt().solve(g.transpose());
    return std::sqrt(std::max(0.0, g.dot(sol)));
}

double chord_distance(const Point2& a, const Point2& b, const Point2& p) {
    const Point2 d = b - a;
    const double len = d.norm();
    if (len < 1e-30) return (p - a).norm();
    return std::abs(d.cross(p - a)) / len;
}

namespace {

void linearize_recurse(std::span<const DataPoint> points, int lb, int ub, double epsilon,
                       std::vector<IndexInterval>& out) {
    const Point2 a = points[lb - 1].pos;
    const Point2 b = points[ub - 1].pos;
    double max_dist = -1.0;
    int idx = lb;
    for (int i = lb; i <= ub; ++i) {
        const double d = chord_distance(a, b, points[i - 1].pos);
        if (d > max_dist) {
            max_dist = d;
            idx = i;
        }
    }
    if (max_dist > epsilon && idx > lb && idx < ub) {
        linearize_recurse(points, lb, idx, epsilon, out);
        linearize_recurse(points, idx, ub, epsilon, out);
    } else {
        out.push_back({lb, ub});
    }
}

}  // namespace

std::vector<IndexInterval> recursive_linearize(std::span<const DataPoint> points,
                                               double epsilon) {
    if (points.size() < 2) throw InputError("need >= 2 points to linearize");
    if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
    std::vector<IndexInterval> out;
    linearize_recurse(points, 1, static_cast<int>(points.size()), epsilon, out);
    return out;
}

namespace {

bool interval_fits_single_arc(std::span<const DataPoint> points, int lb, int ub,
                              const FitConfig& cfg) {
    if (ub - lb + 1 < 3) return true;  // underdetermined, cannot invalidate
    const auto sub = slice(points, lb, ub);
    try {
        const SingleArcResult fit = fit_single_arc(sub, cfg);
        if (!usable(fit.report)) return false;
        NodeVector nodes(1);
        nodes.set_arc(0, fit.params.a1);
        nodes.set_arc(1, fit.params.a2);
        nodes.set_mid(0, fit.params.n);
        const ArcSpline spline =
            make_spline(std::move(nodes), Association{{1, ub - lb + 1}});
        return validate(spline, sub, cfg).all_valid;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

std::vector<IndexInterval> merge_intervals(std::span<const DataPoint> points,
                                           const std::vector<IndexInterval>& intervals,
                                           const FitConfig& cfg) {
    if (intervals.empty()) throw InputError("no intervals to merge");
    std::vector<int> bounds;
    bounds.push_back(intervals.front().lb);
    for (const auto& iv : intervals) bounds.push_back(iv.ub);

    std::vector<IndexInterval> out;
    size_t i = 0;
    while (i + 1 < bounds.size()) {
        size_t last_valid = 0;
        for (size_t j = i + 1; j < bounds.size(); ++j) {
            if (!interval_fits_single_arc(points, bounds[i], bounds[j], cfg)) break;
            last_valid = j;
        }
        if (last_valid == 0) {
            // The single source interval itself fails; emit it as-is and let
            // phase 2 splitting deal with it.
            out.push_back({bounds[i], bounds[i + 1]});
            i += 1;
        } else {
            out.push_back({bounds[i], bounds[last_valid]});
            i = last_valid;
        }
    }
    return out;
}

NodeVector init_multi_params(std::span<const DataPoint> points,
                             const std::vector<IndexInterval>& intervals, const FitConfig& cfg) {
    const int m = static_cast<int>(intervals.size());
    if (m < 1) throw InputError("need at least one interval");
    std::vector<ArcParams> fits(m);
    for (int i = 0; i < m; ++i) {
        const auto sub = slice(points, intervals[i].lb, intervals[i].ub);
        bool done = false;
        if (sub.size() >= 3) {
            try {
                const SingleArcResult fit = fit_single_arc(sub, cfg);
                if (usable(fit.report)) {
                    fits[i] = fit.params;
                    done = true;
                }
            } catch (const Error&) {
            }
        }
        if (!done) fits[i] = initial_single_arc(sub);
    }

    NodeVector nodes(m);
    nodes.set_arc(0, fits[0].a1);
    nodes.set_arc(m, fits[m - 1].a2);
    for (int i = 1; i < m; ++i) nodes.set_arc(i, (fits[i - 1].a2 + fits[i].a1) * 0.5);
    for (int i = 0; i < m; ++i) nodes.set_mid(i, fits[i].n);
    return nodes;
}

Association associate(std::span<const DataPoint> points, const NodeVector& nodes) {
    const int n = static_cast<int>(points.size());
    const int m = nodes.segments();
    Association assoc;
    assoc.ordinals.resize(m + 1);
    assoc.ordinals.front() = 1;
    assoc.ordinals.back() = n;

    for (int i = 1; i < m; ++i) {
        const Point2 node = nodes.arc(i);
        int best = 1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 1; j <= n; ++j) {
            const double d = (points[j - 1].pos - node).squared_norm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        assoc.ordinals[i] = best;
    }

    // Repair: left-to-right clamp keeping boundaries strictly increasing with
    // >= 3 points per segment and room for the remaining boundaries.
    for (int i = 1; i < m; ++i) {
        const int lower = assoc.ordinals[i - 1] + 2;
        const int upper = n - 2 * (m - i);
        assoc.ordinals[i] = std::clamp(assoc.ordinals[i], lower, upper);
    }
    assoc.check(n);
    return assoc;
}

ValidationReport validate(const ArcSpline& spline, std::span<const DataPoint> points,
                          const FitConfig& cfg) {
    ValidationReport report;
    report.threshold = cfg.chi2_threshold();
    const int m = spline.segments();
    report.segments.resize(m);

    for (int i = 0; i < m; ++i) {
        SegmentValidation& sv = report.segments[i];
        const int owned = spline.assoc.owned(i);
        if (!spline.geometry[i]) {
            sv.degenerate = true;
            sv.invalid_count = owned;
            sv.worst_ordinal = spline.assoc.first(i);
            sv.worst_statistic = std::numeric_limits<double>::infinity();
            sv.valid = false;
        } else {
            const ArcGeometry& geom = *spline.geometry[i];
            sv.statistics.reserve(owned);
            for (int j = spline.assoc.first(i); j <= spline.assoc.last(i); ++j) {
                const DataPoint& pt = points[j - 1];
                double stat;
                try {
                    stat = mahalanobis_sq(virtual_point(geom, pt.pos) - pt.pos, pt.cov);
                } catch (const AmbiguousProjection&) {
                    stat = std::numeric_limits<double>::infinity();
                }
                sv.statistics.push_back(stat);
                if (stat > sv.worst_statistic || sv.worst_ordinal == 0) {
                    sv.worst_statistic = stat;
                    sv.worst_ordinal = j;
                }
                if (stat > report.threshold) ++sv.invalid_count;
            }
            sv.valid = sv.invalid_count <= cfg.invalid_count_threshold;
        }
        report.all_valid = report.all_valid && sv.valid;
    }
    return report;
}

NodeVector split_worst(const ArcSpline& spline, const ValidationReport& report) {
    const int m = spline.segments();
    int worst = 0;
    for (int i = 1; i < m; ++i) {
        if (report.segments[i].invalid_count > report.segments[worst].invalid_count) worst = i;
    }

    const ArcParams params = spline.nodes.segment_params(worst);
    Point2 mid1, mid2;
    if (spline.geometry[worst]) {
        const ArcGeometry& geom = *spline.geometry[worst];
        const ArcAngles ang = arc_angles(params, geom);
        const double theta_n = std::atan2(params.n.y - geom.center.y, params.n.x - geom.center.x);
        const double to_n = ang.sweep >= 0.0 ? wrap_ccw(theta_n - ang.start)
                                             : -wrap_ccw(ang.start - theta_n);
        const double half1 = ang.start + 0.5 * to_n;
        const double half2 = 0.5 * (ang.start + to_n + ang.end());
        mid1 = geom.center + Point2{geom.radius * std::cos(half1), geom.radius * std::sin(half1)};
        mid2 = geom.center + Point2{geom.radius * std::cos(half2), geom.radius * std::sin(half2)};
    } else {
        // Degenerate segment: seed the halves with laterally offset chord
        // midpoints so the next round starts from computable arcs.
        auto offset_mid = [](const Point2& a, const Point2& b) {
            const Point2 chord = b - a;
            const double len = std::max(chord.norm(), 1e-12);
            const double off = std::max(10.0 * kSagittaMin, 0.01 * len);
            return (a + b) * 0.5 + perp(chord) * (off / len);
        };
        mid1 = offset_mid(params.a1, params.n);
        mid2 = offset_mid(params.n, params.a2);
    }

    NodeVector out(m + 1);
    for (int i = 0; i <= worst; ++i) out.set_arc(i, spline.nodes.arc(i));
    out.set_arc(worst + 1, params.n);
    for (int i = worst + 1; i <= m; ++i) out.set_arc(i + 1, spline.nodes.arc(i));
    for (int i = 0; i < worst; ++i) out.set_mid(i, spline.nodes.mid(i));
    out.set_mid(worst, mid1);
    out.set_mid(worst + 1, mid2);
    for (int i = worst + 1; i < m; ++i) out.set_mid(i + 1, spline.nodes.mid(i));
    return out;
}

namespace {

CnlsProblem multi_arc_problem(std::span<const DataPoint> points,
                              const std::shared_ptr<Association>& assoc, const FitConfig& cfg,
                              int dim) {
    CnlsProblem p;
    p.dim = dim;
    p.residuals = [points, assoc, cfg](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(anchor_block(nv, points, *assoc, cfg.anchor).values,
                     measurement_values(nv, points, *assoc));
    };
    p.residual_jacobian = [points, assoc, cfg](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(anchor_block(nv, points, *assoc, cfg.anchor).jacobian,
                     measurement_block(nv, points, *assoc, cfg.jacobian_mode).jacobian);
    };
    p.eq = [](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(middle_node_constraint(nv).values, g1_values(nv));
    };
    p.eq_jacobian = [cfg](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        return stack(middle_node_constraint(nv).jacobian,
                     g1_constraint(nv, cfg.jacobian_mode).jacobian);
    };
    p.ineq = [cfg](const Eigen::VectorXd& x) {
        return min_length_constraint(NodeVector::from_vector(x), cfg.l_min).values;
    };
    p.ineq_jacobian = [cfg](const Eigen::VectorXd& x) {
        return min_length_constraint(NodeVector::from_vector(x), cfg.l_min).jacobian;
    };

    auto reassociate = [points, assoc](const Eigen::VectorXd& x) {
        *assoc = associate(points, NodeVector::from_vector(x));
    };
    if (cfg.reassociation == ReassociationMode::AcceptedStep)
        p.on_accepted_step = reassociate;
    else
        p.on_outer_iteration = reassociate;
    return p;
}

}  // namespace

MultiArcResult fit_multi(std::span<const DataPoint> points, const FitConfig& cfg) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw InputError("need >= 3 points");

    const auto linear = recursive_linearize(points, cfg.epsilon);
    auto intervals = merge_intervals(points, linear, cfg);

    int cap = cfg.max_segments > 0 ? cfg.max_segments : (n + 2) / 3;
    cap = std::min(std::max(cap, static_cast<int>(intervals.size())), (n - 1) / 2);
    cap = std::max(cap, 1);

    // Coalesce pathological initial splits that exceed the feasible cap.
    while (static_cast<int>(intervals.size()) > cap) {
        size_t best = 0;
        int best_count = std::numeric_limits<int>::max();
        for (size_t i = 0; i + 1 < intervals.size(); ++i) {
            const int count = intervals[i + 1].ub - intervals[i].lb + 1;
            if (count < best_count) {
                best_count = count;
                best = i;
            }
        }
        intervals[best].ub = intervals[best + 1].ub;
        intervals.erase(intervals.begin() + best + 1);
    }

    NodeVector nodes = init_multi_params(points, intervals, cfg);

    MultiArcResult result{ArcSpline{NodeVector(1), {}, {}, {}, {}}, {}, {}, FitVerdict::Valid, {}};
    while (true) {
        const int m = nodes.segments();
        auto assoc = std::make_shared<Association>(associate(points, nodes));
        const CnlsProblem problem = multi_arc_problem(points, assoc, cfg, nodes.dim());

        SolveReport report = solve(problem, nodes.to_vector(), cfg.solver);
        if (!usable(report)) {
            // Retry once from a geometric re-initialization of this round.
            const NodeVector retry_nodes = geometric_init(points, associate(points, nodes));
            *assoc = associate(points, retry_nodes);
            report = solve(problem, retry_nodes.to_vector(), cfg.solver);
            if (!usable(report))
                throw SolverFailure(std::string("round with ") + std::to_string(m) +
                                    " segments failed: " + to_string(report.termination));
        }

        nodes = NodeVector::from_vector(report.x);
        ArcSpline spline = make_spline(nodes, associate(points, nodes));
        ValidationReport vrep = validate(spline, points, cfg);
        for (int i = 0; i < m; ++i) {
            spline.segment_valid[i] = vrep.segments[i].valid;
            spline.invalid_counts[i] = vrep.segments[i].invalid_count;
        }
        result.history.push_back({m, report.cost, vrep.total_invalid()});
        result.last_report = report;

        if (vrep.all_valid || m >= cap) {
            result.verdict = vrep.all_valid ? FitVerdict::Valid : FitVerdict::Capped;
            result.spline = std::move(spline);
            result.validation = std::move(vrep);
            break;
        }
        nodes = split_worst(spline, vrep);
    }
    return result;
}

}  // namespace arcfit
