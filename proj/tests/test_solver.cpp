#include <doctest.h>

#include <cmath>

#include "arcfit/cnls_solver.hpp"
#include "arcfit/generate.hpp"
#include "arcfit/models.hpp"

using namespace arcfit;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
    return m;
}

Eigen::VectorXd random_vector(Rng& rng, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

/// min 0.5||x - a||^2 with an identity Jacobian.
CnlsProblem shifted_quadratic(const Eigen::VectorXd& a) {
    CnlsProblem p;
    p.dim = static_cast<int>(a.size());
    p.residuals = [a](const Eigen::VectorXd& x) { return (x - a).eval(); };
    p.residual_jacobian = [a](const Eigen::VectorXd& x) {
        return Eigen::MatrixXd::Identity(x.size(), x.size()).eval();
    };
    return p;
}

}  // namespace

TEST_CASE("gauss_newton_step solves a linear problem in one step") {
    const Eigen::VectorXd a = (Eigen::VectorXd(2) << 3.0, -1.0).finished();
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd h =
        gauss_newton_step(Eigen::MatrixXd::Identity(2, 2), x - a, 0.0);
    CHECK((h - a).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("gauss_newton_step on the rank-one textbook case") {
    Eigen::MatrixXd j(2, 1);
    j << 1.0, 1.0;
    const Eigen::VectorXd f = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
    const Eigen::VectorXd h = gauss_newton_step(j, f, 0.0);
    CHECK(h[0] == doctest::Approx(-1.0));
}

TEST_CASE("gauss_newton_step matches a QR least-squares oracle") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform(0.0, 5.0));
        const int m = n + 2 + static_cast<int>(rng.uniform(0.0, 10.0));
        Eigen::MatrixXd j = random_matrix(rng, m, n);
        j += Eigen::MatrixXd::Identity(m, n);  // keep it well-conditioned
        const Eigen::VectorXd f = random_vector(rng, m);

        const Eigen::VectorXd h = gauss_newton_step(j, f, 0.0);
        const Eigen::VectorXd oracle = j.colPivHouseholderQr().solve(-f);
        CHECK((h - oracle).lpNorm<Eigen::Infinity>() <=
              1e-8 * std::max(1.0, oracle.lpNorm<Eigen::Infinity>()));

        // Normal-equations residual bound for the undamped step.
        const Eigen::VectorXd g = j.transpose() * f;
        CHECK((j.transpose() * j * h + g).lpNorm<Eigen::Infinity>() <=
              1e-8 * g.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("gauss_newton_step reports singular normal equations") {
    Eigen::MatrixXd j(2, 2);
    j << 1.0, 1.0, 1.0, 1.0;  // rank one
    const Eigen::VectorXd f = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
    CHECK_THROWS_AS(gauss_newton_step(j, f, 0.0), SingularNormalEquations);
    CHECK_NOTHROW(gauss_newton_step(j, f, 1e-4));
}

TEST_CASE("descent_check") {
    Rng rng(22);
    for (int i = 0; i < 50; ++i) {
        const Eigen::MatrixXd j = random_matrix(rng, 8, 3) +
                                  Eigen::MatrixXd::Identity(8, 3);
        Eigen::VectorXd f = random_vector(rng, 8);
        if ((j.transpose() * f).lpNorm<Eigen::Infinity>() < 1e-6) continue;

        CHECK(descent_check(j, f, gauss_newton_step(j, f, 0.0)));
        CHECK_FALSE(descent_check(j, f, (j.transpose() * f).eval()));
        // Heavy damping bends the step toward steepest descent; it stays a
        // descent direction.
        CHECK(descent_check(j, f, gauss_newton_step(j, f, 1e6)));
    }
}

TEST_CASE("solve reaches an unconstrained quadratic optimum in two steps") {
    const Eigen::VectorXd a = (Eigen::VectorXd(3) << 0.3, -0.2, 0.5).finished();
    const SolveReport report = solve(shifted_quadratic(a), Eigen::VectorXd::Zero(3));
    CHECK(report.converged());
    CHECK(report.inner_iterations <= 2);
    CHECK((report.x - a).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK(report.descent_failures == 0);
}

TEST_CASE("solve handles an equality-constrained scalar problem") {
    // min (x-2)^2  s.t.  x = 1
    CnlsProblem p;
    p.dim = 1;
    p.residuals = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << x[0] - 2.0).finished();
    };
    p.residual_jacobian = [](const Eigen::VectorXd&) {
        return (Eigen::MatrixXd(1, 1) << 1.0).finished();
    };
    p.eq = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << x[0] - 1.0).finished();
    };
    p.eq_jacobian = [](const Eigen::VectorXd&) {
        return (Eigen::MatrixXd(1, 1) << 1.0).finished();
    };

    const SolverSettings settings;
    const SolveReport report = solve(p, (Eigen::VectorXd(1) << 0.0).finished(), settings);
    CHECK(report.converged());
    CHECK(std::abs(report.x[0] - 1.0) <= settings.c_tol);
    CHECK(report.max_eq_violation <= settings.c_tol);

    // Across outer iterations the violation shrinks or mu grows.
    for (size_t k = 1; k < report.outer_history.size(); ++k) {
        const bool nonincreasing =
            report.outer_history[k].violation <= report.outer_history[k - 1].violation + 1e-15;
        const bool mu_grew = report.outer_history[k].mu > report.outer_history[k - 1].mu;
        CHECK((nonincreasing || mu_grew));
    }
}

TEST_CASE("solve handles an inequality-constrained problem (hand KKT)") {
    // min ||x||^2  s.t.  1 - x1 <= 0; optimum x = (1, 0, 0).
    CnlsProblem p;
    p.dim = 3;
    p.residuals = [](const Eigen::VectorXd& x) { return x.eval(); };
    p.residual_jacobian = [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(3, 3).eval();
    };
    p.ineq = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << 1.0 - x[0]).finished();
    };
    p.ineq_jacobian = [](const Eigen::VectorXd&) {
        return (Eigen::MatrixXd(1, 3) << -1.0, 0.0, 0.0).finished();
    };

    const SolveReport report = solve(p, (Eigen::VectorXd(3) << 0.2, 0.4, -0.3).finished());
    CHECK(report.converged());
    CHECK(std::abs(report.x[0] - 1.0) <= 1e-6);
    CHECK(std::abs(report.x[1]) <= 1e-6);
    CHECK(std::abs(report.x[2]) <= 1e-6);
}

TEST_CASE("solve leaves an inactive inequality alone") {
    // min (x-2)^2 with x >= 1: the constraint is inactive at the optimum.
    CnlsProblem p;
    p.dim = 1;
    p.residuals = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << x[0] - 2.0).finished();
    };
    p.residual_jacobian = [](const Eigen::VectorXd&) {
        return (Eigen::MatrixXd(1, 1) << 1.0).finished();
    };
    p.ineq = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << 1.0 - x[0]).finished();
    };
    p.ineq_jacobian = [](const Eigen::VectorXd&) {
        return (Eigen::MatrixXd(1, 1) << -1.0).finished();
    };
    const SolveReport report = solve(p, (Eigen::VectorXd(1) << 3.0).finished());
    CHECK(report.converged());
    CHECK(std::abs(report.x[0] - 2.0) <= 1e-6);
    CHECK(report.max_ineq_violation == 0.0);
}

TEST_CASE("augmented objective is monotone across accepted inner steps") {
    // Rosenbrock-style least squares; unconstrained, so the augmented
    // objective is the plain cost.
    CnlsProblem p;
    p.dim = 2;
    p.residuals = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(2) << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]).finished();
    };
    p.residual_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd j(2, 2);
        j << -20.0 * x[0], 10.0, -1.0, 0.0;
        return j;
    };
    std::vector<double> costs;
    p.on_accepted_step = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd f =
            (Eigen::VectorXd(2) << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]).finished();
        costs.push_back(0.5 * f.squaredNorm());
    };

    const SolveReport report = solve(p, (Eigen::VectorXd(2) << -1.2, 1.0).finished());
    CHECK(report.converged());
    CHECK((report.x - Eigen::Vector2d(1.0, 1.0)).lpNorm<Eigen::Infinity>() <= 1e-6);
    REQUIRE(costs.size() >= 2);
    for (size_t i = 1; i < costs.size(); ++i) CHECK(costs[i] <= costs[i - 1] + 1e-12);
    CHECK(report.descent_failures == 0);
}

TEST_CASE("solve recovers a single arc from exact circle points") {
    // 50 exact points on the circle of radius 10 about the origin, anchors at
    // the true endpoints.
    std::vector<DataPoint> points;
    const int n = 50;
    for (int i = 0; i < n; ++i) {
        const double t = -1.2 + 2.4 * i / (n - 1);
        points.push_back({{10.0 * std::cos(t), 10.0 * std::sin(t)}, Cov2::identity(), i + 1});
    }
    const Association assoc{{1, n}};
    const AnchorConfig anchor;

    CnlsProblem p;
    p.dim = 6;
    p.residuals = [&](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        const Eigen::VectorXd a = anchor_block(nv, points, assoc, anchor).values;
        const Eigen::VectorXd m = measurement_values(nv, points, assoc);
        Eigen::VectorXd out(a.size() + m.size());
        out << a, m;
        return out;
    };
    p.residual_jacobian = [&](const Eigen::VectorXd& x) {
        const NodeVector nv = NodeVector::from_vector(x);
        const Eigen::MatrixXd a = anchor_block(nv, points, assoc, anchor).jacobian;
        const Eigen::MatrixXd m = measurement_block(nv, points, assoc).jacobian;
        Eigen::MatrixXd out(a.rows() + m.rows(), a.cols());
        out << a, m;
        return out;
    };
    p.eq = [](const Eigen::VectorXd& x) {
        return middle_node_constraint(NodeVector::from_vector(x)).values;
    };
    p.eq_jacobian = [](const Eigen::VectorXd& x) {
        return middle_node_constraint(NodeVector::from_vector(x)).jacobian;
    };

    // Start from a deliberately wrong circle.
    NodeVector x0(1);
    x0.set_arc(0, points.front().pos + Point2{0.5, -0.4});
    x0.set_arc(1, points.back().pos + Point2{-0.3, 0.2});
    x0.set_mid(0, {12.0, 1.0});

    const SolveReport report = solve(p, x0.to_vector());
    CHECK(report.converged());
    const NodeVector sol = NodeVector::from_vector(report.x);
    const ArcGeometry g = circumcenter(sol.segment_params(0));
    CHECK(g.radius == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(g.center.norm() <= 1e-5);
    CHECK(report.cost <= 1e-10);
}

TEST_CASE("solve is deterministic") {
    const Eigen::VectorXd a = (Eigen::VectorXd(4) << 0.7, -0.3, 0.1, 0.9).finished();
    const SolveReport r1 = solve(shifted_quadratic(a), Eigen::VectorXd::Zero(4));
    const SolveReport r2 = solve(shifted_quadratic(a), Eigen::VectorXd::Zero(4));
    CHECK(r1.x == r2.x);  // bitwise
    CHECK(r1.inner_iterations == r2.inner_iterations);
    CHECK(r1.outer_iterations == r2.outer_iterations);
    CHECK(r1.cost == r2.cost);
}

TEST_CASE("solve reports evaluation failure at a bad start") {
    CnlsProblem p;
    p.dim = 1;
    p.residuals = [](const Eigen::VectorXd& x) {
        return (Eigen::VectorXd(1) << std::sqrt(x[0])).finished();  // NaN for x < 0
    };
    p.residual_jacobian = [](const Eigen::VectorXd& x) {
        return (Eigen::MatrixXd(1, 1) << 0.5 / std::sqrt(x[0])).finished();
    };
    const SolveReport report = solve(p, (Eigen::VectorXd(1) << -1.0).finished());
    CHECK(report.termination == Termination::EvaluationFailure);
}

TEST_CASE("termination reasons have names") {
    CHECK(std::string(to_string(Termination::Converged)) == "converged");
    CHECK(std::string(to_string(Termination::MaxIterations)) == "max-iter");
    CHECK(std::string(to_string(Termination::StepStall)) == "step-stall");
    CHECK(std::string(to_string(Termination::EvaluationFailure)) == "evaluation-failure");
}
