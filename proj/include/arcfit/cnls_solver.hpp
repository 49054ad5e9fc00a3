#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "arcfit/errors.hpp"

namespace arcfit {

/// Constrained nonlinear least-squares problem
///   min 0.5 ||f(x)||^2  s.t.  c_eq(x) = 0, c_ineq(x) <= 0.
/// The cost residuals are expected pre-whitened so that ||f||^2 is the
/// Mahalanobis cost. Evaluators must be pure; residual and constraint
/// dimensions must not change between iterations. The step hooks are
/// optional and may mutate external state the evaluators read (the fitter
/// uses them for data re-association).
struct CnlsProblem {
    int dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> residual_jacobian;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eq;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eq_jacobian;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> ineq;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> ineq_jacobian;

    std::function<void(const Eigen::VectorXd&)> on_accepted_step;
    std::function<void(const Eigen::VectorXd&)> on_outer_iteration;
};

struct SolverSettings {
    int max_outer_iterations = 50;
    int max_inner_iterations = 100;
    double g_tol = 1e-8;     // infinity norm of the augmented gradient
    double x_tol = 1e-10;    // accepted step norm
    double c_tol = 1e-8;     // constraint violation, meters^2
    double mu0 = 10.0;       // initial penalty
    double rho = 10.0;       // penalty growth factor
    double lambda0 = 1e-4;   // Levenberg damping floor
};

enum class Termination { Converged, MaxIterations, StepStall, EvaluationFailure };

const char* to_string(Termination t);

struct OuterRecord {
    double violation = 0.0;
    double mu = 0.0;
    double augmented_cost = 0.0;
};

struct SolveReport {
    Eigen::VectorXd x;
    double cost = 0.0;  // F = 0.5 ||f(x)||^2 of the plain cost residuals
    double max_eq_violation = 0.0;
    double max_ineq_violation = 0.0;
    int inner_iterations = 0;
    int outer_iterations = 0;
    int accepted_steps = 0;
    int descent_failures = 0;
    Termination termination = Termination::EvaluationFailure;
    std::vector<OuterRecord> outer_history;

    bool converged() const { return termination == Termination::Converged; }
};

/// Solve (J'J + lambda I) h = -J'f. With lambda = 0 this is the exact
/// Gauss-Newton step; throws SingularNormalEquations when the undamped
/// system cannot be solved to 1e-8 relative accuracy.
Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& f,
                                  double lambda);

/// True iff h is a descent direction for F = 0.5||f||^2: h . (J'f) < 0.
bool descent_check(const Eigen::MatrixXd& J, const Eigen::VectorXd& f, const Eigen::VectorXd& h);

SolveReport solve(const CnlsProblem& problem, const Eigen::VectorXd& x0,
                  const SolverSettings& settings = {});

}  // namespace arcfit
