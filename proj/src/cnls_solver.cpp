#include "arcfit/cnls_solver.hpp"

#include <cmath>
#include <limits>

namespace arcfit {

namespace {

constexpr double kArmijoCoeff = 1e-4;
constexpr double kMinStepScale = 9.5367431640625e-7;  // 2^-20
constexpr double kMaxDamping = 1e12;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

struct Evaluation {
    Eigen::VectorXd f;        // plain cost residuals
    Eigen::VectorXd ce;       // equality values
    Eigen::VectorXd ci;       // inequality values
    Eigen::VectorXd f_aug;    // augmented least-squares residual
    bool ok = false;
};

/// Shifted-penalty augmented Lagrangian in least-squares form:
///   L = 0.5||f||^2 + 0.5||sqrt(mu)(ce + leq/mu)||^2
///     + 0.5||max(0, lin + mu*ci)/sqrt(mu)||^2 + const.
class AugmentedProblem {
public:
    AugmentedProblem(const CnlsProblem& p) : p_(p) {}

    Evaluation evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& leq,
                        const Eigen::VectorXd& lin, double mu) const {
        Evaluation ev;
        try {
            ev.f = p_.residuals(x);
            ev.ce = p_.eq ? p_.eq(x) : Eigen::VectorXd();
            ev.ci = p_.ineq ? p_.ineq(x) : Eigen::VectorXd();
        } catch (const Error&) {
            return ev;
        }
        if (!all_finite(ev.f) || !all_finite(ev.ce) || !all_finite(ev.ci)) return ev;

        const double smu = std::sqrt(mu);
        ev.f_aug.resize(ev.f.size() + ev.ce.size() + ev.ci.size());
        ev.f_aug.head(ev.f.size()) = ev.f;
        ev.f_aug.segment(ev.f.size(), ev.ce.size()) = smu * (ev.ce + leq / mu);
        for (Eigen::Index i = 0; i < ev.ci.size(); ++i)
            ev.f_aug[ev.f.size() + ev.ce.size() + i] =
                std::max(0.0, lin[i] + mu * ev.ci[i]) / smu;
        ev.ok = true;
        return ev;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Evaluation& ev,
                             const Eigen::VectorXd& lin, double mu) const {
        const Eigen::MatrixXd jf = p_.residual_jacobian(x);
        const Eigen::MatrixXd je =
            p_.eq_jacobian ? p_.eq_jacobian(x) : Eigen::MatrixXd(0, p_.dim);
        const Eigen::MatrixXd ji =
            p_.ineq_jacobian ? p_.ineq_jacobian(x) : Eigen::MatrixXd(0, p_.dim);

        const double smu = std::sqrt(mu);
        Eigen::MatrixXd jac(jf.rows() + je.rows() + ji.rows(), p_.dim);
        jac.topRows(jf.rows()) = jf;
        jac.middleRows(jf.rows(), je.rows()) = smu * je;
        for (Eigen::Index i = 0; i < ji.rows(); ++i) {
            const bool active = lin[i] + mu * ev.ci[i] > 0.0;
            jac.row(jf.rows() + je.rows() + i) =
                active ? (smu * ji.row(i)).eval() : Eigen::RowVectorXd::Zero(p_.dim).eval();
        }
        return jac;
    }

private:
    const CnlsProblem& p_;
};

double violation_of(const Evaluation& ev) {
    double v = 0.0;
    if (ev.ce.size() > 0) v = ev.ce.cwiseAbs().maxCoeff();
    if (ev.ci.size() > 0) v = std::max(v, ev.ci.maxCoeff());
    return std::max(v, 0.0);
}

}  // namespace

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max-iter";
        case Termination::StepStall: return "step-stall";
        case Termination::EvaluationFailure: return "evaluation-failure";
    }
    return "unknown";
}

Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& f,
                                  double lambda) {
    const Eigen::MatrixXd normal =
        J.transpose() * J + lambda * Eigen::MatrixXd::Identity(J.cols(), J.cols());
    const Eigen::VectorXd g = J.transpose() * f;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const Eigen::VectorXd h = ldlt.solve(-g);

    if (lambda == 0.0) {
        // Undamped steps require full column rank; probe the pivots.
        const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
        if (d.size() > 0 && d.minCoeff() <= 1e-12 * d.maxCoeff())
            throw SingularNormalEquations();
        const double residual = (normal * h + g).lpNorm<Eigen::Infinity>();
        if (residual > 1e-8 * std::max(g.lpNorm<Eigen::Infinity>(), 1e-300))
            throw SingularNormalEquations();
    }
    if (!h.allFinite()) throw SingularNormalEquations();
    return h;
}

bool descent_check(const Eigen::MatrixXd& J, const Eigen::VectorXd& f,
                   const Eigen::VectorXd& h) {
    return h.dot(J.transpose() * f) < 0.0;
}

SolveReport solve(const CnlsProblem& problem, const Eigen::VectorXd& x0,
                  const SolverSettings& settings) {
    AugmentedProblem aug(problem);
    SolveReport report;
    report.x = x0;

    Eigen::VectorXd x = x0;
    double mu = settings.mu0;

    // Probe once to size the multiplier vectors.
    Eigen::Index eq_dim = 0, ineq_dim = 0;
    if (x.allFinite()) {
        try {
            if (problem.eq) eq_dim = problem.eq(x).size();
            if (problem.ineq) ineq_dim = problem.ineq(x).size();
        } catch (const Error&) {
            return report;
        }
    }
    Eigen::VectorXd leq = Eigen::VectorXd::Zero(eq_dim);
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(ineq_dim);

    Evaluation ev = aug.evaluate(x, leq, lin, mu);
    if (!x.allFinite() || !ev.ok) {
        report.termination = Termination::EvaluationFailure;
        return report;
    }

    double damping = settings.lambda0;
    double prev_violation = std::numeric_limits<double>::infinity();
    report.termination = Termination::MaxIterations;

    for (int outer = 0; outer < settings.max_outer_iterations; ++outer) {
        ++report.outer_iterations;
        bool grad_converged = false;
        bool step_converged = false;
        bool stalled = false;

        for (int inner = 0; inner < settings.max_inner_iterations; ++inner) {
            const Eigen::MatrixXd jac = aug.jacobian(x, ev, lin, mu);
            const Eigen::VectorXd grad = jac.transpose() * ev.f_aug;
            if (grad.lpNorm<Eigen::Infinity>() <= settings.g_tol) {
                grad_converged = true;
                break;
            }
            ++report.inner_iterations;

            Eigen::VectorXd h;
            try {
                h = gauss_newton_step(jac, ev.f_aug, damping);
            } catch (const SingularNormalEquations&) {
                damping *= 10.0;
                if (damping > kMaxDamping) { stalled = true; break; }
                continue;
            }
            if (!descent_check(jac, ev.f_aug, h)) ++report.descent_failures;

            // Armijo backtracking from alpha = 1.
            const double phi0 = 0.5 * ev.f_aug.squaredNorm();
            const double slope = grad.dot(h);
            double alpha = 1.0;
            bool accepted = false;
            Evaluation trial;
            while (alpha >= kMinStepScale) {
                trial = aug.evaluate(x + alpha * h, leq, lin, mu);
                if (trial.ok &&
                    0.5 * trial.f_aug.squaredNorm() <= phi0 + kArmijoCoeff * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }

            if (!accepted) {
                damping *= 10.0;
                if (damping > kMaxDamping) { stalled = true; break; }
                continue;
            }

            const double step_norm = (alpha * h).norm();
            x += alpha * h;
            ++report.accepted_steps;
            damping = std::max(settings.lambda0, damping / 10.0);
            if (problem.on_accepted_step) {
                problem.on_accepted_step(x);
                trial = aug.evaluate(x, leq, lin, mu);
                if (!trial.ok) { stalled = true; break; }
            }
            ev = trial;
            if (step_norm < settings.x_tol) {
                step_converged = true;
                break;
            }
        }

        const double violation = violation_of(ev);
        report.outer_history.push_back({violation, mu, 0.5 * ev.f_aug.squaredNorm()});

        if (violation <= settings.c_tol && (grad_converged || step_converged)) {
            report.termination = Termination::Converged;
            break;
        }
        if (stalled) {
            report.termination = Termination::StepStall;
            break;
        }

        // Multiplier updates, then penalty growth when the violation failed
        // to shrink by 4x.
        if (leq.size() > 0) leq += mu * ev.ce;
        for (Eigen::Index i = 0; i < lin.size(); ++i)
            lin[i] = std::max(0.0, lin[i] + mu * ev.ci[i]);
        if (violation > prev_violation / 4.0) mu *= settings.rho;
        prev_violation = violation;

        ev = aug.evaluate(x, leq, lin, mu);
        if (!ev.ok) {
            report.termination = Termination::EvaluationFailure;
            break;
        }
        if (problem.on_outer_iteration) {
            problem.on_outer_iteration(x);
            ev = aug.evaluate(x, leq, lin, mu);
            if (!ev.ok) {
                report.termination = Termination::EvaluationFailure;
                break;
            }
        }
    }

    report.x = x;
    report.cost = 0.5 * ev.f.squaredNorm();
    report.max_eq_violation = ev.ce.size() > 0 ? ev.ce.cwiseAbs().maxCoeff() : 0.0;
    report.max_ineq_violation = ev.ci.size() > 0 ? std::max(0.0, ev.ci.maxCoeff()) : 0.0;
    return report;
}

}  // namespace arcfit
