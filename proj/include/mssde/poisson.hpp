#pragma once

#include <Eigen/Core>

#include "mssde/chain.hpp"
#include "mssde/state_function.hpp"

namespace mssde::poisson {

/// Centered solution of -Q Phi = F at one spatial point.
struct PoissonSolution {
    Eigen::VectorXd x;       // where the generator was frozen (may be empty)
    Eigen::MatrixXd phi;     // m0 x n, row i = Phi(x, i)
    double residual = 0.0;   // max-norm of Q phi + F
    double centering = 0.0;  // max-norm of mu^T phi
};

/// max-norm of sum_i F(x, i) mu_i; callers treat > 1e-9 as a violation of
/// the solvability (centering) condition.
double check_centering(const Eigen::MatrixXd& F, const Eigen::VectorXd& mu);

/// Unique centered solution of Q phi = -F (per output coordinate), pinned
/// by mu^T phi = 0. One LU factorization serves all coordinates.
PoissonSolution solve_poisson(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& F,
                              const Eigen::VectorXd& mu);

/// Field-level solve at x: the supplied polynomial field is centered
/// against mu^x first (F -> F - mu^x F), so any field is admissible.
PoissonSolution solve_poisson_at(const chain::GeneratorField& gf,
                                 const StateFunctionField& field,
                                 const Eigen::VectorXd& x);

struct IntegralOracleResult {
    Eigen::MatrixXd value;  // m0 x n, centered
    double T_trunc = 0.0;
    double tail_norm = 0.0;  // ||P_T F||_inf at the truncation horizon
    bool tail_ok = false;    // tail_norm < 1e-8
};

/// Independent construction of the centered solution: composite Simpson
/// quadrature of the transition-semigroup integral of F over [0, T_trunc],
/// centered post hoc. quad_steps must be >= 4 (rounded up to even).
IntegralOracleResult poisson_integral_oracle(const Eigen::MatrixXd& Q,
                                             const Eigen::MatrixXd& F, double T_trunc,
                                             int quad_steps);

/// As above with T_trunc = 50 doubled (at most 4 times) until the tail norm
/// drops below 1e-8, and the step count refined until stable.
IntegralOracleResult poisson_integral_oracle_auto(const Eigen::MatrixXd& Q,
                                                  const Eigen::MatrixXd& F);

/// Directional derivative of x -> Phi(x, .) obtained by differentiating the
/// solved equation; the field is centered internally as in solve_poisson_at.
Eigen::MatrixXd poisson_gradient(const chain::GeneratorField& gf,
                                 const StateFunctionField& field,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& dir);

/// Numerical ergodic-deviation constant: the integral over [0, T] of
/// max_i ||p_{i.}(t) - mu||_var. Bounds ||Phi||_inf / ||F||_inf; exceeding
/// it (beyond slack) flags a suspect solve but is not an error.
double ergodic_gap_constant(const Eigen::MatrixXd& Q, const Eigen::VectorXd& mu,
                            double T, int steps);

}  // namespace mssde::poisson
