#include "mssde/poisson.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace mssde::poisson {

namespace {

// ones * mu^T - Q is nonsingular for an irreducible generator, and its
// inverse applied to F yields the centered solution directly.
Eigen::FullPivLU<Eigen::MatrixXd> centered_lu(const Eigen::MatrixXd& Q,
                                              const Eigen::VectorXd& mu) {
    const Eigen::Index m0 = Q.rows();
    Eigen::MatrixXd A = Eigen::VectorXd::Ones(m0) * mu.transpose() - Q;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw IrreducibilityError("centered Poisson operator is singular: generator reducible");
    return lu;
}

Eigen::MatrixXd simpson_semigroup_integral(const Eigen::MatrixXd& Q,
                                           const Eigen::MatrixXd& F, double T, int steps,
                                           double* tail_norm) {
    const double delta = T / steps;
    Eigen::MatrixXd P_delta = chain::transition_matrix(Q, delta).P;
    Eigen::MatrixXd G = F;  // P_{j delta} F
    Eigen::MatrixXd acc = F;
    for (int j = 1; j <= steps; ++j) {
        G = P_delta * G;
        double w = (j == steps) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        acc += w * G;
    }
    if (tail_norm) *tail_norm = G.cwiseAbs().maxCoeff();
    return (delta / 3.0) * acc;
}

}  // namespace

double check_centering(const Eigen::MatrixXd& F, const Eigen::VectorXd& mu) {
    if (F.rows() != mu.size())
        throw ArgumentError("check_centering: F and mu have mismatched state counts");
    return (mu.transpose() * F).lpNorm<Eigen::Infinity>();
}

PoissonSolution solve_poisson(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& F,
                              const Eigen::VectorXd& mu) {
    double cen = check_centering(F, mu);
    if (cen >= 1e-9)
        throw PreconditionError("Poisson right-hand side violates the centering condition: "
                                "residual " + std::to_string(cen));
    auto lu = centered_lu(Q, mu);
    Eigen::MatrixXd phi = lu.solve(F);
    const Eigen::Index m0 = Q.rows();
    Eigen::MatrixXd A = Eigen::VectorXd::Ones(m0) * mu.transpose() - Q;
    phi += lu.solve(F - A * phi);

    PoissonSolution sol;
    sol.phi = std::move(phi);
    sol.residual = (Q * sol.phi + F).cwiseAbs().maxCoeff();
    sol.centering = (mu.transpose() * sol.phi).lpNorm<Eigen::Infinity>();
    if (sol.residual > 1e-10)
        throw Error("Poisson solve residual " + std::to_string(sol.residual) +
                    " exceeds 1e-10");
    if (sol.centering > 1e-10)
        throw Error("Poisson solution centering " + std::to_string(sol.centering) +
                    " exceeds 1e-10");
    return sol;
}

PoissonSolution solve_poisson_at(const chain::GeneratorField& gf,
                                 const StateFunctionField& field,
                                 const Eigen::VectorXd& x) {
    Eigen::MatrixXd Q = gf.evaluate(x);
    Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
    Eigen::MatrixXd F = field.evaluate(x);
    Eigen::RowVectorXd mean = mu.transpose() * F;
    F.rowwise() -= mean;
    PoissonSolution sol = solve_poisson(Q, F, mu);
    sol.x = x;
    return sol;
}

IntegralOracleResult poisson_integral_oracle(const Eigen::MatrixXd& Q,
                                             const Eigen::MatrixXd& F, double T_trunc,
                                             int quad_steps) {
    if (quad_steps < 4) throw ArgumentError("poisson_integral_oracle needs quad_steps >= 4");
    if (T_trunc <= 0.0) throw ArgumentError("poisson_integral_oracle needs T_trunc > 0");
    if (quad_steps % 2 == 1) ++quad_steps;

    IntegralOracleResult res;
    res.T_trunc = T_trunc;
    res.value = simpson_semigroup_integral(Q, F, T_trunc, quad_steps, &res.tail_norm);
    res.tail_ok = res.tail_norm < 1e-8;

    Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
    Eigen::RowVectorXd mean = mu.transpose() * res.value;
    res.value.rowwise() -= mean;
    return res;
}

IntegralOracleResult poisson_integral_oracle_auto(const Eigen::MatrixXd& Q,
                                                  const Eigen::MatrixXd& F) {
    double T = 50.0;
    for (int doubling = 0; doubling < 4; ++doubling) {
        double tail;
        simpson_semigroup_integral(Q, F, T, 4, &tail);
        if (tail < 1e-8) break;
        T *= 2.0;
    }
    int steps = 1024;
    IntegralOracleResult coarse = poisson_integral_oracle(Q, F, T, steps);
    for (; steps <= (1 << 14); steps *= 2) {
        IntegralOracleResult fine = poisson_integral_oracle(Q, F, T, steps * 2);
        if ((fine.value - coarse.value).cwiseAbs().maxCoeff() < 1e-9) return fine;
        coarse = std::move(fine);
    }
    return coarse;
}

Eigen::MatrixXd poisson_gradient(const chain::GeneratorField& gf,
                                 const StateFunctionField& field,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& dir) {
    Eigen::MatrixXd Q = gf.evaluate(x);
    Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
    const Eigen::Index m0 = Q.rows();

    Eigen::MatrixXd F_raw = field.evaluate(x);
    Eigen::RowVectorXd mean = mu.transpose() * F_raw;
    Eigen::MatrixXd F = F_raw;
    F.rowwise() -= mean;
    Eigen::MatrixXd phi = solve_poisson(Q, F, mu).phi;

    Eigen::MatrixXd dQ = gf.directional_derivative(x, dir);
    Eigen::VectorXd dmu = gf.is_constant()
                              ? Eigen::VectorXd::Zero(m0)
                              : chain::invariant_measure_gradient(gf, x, dir);
    Eigen::MatrixXd dF_raw = field.directional_derivative(x, dir);
    Eigen::RowVectorXd dmean = mu.transpose() * dF_raw + dmu.transpose() * F_raw;
    Eigen::MatrixXd dF = dF_raw;
    dF.rowwise() -= dmean;

    // Differentiated equation: Q dphi = -(dF + dQ phi), centered by
    // mu^T dphi = -phi^T dmu per coordinate.
    Eigen::MatrixXd g = dF + dQ * phi;
    Eigen::RowVectorXd c = -(phi.transpose() * dmu).transpose();
    Eigen::MatrixXd rhs = g + Eigen::VectorXd::Ones(m0) * c;
    auto lu = centered_lu(Q, mu);
    Eigen::MatrixXd dphi = lu.solve(rhs);
    Eigen::MatrixXd A = Eigen::VectorXd::Ones(m0) * mu.transpose() - Q;
    dphi += lu.solve(rhs - A * dphi);

    double residual = (Q * dphi + g).cwiseAbs().maxCoeff();
    if (residual > 1e-9)
        throw Error("Poisson gradient residual " + std::to_string(residual) +
                    " exceeds 1e-9");
    return dphi;
}

double ergodic_gap_constant(const Eigen::MatrixXd& Q, const Eigen::VectorXd& mu,
                            double T, int steps) {
    if (steps < 4) throw ArgumentError("ergodic_gap_constant needs steps >= 4");
    if (steps % 2 == 1) ++steps;
    const double delta = T / steps;
    Eigen::MatrixXd P_delta = chain::transition_matrix(Q, delta).P;
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(Q.rows(), Q.cols());
    auto var_dist = [&](const Eigen::MatrixXd& Pt) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < Pt.rows(); ++i)
            worst = std::max(worst, (Pt.row(i).transpose() - mu).lpNorm<1>());
        return worst;
    };
    double acc = var_dist(P);
    for (int j = 1; j <= steps; ++j) {
        P = P * P_delta;
        double w = (j == steps) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        acc += w * var_dist(P);
    }
    return (delta / 3.0) * acc;
}

}  // namespace mssde::poisson
