#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mssde/poisson.hpp"
#include "support/test_support.hpp"

using namespace mssde;
using namespace mssde::poisson;

namespace {

Eigen::MatrixXd symmetric_two_state() {
    Eigen::MatrixXd Q(2, 2);
    Q << -1.0, 1.0, 1.0, -1.0;
    return Q;
}

Eigen::MatrixXd centered_rhs(const Eigen::MatrixXd& raw, const Eigen::VectorXd& mu) {
    Eigen::MatrixXd F = raw;
    Eigen::RowVectorXd mean = mu.transpose() * raw;
    F.rowwise() -= mean;
    return F;
}

}  // namespace

TEST_CASE("centering residual") {
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.5;
    Eigen::MatrixXd F(2, 1);
    F << 1.0, -1.0;
    CHECK(check_centering(F, mu) == 0.0);
    F << 1.0, 0.0;
    CHECK(check_centering(F, mu) == doctest::Approx(0.5));
}

TEST_CASE("two-state solve") {
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.5;
    Eigen::MatrixXd F(2, 1);
    F << 1.0, -1.0;
    auto sol = solve_poisson(symmetric_two_state(), F, mu);
    CHECK(sol.phi(0, 0) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(sol.phi(1, 0) == doctest::Approx(-0.5).epsilon(1e-13));
    CHECK(sol.residual < 1e-10);
    CHECK(sol.centering < 1e-10);
}

TEST_CASE("zero right-hand side gives the zero solution") {
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.5;
    auto sol = solve_poisson(symmetric_two_state(), Eigen::MatrixXd::Zero(2, 3), mu);
    CHECK(sol.phi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("violated centering is a precondition error naming the residual") {
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.5;
    Eigen::MatrixXd F(2, 1);
    F << 1.0, 0.0;
    CHECK_THROWS_WITH_AS(solve_poisson(symmetric_two_state(), F, mu),
                         doctest::Contains("centering"), PreconditionError);
}

TEST_CASE("random centered systems solve to tight residuals") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::MatrixXd Q = test::random_generator_matrix(7, gen);
        Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
        Eigen::MatrixXd raw(7, 2);
        for (int i = 0; i < 7; ++i)
            for (int l = 0; l < 2; ++l) raw(i, l) = g(gen);
        auto sol = solve_poisson(Q, centered_rhs(raw, mu), mu);
        CHECK(sol.residual < 1e-10);
        CHECK(sol.centering < 1e-10);
    }
}

TEST_CASE("integral oracle reproduces the two-state solution") {
    Eigen::MatrixXd F(2, 1);
    F << 1.0, -1.0;
    auto res = poisson_integral_oracle_auto(symmetric_two_state(), F);
    CHECK(res.tail_ok);
    CHECK(res.value(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.value(1, 0) == doctest::Approx(-0.5).epsilon(1e-6));

    auto zero = poisson_integral_oracle(symmetric_two_state(),
                                        Eigen::MatrixXd::Zero(2, 1), 50.0, 64);
    CHECK(zero.value.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("integral oracle rejects tiny step counts") {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(poisson_integral_oracle(symmetric_two_state(), F, 50.0, 3),
                    ArgumentError);
}

TEST_CASE("oracle and direct solve agree on random instances") {
    std::mt19937_64 gen(13);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> size(2, 9);
    for (int trial = 0; trial < 50; ++trial) {
        int m0 = size(gen);
        Eigen::MatrixXd Q = test::random_generator_matrix(m0, gen);
        Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
        Eigen::MatrixXd raw(m0, 1);
        for (int i = 0; i < m0; ++i) raw(i, 0) = g(gen);
        Eigen::MatrixXd F = centered_rhs(raw, mu);
        auto direct = solve_poisson(Q, F, mu);
        auto oracle = poisson_integral_oracle_auto(Q, F);
        CHECK((direct.phi - oracle.value).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("solution magnitude respects the ergodic gap bound with 10% slack") {
    std::mt19937_64 gen(19);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        int m0 = 2 + static_cast<int>(gen() % 7);
        Eigen::MatrixXd Q = test::random_generator_matrix(m0, gen);
        Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
        Eigen::MatrixXd raw(m0, 1);
        for (int i = 0; i < m0; ++i) raw(i, 0) = g(gen);
        Eigen::MatrixXd F = centered_rhs(raw, mu);
        if (F.cwiseAbs().maxCoeff() == 0.0) continue;
        auto sol = solve_poisson(Q, F, mu);
        double gap = ergodic_gap_constant(Q, mu, 80.0, 1024);
        CHECK(sol.phi.cwiseAbs().maxCoeff() <= 1.1 * gap * F.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("field-level solve centers internally") {
    std::mt19937_64 gen(23);
    chain::GeneratorField gf = test::random_generator_field(3, 2, gen);
    StateFunctionField field = test::random_state_function(3, 2, 2, gen);
    Eigen::VectorXd x = test::random_point(2, 0.25, gen);
    auto sol = solve_poisson_at(gf, field, x);
    CHECK(sol.residual < 1e-10);
    CHECK(sol.centering < 1e-10);
    CHECK(sol.x == x);
}

TEST_CASE("gradient vanishes for constant data") {
    chain::GeneratorField gf(2, 1, true);
    gf.set_rate(0, 1, Polynomial::constant(1, 1.0));
    gf.set_rate(1, 0, Polynomial::constant(1, 1.0));
    StateFunctionField field(2, 1, 1);
    field.at(0, 0) = Polynomial::constant(1, 1.0);
    field.at(1, 0) = Polynomial::constant(1, -1.0);
    Eigen::VectorXd x(1), dir(1);
    x << 0.4;
    dir << 1.0;
    CHECK(poisson_gradient(gf, field, x, dir).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradient matches central differences of the solve") {
    std::mt19937_64 gen(29);
    for (int trial = 0; trial < 15; ++trial) {
        int m0 = 2 + static_cast<int>(gen() % 4);
        int n = 1 + static_cast<int>(gen() % 3);
        chain::GeneratorField gf = test::random_generator_field(m0, n, gen);
        StateFunctionField field = test::random_state_function(m0, n, n, gen);
        Eigen::VectorXd x = test::random_point(n, 0.3, gen);
        Eigen::VectorXd dir = test::random_unit_direction(n, gen);

        Eigen::MatrixXd analytic = poisson_gradient(gf, field, x, dir);
        const double h = 1e-5;
        Eigen::MatrixXd fd = (solve_poisson_at(gf, field, x + h * dir).phi -
                              solve_poisson_at(gf, field, x - h * dir).phi) /
                             (2.0 * h);
        CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-5);
    }
}
