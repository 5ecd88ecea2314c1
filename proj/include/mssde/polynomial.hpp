#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mssde {

/// One monomial: coeff * prod_k x_k^{exponents[k]}.
struct Term {
    std::vector<std::uint32_t> exponents;
    double coeff = 0.0;
};

/// Sparse multivariate polynomial in n_vars variables.
///
/// Terms are kept canonical (sorted by exponent vector, duplicates merged,
/// zero coefficients dropped) so that structural comparison of two
/// polynomials is a term-by-term equality check.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(int n_vars, std::vector<Term> terms);

    /// Constant polynomial.
    static Polynomial constant(int n_vars, double value);

    double evaluate(const Eigen::VectorXd& x) const;

    /// Exact partial derivative with respect to variable `var`.
    Polynomial derivative(int var) const;

    /// Exact directional derivative sum_k dir_k * d/dx_k.
    Polynomial directional_derivative(const Eigen::VectorXd& dir) const;

    bool is_constant() const;
    bool is_zero() const { return terms_.empty(); }
    int n_vars() const { return n_vars_; }
    const std::vector<Term>& terms() const { return terms_; }

    /// Structural equality of canonical term lists.
    bool operator==(const Polynomial& other) const;

private:
    void canonicalize();

    int n_vars_ = 0;
    std::vector<Term> terms_;
};

}  // namespace mssde
