#pragma once

#include <vector>

#include <Eigen/Core>

#include "mssde/polynomial.hpp"

namespace mssde {

/// Dense grid of polynomials, used for state-indexed matrix coefficients.
class PolyMatrix {
public:
    PolyMatrix() = default;
    PolyMatrix(int rows, int cols, int n_vars);

    Polynomial& at(int r, int c) { return polys_[index(r, c)]; }
    const Polynomial& at(int r, int c) const { return polys_[index(r, c)]; }

    void evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const;
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int n_vars() const { return n_vars_; }
    bool is_constant() const;
    bool operator==(const PolyMatrix& other) const;

private:
    std::size_t index(int r, int c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(c);
    }

    int rows_ = 0, cols_ = 0, n_vars_ = 0;
    std::vector<Polynomial> polys_;
};

/// Map x -> F(x, i) in R^{n_out} for each state i of a finite switching
/// space, with one polynomial per (state, output coordinate).
class StateFunctionField {
public:
    StateFunctionField() = default;
    StateFunctionField(int m0, int n_out, int n_vars);

    Polynomial& at(int state, int coord) { return polys_[index(state, coord)]; }
    const Polynomial& at(int state, int coord) const { return polys_[index(state, coord)]; }

    /// m0 x n_out matrix; row i is F(x, i).
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
    void evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const;
    void evaluate_row_into(const Eigen::VectorXd& x, int state,
                           Eigen::Ref<Eigen::VectorXd> out) const;

    /// Row-wise directional derivative field, same shape as evaluate().
    Eigen::MatrixXd directional_derivative(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& dir) const;

    /// Exact partial-derivative field with respect to variable `var`.
    StateFunctionField derivative(int var) const;

    /// sup_i max_l |F(x, i)_l|, the per-probe magnitude diagnostic.
    double sup_norm(const Eigen::VectorXd& x) const;

    bool is_constant() const;

    /// True when all states carry structurally identical polynomials.
    bool states_identical() const;

    int m0() const { return m0_; }
    int n_out() const { return n_out_; }
    int n_vars() const { return n_vars_; }

private:
    std::size_t index(int state, int coord) const {
        return static_cast<std::size_t>(state) * static_cast<std::size_t>(n_out_) +
               static_cast<std::size_t>(coord);
    }

    int m0_ = 0, n_out_ = 0, n_vars_ = 0;
    std::vector<Polynomial> polys_;
};

}  // namespace mssde
