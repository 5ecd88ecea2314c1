#include "mssde/state_function.hpp"

#include <cmath>

#include "mssde/errors.hpp"

namespace mssde {

PolyMatrix::PolyMatrix(int rows, int cols, int n_vars)
    : rows_(rows), cols_(cols), n_vars_(n_vars),
      polys_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
             Polynomial(n_vars, {})) {}

void PolyMatrix::evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const {
    out.resize(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c)
            out(r, c) = at(r, c).evaluate(x);
}

Eigen::MatrixXd PolyMatrix::evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out;
    evaluate_into(x, out);
    return out;
}

bool PolyMatrix::is_constant() const {
    for (const auto& p : polys_)
        if (!p.is_constant()) return false;
    return true;
}

bool PolyMatrix::operator==(const PolyMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && polys_ == other.polys_;
}

StateFunctionField::StateFunctionField(int m0, int n_out, int n_vars)
    : m0_(m0), n_out_(n_out), n_vars_(n_vars),
      polys_(static_cast<std::size_t>(m0) * static_cast<std::size_t>(n_out),
             Polynomial(n_vars, {})) {}

Eigen::MatrixXd StateFunctionField::evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out;
    evaluate_into(x, out);
    return out;
}

void StateFunctionField::evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const {
    out.resize(m0_, n_out_);
    for (int i = 0; i < m0_; ++i)
        for (int l = 0; l < n_out_; ++l)
            out(i, l) = at(i, l).evaluate(x);
}

void StateFunctionField::evaluate_row_into(const Eigen::VectorXd& x, int state,
                                           Eigen::Ref<Eigen::VectorXd> out) const {
    for (int l = 0; l < n_out_; ++l) out[l] = at(state, l).evaluate(x);
}

Eigen::MatrixXd StateFunctionField::directional_derivative(const Eigen::VectorXd& x,
                                                           const Eigen::VectorXd& dir) const {
    Eigen::MatrixXd out(m0_, n_out_);
    for (int i = 0; i < m0_; ++i)
        for (int l = 0; l < n_out_; ++l)
            out(i, l) = at(i, l).directional_derivative(dir).evaluate(x);
    return out;
}

StateFunctionField StateFunctionField::derivative(int var) const {
    StateFunctionField d(m0_, n_out_, n_vars_);
    for (int i = 0; i < m0_; ++i)
        for (int l = 0; l < n_out_; ++l)
            d.at(i, l) = at(i, l).derivative(var);
    return d;
}

double StateFunctionField::sup_norm(const Eigen::VectorXd& x) const {
    double m = 0.0;
    for (const auto& p : polys_) {
        double v = std::abs(p.evaluate(x));
        if (!std::isfinite(v))
            throw ModelSpecError("state function evaluates to a non-finite value");
        if (v > m) m = v;
    }
    return m;
}

bool StateFunctionField::is_constant() const {
    for (const auto& p : polys_)
        if (!p.is_constant()) return false;
    return true;
}

bool StateFunctionField::states_identical() const {
    for (int i = 1; i < m0_; ++i)
        for (int l = 0; l < n_out_; ++l)
            if (!(at(i, l) == at(0, l))) return false;
    return true;
}

}  // namespace mssde
