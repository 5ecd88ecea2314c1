#include "mssde/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include "mssde/errors.hpp"

namespace mssde {

Polynomial::Polynomial(int n_vars, std::vector<Term> terms)
    : n_vars_(n_vars), terms_(std::move(terms)) {
    for (auto& t : terms_) {
        if (static_cast<int>(t.exponents.size()) != n_vars_) {
            throw ModelSpecError("polynomial term has exponent vector of length " +
                                 std::to_string(t.exponents.size()) + ", expected " +
                                 std::to_string(n_vars_));
        }
    }
    canonicalize();
}

Polynomial Polynomial::constant(int n_vars, double value) {
    if (value == 0.0) return Polynomial(n_vars, {});
    Term t;
    t.exponents.assign(static_cast<std::size_t>(n_vars), 0);
    t.coeff = value;
    return Polynomial(n_vars, {std::move(t)});
}

double Polynomial::evaluate(const Eigen::VectorXd& x) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        double m = t.coeff;
        for (int k = 0; k < n_vars_; ++k) {
            std::uint32_t e = t.exponents[static_cast<std::size_t>(k)];
            double xk = x[k];
            while (e--) m *= xk;
        }
        acc += m;
    }
    return acc;
}

Polynomial Polynomial::derivative(int var) const {
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
        std::uint32_t e = t.exponents[static_cast<std::size_t>(var)];
        if (e == 0) continue;
        Term d = t;
        d.coeff = t.coeff * static_cast<double>(e);
        d.exponents[static_cast<std::size_t>(var)] = e - 1;
        out.push_back(std::move(d));
    }
    return Polynomial(n_vars_, std::move(out));
}

Polynomial Polynomial::directional_derivative(const Eigen::VectorXd& dir) const {
    std::vector<Term> out;
    for (int k = 0; k < n_vars_; ++k) {
        if (dir[k] == 0.0) continue;
        Polynomial dk = derivative(k);
        for (auto t : dk.terms_) {
            t.coeff *= dir[k];
            out.push_back(std::move(t));
        }
    }
    return Polynomial(n_vars_, std::move(out));
}

bool Polynomial::is_constant() const {
    for (const auto& t : terms_)
        for (auto e : t.exponents)
            if (e != 0) return false;
    return true;
}

bool Polynomial::operator==(const Polynomial& other) const {
    if (n_vars_ != other.n_vars_ || terms_.size() != other.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (terms_[i].exponents != other.terms_[i].exponents) return false;
        if (terms_[i].coeff != other.terms_[i].coeff) return false;
    }
    return true;
}

void Polynomial::canonicalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
        return a.exponents < b.exponents;
    });
    std::vector<Term> merged;
    for (auto& t : terms_) {
        if (!merged.empty() && merged.back().exponents == t.exponents) {
            merged.back().coeff += t.coeff;
        } else {
            merged.push_back(std::move(t));
        }
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Term& t) { return t.coeff == 0.0; }),
                 merged.end());
    terms_ = std::move(merged);
}

}  // namespace mssde
