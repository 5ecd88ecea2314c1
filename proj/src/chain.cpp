#include "mssde/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace mssde::chain {

namespace {

constexpr double kPoissonTailTol = 1e-14;
// Above this value of Lambda*t the series is replaced by squaring halves,
// which keeps the term count bounded and avoids weight underflow.
constexpr double kSplitThreshold = 128.0;

bool strongly_connected(const Eigen::MatrixXd& Q) {
    const int m0 = static_cast<int>(Q.rows());
    auto reachable = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(m0), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < m0; ++j) {
                if (j == i || seen[static_cast<std::size_t>(j)]) continue;
                double q = transpose ? Q(j, i) : Q(i, j);
                if (q > 0.0) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    stack.push_back(j);
                    ++count;
                }
            }
        }
        return count == m0;
    };
    return reachable(false) && reachable(true);
}

// Q^T with its first row replaced by ones: the normalized stationary system.
// Shared by invariant_measure and invariant_measure_gradient.
Eigen::FullPivLU<Eigen::MatrixXd> stationary_lu(const Eigen::MatrixXd& Q) {
    Eigen::MatrixXd A = Q.transpose();
    A.row(0).setOnes();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw IrreducibilityError("stationary system is singular: generator is reducible");
    return lu;
}

}  // namespace

GeneratorField::GeneratorField(int m0, int n, bool clamp_negative)
    : m0_(m0), n_(n), clamp_negative_(clamp_negative),
      rates_(static_cast<std::size_t>(m0) * static_cast<std::size_t>(m0),
             Polynomial(n, {})) {
    if (m0 < 1) throw ModelSpecError("generator needs at least one state");
    if (n < 1) throw ModelSpecError("generator needs at least one spatial variable");
}

GeneratorField::GeneratorField(const GeneratorField& other)
    : m0_(other.m0_), n_(other.n_), clamp_negative_(other.clamp_negative_),
      rates_(other.rates_), clamp_events_(other.clamp_events_.load()) {}

GeneratorField& GeneratorField::operator=(const GeneratorField& other) {
    m0_ = other.m0_;
    n_ = other.n_;
    clamp_negative_ = other.clamp_negative_;
    rates_ = other.rates_;
    clamp_events_.store(other.clamp_events_.load());
    return *this;
}

void GeneratorField::set_rate(int i, int j, Polynomial p) {
    if (i == j) throw ModelSpecError("diagonal generator entries are derived, not set");
    if (i < 0 || i >= m0_ || j < 0 || j >= m0_)
        throw ModelSpecError("generator entry index out of range");
    if (p.n_vars() != n_)
        throw ModelSpecError("generator entry polynomial has wrong variable count");
    rates_[index(i, j)] = std::move(p);
}

const Polynomial& GeneratorField::rate(int i, int j) const { return rates_[index(i, j)]; }

void GeneratorField::evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const {
    out.resize(m0_, m0_);
    for (int i = 0; i < m0_; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < m0_; ++j) {
            if (j == i) continue;
            double q = rates_[index(i, j)].evaluate(x);
            if (!std::isfinite(q))
                throw ModelSpecError("generator rate q(" + std::to_string(i) + "," +
                                     std::to_string(j) + ") is non-finite at probe point");
            if (q < 0.0) {
                if (!clamp_negative_)
                    throw ModelSpecError("generator rate q(" + std::to_string(i) + "," +
                                         std::to_string(j) + ") evaluates negative and clamping is disabled");
                clamp_events_.fetch_add(1, std::memory_order_relaxed);
                q = 0.0;
            }
            out(i, j) = q;
            rowsum += q;
        }
        out(i, i) = -rowsum;
    }
}

Eigen::MatrixXd GeneratorField::evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out;
    evaluate_into(x, out);
    return out;
}

Eigen::MatrixXd GeneratorField::evaluate_raw(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out(m0_, m0_);
    for (int i = 0; i < m0_; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < m0_; ++j) {
            if (j == i) continue;
            double q = rates_[index(i, j)].evaluate(x);
            out(i, j) = q;
            rowsum += q;
        }
        out(i, i) = -rowsum;
    }
    return out;
}

Eigen::MatrixXd GeneratorField::directional_derivative(const Eigen::VectorXd& x,
                                                       const Eigen::VectorXd& dir) const {
    Eigen::MatrixXd out(m0_, m0_);
    for (int i = 0; i < m0_; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < m0_; ++j) {
            if (j == i) continue;
            const Polynomial& p = rates_[index(i, j)];
            double dq = 0.0;
            if (!p.is_constant() && p.evaluate(x) >= 0.0)
                dq = p.directional_derivative(dir).evaluate(x);
            out(i, j) = dq;
            rowsum += dq;
        }
        out(i, i) = -rowsum;
    }
    return out;
}

bool GeneratorField::is_constant() const {
    for (const auto& p : rates_)
        if (!p.is_constant()) return false;
    return true;
}

ProbabilityVector make_probability_vector(Eigen::VectorXd w) {
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!(w[i] > 0.0))
            throw IrreducibilityError("probability vector entry " + std::to_string(i) +
                                      " is not strictly positive");
    if (std::abs(w.sum() - 1.0) > 1e-12)
        throw Error("probability vector does not sum to 1 within 1e-12");
    return ProbabilityVector{std::move(w)};
}

void ChainSegment::validate() const {
    if ((occupation.array() < 0.0).any())
        throw Error("chain segment has negative occupation time");
    if (std::abs(occupation.sum() - duration) > 1e-12)
        throw Error("chain segment occupation does not sum to the duration");
    int prev = initial_state;
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k] == prev) throw Error("chain segment records a self-jump");
        if (k > 0 && jump_times[k] < jump_times[k - 1])
            throw Error("chain segment jump times are not sorted");
        prev = states[k];
    }
}

ValidationReport validate_generator(const GeneratorField& gf,
                                    const std::vector<Eigen::VectorXd>& probes) {
    if (probes.empty()) throw ArgumentError("validate_generator needs at least one probe");
    ValidationReport report;
    report.degenerate = gf.m0() < 2;
    bool all_ok = !report.degenerate;
    for (const auto& x : probes) {
        ProbeReport pr;
        pr.x = x;
        Eigen::MatrixXd raw = gf.evaluate_raw(x);
        pr.finite = raw.allFinite();
        if (!pr.finite) {
            pr.ok = false;
            all_ok = false;
            report.probes.push_back(std::move(pr));
            continue;
        }
        Eigen::MatrixXd Q = raw;
        for (int i = 0; i < gf.m0(); ++i) {
            double rowsum = 0.0;
            for (int j = 0; j < gf.m0(); ++j) {
                if (j == i) continue;
                if (raw(i, j) < 0.0) {
                    pr.offdiag_nonneg = false;
                    ++pr.negative_entries;
                    Q(i, j) = 0.0;
                }
                rowsum += Q(i, j);
            }
            Q(i, i) = -rowsum;
            pr.total_rate += rowsum;
        }
        pr.irreducible = gf.m0() >= 2 && strongly_connected(Q);
        pr.ok = pr.finite && pr.irreducible &&
                (pr.offdiag_nonneg || gf.clamp_negative());
        all_ok = all_ok && pr.ok;
        report.probes.push_back(std::move(pr));
    }
    report.all_ok = all_ok;
    return report;
}

ProbabilityVector invariant_measure(const Eigen::MatrixXd& Q) {
    const int m0 = static_cast<int>(Q.rows());
    if (m0 == 1) return ProbabilityVector{Eigen::VectorXd::Ones(1)};
    auto lu = stationary_lu(Q);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m0);
    rhs[0] = 1.0;
    Eigen::VectorXd mu = lu.solve(rhs);
    // one step of iterative refinement on the normalized system
    Eigen::MatrixXd A = Q.transpose();
    A.row(0).setOnes();
    mu += lu.solve(rhs - A * mu);
    double residual = (mu.transpose() * Q).lpNorm<Eigen::Infinity>();
    if (residual > 1e-12)
        throw IrreducibilityError("stationary residual " + std::to_string(residual) +
                                  " exceeds 1e-12; generator ill-conditioned or reducible");
    return make_probability_vector(std::move(mu));
}

StochasticMatrix transition_matrix(const Eigen::MatrixXd& Q, double t) {
    if (t < 0.0) throw ArgumentError("transition_matrix needs t >= 0");
    const int m0 = static_cast<int>(Q.rows());
    double lambda = 0.0;
    for (int i = 0; i < m0; ++i) lambda = std::max(lambda, -Q(i, i));
    double m = lambda * t;
    if (m == 0.0) return {Eigen::MatrixXd::Identity(m0, m0), t};

    if (m > kSplitThreshold) {
        StochasticMatrix half = transition_matrix(Q, t / 2.0);
        return {half.P * half.P, t};
    }

    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m0, m0) + Q / lambda;
    double w = std::exp(-m);
    double cum = w;
    Eigen::MatrixXd acc = w * Eigen::MatrixXd::Identity(m0, m0);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m0, m0);
    const int k_max = static_cast<int>(m + 40.0 * std::sqrt(m) + 50.0);
    for (int k = 1; 1.0 - cum > kPoissonTailTol && k <= k_max; ++k) {
        power = S * power;
        w *= m / static_cast<double>(k);
        acc += w * power;
        cum += w;
    }
    return {std::move(acc), t};
}

ChainSegment sample_chain_segment(const Eigen::MatrixXd& Q, int i0, double delta,
                                  RngStream& rng) {
    const int m0 = static_cast<int>(Q.rows());
    ChainSegment seg;
    seg.initial_state = i0;
    seg.duration = delta;
    std::vector<long double> occ(static_cast<std::size_t>(m0), 0.0L);
    walk_chain_segment(
        Q, i0, delta, rng,
        [&](int state, double dt) { occ[static_cast<std::size_t>(state)] += dt; },
        [&](double t, int state) {
            seg.jump_times.push_back(t);
            seg.states.push_back(state);
        });
    seg.occupation.resize(m0);
    for (int i = 0; i < m0; ++i) seg.occupation[i] = static_cast<double>(occ[static_cast<std::size_t>(i)]);
    return seg;
}

Eigen::VectorXd invariant_measure_gradient(const GeneratorField& gf,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& dir) {
    Eigen::MatrixXd Q = gf.evaluate(x);
    const int m0 = static_cast<int>(Q.rows());
    Eigen::VectorXd mu = invariant_measure(Q).weights;
    if (gf.is_constant()) return Eigen::VectorXd::Zero(m0);
    Eigen::MatrixXd dQ = gf.directional_derivative(x, dir);

    // (dmu) Q = -mu dQ with the first equation replaced by sum(dmu) = 0.
    Eigen::VectorXd c = -(mu.transpose() * dQ).transpose();
    Eigen::VectorXd rhs = c;
    rhs[0] = 0.0;
    auto lu = stationary_lu(Q);
    Eigen::VectorXd dmu = lu.solve(rhs);
    Eigen::MatrixXd A = Q.transpose();
    A.row(0).setOnes();
    dmu += lu.solve(rhs - A * dmu);

    double residual = (dmu.transpose() * Q + mu.transpose() * dQ).lpNorm<Eigen::Infinity>();
    if (residual > 1e-10)
        throw Error("invariant measure gradient residual " + std::to_string(residual) +
                    " exceeds 1e-10");
    return dmu;
}

namespace {

Eigen::VectorXd semigroup_derivative_fixed(const Eigen::MatrixXd& Q,
                                           const Eigen::MatrixXd& dQ, double t,
                                           const Eigen::VectorXd& f, int steps) {
    const double delta = t / steps;
    Eigen::MatrixXd P_delta = transition_matrix(Q, delta).P;

    // u[j] = P_{j delta} f
    std::vector<Eigen::VectorXd> u(static_cast<std::size_t>(steps) + 1);
    u[0] = f;
    for (int j = 1; j <= steps; ++j) u[static_cast<std::size_t>(j)] = P_delta * u[static_cast<std::size_t>(j - 1)];

    // Simpson over g(s_j) = P_{s_j} dQ P_{t - s_j} f
    Eigen::MatrixXd P_cur = Eigen::MatrixXd::Identity(Q.rows(), Q.cols());
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
    for (int j = 0; j <= steps; ++j) {
        double w = (j == 0 || j == steps) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        acc += w * (P_cur * (dQ * u[static_cast<std::size_t>(steps - j)]));
        if (j < steps) P_cur = P_cur * P_delta;
    }
    return (delta / 3.0) * acc;
}

}  // namespace

Eigen::VectorXd semigroup_derivative(const GeneratorField& gf, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& dir, double t,
                                     const Eigen::VectorXd& f) {
    if (t < 0.0) throw ArgumentError("semigroup_derivative needs t >= 0");
    const int m0 = gf.m0();
    if (t == 0.0 || gf.is_constant()) return Eigen::VectorXd::Zero(m0);
    Eigen::MatrixXd Q = gf.evaluate(x);
    Eigen::MatrixXd dQ = gf.directional_derivative(x, dir);
    if (dQ.isZero(0.0)) return Eigen::VectorXd::Zero(m0);

    int steps = 32;
    Eigen::VectorXd coarse = semigroup_derivative_fixed(Q, dQ, t, f, steps);
    for (; steps <= (1 << 14); steps *= 2) {
        Eigen::VectorXd fine = semigroup_derivative_fixed(Q, dQ, t, f, steps * 2);
        if ((fine - coarse).lpNorm<Eigen::Infinity>() < 1e-8) return fine;
        coarse = std::move(fine);
    }
    throw Error("semigroup_derivative quadrature did not converge to 1e-8");
}

}  // namespace mssde::chain
