#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mssde/errors.hpp"
#include "mssde/polynomial.hpp"
#include "mssde/rng.hpp"

namespace mssde::chain {

/// The map x -> Q(x) over a finite state space, with polynomial
/// off-diagonal rates. The diagonal is never stored: evaluation computes it
/// as the negated off-diagonal row sum, so every evaluated matrix is
/// conservative by construction.
///
/// Negative off-diagonal evaluations are clamped to 0 when clamp_negative
/// is set (a thread-safe counter records how often); otherwise they raise
/// ModelSpecError.
class GeneratorField {
public:
    GeneratorField() = default;
    GeneratorField(int m0, int n, bool clamp_negative = true);

    GeneratorField(const GeneratorField& other);
    GeneratorField& operator=(const GeneratorField& other);

    void set_rate(int i, int j, Polynomial p);
    const Polynomial& rate(int i, int j) const;

    /// Clamped m0 x m0 generator at x.
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
    void evaluate_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const;

    /// Pre-clamp off-diagonal values (diagonal = negated raw row sum).
    Eigen::MatrixXd evaluate_raw(const Eigen::VectorXd& x) const;

    /// Directional derivative of the clamped evaluation. An entry whose
    /// pre-clamp value is negative at x contributes 0 (the clamp is flat
    /// there); boundary points are treated the same way.
    Eigen::MatrixXd directional_derivative(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& dir) const;

    bool is_constant() const;
    int m0() const { return m0_; }
    int n() const { return n_; }
    bool clamp_negative() const { return clamp_negative_; }
    std::uint64_t clamp_events() const { return clamp_events_.load(); }

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(m0_) +
               static_cast<std::size_t>(j);
    }

    int m0_ = 0, n_ = 0;
    bool clamp_negative_ = true;
    std::vector<Polynomial> rates_;  // row-major, diagonal slots unused
    mutable std::atomic<std::uint64_t> clamp_events_{0};
};

/// Strictly positive weights summing to 1 (the invariant measure type).
struct ProbabilityVector {
    Eigen::VectorXd weights;
};
ProbabilityVector make_probability_vector(Eigen::VectorXd w);

/// Transition matrix P_t together with the time it corresponds to.
struct StochasticMatrix {
    Eigen::MatrixXd P;
    double t = 0.0;
};

/// One exactly-sampled trajectory of the frozen-rate chain over [0, delta].
struct ChainSegment {
    int initial_state = 0;
    double duration = 0.0;
    std::vector<double> jump_times;  // sorted, in [0, duration]
    std::vector<int> states;         // state entered at each jump
    Eigen::VectorXd occupation;      // time spent per state

    int final_state() const { return states.empty() ? initial_state : states.back(); }
    void validate() const;
};

struct ProbeReport {
    Eigen::VectorXd x;
    bool finite = true;
    bool offdiag_nonneg = true;
    int negative_entries = 0;
    bool irreducible = false;
    double total_rate = 0.0;  // K(x) = sum_i sum_{j != i} q_ij(x), post-clamp
    bool ok = false;
};

struct ValidationReport {
    bool degenerate = false;  // m0 < 2: irreducibility is vacuous
    bool all_ok = false;
    std::vector<ProbeReport> probes;
};

/// Probe-wise structural validation: nonnegativity pre-clamp, irreducibility
/// of the support graph, and the total switching rate K(x).
ValidationReport validate_generator(const GeneratorField& gf,
                                    const std::vector<Eigen::VectorXd>& probes);

/// Unique invariant measure of a conservative irreducible generator:
/// mu Q = 0, sum(mu) = 1, all entries positive.
ProbabilityVector invariant_measure(const Eigen::MatrixXd& Q);

/// P_t = exp(tQ) by uniformization, Poisson tail truncated below 1e-14.
StochasticMatrix transition_matrix(const Eigen::MatrixXd& Q, double t);

/// Streaming form of exact chain-segment simulation. Calls
/// on_hold(state, dt) for every sojourn piece (including the final partial
/// one, in time order) and on_jump(t, new_state) at every transition.
/// Returns the final state. RNG consumption per piece is
/// [exponential, (categorical when the jump lands inside the window)].
template <class HoldFn, class JumpFn>
int walk_chain_segment(const Eigen::MatrixXd& Q, int i0, double delta,
                       RngStream& rng, HoldFn&& on_hold, JumpFn&& on_jump) {
    const int m0 = static_cast<int>(Q.rows());
    if (delta < 0.0) throw ArgumentError("chain segment duration must be nonnegative");
    if (i0 < 0 || i0 >= m0) throw ArgumentError("chain initial state out of range");
    if (delta == 0.0) return i0;

    constexpr std::uint64_t kMaxJumps = 10'000'000;
    std::uint64_t jumps = 0;
    double t = 0.0;
    int i = i0;
    for (;;) {
        double rate = -Q(i, i);
        if (rate <= 0.0) {  // absorbing: hold forever
            on_hold(i, delta - t);
            return i;
        }
        double tau = rng.exponential(rate);
        if (t + tau >= delta) {
            on_hold(i, delta - t);
            return i;
        }
        on_hold(i, tau);
        t += tau;
        double u = rng.uniform01() * rate;
        double acc = 0.0;
        int next = -1;
        for (int j = 0; j < m0; ++j) {
            if (j == i) continue;
            double q = Q(i, j);
            if (q <= 0.0) continue;
            acc += q;
            next = j;
            if (u < acc) break;
        }
        if (next < 0) {  // all outgoing rates vanished numerically
            on_hold(i, delta - t);
            return i;
        }
        i = next;
        on_jump(t, i);
        if (++jumps > kMaxJumps)
            throw StiffnessError("chain segment exceeded 1e7 jumps; switching rates too stiff");
    }
}

/// Exact simulation of the chain over [0, delta] with full jump record.
ChainSegment sample_chain_segment(const Eigen::MatrixXd& Q, int i0, double delta,
                                  RngStream& rng);

/// Directional derivative of x -> mu^x, the unique solution of
/// (dmu) Q + mu (dQ) = 0 with sum(dmu) = 0.
Eigen::VectorXd invariant_measure_gradient(const GeneratorField& gf,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& dir);

/// Directional derivative of x -> P^x_t f, computed by composite Simpson
/// quadrature of the variation-of-constants integral; the step is refined
/// until halving changes the result by less than 1e-8.
Eigen::VectorXd semigroup_derivative(const GeneratorField& gf, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& dir, double t,
                                     const Eigen::VectorXd& f);

}  // namespace mssde::chain
