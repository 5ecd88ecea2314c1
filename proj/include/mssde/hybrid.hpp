#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mssde/averaging.hpp"
#include "mssde/chain.hpp"
#include "mssde/rng.hpp"

namespace mssde::hybrid {

/// Uniform macro grid 0 = t_0 < ... < t_M = T.
struct TimeGrid {
    double T = 0.0;
    double h = 0.0;
    long M = 0;

    static TimeGrid make(double T, double h);
    double time(long k) const { return h * static_cast<double>(k); }
};

/// Everything one macro step consumed besides the frozen position: the
/// exact chain segment and the Brownian sub-increments split at its jumps
/// (row p of dw_sub covers sojourn piece p of the segment).
struct StepRecord {
    chain::ChainSegment segment;
    Eigen::MatrixXd dw_sub;
};

/// One realization of (X, alpha) on a macro grid, with the driving noise.
struct HybridPath {
    TimeGrid grid;
    int alpha0 = 0;
    int final_alpha = 0;
    Eigen::MatrixXd X;   // (M+1) x n
    Eigen::MatrixXd dW;  // M x d, row k = sum of that step's sub-increments
    std::vector<StepRecord> steps;

    void validate() const;
};

/// Coupled realization: hybrid path, averaged path driven by the identical
/// Brownian increments, and the pointwise rescaled deviation.
struct CoupledPaths {
    HybridPath hybrid;
    Eigen::MatrixXd averaged;   // (M+1) x n
    Eigen::MatrixXd deviation;  // (X - Xbar) / sqrt(eps)
};

/// Streaming two-scale stepper (frozen-coefficient splitting).
///
/// Per macro step the position is frozen, the chain is simulated exactly
/// under Q(x)/eps, the drift is integrated against exact occupation times
/// and the diffusion against jump-aligned Gaussian sub-increments. Holds
/// preallocated workspace; one instance per thread.
class TwoScaleSimulator {
public:
    TwoScaleSimulator(averaging::SwitchModelPtr model, double eps);

    /// Advances (x, alpha) over one step of length h. dw_out receives the
    /// macro Brownian increment. rec, when given, captures the segment and
    /// sub-increments. step_index only labels divergence errors.
    void step(Eigen::VectorXd& x, int& alpha, double h, RngStream& rng,
              Eigen::VectorXd& dw_out, StepRecord* rec = nullptr, long step_index = 0);

    const averaging::SwitchModel& model() const { return *model_; }
    double eps() const { return eps_; }

private:
    const Eigen::MatrixXd& sigma_at(const Eigen::VectorXd& x, int state);

    averaging::SwitchModelPtr model_;
    double eps_;
    bool const_generator_;
    bool const_diffusion_;
    bool q_ready_ = false;
    Eigen::MatrixXd q_eps_;
    std::vector<Eigen::MatrixXd> sigma_cache_;
    std::vector<char> sigma_valid_;
    Eigen::VectorXd occupation_, drift_row_, z_, drift_acc_, diff_acc_;
};

/// Which diffusion drives the averaged equation.
enum class AveragedDiffusionMode {
    coupling_sigma,  // sigma(x), n x d; valid when sigma is switch-independent
    averaged_sqrt,   // PSD square root of the averaged covariance, n x n
};

/// Euler-Maruyama stepper for the averaged equation.
class AveragedSimulator {
public:
    AveragedSimulator(const averaging::AveragedModel& avg, AveragedDiffusionMode mode);

    /// x += b_bar(x) h + Sigma(x) dw.
    void step(Eigen::VectorXd& x, double h, const Eigen::VectorXd& dw, long step_index = 0);

    int noise_dim() const { return noise_dim_; }

private:
    const averaging::AveragedModel& avg_;
    AveragedDiffusionMode mode_;
    int noise_dim_;
    bool const_coeffs_;
    bool cached_ = false;
    Eigen::VectorXd bbar_cache_;
    Eigen::MatrixXd sigma_cache_;
};

/// Joint Euler-Maruyama stepper for the averaged process and the limiting
/// fluctuation process, sharing the averaged equation's increments and
/// driving the fluctuation additionally by an independent Brownian motion.
class CltLimitSimulator {
public:
    explicit CltLimitSimulator(const averaging::AveragedModel& avg);

    void step(Eigen::VectorXd& xbar, Eigen::VectorXd& z, double h,
              const Eigen::VectorXd& dw, RngStream& rng_tilde, long step_index = 0);

private:
    const averaging::AveragedModel& avg_;
    bool const_grad_;
    bool cached_ = false;
    Eigen::MatrixXd grad_b_cache_;
    std::vector<Eigen::MatrixXd> dsigma_cache_;
    Eigen::VectorXd wt_;
};

/// Full two-scale path with complete noise record.
HybridPath simulate_two_scale(averaging::SwitchModelPtr model, double eps,
                              const Eigen::VectorXd& x0, int alpha0,
                              const TimeGrid& grid, RngStream& rng);

/// Averaged path. Increments are taken from dW when supplied (coupling) and
/// drawn from rng otherwise; exactly one of the two must be provided.
Eigen::MatrixXd simulate_averaged(const averaging::AveragedModel& avg,
                                  const Eigen::VectorXd& x0, const TimeGrid& grid,
                                  const Eigen::MatrixXd* dW, AveragedDiffusionMode mode,
                                  RngStream* rng = nullptr);

/// Joint (averaged, fluctuation-limit) paths; the averaged component uses
/// the supplied increments, the fluctuation additionally an independent
/// Brownian motion drawn from rng_tilde. Returns {Xbar path, Z path}.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_clt_limit(
    const averaging::AveragedModel& avg, const Eigen::VectorXd& x0,
    const TimeGrid& grid, const Eigen::MatrixXd& dW, RngStream& rng_tilde);

/// Hybrid + coupled averaged path + rescaled deviation. Requires the
/// switching-independent diffusion hypothesis unless allow_uncoupled is set,
/// in which case the averaged path is driven through the PSD-root diffusion
/// by the shared increments as an explicit diagnostic (needs d == n).
CoupledPaths coupled_deviation(averaging::SwitchModelPtr model,
                               const averaging::AveragedModel& avg, double eps,
                               const Eigen::VectorXd& x0, int alpha0,
                               const TimeGrid& grid, RngStream& rng,
                               bool allow_uncoupled = false);

/// Message used by every guard that enforces the switching-independent
/// diffusion hypothesis for strong-error runs.
const char* strong_hypothesis_message();

}  // namespace mssde::hybrid
