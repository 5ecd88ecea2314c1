#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mssde/chain.hpp"
#include "mssde/state_function.hpp"

namespace mssde::averaging {

/// Full problem instance: drift b(x, i), diffusion sigma(x, i), switching
/// generator, and dimensions (n spatial, d Brownian, m0 switch states).
struct SwitchModel {
    std::string name;
    int n = 0, d = 0, m0 = 0;
    StateFunctionField drift;              // [state][coordinate]
    std::vector<PolyMatrix> diffusion;     // per state: n x d
    chain::GeneratorField generator;
    bool sigma_switch_independent = false;

    void validate() const;
    /// Recompute sigma_switch_independent by structural comparison.
    void infer_sigma_independence();

    Eigen::MatrixXd sigma(const Eigen::VectorXd& x, int state) const;
    void sigma_into(const Eigen::VectorXd& x, int state, Eigen::MatrixXd& out) const;
};

using SwitchModelPtr = std::shared_ptr<const SwitchModel>;

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-10, 0) are clamped to zero; anything lower raises NotPsdError.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M);

/// Derived coefficient evaluators for the averaged and limiting equations.
///
/// All evaluators are pure functions of (model, x). Constant pieces of the
/// model (generator, drift, diffusion) are detected structurally and their
/// derived quantities cached once; the CLT diffusion for x-dependent data is
/// memoized on a 1e-8 quantization grid behind a mutex, so concurrent use is
/// safe and gives identical results to the serial path.
class AveragedModel {
public:
    explicit AveragedModel(SwitchModelPtr model);

    const SwitchModel& model() const { return *model_; }

    /// mu^x of the generator frozen at x.
    Eigen::VectorXd invariant_weights(const Eigen::VectorXd& x) const;

    /// Averaged drift: sum_j b(x, j) mu^x_j.
    Eigen::VectorXd averaged_drift(const Eigen::VectorXd& x) const;

    /// sum_j sigma(x, j) sigma(x, j)^T mu^x_j  (n x n).
    Eigen::MatrixXd averaged_covariance(const Eigen::VectorXd& x) const;

    /// PSD square root of averaged_covariance.
    Eigen::MatrixXd averaged_diffusion(const Eigen::VectorXd& x) const;

    /// CLT diffusion: PSD square root of the mu-averaged symmetrized outer
    /// product of the centered drift with the Poisson solution.
    Eigen::MatrixXd clt_theta(const Eigen::VectorXd& x) const;

    /// Jacobian of the averaged drift: entry (k, l) = d b_bar_k / d x_l.
    Eigen::MatrixXd averaged_drift_gradient(const Eigen::VectorXd& x) const;

    /// Exact partial derivatives of the (switch-independent) diffusion:
    /// out[l] = d sigma / d x_l, each n x d.
    void sigma_gradients(const Eigen::VectorXd& x,
                         std::vector<Eigen::MatrixXd>& out) const;

    /// sigma(x) for coupled runs; requires sigma_switch_independent.
    Eigen::MatrixXd coupling_sigma(const Eigen::VectorXd& x) const;

private:
    Eigen::MatrixXd theta_uncached(const Eigen::VectorXd& x) const;

    SwitchModelPtr model_;
    bool const_generator_, const_drift_, const_diffusion_;
    std::vector<StateFunctionField> drift_partials_;  // per spatial direction

    Eigen::VectorXd mu_const_;  // valid when const_generator_

    // Theta memoization, keyed by x quantized on a 1e-8 grid (empty key when
    // the model makes Theta x-independent).
    mutable std::mutex cache_mutex_;
    mutable std::map<std::vector<long long>, Eigen::MatrixXd> theta_cache_;
};

}  // namespace mssde::averaging
