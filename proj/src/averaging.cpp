#include "mssde/averaging.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "mssde/poisson.hpp"

namespace mssde::averaging {

void SwitchModel::validate() const {
    if (n < 1 || d < 1 || m0 < 1)
        throw ModelSpecError("model dimensions must be positive (n=" + std::to_string(n) +
                             ", d=" + std::to_string(d) + ", m0=" + std::to_string(m0) + ")");
    if (drift.m0() != m0 || drift.n_out() != n || drift.n_vars() != n)
        throw ModelSpecError("drift field shape does not match model dimensions");
    if (static_cast<int>(diffusion.size()) != m0)
        throw ModelSpecError("diffusion needs one matrix of polynomials per state");
    for (const auto& s : diffusion)
        if (s.rows() != n || s.cols() != d || s.n_vars() != n)
            throw ModelSpecError("diffusion matrix shape does not match model dimensions");
    if (generator.m0() != m0 || generator.n() != n)
        throw ModelSpecError("generator shape does not match model dimensions");
}

void SwitchModel::infer_sigma_independence() {
    sigma_switch_independent = true;
    for (int i = 1; i < m0; ++i) {
        if (!(diffusion[static_cast<std::size_t>(i)] == diffusion[0])) {
            sigma_switch_independent = false;
            return;
        }
    }
}

Eigen::MatrixXd SwitchModel::sigma(const Eigen::VectorXd& x, int state) const {
    Eigen::MatrixXd out;
    sigma_into(x, state, out);
    return out;
}

void SwitchModel::sigma_into(const Eigen::VectorXd& x, int state, Eigen::MatrixXd& out) const {
    diffusion[static_cast<std::size_t>(state)].evaluate_into(x, out);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw ArgumentError("psd_sqrt needs a square matrix");
    double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw ArgumentError("psd_sqrt needs a symmetric matrix (asymmetry " +
                            std::to_string(asym) + ")");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw Error("psd_sqrt eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < -1e-10)
            throw NotPsdError("matrix is not positive semidefinite: eigenvalue " +
                              std::to_string(lam[i]), lam[i]);
        if (lam[i] < 0.0) lam[i] = 0.0;
    }
    Eigen::MatrixXd S = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
    return 0.5 * (S + S.transpose());
}

AveragedModel::AveragedModel(SwitchModelPtr model) : model_(std::move(model)) {
    model_->validate();
    const_generator_ = model_->generator.is_constant();
    const_drift_ = model_->drift.is_constant();
    const_diffusion_ = true;
    for (const auto& s : model_->diffusion)
        if (!s.is_constant()) const_diffusion_ = false;

    drift_partials_.reserve(static_cast<std::size_t>(model_->n));
    for (int l = 0; l < model_->n; ++l)
        drift_partials_.push_back(model_->drift.derivative(l));

    if (const_generator_) {
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model_->n);
        mu_const_ = chain::invariant_measure(model_->generator.evaluate(x0)).weights;
    }
}

Eigen::VectorXd AveragedModel::invariant_weights(const Eigen::VectorXd& x) const {
    if (const_generator_) return mu_const_;
    return chain::invariant_measure(model_->generator.evaluate(x)).weights;
}

Eigen::VectorXd AveragedModel::averaged_drift(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mu = invariant_weights(x);
    Eigen::MatrixXd B = model_->drift.evaluate(x);  // m0 x n
    return B.transpose() * mu;
}

Eigen::MatrixXd AveragedModel::averaged_covariance(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mu = invariant_weights(x);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(model_->n, model_->n);
    Eigen::MatrixXd s;
    for (int j = 0; j < model_->m0; ++j) {
        model_->sigma_into(x, j, s);
        acc += mu[j] * (s * s.transpose());
    }
    return acc;
}

Eigen::MatrixXd AveragedModel::averaged_diffusion(const Eigen::VectorXd& x) const {
    return psd_sqrt(averaged_covariance(x));
}

Eigen::MatrixXd AveragedModel::theta_uncached(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd Q = model_->generator.evaluate(x);
    Eigen::VectorXd mu = invariant_weights(x);
    Eigen::MatrixXd F = model_->drift.evaluate(x);  // m0 x n
    Eigen::RowVectorXd bbar = mu.transpose() * F;
    F.rowwise() -= bbar;
    Eigen::MatrixXd phi = poisson::solve_poisson(Q, F, mu).phi;

    const int n = model_->n;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < model_->m0; ++j) {
        Eigen::VectorXd fj = F.row(j).transpose();
        Eigen::VectorXd pj = phi.row(j).transpose();
        Eigen::MatrixXd outer = fj * pj.transpose();
        M += mu[j] * (outer + outer.transpose());
    }
    return psd_sqrt(M);
}

Eigen::MatrixXd AveragedModel::clt_theta(const Eigen::VectorXd& x) const {
    std::vector<long long> key;
    if (!(const_generator_ && const_drift_)) {
        key.resize(static_cast<std::size_t>(x.size()));
        for (Eigen::Index i = 0; i < x.size(); ++i)
            key[static_cast<std::size_t>(i)] = llround(x[i] * 1e8);
    }
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = theta_cache_.find(key);
        if (it != theta_cache_.end()) return it->second;
    }
    Eigen::MatrixXd theta = theta_uncached(x);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (theta_cache_.size() > (1u << 20)) theta_cache_.clear();
        theta_cache_.emplace(std::move(key), theta);
    }
    return theta;
}

Eigen::MatrixXd AveragedModel::averaged_drift_gradient(const Eigen::VectorXd& x) const {
    const int n = model_->n;
    Eigen::VectorXd mu = invariant_weights(x);
    Eigen::MatrixXd grad(n, n);
    for (int l = 0; l < n; ++l) {
        Eigen::MatrixXd dB = drift_partials_[static_cast<std::size_t>(l)].evaluate(x);
        Eigen::VectorXd col = dB.transpose() * mu;
        if (!const_generator_) {
            Eigen::VectorXd dir = Eigen::VectorXd::Unit(n, l);
            Eigen::VectorXd dmu = chain::invariant_measure_gradient(model_->generator, x, dir);
            col += model_->drift.evaluate(x).transpose() * dmu;
        }
        grad.col(l) = col;
    }
    return grad;
}

void AveragedModel::sigma_gradients(const Eigen::VectorXd& x,
                                    std::vector<Eigen::MatrixXd>& out) const {
    if (!model_->sigma_switch_independent)
        throw HypothesisError("diffusion gradients are defined for switching-independent "
                              "diffusion only (sigma(x,i) = sigma(x))");
    const int n = model_->n, d = model_->d;
    out.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, d));
    const PolyMatrix& s0 = model_->diffusion[0];
    for (int l = 0; l < n; ++l)
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c)
                out[static_cast<std::size_t>(l)](r, c) = s0.at(r, c).derivative(l).evaluate(x);
}

Eigen::MatrixXd AveragedModel::coupling_sigma(const Eigen::VectorXd& x) const {
    if (!model_->sigma_switch_independent)
        throw HypothesisError("coupled averaged dynamics require sigma(x,i) = sigma(x)");
    return model_->sigma(x, 0);
}

}  // namespace mssde::averaging
