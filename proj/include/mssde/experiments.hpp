#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mssde/averaging.hpp"
#include "mssde/hybrid.hpp"

namespace mssde::experiments {

enum class ErrorKind { strong_sup, strong_fixed_t, weak, clt_weak };
enum class TestFunction { identity, square, bounded_smooth };

std::string to_string(ErrorKind k);
std::string to_string(TestFunction f);
ErrorKind error_kind_from_string(const std::string& s);
TestFunction test_function_from_string(const std::string& s);

/// Registered scalar test functions: identity is the coordinate sum,
/// square the squared Euclidean norm, bounded_smooth the cosine of the
/// coordinate sum (all reduce to x, x^2, cos x in one dimension).
double apply_test_function(TestFunction f, const Eigen::VectorXd& x);

struct ScenarioConfig {
    std::string model_ref = "example_2_9";  // builtin id or spec file path
    std::vector<double> eps;
    double T = 1.0;
    double h = 1.0 / 256.0;
    long n_paths = 100000;
    std::uint64_t seed = 1;
    ErrorKind kind = ErrorKind::strong_fixed_t;
    TestFunction phi = TestFunction::identity;
    int p_moment = 2;
    Eigen::VectorXd x0;  // zero vector when empty
    int alpha0 = 0;
    bool allow_uncoupled = false;
    bool emit_timing = true;
    // Use the registered closed-form limit-law expectation (when one exists
    // for the model) instead of simulating the limiting process.
    bool clt_closed_form_limit = true;

    void validate() const;
};

struct ErrorEstimate {
    double epsilon = 0.0;
    double estimate = 0.0;
    double std_err = 0.0;
    long n_paths = 0;
    double seconds = 0.0;

    void validate() const;
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct ConvergenceReport {
    ScenarioConfig config;
    std::vector<ErrorEstimate> estimates;
    std::vector<std::optional<double>> references;  // parallel to estimates
    std::optional<FitResult> fit;
};

/// Worker cap: MSSDE_THREADS when set (>= 1), hardware parallelism otherwise.
int worker_count();

struct Moments {
    double sum = 0.0;
    double sumsq = 0.0;
    long n = 0;

    void add(double v) { sum += v; sumsq += v * v; ++n; }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double variance() const;
    double std_err() const;
};

/// Runs chunk_fn over fixed 4096-path chunks of [0, N), distributing chunks
/// across workers, and merges the per-chunk moments in chunk order. The
/// result is bit-identical for any worker count, provided chunk_fn writes a
/// pure function of its range.
Moments parallel_moments(long n_paths,
                         const std::function<void(long, long, Moments&)>& chunk_fn);

/// E[ sup-or-terminal |X^eps - Xbar|^p ] over coupled paths, one estimate
/// per call. Enforces the switching-independent diffusion hypothesis unless
/// config.allow_uncoupled requests the diagnostic coupling.
ErrorEstimate mc_strong_error(averaging::SwitchModelPtr model,
                              const averaging::AveragedModel& avg,
                              const ScenarioConfig& config, double eps);

/// |E phi(X^eps_T) - E phi(Xbar_T)| with independent path populations and a
/// delta-method standard error on the difference of means.
ErrorEstimate mc_weak_error(averaging::SwitchModelPtr model,
                            const averaging::AveragedModel& avg,
                            const ScenarioConfig& config, double eps);

/// |E phi(Z^eps_T) - E phi(Z_T)| with Z^eps from coupled deviations and the
/// limit either simulated or taken from its registered closed-form law.
ErrorEstimate mc_clt_error(averaging::SwitchModelPtr model,
                           const averaging::AveragedModel& avg,
                           const ScenarioConfig& config, double eps);

/// Least squares of log2(error) on log2(eps).
FitResult fit_order(const std::vector<std::pair<double, double>>& points);

/// Closed-form error curves for the builtin models, by identifier:
/// ex2_9_strong_mse, ex2_9_clt_mean, ex2_9_clt_second, ex2_11_weak_mean,
/// remark5_4_mse.
double closed_form_reference(const std::string& id, double eps, double t);

/// Closed-form E phi(Z_T) of the limiting law, when known for the model.
std::optional<double> clt_limit_expectation(const std::string& model_name,
                                            TestFunction phi, double T);

/// Reference error curve matching (model, kind, phi, p), when one exists.
std::optional<double> reference_for(const std::string& model_name, ErrorKind kind,
                                    TestFunction phi, int p_moment, double eps, double T);

/// Runs the configured scenario over its full eps list; attaches references
/// and (for >= 3 points) the fitted order. Strong-error estimates enter the
/// fit through their p-th root; weak and CLT estimates enter directly.
ConvergenceReport run_convergence(averaging::SwitchModelPtr model,
                                  const ScenarioConfig& config);

}  // namespace mssde::experiments
