#include "mssde/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

namespace mssde::experiments {

namespace {

constexpr long kChunk = 4096;

// Substream roles within one path id.
constexpr std::uint64_t kSubHybrid = 0;       // chain clocks + driving Brownian
constexpr std::uint64_t kSubAveraged = 1;     // independent averaged population
constexpr std::uint64_t kSubLimitDrive = 2;   // limit population, averaged part
constexpr std::uint64_t kSubLimitTilde = 3;   // limit population, extra Brownian

Eigen::VectorXd initial_point(const ScenarioConfig& cfg, int n) {
    if (cfg.x0.size() == 0) return Eigen::VectorXd::Zero(n);
    if (cfg.x0.size() != n)
        throw ArgumentError("x0 has dimension " + std::to_string(cfg.x0.size()) +
                            ", model expects " + std::to_string(n));
    return cfg.x0;
}

hybrid::AveragedDiffusionMode coupling_mode(const averaging::SwitchModel& model,
                                            bool allow_uncoupled) {
    if (model.sigma_switch_independent) return hybrid::AveragedDiffusionMode::coupling_sigma;
    if (!allow_uncoupled) throw HypothesisError(hybrid::strong_hypothesis_message());
    if (model.d != model.n)
        throw ArgumentError("uncoupled diagnostic needs d == n to share increments with "
                            "the PSD-root diffusion");
    return hybrid::AveragedDiffusionMode::averaged_sqrt;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::strong_sup: return "strong_sup";
        case ErrorKind::strong_fixed_t: return "strong_fixed_t";
        case ErrorKind::weak: return "weak";
        case ErrorKind::clt_weak: return "clt_weak";
    }
    throw ArgumentError("unknown error kind");
}

std::string to_string(TestFunction f) {
    switch (f) {
        case TestFunction::identity: return "identity";
        case TestFunction::square: return "square";
        case TestFunction::bounded_smooth: return "bounded_smooth";
    }
    throw ArgumentError("unknown test function");
}

ErrorKind error_kind_from_string(const std::string& s) {
    if (s == "strong_sup") return ErrorKind::strong_sup;
    if (s == "strong_fixed_t") return ErrorKind::strong_fixed_t;
    if (s == "weak") return ErrorKind::weak;
    if (s == "clt_weak") return ErrorKind::clt_weak;
    throw ArgumentError("unknown error kind '" + s + "'");
}

TestFunction test_function_from_string(const std::string& s) {
    if (s == "identity") return TestFunction::identity;
    if (s == "square") return TestFunction::square;
    if (s == "bounded_smooth" || s == "cos") return TestFunction::bounded_smooth;
    throw ArgumentError("unknown test function '" + s + "'");
}

double apply_test_function(TestFunction f, const Eigen::VectorXd& x) {
    switch (f) {
        case TestFunction::identity: return x.sum();
        case TestFunction::square: return x.squaredNorm();
        case TestFunction::bounded_smooth: return std::cos(x.sum());
    }
    throw ArgumentError("unknown test function");
}

void ScenarioConfig::validate() const {
    if (eps.empty()) throw ArgumentError("scenario needs at least one eps value");
    std::set<double> distinct(eps.begin(), eps.end());
    if (distinct.size() != eps.size()) throw ArgumentError("eps values must be distinct");
    for (double e : eps)
        if (!(e > 0.0) || e > 1.0) throw ArgumentError("eps values must lie in (0, 1]");
    if (n_paths < 100) throw ArgumentError("scenario needs at least 100 paths");
    if (p_moment < 1) throw ArgumentError("moment order p must be >= 1");
    hybrid::TimeGrid::make(T, h);  // throws when T, h are inconsistent
}

void ErrorEstimate::validate() const {
    if (!(std_err >= 0.0) || !std::isfinite(std_err) || !std::isfinite(estimate))
        throw Error("error estimate is not finite");
}

double Moments::variance() const {
    if (n < 2) return 0.0;
    double m = mean();
    double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::max(v, 0.0);
}

double Moments::std_err() const {
    return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

int worker_count() {
    if (const char* env = std::getenv("MSSDE_THREADS")) {
        int k = std::atoi(env);
        if (k >= 1) return k;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

Moments parallel_moments(long n_paths,
                         const std::function<void(long, long, Moments&)>& chunk_fn) {
    const long n_chunks = (n_paths + kChunk - 1) / kChunk;
    std::vector<Moments> partial(static_cast<std::size_t>(n_chunks));
    const int workers = std::min<long>(worker_count(), n_chunks);

    std::atomic<long> next{0};
    auto drain = [&]() {
        for (;;) {
            long c = next.fetch_add(1);
            if (c >= n_chunks) return;
            long begin = c * kChunk;
            long end = std::min(n_paths, begin + kChunk);
            chunk_fn(begin, end, partial[static_cast<std::size_t>(c)]);
        }
    };
    if (workers <= 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
        for (auto& th : pool) th.join();
    }

    Moments total;
    for (const auto& m : partial) {  // chunk order: deterministic merge
        total.sum += m.sum;
        total.sumsq += m.sumsq;
        total.n += m.n;
    }
    return total;
}

ErrorEstimate mc_strong_error(averaging::SwitchModelPtr model,
                              const averaging::AveragedModel& avg,
                              const ScenarioConfig& config, double eps) {
    auto t0 = std::chrono::steady_clock::now();
    const auto mode = coupling_mode(*model, config.allow_uncoupled);
    const auto grid = hybrid::TimeGrid::make(config.T, config.h);
    const Eigen::VectorXd x0 = initial_point(config, model->n);
    const bool track_sup = config.kind == ErrorKind::strong_sup;
    const int p = config.p_moment;

    Moments mom = parallel_moments(config.n_paths, [&](long begin, long end, Moments& out) {
        hybrid::TwoScaleSimulator sim(model, eps);
        hybrid::AveragedSimulator asim(avg, mode);
        Eigen::VectorXd x(model->n), xb(model->n), dw(model->d);
        for (long path = begin; path < end; ++path) {
            RngStream rng(config.seed, static_cast<std::uint64_t>(path), kSubHybrid);
            x = x0;
            xb = x0;
            int alpha = config.alpha0;
            double sup = 0.0;
            for (long k = 0; k < grid.M; ++k) {
                sim.step(x, alpha, grid.h, rng, dw, nullptr, k);
                asim.step(xb, grid.h, dw, k);
                if (track_sup) sup = std::max(sup, (x - xb).norm());
            }
            double dist = track_sup ? sup : (x - xb).norm();
            out.add(std::pow(dist, p));
        }
    });

    ErrorEstimate est{eps, mom.mean(), mom.std_err(), mom.n, seconds_since(t0)};
    est.validate();
    return est;
}

ErrorEstimate mc_weak_error(averaging::SwitchModelPtr model,
                            const averaging::AveragedModel& avg,
                            const ScenarioConfig& config, double eps) {
    auto t0 = std::chrono::steady_clock::now();
    const auto grid = hybrid::TimeGrid::make(config.T, config.h);
    const Eigen::VectorXd x0 = initial_point(config, model->n);
    const TestFunction phi = config.phi;

    Moments hybrid_pop = parallel_moments(config.n_paths, [&](long begin, long end, Moments& out) {
        hybrid::TwoScaleSimulator sim(model, eps);
        Eigen::VectorXd x(model->n), dw(model->d);
        for (long path = begin; path < end; ++path) {
            RngStream rng(config.seed, static_cast<std::uint64_t>(path), kSubHybrid);
            x = x0;
            int alpha = config.alpha0;
            for (long k = 0; k < grid.M; ++k) sim.step(x, alpha, grid.h, rng, dw, nullptr, k);
            out.add(apply_test_function(phi, x));
        }
    });

    Moments avg_pop = parallel_moments(config.n_paths, [&](long begin, long end, Moments& out) {
        hybrid::AveragedSimulator asim(avg, hybrid::AveragedDiffusionMode::averaged_sqrt);
        Eigen::VectorXd x(model->n), dw(asim.noise_dim());
        const double sh = std::sqrt(grid.h);
        for (long path = begin; path < end; ++path) {
            RngStream rng(config.seed, static_cast<std::uint64_t>(path), kSubAveraged);
            x = x0;
            for (long k = 0; k < grid.M; ++k) {
                for (int c = 0; c < dw.size(); ++c) dw[c] = sh * rng.normal();
                asim.step(x, grid.h, dw, k);
            }
            out.add(apply_test_function(phi, x));
        }
    });

    double diff = std::abs(hybrid_pop.mean() - avg_pop.mean());
    double se = std::sqrt(hybrid_pop.variance() / static_cast<double>(hybrid_pop.n) +
                          avg_pop.variance() / static_cast<double>(avg_pop.n));
    ErrorEstimate est{eps, diff, se, config.n_paths, seconds_since(t0)};
    est.validate();
    return est;
}

ErrorEstimate mc_clt_error(averaging::SwitchModelPtr model,
                           const averaging::AveragedModel& avg,
                           const ScenarioConfig& config, double eps) {
    auto t0 = std::chrono::steady_clock::now();
    if (!model->sigma_switch_independent)
        throw HypothesisError(hybrid::strong_hypothesis_message());
    const auto grid = hybrid::TimeGrid::make(config.T, config.h);
    const Eigen::VectorXd x0 = initial_point(config, model->n);
    const TestFunction phi = config.phi;
    const double sqrt_eps = std::sqrt(eps);

    Moments dev_pop = parallel_moments(config.n_paths, [&](long begin, long end, Moments& out) {
        hybrid::TwoScaleSimulator sim(model, eps);
        hybrid::AveragedSimulator asim(avg, hybrid::AveragedDiffusionMode::coupling_sigma);
        Eigen::VectorXd x(model->n), xb(model->n), dw(model->d);
        for (long path = begin; path < end; ++path) {
            RngStream rng(config.seed, static_cast<std::uint64_t>(path), kSubHybrid);
            x = x0;
            xb = x0;
            int alpha = config.alpha0;
            for (long k = 0; k < grid.M; ++k) {
                sim.step(x, alpha, grid.h, rng, dw, nullptr, k);
                asim.step(xb, grid.h, dw, k);
            }
            out.add(apply_test_function(phi, (x - xb) / sqrt_eps));
        }
    });

    std::optional<double> limit_mean;
    double limit_var_term = 0.0;
    if (config.clt_closed_form_limit)
        limit_mean = clt_limit_expectation(model->name, phi, config.T);
    if (!limit_mean) {
        Moments limit_pop =
            parallel_moments(config.n_paths, [&](long begin, long end, Moments& out) {
                hybrid::CltLimitSimulator lsim(avg);
                Eigen::VectorXd xb(model->n), z(model->n), dw(model->d);
                const double sh = std::sqrt(grid.h);
                for (long path = begin; path < end; ++path) {
                    RngStream rng_w(config.seed, static_cast<std::uint64_t>(path), kSubLimitDrive);
                    RngStream rng_t(config.seed, static_cast<std::uint64_t>(path), kSubLimitTilde);
                    xb = x0;
                    z.setZero();
                    for (long k = 0; k < grid.M; ++k) {
                        for (int c = 0; c < model->d; ++c) dw[c] = sh * rng_w.normal();
                        lsim.step(xb, z, grid.h, dw, rng_t, k);
                    }
                    out.add(apply_test_function(phi, z));
                }
            });
        limit_mean = limit_pop.mean();
        limit_var_term = limit_pop.variance() / static_cast<double>(limit_pop.n);
    }

    double diff = std::abs(dev_pop.mean() - *limit_mean);
    double se = std::sqrt(dev_pop.variance() / static_cast<double>(dev_pop.n) + limit_var_term);
    ErrorEstimate est{eps, diff, se, config.n_paths, seconds_since(t0)};
    est.validate();
    return est;
}

FitResult fit_order(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw ArgumentError("order fit needs at least 3 points");
    for (const auto& [e, err] : points)
        if (!(err > 0.0))
            throw ArgumentError("order fit needs positive errors; a nonpositive value "
                                "usually means the Monte Carlo noise floor was reached "
                                "(increase the path count)");
    const double n = static_cast<double>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [e, err] : points) {
        double x = std::log2(e), y = std::log2(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw ArgumentError("order fit needs distinct eps values");
    FitResult fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    double my = sy / n;
    for (const auto& [e, err] : points) {
        double x = std::log2(e), y = std::log2(err);
        double r = y - (fit.slope * x + fit.intercept);
        ss_res += r * r;
        ss_tot += (y - my) * (y - my);
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

double closed_form_reference(const std::string& id, double eps, double t) {
    if (!(eps > 0.0) || eps > 1.0) throw ArgumentError("closed form needs eps in (0, 1]");
    if (t < 0.0) throw ArgumentError("closed form needs t >= 0");
    const double decay = std::exp(-2.0 * t / eps);
    if (id == "ex2_9_strong_mse") return eps * t + 0.5 * eps * eps * (decay - 1.0);
    if (id == "ex2_9_clt_mean") return 0.5 * std::sqrt(eps) * (1.0 - decay);
    if (id == "ex2_9_clt_second") return 0.5 * eps * (1.0 - decay);
    if (id == "ex2_11_weak_mean") return 0.5 * eps * (1.0 - decay);
    if (id == "remark5_4_mse") return 2.0 * t + eps * (decay - 1.0);
    throw ArgumentError("unknown closed-form reference '" + id + "'");
}

std::optional<double> clt_limit_expectation(const std::string& model_name,
                                            TestFunction phi, double T) {
    if (model_name != "example_2_9") return std::nullopt;
    // The limiting fluctuation is a centered Gaussian with variance T.
    switch (phi) {
        case TestFunction::identity: return 0.0;
        case TestFunction::square: return T;
        case TestFunction::bounded_smooth: return std::exp(-T / 2.0);
    }
    return std::nullopt;
}

std::optional<double> reference_for(const std::string& model_name, ErrorKind kind,
                                    TestFunction phi, int p_moment, double eps, double T) {
    if (kind == ErrorKind::strong_fixed_t && p_moment == 2) {
        if (model_name == "example_2_9") return closed_form_reference("ex2_9_strong_mse", eps, T);
        if (model_name == "remark_5_4") return closed_form_reference("remark5_4_mse", eps, T);
    }
    if (kind == ErrorKind::weak && phi == TestFunction::identity &&
        model_name == "example_2_11")
        return closed_form_reference("ex2_11_weak_mean", eps, T);
    if (kind == ErrorKind::clt_weak && model_name == "example_2_9") {
        if (phi == TestFunction::identity) return closed_form_reference("ex2_9_clt_mean", eps, T);
        if (phi == TestFunction::square) return closed_form_reference("ex2_9_clt_second", eps, T);
    }
    return std::nullopt;
}

ConvergenceReport run_convergence(averaging::SwitchModelPtr model,
                                  const ScenarioConfig& config) {
    config.validate();
    averaging::AveragedModel avg(model);

    ConvergenceReport report;
    report.config = config;
    for (double eps : config.eps) {
        ErrorEstimate est;
        switch (config.kind) {
            case ErrorKind::strong_sup:
            case ErrorKind::strong_fixed_t:
                est = mc_strong_error(model, avg, config, eps);
                break;
            case ErrorKind::weak:
                est = mc_weak_error(model, avg, config, eps);
                break;
            case ErrorKind::clt_weak:
                est = mc_clt_error(model, avg, config, eps);
                break;
        }
        report.estimates.push_back(est);
        report.references.push_back(
            reference_for(model->name, config.kind, config.phi, config.p_moment, eps, config.T));
    }

    if (report.estimates.size() >= 3) {
        std::vector<std::pair<double, double>> pts;
        bool fit_ok = true;
        for (const auto& est : report.estimates) {
            double err = est.estimate;
            if (config.kind == ErrorKind::strong_sup || config.kind == ErrorKind::strong_fixed_t)
                err = std::pow(err, 1.0 / config.p_moment);
            if (!(err > 0.0)) fit_ok = false;
            pts.emplace_back(est.epsilon, err);
        }
        if (fit_ok) report.fit = fit_order(pts);
    }
    return report;
}

}  // namespace mssde::experiments
