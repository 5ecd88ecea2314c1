// mssde: multi-scale switching-diffusion simulation and verification CLI.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mssde/experiments.hpp"
#include "mssde/model_spec.hpp"
#include "mssde/poisson.hpp"
#include "mssde/report.hpp"

namespace {

using namespace mssde;

double parse_eps_token(const std::string& tok) {
    auto caret = tok.find('^');
    if (caret != std::string::npos) {
        double base = std::stod(tok.substr(0, caret));
        double expo = std::stod(tok.substr(caret + 1));
        return std::pow(base, expo);
    }
    return std::stod(tok);
}

// Accepts comma-separated values; each entry is a number, a power like
// 2^-4, or an inclusive dyadic range 2^-4..2^-8.
std::vector<double> parse_eps_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        auto dots = tok.find("..");
        if (dots != std::string::npos) {
            std::string a = tok.substr(0, dots), b = tok.substr(dots + 2);
            auto ca = a.find('^'), cb = b.find('^');
            if (ca == std::string::npos || cb == std::string::npos)
                throw ArgumentError("eps range endpoints must use base^exponent form: " + tok);
            double base_a = std::stod(a.substr(0, ca));
            double base_b = std::stod(b.substr(0, cb));
            if (base_a != base_b)
                throw ArgumentError("eps range endpoints must share the base: " + tok);
            long e0 = std::lround(std::stod(a.substr(ca + 1)));
            long e1 = std::lround(std::stod(b.substr(cb + 1)));
            long step = e1 >= e0 ? 1 : -1;
            for (long e = e0;; e += step) {
                out.push_back(std::pow(base_a, static_cast<double>(e)));
                if (e == e1) break;
            }
        } else {
            out.push_back(parse_eps_token(tok));
        }
    }
    if (out.empty()) throw ArgumentError("empty eps list");
    return out;
}

Eigen::VectorXd parse_point(const std::string& text, int n) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) == 1 && n > 1)
        return Eigen::VectorXd::Constant(n, vals[0]);
    if (static_cast<int>(vals.size()) != n)
        throw ArgumentError("point has " + std::to_string(vals.size()) +
                            " coordinates, model expects " + std::to_string(n));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void print_vector(std::ostream& os, const Eigen::VectorXd& v) {
    os << "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
}

void print_matrix(std::ostream& os, const Eigen::MatrixXd& m, const char* indent = "  ") {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << indent << "[";
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << m(r, c);
        os << "]\n";
    }
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

int cmd_validate(const std::string& model_ref, const std::string& lo, const std::string& hi,
                 int points) {
    auto model = io::resolve_model(model_ref);
    io::ProbeBox box = io::ProbeBox::default_box(model->n);
    if (!lo.empty()) box.lo = parse_point(lo, model->n);
    if (!hi.empty()) box.hi = parse_point(hi, model->n);
    box.points_per_dim = points;
    auto report = chain::validate_generator(model->generator, box.points());
    if (report.degenerate)
        std::cout << "degenerate: single switching state, irreducibility vacuous\n";
    for (const auto& pr : report.probes) {
        std::cout << (pr.ok ? "ok  " : "FAIL") << " x=";
        print_vector(std::cout, pr.x);
        std::cout << " offdiag_nonneg=" << (pr.offdiag_nonneg ? "yes" : "no")
                  << " negative_entries=" << pr.negative_entries
                  << " irreducible=" << (pr.irreducible ? "yes" : "no")
                  << " K=" << pr.total_rate << "\n";
    }
    std::cout << (report.all_ok ? "VALID" : "INVALID") << " (" << report.probes.size()
              << " probes)\n";
    return report.all_ok ? 0 : 1;
}

int cmd_poisson(const std::string& model_ref, const std::string& x_text) {
    auto model = io::resolve_model(model_ref);
    Eigen::VectorXd x = parse_point(x_text, model->n);
    Eigen::MatrixXd Q = model->generator.evaluate(x);
    Eigen::VectorXd mu = chain::invariant_measure(Q).weights;
    auto sol = poisson::solve_poisson_at(model->generator, model->drift, x);

    std::cout << "mu = ";
    print_vector(std::cout, mu);
    std::cout << "\nPhi (rows = states, columns = coordinates):\n";
    print_matrix(std::cout, sol.phi);
    std::cout << "residual   = " << sol.residual << "\ncentering  = " << sol.centering << "\n";

    Eigen::MatrixXd F = model->drift.evaluate(x);
    Eigen::RowVectorXd mean = mu.transpose() * F;
    F.rowwise() -= mean;
    double f_norm = F.cwiseAbs().maxCoeff();
    double gap = poisson::ergodic_gap_constant(Q, mu, 100.0, 2048);
    std::cout << "gap bound  = " << gap << " (|Phi| <= bound * |F|";
    if (f_norm > 0.0 && sol.phi.cwiseAbs().maxCoeff() > 1.1 * gap * f_norm)
        std::cout << "; WARNING: exceeded with 10% slack";
    std::cout << ")\n";
    return 0;
}

int cmd_average(const std::string& model_ref, const std::string& x_text) {
    auto model = io::resolve_model(model_ref);
    averaging::AveragedModel avg(model);
    Eigen::VectorXd x = parse_point(x_text, model->n);
    std::cout << "b_bar = ";
    print_vector(std::cout, avg.averaged_drift(x));
    std::cout << "\nsigma sigma* averaged:\n";
    print_matrix(std::cout, avg.averaged_covariance(x));
    std::cout << "sigma_bar:\n";
    print_matrix(std::cout, avg.averaged_diffusion(x));
    std::cout << "Theta:\n";
    print_matrix(std::cout, avg.clt_theta(x));
    std::cout << "grad b_bar:\n";
    print_matrix(std::cout, avg.averaged_drift_gradient(x));
    std::cout << "sigma_switch_independent = "
              << (model->sigma_switch_independent ? "true" : "false") << "\n";
    return 0;
}

int cmd_simulate(const std::string& model_ref, double eps, double T, double h,
                 std::uint64_t seed, long n_paths, const std::string& x0_text, int alpha0,
                 const std::string& dump_file) {
    auto model = io::resolve_model(model_ref);
    auto grid = hybrid::TimeGrid::make(T, h);
    Eigen::VectorXd x0 = x0_text.empty() ? Eigen::VectorXd::Zero(model->n)
                                         : parse_point(x0_text, model->n);
    if (!dump_file.empty() && n_paths != 1)
        throw ArgumentError("--dump writes a single path; use --paths 1");

    for (long p = 0; p < n_paths; ++p) {
        RngStream rng(seed, static_cast<std::uint64_t>(p), 0);
        auto path = hybrid::simulate_two_scale(model, eps, x0, alpha0, grid, rng);
        long jumps = 0;
        for (const auto& st : path.steps) jumps += static_cast<long>(st.segment.states.size());
        std::cout << "path " << p << ": X_T = ";
        print_vector(std::cout, path.X.row(grid.M).transpose());
        std::cout << " alpha_T = " << path.final_alpha << " jumps = " << jumps << "\n";

        if (!dump_file.empty()) {
            std::ofstream out(dump_file, std::ios::binary);
            if (!out) throw Error("cannot write dump file " + dump_file);
            write_u64(out, static_cast<std::uint64_t>(model->n));
            write_u64(out, static_cast<std::uint64_t>(model->d));
            write_u64(out, static_cast<std::uint64_t>(model->m0));
            write_u64(out, static_cast<std::uint64_t>(grid.M));
            write_f64(out, T);
            write_f64(out, eps);
            write_u64(out, seed);
            int state = alpha0;
            for (long k = 0; k <= grid.M; ++k) {
                write_f64(out, grid.time(k));
                for (int c = 0; c < model->n; ++c) write_f64(out, path.X(k, c));
                if (k < grid.M) {
                    write_f64(out, static_cast<double>(state));
                    state = path.steps[static_cast<std::size_t>(k)].segment.final_state();
                } else {
                    write_f64(out, static_cast<double>(path.final_alpha));
                }
            }
            std::cout << "wrote " << dump_file << "\n";
        }
    }
    return 0;
}

int cmd_converge(experiments::ScenarioConfig cfg, const std::string& out_prefix) {
    auto report = io::run_scenario(cfg, out_prefix);
    for (std::size_t i = 0; i < report.estimates.size(); ++i) {
        const auto& e = report.estimates[i];
        std::cout << "eps=" << e.epsilon << " estimate=" << e.estimate
                  << " std_err=" << e.std_err;
        if (report.references[i]) std::cout << " reference=" << *report.references[i];
        std::cout << " paths=" << e.n_paths << " seconds=" << e.seconds << "\n";
    }
    if (report.fit)
        std::cout << "fitted order: slope=" << report.fit->slope
                  << " intercept=" << report.fit->intercept << " R2=" << report.fit->r2
                  << "\n";
    std::cout << "wrote " << out_prefix << ".json and " << out_prefix << ".csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-scale switching-diffusion simulator and convergence harness"};
    app.require_subcommand(1);

    std::string model_ref = "example_2_9";
    std::string x_text = "0";
    std::string x0_text, dump_file, eps_text = "0.05", out_prefix = "report";
    std::string kind_text = "strong_fixed_t", phi_text = "identity";
    std::string probe_lo, probe_hi;
    int probe_points = 5, alpha0 = 0, p_moment = 2;
    double T = 1.0, eps_single = 0.05;
    std::string h_text = "2^-8";
    std::uint64_t seed = 1;
    long n_paths = 100000, sim_paths = 1;
    bool allow_uncoupled = false, no_timing = false, no_clt_closed_form = false;

    auto* validate = app.add_subcommand("validate", "validate a model's switching generator");
    validate->add_option("--model", model_ref, "builtin id or model spec file");
    validate->add_option("--probe-lo", probe_lo, "probe box lower corner (comma list)");
    validate->add_option("--probe-hi", probe_hi, "probe box upper corner (comma list)");
    validate->add_option("--probe-points", probe_points, "probe points per dimension");

    auto* poisson_cmd = app.add_subcommand("poisson",
                                           "solve the switching-space Poisson equation "
                                           "for the centered drift at a point");
    poisson_cmd->add_option("--model", model_ref, "builtin id or model spec file");
    poisson_cmd->add_option("--x", x_text, "evaluation point (comma list)");

    auto* average = app.add_subcommand("average", "print averaged and limit coefficients");
    average->add_option("--model", model_ref, "builtin id or model spec file");
    average->add_option("--x", x_text, "evaluation point (comma list)");

    auto* simulate = app.add_subcommand("simulate", "simulate two-scale paths");
    simulate->add_option("--model", model_ref, "builtin id or model spec file");
    simulate->add_option("--eps", eps_single, "time-scale separation in (0,1]");
    simulate->add_option("--T", T, "horizon");
    simulate->add_option("--step", h_text, "macro step h (number or 2^-k)");
    simulate->add_option("--seed", seed, "global seed");
    simulate->add_option("--paths", sim_paths, "number of paths");
    simulate->add_option("--x0", x0_text, "initial position (comma list)");
    simulate->add_option("--alpha0", alpha0, "initial switching state (0-based)");
    simulate->add_option("--dump", dump_file, "binary path dump file (single path)");

    auto* converge = app.add_subcommand("converge", "Monte Carlo convergence study");
    converge->add_option("--model", model_ref, "builtin id or model spec file");
    converge->add_option("--kind", kind_text,
                         "strong_sup | strong_fixed_t | weak | clt_weak");
    converge->add_option("--eps", eps_text, "eps list, e.g. 0.1,0.05 or 2^-4..2^-8");
    converge->add_option("--paths", n_paths, "Monte Carlo paths per eps");
    converge->add_option("--seed", seed, "global seed");
    converge->add_option("--T", T, "horizon");
    converge->add_option("--step", h_text, "macro step h (number or 2^-k)");
    converge->add_option("--phi", phi_text, "identity | square | bounded_smooth");
    converge->add_option("--p", p_moment, "moment order for strong error");
    converge->add_option("--x0", x0_text, "initial position (comma list)");
    converge->add_option("--alpha0", alpha0, "initial switching state (0-based)");
    converge->add_option("--out", out_prefix, "output prefix for .json/.csv");
    converge->add_flag("--allow-uncoupled-check", allow_uncoupled,
                       "measure the coupled error for switching-dependent diffusion "
                       "as an explicit diagnostic");
    converge->add_flag("--no-timing", no_timing, "zero wall times in emitted reports");
    converge->add_flag("--no-clt-closed-form", no_clt_closed_form,
                       "always simulate the limiting process");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (validate->parsed())
            return cmd_validate(model_ref, probe_lo, probe_hi, probe_points);
        if (poisson_cmd->parsed()) return cmd_poisson(model_ref, x_text);
        if (average->parsed()) return cmd_average(model_ref, x_text);
        if (simulate->parsed())
            return cmd_simulate(model_ref, eps_single, T, parse_eps_token(h_text), seed, sim_paths, x0_text,
                                alpha0, dump_file);
        if (converge->parsed()) {
            experiments::ScenarioConfig cfg;
            cfg.model_ref = model_ref;
            cfg.eps = parse_eps_list(eps_text);
            cfg.T = T;
            cfg.h = parse_eps_token(h_text);
            cfg.n_paths = n_paths;
            cfg.seed = seed;
            cfg.kind = experiments::error_kind_from_string(kind_text);
            cfg.phi = experiments::test_function_from_string(phi_text);
            cfg.p_moment = p_moment;
            if (!x0_text.empty()) {
                auto model = io::resolve_model(model_ref);
                cfg.x0 = parse_point(x0_text, model->n);
            }
            cfg.alpha0 = alpha0;
            cfg.allow_uncoupled = allow_uncoupled;
            cfg.emit_timing = !no_timing;
            cfg.clt_closed_form_limit = !no_clt_closed_form;
            return cmd_converge(cfg, out_prefix);
        }
    } catch (const HypothesisError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
