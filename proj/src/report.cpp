#include "mssde/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mssde/model_spec.hpp"

namespace mssde::io {

using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void escape_string(const std::string& s, std::string& out) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
}

void dump_rec(const json& j, std::string& out) {
    switch (j.type()) {
        case json::value_t::null: out += "null"; break;
        case json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
        case json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
        case json::value_t::number_float: out += format_double(j.get<double>()); break;
        case json::value_t::string: escape_string(j.get<std::string>(), out); break;
        case json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& v : j) {
                if (!first) out.push_back(',');
                first = false;
                dump_rec(v, out);
            }
            out.push_back(']');
            break;
        }
        case json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: key-sorted
                if (!first) out.push_back(',');
                first = false;
                escape_string(it.key(), out);
                out.push_back(':');
                dump_rec(it.value(), out);
            }
            out.push_back('}');
            break;
        }
        default: throw Error("cannot serialize binary/discarded JSON value");
    }
}

json config_to_json(const experiments::ScenarioConfig& cfg) {
    json j;
    j["T"] = cfg.T;
    j["allow_uncoupled"] = cfg.allow_uncoupled;
    j["alpha0"] = cfg.alpha0;
    j["clt_closed_form_limit"] = cfg.clt_closed_form_limit;
    j["emit_timing"] = cfg.emit_timing;
    j["eps"] = cfg.eps;
    j["h"] = cfg.h;
    j["kind"] = experiments::to_string(cfg.kind);
    j["model"] = cfg.model_ref;
    j["n_paths"] = cfg.n_paths;
    j["p"] = cfg.p_moment;
    j["phi"] = experiments::to_string(cfg.phi);
    j["seed"] = cfg.seed;
    std::vector<double> x0(cfg.x0.data(), cfg.x0.data() + cfg.x0.size());
    j["x0"] = x0;
    return j;
}

experiments::ScenarioConfig config_from_json(const json& j) {
    experiments::ScenarioConfig cfg;
    cfg.T = j.at("T").get<double>();
    cfg.allow_uncoupled = j.at("allow_uncoupled").get<bool>();
    cfg.alpha0 = j.at("alpha0").get<int>();
    cfg.clt_closed_form_limit = j.at("clt_closed_form_limit").get<bool>();
    cfg.emit_timing = j.at("emit_timing").get<bool>();
    cfg.eps = j.at("eps").get<std::vector<double>>();
    cfg.h = j.at("h").get<double>();
    cfg.kind = experiments::error_kind_from_string(j.at("kind").get<std::string>());
    cfg.model_ref = j.at("model").get<std::string>();
    cfg.n_paths = j.at("n_paths").get<long>();
    cfg.p_moment = j.at("p").get<int>();
    cfg.phi = experiments::test_function_from_string(j.at("phi").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    auto x0 = j.at("x0").get<std::vector<double>>();
    cfg.x0 = Eigen::Map<Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
    return cfg;
}

}  // namespace

std::string dump_canonical_json(const json& j) {
    std::string out;
    dump_rec(j, out);
    return out;
}

std::string emit_report_json(const experiments::ConvergenceReport& report,
                             const json* model_spec) {
    json j;
    j["spec_version"] = 1;
    j["config"] = config_to_json(report.config);
    if (model_spec && !model_spec->is_null()) j["config"]["model_spec"] = *model_spec;

    json results = json::array();
    for (std::size_t i = 0; i < report.estimates.size(); ++i) {
        const auto& e = report.estimates[i];
        json r;
        r["epsilon"] = e.epsilon;
        r["estimate"] = e.estimate;
        r["n_paths"] = e.n_paths;
        r["reference"] =
            report.references[i] ? json(*report.references[i]) : json(nullptr);
        r["seconds"] = report.config.emit_timing ? e.seconds : 0.0;
        r["std_err"] = e.std_err;
        results.push_back(std::move(r));
    }
    j["results"] = std::move(results);

    if (report.fit) {
        json f;
        f["intercept"] = report.fit->intercept;
        f["r2"] = report.fit->r2;
        f["slope"] = report.fit->slope;
        j["fit"] = std::move(f);
    } else {
        j["fit"] = nullptr;
    }
    std::string out = dump_canonical_json(j);
    out.push_back('\n');
    return out;
}

std::string emit_report_csv(const experiments::ConvergenceReport& report) {
    std::string out = "epsilon,estimate,std_err,reference,n_paths,seconds\n";
    for (std::size_t i = 0; i < report.estimates.size(); ++i) {
        const auto& e = report.estimates[i];
        out += format_double(e.epsilon);
        out.push_back(',');
        out += format_double(e.estimate);
        out.push_back(',');
        out += format_double(e.std_err);
        out.push_back(',');
        out += report.references[i] ? format_double(*report.references[i]) : "nan";
        out.push_back(',');
        out += std::to_string(e.n_paths);
        out.push_back(',');
        out += format_double(report.config.emit_timing ? e.seconds : 0.0);
        out.push_back('\n');
    }
    return out;
}

std::string emit_report(const experiments::ConvergenceReport& report,
                        const std::string& format) {
    if (format == "json") return emit_report_json(report);
    if (format == "csv") return emit_report_csv(report);
    throw ArgumentError("unknown report format '" + format + "' (expected json or csv)");
}

experiments::ConvergenceReport parse_report_json(const std::string& text) {
    json j = json::parse(text);
    experiments::ConvergenceReport report;
    report.config = config_from_json(j.at("config"));
    for (const auto& r : j.at("results")) {
        experiments::ErrorEstimate e;
        e.epsilon = r.at("epsilon").get<double>();
        e.estimate = r.at("estimate").get<double>();
        e.n_paths = r.at("n_paths").get<long>();
        e.seconds = r.at("seconds").get<double>();
        e.std_err = r.at("std_err").get<double>();
        report.estimates.push_back(e);
        report.references.push_back(r.at("reference").is_null()
                                        ? std::optional<double>{}
                                        : std::optional<double>{r.at("reference").get<double>()});
    }
    if (!j.at("fit").is_null()) {
        experiments::FitResult f;
        f.intercept = j["fit"].at("intercept").get<double>();
        f.r2 = j["fit"].at("r2").get<double>();
        f.slope = j["fit"].at("slope").get<double>();
        report.fit = f;
    }
    return report;
}

experiments::ConvergenceReport run_scenario(const experiments::ScenarioConfig& config,
                                            const std::string& out_prefix) {
    json spec;
    auto model = resolve_model(config.model_ref, &spec);
    auto report = experiments::run_convergence(model, config);

    std::ofstream js(out_prefix + ".json", std::ios::binary);
    if (!js) throw Error("cannot write report file " + out_prefix + ".json");
    js << emit_report_json(report, spec.is_null() ? nullptr : &spec);
    std::ofstream cs(out_prefix + ".csv", std::ios::binary);
    if (!cs) throw Error("cannot write report file " + out_prefix + ".csv");
    cs << emit_report_csv(report);
    return report;
}

}  // namespace mssde::io
