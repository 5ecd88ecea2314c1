#include "mssde/model_spec.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mssde/chain.hpp"

namespace mssde::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ModelSpecError(path + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing");
    return *it;
}

long get_int(const json& v, const std::string& path) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) fail(path, "expected an integer");
    return v.get<long>();
}

double get_num(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

Polynomial parse_terms(const json& arr, int n_vars, const std::string& path) {
    if (!arr.is_array()) fail(path, "expected an array of terms");
    std::vector<Term> terms;
    for (std::size_t t = 0; t < arr.size(); ++t) {
        const std::string tpath = path + "[" + std::to_string(t) + "]";
        const json& jt = arr[t];
        if (!jt.is_object()) fail(tpath, "expected a term object {exponents, coeff}");
        const json& je = member(jt, "exponents", tpath);
        if (!je.is_array() || static_cast<int>(je.size()) != n_vars)
            fail(tpath + ".exponents", "expected an array of length " + std::to_string(n_vars));
        Term term;
        for (std::size_t k = 0; k < je.size(); ++k) {
            long e = get_int(je[k], tpath + ".exponents[" + std::to_string(k) + "]");
            if (e < 0) fail(tpath + ".exponents[" + std::to_string(k) + "]", "must be >= 0");
            term.exponents.push_back(static_cast<std::uint32_t>(e));
        }
        term.coeff = get_num(member(jt, "coeff", tpath), tpath + ".coeff");
        terms.push_back(std::move(term));
    }
    return Polynomial(n_vars, std::move(terms));
}

Eigen::VectorXd parse_vector(const json& arr, int n, const std::string& path) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != n)
        fail(path, "expected an array of length " + std::to_string(n));
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v[k] = get_num(arr[static_cast<std::size_t>(k)],
                                               path + "[" + std::to_string(k) + "]");
    return v;
}

void validate_over_probes(const averaging::SwitchModel& model, const ProbeBox& box) {
    auto report = chain::validate_generator(model.generator, box.points());
    if (report.degenerate)
        throw ModelSpecError("generator: a single switching state is degenerate; "
                             "irreducibility needs m0 >= 2");
    for (std::size_t k = 0; k < report.probes.size(); ++k) {
        const auto& pr = report.probes[k];
        if (pr.ok) continue;
        std::ostringstream os;
        os << "generator validation failed at probe (";
        for (Eigen::Index i = 0; i < pr.x.size(); ++i)
            os << (i ? "," : "") << pr.x[i];
        os << "):";
        if (!pr.finite) os << " non-finite rate;";
        if (!pr.offdiag_nonneg)
            os << " " << pr.negative_entries << " negative off-diagonal rate(s);";
        if (!pr.irreducible) os << " support graph not irreducible;";
        throw ModelSpecError(os.str());
    }
}

averaging::SwitchModelPtr make_example_2_9_like(const std::string& name,
                                                double b1, double b2,
                                                double s1, double s2) {
    auto m = std::make_shared<averaging::SwitchModel>();
    m->name = name;
    m->n = 1;
    m->d = 1;
    m->m0 = 2;
    m->drift = StateFunctionField(2, 1, 1);
    m->drift.at(0, 0) = Polynomial::constant(1, b1);
    m->drift.at(1, 0) = Polynomial::constant(1, b2);
    m->diffusion.assign(2, PolyMatrix(1, 1, 1));
    m->diffusion[0].at(0, 0) = Polynomial::constant(1, s1);
    m->diffusion[1].at(0, 0) = Polynomial::constant(1, s2);
    m->generator = chain::GeneratorField(2, 1, true);
    m->generator.set_rate(0, 1, Polynomial::constant(1, 1.0));
    m->generator.set_rate(1, 0, Polynomial::constant(1, 1.0));
    m->infer_sigma_independence();
    m->validate();
    return m;
}

}  // namespace

ProbeBox ProbeBox::default_box(int n) {
    ProbeBox box;
    box.lo = Eigen::VectorXd::Constant(n, -2.0);
    box.hi = Eigen::VectorXd::Constant(n, 2.0);
    box.points_per_dim = 5;
    return box;
}

std::vector<Eigen::VectorXd> ProbeBox::points() const {
    const int n = static_cast<int>(lo.size());
    const int ppd = std::max(points_per_dim, 1);
    long total = 1;
    for (int k = 0; k < n; ++k) {
        total *= ppd;
        if (total > 100000)
            throw ModelSpecError("probe box resolves to more than 1e5 probe points");
    }
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(total));
    Eigen::VectorXd x(n);
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        for (int k = 0; k < n; ++k) {
            int a = static_cast<int>(rem % ppd);
            rem /= ppd;
            x[k] = ppd == 1 ? lo[k] : lo[k] + (hi[k] - lo[k]) * a / (ppd - 1);
        }
        pts.push_back(x);
    }
    return pts;
}

const std::vector<std::string>& builtin_ids() {
    static const std::vector<std::string> ids = {"example_2_9", "example_2_11",
                                                 "remark_5_4", "cubic"};
    return ids;
}

bool is_builtin(const std::string& id) {
    for (const auto& s : builtin_ids())
        if (s == id) return true;
    return false;
}

averaging::SwitchModelPtr builtin_model(const std::string& id) {
    if (id == "example_2_9") return make_example_2_9_like(id, 1.0, -1.0, 1.0, 1.0);
    if (id == "example_2_11") return make_example_2_9_like(id, 1.0, -1.0, 1.0, -1.0);
    if (id == "remark_5_4") return make_example_2_9_like(id, 0.0, 0.0, 1.0, -1.0);
    if (id == "cubic") {
        // Monotone cubic drift with bounded switching part: b(x, i) = -x^3 +- 1.
        auto m = std::make_shared<averaging::SwitchModel>();
        m->name = id;
        m->n = 1;
        m->d = 1;
        m->m0 = 2;
        m->drift = StateFunctionField(2, 1, 1);
        m->drift.at(0, 0) = Polynomial(1, {Term{{3}, -1.0}, Term{{0}, 1.0}});
        m->drift.at(1, 0) = Polynomial(1, {Term{{3}, -1.0}, Term{{0}, -1.0}});
        m->diffusion.assign(2, PolyMatrix(1, 1, 1));
        m->diffusion[0].at(0, 0) = Polynomial::constant(1, 1.0);
        m->diffusion[1].at(0, 0) = Polynomial::constant(1, 1.0);
        m->generator = chain::GeneratorField(2, 1, true);
        m->generator.set_rate(0, 1, Polynomial::constant(1, 1.0));
        m->generator.set_rate(1, 0, Polynomial::constant(1, 1.0));
        m->infer_sigma_independence();
        m->validate();
        return m;
    }
    throw ModelSpecError("unknown builtin model '" + id + "'");
}

averaging::SwitchModelPtr parse_model_spec(const json& doc) {
    if (!doc.is_object()) fail("$", "model spec must be a JSON object");
    if (doc.contains("spec_version") &&
        get_int(doc["spec_version"], "$.spec_version") != 1)
        fail("$.spec_version", "unsupported version (expected 1)");

    if (doc.contains("builtin")) {
        const json& b = doc["builtin"];
        if (!b.is_string()) fail("$.builtin", "expected a string");
        return builtin_model(b.get<std::string>());
    }

    auto model = std::make_shared<averaging::SwitchModel>();
    model->name = doc.contains("name") && doc["name"].is_string()
                      ? doc["name"].get<std::string>()
                      : "custom";
    model->n = static_cast<int>(get_int(member(doc, "n", "$"), "$.n"));
    model->d = static_cast<int>(get_int(member(doc, "d", "$"), "$.d"));
    model->m0 = static_cast<int>(get_int(member(doc, "m0", "$"), "$.m0"));
    if (model->n < 1) fail("$.n", "must be >= 1");
    if (model->d < 1) fail("$.d", "must be >= 1");
    if (model->m0 < 1) fail("$.m0", "must be >= 1");

    model->drift = StateFunctionField(model->m0, model->n, model->n);
    if (doc.contains("drift")) {
        const json& jd = doc["drift"];
        if (!jd.is_array() || static_cast<int>(jd.size()) != model->m0)
            fail("$.drift", "expected one entry per state (" + std::to_string(model->m0) + ")");
        for (int i = 0; i < model->m0; ++i) {
            const json& ji = jd[static_cast<std::size_t>(i)];
            const std::string ipath = "$.drift[" + std::to_string(i) + "]";
            if (!ji.is_array() || static_cast<int>(ji.size()) != model->n)
                fail(ipath, "expected one term list per coordinate (" +
                                std::to_string(model->n) + ")");
            for (int l = 0; l < model->n; ++l)
                model->drift.at(i, l) = parse_terms(ji[static_cast<std::size_t>(l)], model->n,
                                                    ipath + "[" + std::to_string(l) + "]");
        }
    }

    model->diffusion.assign(static_cast<std::size_t>(model->m0),
                            PolyMatrix(model->n, model->d, model->n));
    if (doc.contains("diffusion")) {
        const json& js = doc["diffusion"];
        if (!js.is_array() || static_cast<int>(js.size()) != model->m0)
            fail("$.diffusion", "expected one entry per state (" + std::to_string(model->m0) + ")");
        for (int i = 0; i < model->m0; ++i) {
            const json& ji = js[static_cast<std::size_t>(i)];
            const std::string ipath = "$.diffusion[" + std::to_string(i) + "]";
            if (!ji.is_array() || static_cast<int>(ji.size()) != model->n)
                fail(ipath, "expected " + std::to_string(model->n) + " rows");
            for (int r = 0; r < model->n; ++r) {
                const json& jr = ji[static_cast<std::size_t>(r)];
                const std::string rpath = ipath + "[" + std::to_string(r) + "]";
                if (!jr.is_array() || static_cast<int>(jr.size()) != model->d)
                    fail(rpath, "expected " + std::to_string(model->d) + " columns");
                for (int c = 0; c < model->d; ++c)
                    model->diffusion[static_cast<std::size_t>(i)].at(r, c) =
                        parse_terms(jr[static_cast<std::size_t>(c)], model->n,
                                    rpath + "[" + std::to_string(c) + "]");
            }
        }
    }

    bool clamp = true;
    if (doc.contains("clamp_negative")) {
        if (!doc["clamp_negative"].is_boolean()) fail("$.clamp_negative", "expected a boolean");
        clamp = doc["clamp_negative"].get<bool>();
    }
    model->generator = chain::GeneratorField(model->m0, model->n, clamp);
    const json& jg = member(doc, "generator", "$");
    if (!jg.is_array()) fail("$.generator", "expected an array of {from, to, terms}");
    for (std::size_t e = 0; e < jg.size(); ++e) {
        const std::string epath = "$.generator[" + std::to_string(e) + "]";
        const json& je = jg[e];
        long from = get_int(member(je, "from", epath), epath + ".from");
        long to = get_int(member(je, "to", epath), epath + ".to");
        if (from < 0 || from >= model->m0) fail(epath + ".from", "state index out of range");
        if (to < 0 || to >= model->m0) fail(epath + ".to", "state index out of range");
        if (from == to) fail(epath, "diagonal entries are derived; specify only from != to");
        model->generator.set_rate(static_cast<int>(from), static_cast<int>(to),
                                  parse_terms(member(je, "terms", epath), model->n,
                                              epath + ".terms"));
    }

    model->infer_sigma_independence();
    model->validate();

    ProbeBox box = ProbeBox::default_box(model->n);
    if (doc.contains("probe_box")) {
        const json& jb = doc["probe_box"];
        box.lo = parse_vector(member(jb, "lo", "$.probe_box"), model->n, "$.probe_box.lo");
        box.hi = parse_vector(member(jb, "hi", "$.probe_box"), model->n, "$.probe_box.hi");
        if (jb.contains("points_per_dim"))
            box.points_per_dim = static_cast<int>(
                get_int(jb["points_per_dim"], "$.probe_box.points_per_dim"));
    }
    validate_over_probes(*model, box);
    return model;
}

averaging::SwitchModelPtr parse_model_spec_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelSpecError(std::string("model spec is not well-formed JSON: ") + e.what());
    }
    return parse_model_spec(doc);
}

averaging::SwitchModelPtr resolve_model(const std::string& ref, json* spec_out) {
    if (is_builtin(ref)) return builtin_model(ref);
    std::ifstream in(ref);
    if (!in)
        throw ModelSpecError("model reference '" + ref +
                             "' is neither a builtin id nor a readable file");
    std::stringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ModelSpecError("model spec file '" + ref + "' is not well-formed JSON: " + e.what());
    }
    auto model = parse_model_spec(doc);
    if (spec_out) *spec_out = doc;
    return model;
}

}  // namespace mssde::io
