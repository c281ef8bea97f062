#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "curvcone/bending.hpp"
#include "curvcone/conditions.hpp"
#include "curvcone/conformal.hpp"
#include "curvcone/geometry.hpp"
#include "curvcone/parallel.hpp"

namespace curvcone::cli {

namespace {

json check_row(const std::string& name, double value, double limit, bool pass) {
    return {{"kind", "check"}, {"name", name}, {"value", value}, {"limit", limit}, {"pass", pass}};
}

json echo(const RunConfig& cfg) {
    json j = json::object();
    j["command"] = cfg.command;
    for (const auto& k : command_keys(cfg.command)) {
        auto v = cfg.raw(k.key);
        if (!v) {
            j[k.key] = nullptr;
            continue;
        }
        switch (k.type) {
            case KeyType::Int: j[k.key] = parse_int(*v, k.key); break;
            case KeyType::Real: j[k.key] = parse_real(*v, k.key); break;
            case KeyType::Seed: j[k.key] = parse_seed(*v, k.key); break;
            default: j[k.key] = *v;
        }
    }
    return j;
}

Condition condition_for(const RunConfig& cfg) { return parse_condition(cfg.str("condition")); }

int positive(const RunConfig& cfg, const std::string& key) {
    int v = cfg.integer(key);
    if (v <= 0) throw InputError("key '" + key + "' must be positive");
    return v;
}

json run_check(const RunConfig& cfg, json& summary) {
    CurvatureOperator R = parse_operator(cfg.str("operator"));
    Condition c = condition_for(cfg);
    c.opt.multistarts = positive(cfg, "grid");
    c.opt.seed = cfg.seed("seed");
    double m = margin(c, R);
    double tol = cfg.maybe_real("tol").value_or(margin_tolerance(c, R));
    Verdict v = classify(m, tol);
    summary["scal"] = scal(R);
    return json::array({{{"kind", "sample"},
                         {"operator", cfg.str("operator")},
                         {"condition", c.name()},
                         {"n", R.n()},
                         {"margin", m},
                         {"tolerance", tol},
                         {"verdict", verdict_name(v)},
                         {"pass", v == Verdict::Pass}}});
}

json run_bend(const RunConfig& cfg, json& summary) {
    RotSymModel m = parse_model(cfg.str("model"), cfg.integer("n"));
    Condition c = condition_for(cfg);
    BendingConstants k = estimate_constants(m, c, cfg.real("rbar"));
    AngleProfile initial = initial_bend(k);
    double log_star = reachable_log_radius(initial, k);
    double log_target = log_star - cfg.real("drop");
    if (auto rt = cfg.maybe_real("rtarget")) {
        if (*rt <= 0.0) throw InputError("rtarget must be positive");
        log_target = std::log(*rt);
    }
    AngleProfile p = inductive_bend_log(initial, k, log_target);

    VerifyGrid g;
    g.per_segment = positive(cfg, "grid");
    g.normals = positive(cfg, "normals");
    g.oracle_samples = positive(cfg, "oracles");
    g.oracle_tol = cfg.real("tol");
    g.seed = cfg.seed("seed");
    BendingReport rep = verify_bend(m, c, p, g);

    json rows = json::array();
    for (const auto& s : rep.samples)
        rows.push_back({{"kind", "sample"},   {"segment", s.segment},     {"u", s.u},
                        {"log_r", s.log_r},   {"theta", s.theta},         {"normal", s.normal},
                        {"margin", s.margin}, {"tolerance", s.tolerance}, {"e_norm", s.e_norm},
                        {"bound", s.bound},   {"bound_ok", s.bound_ok},   {"cone_ok", s.cone_ok},
                        {"pass", classify(s.margin, s.tolerance) == Verdict::Pass}});
    for (const auto& o : rep.oracle)
        rows.push_back({{"kind", "oracle"},
                        {"segment", o.segment},
                        {"u", o.u},
                        {"log_r", o.log_r},
                        {"deviation", o.deviation},
                        {"tolerance", g.oracle_tol},
                        {"pass", o.deviation <= g.oracle_tol}});
    double theta_end = p.segments.back().theta_end();
    rows.push_back(check_row("theta_final", theta_end, 0.5 * std::numbers::pi, p.complete));
    long bound = k.bend_bound();
    rows.push_back(check_row("bend_count", static_cast<double>(p.bends.size()), static_cast<double>(bound),
                             static_cast<long>(p.bends.size()) <= bound));

    summary["constants"] = {{"rho", k.rho},       {"L", k.L},       {"C1", k.C1},         {"C2", k.C2},
                            {"eps1", k.eps1},     {"theta0", k.theta0}, {"bend_bound", bound},
                            {"log_r_star", log_star}, {"log_r_final", p.log_r_final},
                            {"bounds_ok", rep.bounds_ok}, {"cone_ok", rep.cone_ok}};
    summary["oracle_deviation"] = rep.oracle_deviation;
    return rows;
}

json run_conformal(const RunConfig& cfg, json& summary) {
    FlatteningFactor ff = parse_chart(cfg.str("chart"), cfg.integer("n"));
    Condition c = condition_for(cfg);
    ConformalGrid g;
    g.radii = positive(cfg, "grid");
    g.normals = positive(cfg, "normals");
    g.oracle_samples = positive(cfg, "oracles");
    g.oracle_tol = cfg.real("tol");
    g.seed = cfg.seed("seed");

    double log_gamma = 0.0;
    if (auto gm = cfg.maybe_real("gamma")) {
        if (cfg.has("loggamma")) throw InputError("set at most one of gamma and loggamma");
        if (*gm <= 0.0) throw InputError("gamma must be positive");
        log_gamma = std::log(*gm);
    } else if (auto lg = cfg.maybe_real("loggamma")) {
        log_gamma = *lg;
    } else {
        log_gamma = conformal_setup(ff, c, g).log_gamma_max - cfg.real("drop");
    }
    ConformalReport rep = verify_conformal_log(ff, c, log_gamma, g);

    json rows = json::array();
    for (const auto& s : rep.samples)
        rows.push_back({{"kind", "sample"},
                        {"r", s.r},
                        {"normal", s.normal},
                        {"margin", s.margin},
                        {"tolerance", s.tolerance},
                        {"pass", s.pass}});
    rows.push_back(check_row("oracle_deviation", rep.oracle_deviation, g.oracle_tol,
                             rep.oracle_deviation <= g.oracle_tol));
    rows.push_back(check_row("decomposition_deviation", rep.decomposition_deviation, 1e-8,
                             rep.decomposition_deviation <= 1e-8));
    rows.push_back(check_row("end_deviation", rep.end_deviation, 1e-10, rep.end_deviation <= 1e-10));
    rows.push_back(check_row("slope_residual", rep.slope_residual, -1e-12, rep.slope_residual >= -1e-12));
    rows.push_back(check_row("log_derivative_residual", rep.log_derivative_residual, 1e-8,
                             rep.log_derivative_residual <= 1e-8));
    rows.push_back(check_row("star_shaped", rep.star_shaped ? 1.0 : 0.0, 1.0, rep.star_shaped));

    const AlphaProfile& a = rep.alpha;
    summary["constants"] = {{"rho", rep.rho},     {"eps1", rep.eps1},   {"radius", rep.radius}, {"c", rep.c},
                            {"C", rep.C},         {"C1", rep.C1},       {"C2", rep.C2},         {"sup_RM", rep.sup_RM},
                            {"lambda", rep.lambda}, {"tau", a.tau},     {"r0", a.r0},           {"r1", a.r1},
                            {"r2", a.r2},         {"log_gamma", a.log_gamma}, {"log_gamma_max", a.log_gamma_max()}};
    summary["module_pass"] = rep.pass;
    return rows;
}

json run_rescale(const RunConfig& cfg, json& summary) {
    SubmersionData d = parse_submersion(cfg.str("submersion"));
    Condition c = condition_for(cfg);
    int points = cfg.integer("grid");
    if (points < 2) throw InputError("rescale needs grid >= 2");
    double tmin = cfg.real("tmin");
    if (!(tmin > 0.0 && tmin < 1.0)) throw InputError("tmin must lie in (0, 1)");
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(std::exp(std::log(tmin) * (1.0 - double(i) / (points - 1))));
    RescaleReport rep = find_t_star(d, c, grid);
    double tol = cfg.real("tol");

    json rows = json::array();
    for (size_t i = 0; i < rep.t.size(); ++i) {
        double bound = rep.C / rep.t[i];
        rows.push_back({{"kind", "sample"},
                        {"t", rep.t[i]},
                        {"margin", rep.margins[i]},
                        {"error_norm", rep.error_norms[i]},
                        {"bound", bound},
                        {"inside", rep.margins[i] > 0.0},
                        {"pass", rep.error_norms[i] <= bound * (1.0 + tol) + 1e-12}});
    }
    rows.push_back(check_row("t_star", rep.t_star, 0.0, rep.t_star > 0.0));
    rows.push_back(check_row("C_validated", rep.C, rep.C, rep.C_validated));
    summary["constants"] = {{"C", rep.C},
                            {"t_star", rep.t_star},
                            {"fiber_margin", rep.fiber_margin},
                            {"hypothesis_strict", rep.hypothesis_strict}};
    return rows;
}

json run_average(const RunConfig& cfg, json& summary) {
    CurvatureOperator R = parse_operator(cfg.str("operator"));
    int d = cfg.integer("d");
    OrbitAverage avg = orbit_average(R, d, positive(cfg, "samples"), cfg.seed("seed"), Exec::Parallel,
                                     positive(cfg, "grid"));
    double tol = cfg.real("tol");
    summary["average"] = to_json(avg.S);
    return json::array({{{"kind", "sample"},
                         {"d", d},
                         {"lambda", avg.lambda},
                         {"residual", avg.residual},
                         {"tolerance", tol},
                         {"pass", avg.residual <= tol}}});
}

json oracle_row(const std::string& suite, double param, double deviation, double tol) {
    return {{"kind", "oracle"},
            {"suite", suite},
            {"param", param},
            {"deviation", deviation},
            {"tolerance", tol},
            {"pass", deviation <= tol}};
}

json run_oracle(const RunConfig& cfg, json& summary) {
    int n = cfg.integer("n");
    RotSymModel m = parse_model(cfg.str("model"), n);
    Condition c = condition_for(cfg);
    int samples = positive(cfg, "grid");
    auto tol_or = [&](double t) { return cfg.maybe_real("tol").value_or(t); };
    json rows = json::array();

    // Closed-form warped curvature against the chart.
    for (int j = 0; j < samples; ++j) {
        double r = m.r_max * (0.1 + 0.7 * j / std::max(samples - 1, 1));
        auto mc = warped_chart(m, r);
        double dev = chart_curvature_fd(mc.chart, mc.base).max_abs_diff(warped_curvature(m, r));
        rows.push_back(oracle_row("warped_chart", r, dev, tol_or(1e-5)));
    }

    // Graph metric of a full bend against the Gauss-equation assembly.
    BendingConstants k = estimate_constants(m, c, 0.5);
    AngleProfile initial = initial_bend(k);
    AngleProfile p = inductive_bend_log(initial, k, reachable_log_radius(initial, k) - 1.0);
    VerifyGrid vg;
    vg.oracle_samples = samples;
    vg.oracle_tol = tol_or(1e-5);
    vg.seed = cfg.seed("seed");
    BendingReport br = verify_bend(m, c, p, vg);
    for (const auto& o : br.oracle) rows.push_back(oracle_row("graph_metric", o.log_r, o.deviation, vg.oracle_tol));

    // Submersion formulas against the Berger sphere chart.
    Vec base(3);
    base << 0.3, -0.2, 0.4;
    SubmersionData h = hopf_data();
    for (double t : {1.0, 0.5, 0.25}) {
        double dev = berger_curvature_fd(t, base, FdOptions{true}).max_abs_diff(variation_curvature(h, t));
        rows.push_back(oracle_row("berger", t, dev, tol_or(1e-6)));
    }

    // Conformal decomposition against the FD curvature of the deformed metric.
    FlatteningFactor ff = FlatteningFactor::round_sphere(n);
    ConformalGrid cg;
    cg.oracle_samples = samples;
    cg.oracle_tol = tol_or(1e-5);
    cg.seed = cfg.seed("seed");
    double lg = conformal_setup(ff, c, cg).log_gamma_max - 1.0;
    ConformalReport cr = verify_conformal_log(ff, c, lg, cg);
    rows.push_back(oracle_row("conformal_fd", cr.lambda, cr.oracle_deviation, cg.oracle_tol));
    rows.push_back(oracle_row("conformal_direct", cr.lambda, cr.decomposition_deviation, tol_or(1e-8)));

    summary["suites"] = {"warped_chart", "graph_metric", "berger", "conformal_fd", "conformal_direct"};
    return rows;
}

std::string timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    return v.dump();
}

}  // namespace

CurvatureOperator parse_operator(const std::string& text) {
    Spec s = parse_spec(text);
    if (s.name == "file") {
        std::ifstream in(s.params.at("path"));
        if (!in) throw InputError("cannot read operator file '" + s.params.at("path") + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw InputError(std::string("operator file: ") + e.what());
        }
        return operator_from_json(j);
    }
    auto dim = [&](const std::string& key) {
        if (!s.params.count(key)) throw InputError("operator '" + s.name + "' needs " + key + "=");
        int n = s.integer(key, 0);
        if (n < 2 || n > kMaxDim) throw InputError("operator dimension out of range: " + std::to_string(n));
        return n;
    };
    if (s.name == "identity" || s.name == "zero") {
        s.allow({"n"});
        int n = dim("n");
        return s.name == "identity" ? CurvatureOperator::identity(n) : CurvatureOperator::zero(n);
    }
    if (s.name == "model") {
        s.allow({"d", "r", "n"});
        int n = dim("n");
        return model_operator(s.integer("d", n), s.real("r", 1.0), n);
    }
    if (s.name == "sphere") {
        s.allow({"n", "r"});
        int n = dim("n");
        return model_operator(n, s.real("r", 1.0), n);
    }
    if (s.name == "random") {
        s.allow({"n", "seed"});
        auto it = s.params.find("seed");
        std::uint64_t seed = it == s.params.end() ? 1 : parse_seed(it->second, "random seed");
        return random_operator(dim("n"), seed);
    }
    throw InputError("unknown operator '" + s.name + "' (expected identity, zero, model, sphere, random or file)");
}

SubmersionData parse_submersion(const std::string& text) {
    Spec s = parse_spec(text);
    if (s.name == "hopf") {
        s.allow({});
        return hopf_data();
    }
    if (s.name == "product") {
        s.allow({"fdim", "fkappa", "bdim", "bkappa"});
        return product_data({s.integer("fdim", 2), s.real("fkappa", 1.0)}, {s.integer("bdim", 2), s.real("bkappa", 1.0)});
    }
    throw InputError("unknown submersion '" + s.name + "' (expected hopf or product)");
}

json run(const RunConfig& cfg) {
    cfg.check_required();
    auto start = std::chrono::steady_clock::now();
    json summary = json::object();
    json rows;
    if (cfg.command == "check") rows = run_check(cfg, summary);
    else if (cfg.command == "bend") rows = run_bend(cfg, summary);
    else if (cfg.command == "conformal") rows = run_conformal(cfg, summary);
    else if (cfg.command == "rescale") rows = run_rescale(cfg, summary);
    else if (cfg.command == "average") rows = run_average(cfg, summary);
    else if (cfg.command == "oracle") rows = run_oracle(cfg, summary);
    else throw InputError("unknown command '" + cfg.command + "'");

    bool pass = true;
    int failed = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (!r.at("pass").get<bool>()) {
            pass = false;
            ++failed;
        }
        if (r.contains("margin")) min_margin = std::min(min_margin, r["margin"].get<double>());
    }
    summary["verdict"] = pass ? "pass" : "fail";
    summary["rows"] = rows.size();
    summary["failed_rows"] = failed;
    summary["min_margin"] = std::isfinite(min_margin) ? json(min_margin) : json(nullptr);
    summary["runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json report;
    report["version"] = kVersion;
    report["config"] = echo(cfg);
    report["rows"] = std::move(rows);
    report["summary"] = std::move(summary);
    report["provenance"] = {{"seed", cfg.seed("seed")},
                            {"grid", cfg.integer("grid")},
                            {"threads", max_threads()},
                            {"timestamp", timestamp()}};
    return report;
}

bool report_pass(const json& report) { return report.at("summary").at("verdict") == "pass"; }

std::string rows_csv(const json& rows) {
    std::vector<std::string> cols;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.items())
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    std::ostringstream os;
    for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << (r.contains(cols[i]) ? csv_cell(r[cols[i]]) : "");
        os << "\n";
    }
    return os.str();
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    json report;
    try {
        int threads = cfg.integer("threads");
        if (threads < 0) throw InputError("threads must be >= 0");
        if (threads > 0) set_threads(threads);
        report = run(cfg);
    } catch (const InputError& e) {
        err << "curvcone: invalid input: " << e.what() << "\n";
        return 2;
    } catch (const InvariantError& e) {
        err << "curvcone: verification failed: " << e.what() << "\n";
        return 1;
    }

    std::string text = cfg.str("format") == "csv" ? rows_csv(report["rows"]) : report.dump(2) + "\n";
    std::string path = cfg.str("out");
    if (path.empty()) {
        out << text;
    } else {
        std::ofstream f(path);
        if (!(f << text)) {
            err << "curvcone: cannot write '" << path << "'\n";
            return 2;
        }
    }
    return report_pass(report) ? 0 : 1;
}

}  // namespace curvcone::cli
