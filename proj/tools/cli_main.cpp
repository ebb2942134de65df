// Command-line entry point: forward data generation, inversion to a profile
// grid, the invariant verification suite, and an end-to-end selftest.
//
// Exit codes: 0 success, 1 usage/schema error, 2 forward-solver failure,
// 3 inverse/verification failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "cubicstring/inverse.hpp"
#include "cubicstring/quadrature.hpp"

using namespace cubicstring;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitForward = 2;
constexpr int kExitInverse = 3;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw SchemaError(std::string(what) + ": complex values must be [re, im] pairs");
    return cplx(j[0].get<double>(), j[1].get<double>());
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open input file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        // e.byte is the offset; report it together with the parser message,
        // which already carries line/column context
        throw SchemaError("malformed JSON in " + path + " (byte " + std::to_string(e.byte) +
                          "): " + e.what());
    }
}

void require_schema_version(const json& j, const char* what) {
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != 1)
        throw SchemaError(std::string(what) + ": missing or unsupported schema_version (expect 1)");
}

double get_number(const json& j, const char* key, const char* what) {
    if (!j.contains(key) || !j[key].is_number())
        throw SchemaError(std::string(what) + ": missing numeric field '" + key + "'");
    return j[key].get<double>();
}

Potential potential_from_json(const json& j) {
    require_schema_version(j, "potential");
    const double mp = get_number(j, "m_plus", "potential");
    const double mm = get_number(j, "m_minus", "potential");
    const double a = get_number(j, "a", "potential");
    Perturbation pert;
    if (j.contains("perturbation")) {
        const json& pj = j["perturbation"];
        if (!pj.is_object() || !pj.contains("kind") || !pj["kind"].is_string())
            throw SchemaError("potential: perturbation must be an object with a 'kind' string");
        const std::string kind = pj["kind"].get<std::string>();
        if (kind == "none") {
            pert.kind = Perturbation::Kind::None;
        } else if (kind == "gaussian_bumps") {
            pert.kind = Perturbation::Kind::GaussianBumps;
            if (!pj.contains("bumps") || !pj["bumps"].is_array())
                throw SchemaError("potential: gaussian_bumps needs a 'bumps' array");
            for (const json& bj : pj["bumps"]) {
                GaussianBump b;
                b.center = get_number(bj, "center", "bump");
                b.width = get_number(bj, "width", "bump");
                b.amplitude = get_number(bj, "amplitude", "bump");
                pert.bumps.push_back(b);
            }
        } else if (kind == "exponential_tail") {
            pert.kind = Perturbation::Kind::ExponentialTail;
            pert.tail_amplitude = get_number(pj, "amplitude", "potential");
            pert.tail_rate = get_number(pj, "rate", "potential");
        } else if (kind == "table") {
            pert.kind = Perturbation::Kind::Table;
            if (!pj.contains("x") || !pj.contains("pert") || !pj["x"].is_array() ||
                !pj["pert"].is_array())
                throw SchemaError("potential: table needs 'x' and 'pert' arrays");
            for (const json& v : pj["x"]) pert.table_x.push_back(v.get<double>());
            for (const json& v : pj["pert"]) pert.table_pert.push_back(v.get<double>());
        } else {
            throw SchemaError("potential: unknown perturbation kind '" + kind + "'");
        }
    }
    try {
        return Potential(mp, mm, a, std::move(pert));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("potential: ") + e.what());
    }
}

json data_to_json(const ScatteringData& d) {
    json j;
    j["schema_version"] = 1;
    j["tau_grid"] = d.tau_grid;
    auto arr = [](const std::vector<cplx>& v) {
        json a = json::array();
        for (cplx z : v) a.push_back(complex_to_json(z));
        return a;
    };
    j["r0"] = arr(d.r0);
    j["s1"] = arr(d.s1);
    j["s2"] = arr(d.s2);
    j["r0_dual"] = arr(d.r0_dual);
    j["s1_dual"] = arr(d.s1_dual);
    j["s2_dual"] = arr(d.s2_dual);
    j["mu"] = d.mu;
    j["nu"] = d.nu;
    j["m_plus"] = d.m_plus;
    j["m_minus"] = d.m_minus;
    j["decay_rate"] = d.decay_rate;
    return j;
}

ScatteringData data_from_json(const json& j) {
    require_schema_version(j, "data");
    ScatteringData d;
    auto nums = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array())
            throw SchemaError(std::string("data: missing array field '") + key + "'");
        std::vector<double> out;
        for (const json& v : j[key]) {
            if (!v.is_number()) throw SchemaError(std::string("data: non-numeric entry in '") + key + "'");
            out.push_back(v.get<double>());
        }
        return out;
    };
    auto cplxs = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array())
            throw SchemaError(std::string("data: missing array field '") + key + "'");
        std::vector<cplx> out;
        for (const json& v : j[key]) out.push_back(complex_from_json(v, key));
        return out;
    };
    d.tau_grid = nums("tau_grid");
    d.r0 = cplxs("r0");
    d.s1 = cplxs("s1");
    d.s2 = cplxs("s2");
    d.r0_dual = cplxs("r0_dual");
    d.s1_dual = cplxs("s1_dual");
    d.s2_dual = cplxs("s2_dual");
    if (j.contains("mu")) d.mu = nums("mu");
    if (j.contains("nu")) d.nu = nums("nu");
    d.m_plus = get_number(j, "m_plus", "data");
    d.m_minus = get_number(j, "m_minus", "data");
    d.decay_rate = get_number(j, "decay_rate", "data");
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("data: ") + e.what());
    }
    return d;
}

JostBackend backend_from_string(const std::string& s) {
    if (s == "auto") return JostBackend::Auto;
    if (s == "neumann") return JostBackend::Neumann;
    if (s == "ode") return JostBackend::ODE;
    throw SchemaError("unknown backend '" + s + "' (expect auto|neumann|ode)");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open output file: " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// forward

int cmd_forward(const std::string& pot_path, double tau_max, int tau_nodes,
                const std::string& out_path, double bound_radius, const std::string& backend) {
    const Potential p = potential_from_json(load_json(pot_path));
    ScatteringData d;
    try {
        d = compute_scattering_data(p, tau_max, tau_nodes, backend_from_string(backend),
                                    bound_radius);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "forward solver failure: %s\n", e.what());
        return kExitForward;
    }
    write_text(out_path, data_to_json(d).dump(2) + "\n");

    // conservation-law report at sample spectral points
    std::printf("forward: wrote %zu tau nodes to %s\n", d.tau_grid.size(), out_path.c_str());
    double worst_det = 0, worst_uni = 0, worst_xind = 0;
    for (cplx lambda : {cplx(0.05, 0.0), cplx(0.03, -0.04), cplx(-0.06, 0.02)}) {
        const auto T = transition_matrix(p, lambda);
        worst_det = std::max(worst_det,
                             std::abs(T.t.determinant() - d.m_minus / d.m_plus));
        const auto c = coefficients(T);
        if (lambda.imag() == 0.0)
            worst_uni = std::max(worst_uni, unitarity_residual(c, c, T.kappa));
        const auto r0a = detail::transition_row0(p, lambda, 0.0, JostBackend::Auto);
        const double edge = p.support_edge_plus(1e-12) + 1.0;
        const auto r0b = detail::transition_row0(p, lambda, edge, JostBackend::Auto);
        for (int k = 0; k < 3; ++k) worst_xind = std::max(worst_xind, std::abs(r0a[k] - r0b[k]));
    }
    std::printf("  determinant residual      %s\n", fmt17(worst_det).c_str());
    std::printf("  unitarity residual        %s\n", fmt17(worst_uni).c_str());
    std::printf("  x-independence residual   %s\n", fmt17(worst_xind).c_str());
    std::printf("  bound states: %zu positive-ray, %zu negative-ray\n", d.mu.size(), d.nu.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// invert

int cmd_invert(const std::string& data_path, double x_min, double x_max, int x_nodes,
               const std::string& out_path, int refine) {
    const ScatteringData d = data_from_json(load_json(data_path));
    if (!(x_max > x_min) || x_nodes < 2) throw SchemaError("invert: need x_max > x_min and x_nodes >= 2");

    std::vector<double> xs(static_cast<std::size_t>(x_nodes));
    for (int i = 0; i < x_nodes; ++i) xs[static_cast<std::size_t>(i)] = x_min + (x_max - x_min) * i / (x_nodes - 1);
    std::vector<double> right, left_engine;  // engine abscissas, ascending
    for (double x : xs)
        (x >= 0 ? right : left_engine).push_back(x >= 0 ? x : -x);
    std::sort(left_engine.begin(), left_engine.end());
    if (!right.empty() && right.size() < 8)
        throw SchemaError("invert: right half-axis grid too small (need >= 8 nodes)");
    if (!left_engine.empty() && left_engine.size() < 8)
        throw SchemaError("invert: left half-axis grid too small (need >= 8 nodes)");

    FieldOptions opt;
    opt.refine_iterations = refine;
    std::vector<RecoveredM> parts;
    bool flagged = false;
    try {
        if (!left_engine.empty()) {
            const auto f = reconstruct_field(d, HalfAxis::Dual, left_engine, opt);
            flagged = flagged || f.any_flagged;
            parts.push_back(recover_m(f));
        }
        if (!right.empty()) {
            const auto f = reconstruct_field(d, HalfAxis::Direct, right, opt);
            flagged = flagged || f.any_flagged;
            parts.push_back(recover_m(f));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "inverse solver failure: %s\n", e.what());
        return kExitInverse;
    }

    std::ostringstream csv;
    csv << "x,m_estimate_routeA,m_estimate_routeB,discrepancy,residual\n";
    for (const auto& r : parts)
        for (std::size_t i = 0; i < r.x.size(); ++i)
            csv << fmt17(r.x[i]) << ',' << fmt17(r.route_a[i]) << ',' << fmt17(r.route_b[i])
                << ',' << fmt17(r.discrepancy[i]) << ',' << fmt17(r.residual[i]) << '\n';
    write_text(out_path, csv.str());

    std::printf("invert: wrote %s\n", out_path.c_str());
    for (const auto& r : parts)
        for (std::size_t i = 0; i < r.x.size(); ++i)
            std::printf("  x=%+.6f conditioning=%.6e residual=%.6e\n", r.x[i], r.conditioning[i],
                        r.residual[i]);
    if (flagged) {
        std::fprintf(stderr, "invert: at least one collocation solve exceeded the residual gate\n");
        return kExitInverse;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
    std::string module, name;
    double residual = 0, tolerance = 0;
    bool pass = false;
};

void add_check(std::vector<CheckResult>& out, const std::string& module, const std::string& name,
               double residual, double tolerance) {
    out.push_back({module, name, residual, tolerance, residual <= tolerance});
}

void verify_geometry(std::vector<CheckResult>& out) {
    double unity = 0, sum_res = std::abs(zeta(0) + zeta(1) + zeta(2));
    for (int k = 0; k < 3; ++k)
        unity = std::max(unity, std::abs(zeta(k) * zeta(k) * zeta(k) - 1.0));
    add_check(out, "geometry", "cube roots of unity", unity, 1e-15);
    add_check(out, "geometry", "roots sum to zero", sum_res, 1e-15);
    const auto s = classify(cplx(0.3, 0.4));
    add_check(out, "geometry", "interior point classified as sector", s.kind == RegionKind::Sector ? 0.0 : 1.0, 0.5);
}

void verify_trig3(std::vector<CheckResult>& out) {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    double worst_identity = 0, worst_euler = 0;
    for (int trial = 0; trial < 200; ++trial) {
        cplx z(coord(rng), coord(rng));
        if (std::abs(z) > 5.0) z *= 5.0 / std::abs(z);
        const auto t = s_triple(z);
        const cplx ident = t.s0 * t.s0 * t.s0 + t.s1 * t.s1 * t.s1 + t.s2 * t.s2 * t.s2 -
                           3.0 * t.s0 * t.s1 * t.s2;
        worst_identity = std::max(worst_identity, std::abs(ident - 1.0));
        for (int k = 0; k < 3; ++k) {
            const cplx rec = t.s0 + zeta(k) * t.s1 + zeta(k) * zeta(k) * t.s2;
            worst_euler = std::max(worst_euler, std::abs(std::exp(z * zeta(k)) - rec));
        }
    }
    add_check(out, "trig3", "cubic determinant identity", worst_identity, 2e-10);
    add_check(out, "trig3", "exponential recomposition", worst_euler, 1e-12);
}

void verify_jost(std::vector<CheckResult>& out) {
    const Potential step(1.0, 8.0, 1.0);
    double plane = 0;
    for (int k = 0; k < 3; ++k)
        plane = std::max(plane,
                         std::abs(reflect_v(step, cplx(0.05, -0.02), k, 0.7, JostBackend::Auto).value - 1.0));
    add_check(out, "jost", "step right families are plane waves", plane, 1e-10);

    Perturbation pert;
    pert.kind = Perturbation::Kind::GaussianBumps;
    pert.bumps.push_back({1.0, 0.5, 0.05});
    const Potential bump(1.0, 8.0, 1.0, pert);
    double agree = 0;
    const cplx lambda(0.07, 0.02);
    for (int k = 0; k < 3; ++k) {
        const auto a = solve_v_neumann(bump, lambda, k, 0.0);
        const auto b = solve_v_ode(bump, lambda, k, 0.0);
        agree = std::max(agree, std::abs(a.eval.value - b.eval.value) / std::abs(b.eval.value));
    }
    add_check(out, "jost", "series and integrator backends agree", agree, 1e-7);
}

void verify_scattering(std::vector<CheckResult>& out) {
    const Potential step(1.0, 8.0, 1.0);
    const auto T = transition_matrix(step, cplx(0.05, 0.0));
    add_check(out, "scattering", "step corner entry 7/3", std::abs(T.t(0, 0) - cplx(7.0 / 3.0, 0.0)),
              1e-10);
    add_check(out, "scattering", "determinant carries the limit ratio",
              std::abs(T.t.determinant() - 8.0), 1e-9);
    const auto c = coefficients(T);
    add_check(out, "scattering", "scalar unitarity", unitarity_residual(c, c, T.kappa), 1e-10);
    const Eigen::Matrix3cd lhs = transformation_matrix(T).inverse() *
                                 (Eigen::Matrix3cd::Identity() + scattering_matrix(T));
    add_check(out, "scattering", "transition recomposition", (lhs - T.t).norm(), 1e-9);
}

void verify_cauchy(std::vector<CheckResult>& out) {
    RayDensity d;
    d.ray_k = 0;
    d.tau = make_tau_grid(30.0, 400);
    d.values.resize(d.tau.size());
    for (std::size_t i = 0; i < d.tau.size(); ++i) d.values[i] = std::exp(-d.tau[i]);
    const cplx lambda(1.0, 1.0);
    const cplx w = cplx(0, -1) * lambda;
    const cplx oracle =
        integrate([&](double t) { return std::exp(-t) / (t - w); }, 0.0, 30.0, 1e-13) /
        (2.0 * pi * cplx(0, 1));
    add_check(out, "cauchy", "off-ray transform vs adaptive quadrature",
              std::abs(cauchy_integral(d, lambda) - oracle), 1e-10);
    const double t0 = 2.0;
    const cplx jump = boundary_value(d, t0, RaySide::Left) - boundary_value(d, t0, RaySide::Right);
    add_check(out, "cauchy", "jump equals the density", std::abs(jump - std::exp(-t0)), 1e-10);
}

void verify_inverse(std::vector<CheckResult>& out) {
    const Potential trivial(1.0, 1.0, 1.0);
    const auto data1 = compute_scattering_data(trivial, 20.0, 64, JostBackend::Auto, 0.0);
    const auto sys1 = assemble_direct(data1, 0.7);
    const auto sol1 = solve_system(sys1);
    const cplx lam(0, -0.3);
    add_check(out, "inverse", "matched limits give the free field",
              std::abs(reconstruct_psi0(sys1, sol1, lam) - std::exp(cplx(0, 1) * lam * 0.7)), 1e-8);

    const Potential step(1.0, 8.0, 1.0);
    const auto data2 = compute_scattering_data(step, 30.0, 96, JostBackend::Auto, 0.0);
    const auto sys2 = assemble_direct(data2, 0.8);
    const auto sol2 = solve_system(sys2);
    add_check(out, "inverse", "step system conditioning", sys2.conditioning, 1e3);
    const cplx ref = reflect_v(step, lam, 0, 0.8, JostBackend::Auto).value *
                     std::exp(cplx(0, 1) * lam * 0.8);
    add_check(out, "inverse", "step field round trip",
              std::abs(reconstruct_psi0(sys2, sol2, lam) - ref), 1e-6);
}

int cmd_verify(const std::string& only, const std::string& report_path) {
    std::vector<CheckResult> checks;
    const std::vector<std::pair<std::string, void (*)(std::vector<CheckResult>&)>> suites = {
        {"geometry", verify_geometry}, {"trig3", verify_trig3},
        {"jost", verify_jost},         {"scattering", verify_scattering},
        {"cauchy", verify_cauchy},     {"inverse", verify_inverse},
    };
    bool matched = false;
    for (const auto& [name, fn] : suites) {
        if (!only.empty() && only != name) continue;
        matched = true;
        fn(checks);
    }
    if (!matched) throw SchemaError("verify: unknown module '" + only + "'");

    bool all_pass = true;
    for (const auto& c : checks) {
        all_pass = all_pass && c.pass;
        std::printf("%s %-10s %-40s residual=%s tol=%s\n", c.pass ? "PASS" : "FAIL",
                    c.module.c_str(), c.name.c_str(), fmt17(c.residual).c_str(),
                    fmt17(c.tolerance).c_str());
    }
    if (!report_path.empty()) {
        json j;
        j["schema_version"] = 1;
        j["all_pass"] = all_pass;
        j["checks"] = json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"module", c.module},
                                   {"name", c.name},
                                   {"residual", c.residual},
                                   {"tolerance", c.tolerance},
                                   {"pass", c.pass}});
        write_text(report_path, j.dump(2) + "\n");
    }
    return all_pass ? kExitOk : kExitInverse;
}

// ---------------------------------------------------------------------------
// selftest

int cmd_selftest() {
    const Potential p(1.0, 8.0, 1.0);
    const auto data = compute_scattering_data(p, 30.0, 96, JostBackend::Auto, 0.0);
    std::vector<double> xg;
    for (int i = 0; i < 12; ++i) xg.push_back(0.2 + 2.2 * i / 11.0);
    double worst = 0;
    for (HalfAxis side : {HalfAxis::Direct, HalfAxis::Dual}) {
        const auto f = reconstruct_field(data, side, xg);
        const auto r = recover_m(f);
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            const double truth = p(r.x[i]);
            worst = std::max(worst, std::abs(r.route_b[i] - truth) / truth);
        }
    }
    std::printf("selftest: step round trip worst relative error %s (gate 1e-3)\n",
                fmt17(worst).c_str());
    const bool ok = worst <= 1e-3;
    std::printf("selftest: %s\n", ok ? "PASS" : "FAIL");
    return ok ? kExitOk : kExitInverse;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cubic-string scattering toolkit"};
    app.require_subcommand(1);

    auto* fwd = app.add_subcommand("forward", "compute scattering data for a profile");
    std::string pot_path, fwd_out, backend = "auto";
    double tau_max = 40.0, bound_radius = 1.2;
    int tau_nodes = 128;
    fwd->add_option("--potential", pot_path, "profile description JSON")->required();
    fwd->add_option("--tau-max", tau_max, "largest sampled ray parameter");
    fwd->add_option("--tau-nodes", tau_nodes, "number of ray samples");
    fwd->add_option("--out", fwd_out, "output data JSON path")->required();
    fwd->add_option("--bound-radius", bound_radius, "bound-state search radius (0 skips)");
    fwd->add_option("--backend", backend, "auto|neumann|ode");

    auto* inv = app.add_subcommand("invert", "recover the profile from scattering data");
    std::string data_path, inv_out;
    double x_min = 0.0, x_max = 2.0;
    int x_nodes = 16, refine = 0;
    inv->add_option("--data", data_path, "scattering data JSON")->required();
    inv->add_option("--x-min", x_min, "left edge of the output grid");
    inv->add_option("--x-max", x_max, "right edge of the output grid");
    inv->add_option("--x-nodes", x_nodes, "number of grid nodes");
    inv->add_option("--out", inv_out, "output CSV path")->required();
    inv->add_option("--refine", refine, "profile-model refinement passes");

    auto* ver = app.add_subcommand("verify", "run the invariant suite");
    std::string only, report_path;
    ver->add_option("--only", only, "restrict to one module");
    ver->add_option("--report", report_path, "machine-readable report JSON path");

    auto* self = app.add_subcommand("selftest", "end-to-end step round trip");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (fwd->parsed())
            return cmd_forward(pot_path, tau_max, tau_nodes, fwd_out, bound_radius, backend);
        if (inv->parsed()) return cmd_invert(data_path, x_min, x_max, x_nodes, inv_out, refine);
        if (ver->parsed()) return cmd_verify(only, report_path);
        if (self->parsed()) return cmd_selftest();
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitForward;
    }
    return kExitUsage;
}
