#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <tensorpole/tensorpole.hpp>

namespace tp = tensorpole;
using json = nlohmann::json;
using tp::io::fixed;
using tp::io::general;
using tp::io::internal_to_mhz;
using tp::io::mhz_to_internal;

namespace {

struct Common {
    double h0 = 2.0;  // MHz
    double alpha = tp::pi / 4, beta = 0.0, phi = 0.0;
    double bz = 0.0, dx = 0.0;  // MHz
    int grid = 201;
    std::uint64_t seed = tp::model::default_sample_seed;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* sub, Common& c, bool with_grid = true) {
    sub->add_option("--h0", c.h0, "sphere radius H0 in MHz")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "polar angle alpha (rad)")->capture_default_str();
    sub->add_option("--beta", c.beta, "angle beta (rad)")->capture_default_str();
    sub->add_option("--phi", c.phi, "angle phi (rad)")->capture_default_str();
    sub->add_option("--bz", c.bz, "Zeeman field Bz in MHz")->capture_default_str();
    sub->add_option("--dx", c.dx, "manifold displacement delta_x in MHz")->capture_default_str();
    if (with_grid) sub->add_option("--grid", c.grid, "grid size")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--out", c.out, "artifact path ('-' for stdout); directory for `figure`");
    sub->add_option("--format", c.format, "artifact format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

tp::model::ParamPoint point(const Common& c) {
    if (!(c.h0 >= 0.0)) throw tp::ConfigError("--h0 must be >= 0 MHz, got " + general(c.h0, 6));
    return {mhz_to_internal(c.h0), c.alpha, c.beta, c.phi, mhz_to_internal(c.bz), mhz_to_internal(c.dx)};
}

// key=value lines for every option that affects results, sorted by name
std::string canonical_config(const CLI::App* sub) {
    std::vector<std::string> lines;
    for (const CLI::Option* o : sub->get_options()) {
        const std::string name = o->get_name(false, true);
        if (name.empty() || name == "--help" || name == "--out" || name == "--config") continue;
        std::string value;
        if (o->count() > 0) {
            for (const auto& r : o->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = o->get_default_str();
        }
        lines.push_back(name + "=" + value);
    }
    std::sort(lines.begin(), lines.end());
    std::string s = sub->get_name() + "\n";
    for (const auto& l : lines) s += l + "\n";
    return s;
}

json header_json(const CLI::App* sub) {
    return {{"tool", "tensorpole"},
            {"version", std::string(tp::io::version)},
            {"command", sub->get_name()},
            {"config_fnv1a64", tp::io::config_hash(canonical_config(sub))},
            {"units", std::string(tp::io::units_line)}};
}

std::string csv_header(const CLI::App* sub) { return tp::io::header_comment(sub->get_name(), canonical_config(sub)); }

void write_artifact(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw tp::ConfigError("cannot open output file '" + path + "'");
    f << content;
    if (!f) throw tp::ConfigError("failed writing output file '" + path + "'");
}

void emit(const CLI::App* sub, const Common& c, const std::string& csv_body, const json& payload) {
    if (c.out.empty()) return;
    if (c.format == "json") {
        json j = payload;
        j["header"] = header_json(sub);
        write_artifact(c.out, j.dump(2) + "\n");
    } else {
        write_artifact(c.out, csv_header(sub) + csv_body);
    }
}

std::vector<double> range(double from, double to, int steps) {
    if (steps < 1) throw tp::ConfigError("steps must be >= 1");
    if (steps == 1) return {from};
    if (!(to > from)) throw tp::ConfigError("--to must exceed --from");
    return tp::dynamics::linspace(from, to, steps);
}

// ---------------------------------------------------------------- spectrum

void cmd_spectrum(const CLI::App* sub, const Common& c, const std::string& gauge) {
    const auto p = point(c);
    const auto es = tp::spectral::eigensystem(
        tp::model::build_hamiltonian(p),
        gauge == "largest" ? tp::spectral::Gauge::largest_component : tp::spectral::Gauge::v2_real);
    std::ostringstream csv;
    csv << "band,energy_MHz,re0,im0,re1,im1,re2,im2,gauge\n";
    json bands = json::array();
    for (int k = 0; k < 3; ++k) {
        const auto& v = es.states[k];
        csv << k << ',' << general(internal_to_mhz(es.energies[k]));
        json comps = json::array();
        for (int i = 0; i < 3; ++i) {
            csv << ',' << general(v[i].real()) << ',' << general(v[i].imag());
            comps.push_back({v[i].real(), v[i].imag()});
        }
        csv << ',' << tp::spectral::gauge_label_name(es.gauge[k]) << '\n';
        bands.push_back({{"energy_MHz", internal_to_mhz(es.energies[k])},
                         {"state", comps},
                         {"gauge", tp::spectral::gauge_label_name(es.gauge[k])}});
    }
    emit(sub, c, csv.str(), {{"bands", bands}, {"degenerate", es.degenerate}, {"jacobi_fallback", es.used_jacobi}});
    std::cout << "E_MHz=" << fixed(internal_to_mhz(es.energies[0])) << ',' << fixed(internal_to_mhz(es.energies[1]))
              << ',' << fixed(internal_to_mhz(es.energies[2])) << " degenerate=" << es.degenerate << '\n';
}

// ---------------------------------------------------------------- qgt

void cmd_qgt(const CLI::App* sub, const Common& c, const std::string& method, int band, double step) {
    const auto p = point(c);
    std::vector<std::pair<std::string, tp::geometry::QGTensor>> results;
    const bool all = method == "all";
    if (all || method == "perturbative") results.emplace_back("perturbative", tp::geometry::qgt_perturbative(p, band));
    if (method == "analytic" || (all && p.bz() == 0.0 && p.delta_x() == 0.0 && band == 0)) {
        if (p.bz() != 0.0 || p.delta_x() != 0.0 || band != 0)
            throw tp::ConfigError("qgt: the analytic tensor is defined for the ground band at bz = 0, delta_x = 0");
        results.emplace_back("analytic", tp::geometry::qgt_analytic(p.alpha()));
    }
    if (all || method == "fd") results.emplace_back("fd", tp::geometry::qgt_fd(p, step, band));
    std::ostringstream csv;
    csv << "method,i,j,g,f\n";
    json out = json::object();
    for (const auto& [name, q] : results) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                csv << name << ',' << tp::model::axis_name(tp::model::all_axes[i]) << ','
                    << tp::model::axis_name(tp::model::all_axes[j]) << ',' << general(q.g[i][j]) << ','
                    << general(q.f[i][j]) << '\n';
        out[name] = {{"g", q.g}, {"f", q.f}, {"H", tp::geometry::three_form_from_metric(q).value}};
    }
    emit(sub, c, csv.str(), out);
    const auto& q = results.front().second;
    std::cout << "H=" << fixed(tp::geometry::three_form_from_metric(q).value, 9) << " g_aa=" << fixed(q.g[0][0], 9)
              << " g_bb=" << fixed(q.g[1][1], 9) << " g_ff=" << fixed(q.g[2][2], 9) << " f_ab=" << fixed(q.f[0][1], 9)
              << " method=" << results.front().first << '\n';
}

// ---------------------------------------------------------------- dd

void cmd_dd(const CLI::App* sub, const Common& c, const std::string& method, int beta_grid) {
    point(c);
    const double h0 = mhz_to_internal(c.h0), bz = mhz_to_internal(c.bz), dx = mhz_to_internal(c.dx);
    json out = json::object();
    std::ostringstream csv, line;
    csv << "method,value\n";
    auto record = [&](const std::string& key, double v, int digits) {
        out[key] = v;
        csv << key << ',' << general(v, 15) << '\n';
        line << (line.tellp() > 0 ? " " : "") << key << '=' << fixed(v, digits);
    };
    if (method == "metric") record("G", tp::invariants::dd_metric(h0, bz, c.grid), 6);
    if (method == "both") {
        // the metric route is undefined where the gap closes; report it and keep the connection route
        try {
            record("G", tp::invariants::dd_metric(h0, bz, c.grid), 6);
        } catch (const tp::NumericalError& e) {
            out["G_error"] = e.what();
            line << (line.tellp() > 0 ? " " : "") << "G=undefined";
        }
    }
    if (method == "connection" || method == "both") {
        const auto r = tp::invariants::dd_connection(h0, bz, c.grid);
        record("B", r.boundary, 9);
        if (r.quadrature) record("B_quadrature", *r.quadrature, 9);
        if (h0 > 0.0) record("B_analytic", tp::invariants::b_analytic(bz / h0), 9);
    }
    if (method == "psi") record("B_psi", tp::invariants::psi_route_integral(h0, bz), 9);
    if (method == "displacement") record("DD_dx", tp::invariants::dd_displacement(h0, dx, c.grid, beta_grid), 6);
    emit(sub, c, csv.str(), out);
    std::cout << line.str() << '\n';
}

// ---------------------------------------------------------------- sweep

void cmd_sweep(const CLI::App* sub, const Common& c, const std::string& axis, double from, double to, int steps,
               int beta_grid) {
    const auto ax = axis == "bz" ? tp::invariants::SweepAxis::bz : tp::invariants::SweepAxis::delta_x;
    std::vector<double> values;
    for (double v : range(from, to, steps)) values.push_back(mhz_to_internal(v));
    tp::invariants::Methods m;
    const auto d = tp::invariants::sweep(ax, values, mhz_to_internal(c.h0), m, c.grid, beta_grid,
                                         mhz_to_internal(c.bz), mhz_to_internal(c.dx));
    std::ostringstream csv;
    csv.precision(12);
    tp::invariants::write_csv(csv, d, tp::two_pi);
    json pts = json::array();
    double worst = 0.0;
    int errors = 0;
    for (const auto& o : d.points) {
        json j = {{"value_MHz", internal_to_mhz(o.value)}};
        if (o.dd_metric) j["G"] = *o.dd_metric;
        if (o.dd_connection) j["B_numeric"] = *o.dd_connection;
        if (o.b_analytic) j["B_analytic"] = *o.b_analytic;
        if (o.dd_displacement) j["DD_displacement"] = *o.dd_displacement;
        if (!o.error.empty()) {
            j["error"] = o.error;
            ++errors;
        }
        if (o.dd_connection && o.b_analytic) worst = std::max(worst, std::abs(*o.dd_connection - *o.b_analytic));
        pts.push_back(j);
    }
    emit(sub, c, csv.str(), {{"axis", axis}, {"points", pts}});
    std::cout << "points=" << d.points.size() << " max_abs_B_minus_analytic=" << general(worst, 3)
              << " point_errors=" << errors << '\n';
}

// ---------------------------------------------------------------- nodal

void cmd_nodal(const CLI::App* sub, const Common& c, const std::string& plane, double extent, const std::string& perturb,
               double strength) {
    tp::spectral::GridSpec g;
    g.points = c.grid;
    const double bz = mhz_to_internal(c.bz);
    g.extent = extent > 0.0 ? mhz_to_internal(extent) : 2.0 * std::max(std::abs(bz), mhz_to_internal(0.5));
    std::optional<tp::Matrix3c> extra;
    if (perturb != "none") {
        const double s = mhz_to_internal(strength > 0.0 ? strength : 0.3 * c.h0);
        extra = tp::model::perturbation_term(tp::model::parse_perturbation(perturb), s);
    }
    const auto r = tp::spectral::nodal_scan(bz, tp::spectral::parse_plane(plane), g, extra);
    json minima = json::array();
    for (const auto& m : r.local_minima)
        minima.push_back({{"u_MHz", internal_to_mhz(m.u)}, {"v_MHz", internal_to_mhz(m.v)}, {"gap_MHz", internal_to_mhz(m.gap)}});
    json report = {{"plane", std::string(tp::spectral::plane_name(r.plane))},
                   {"points", r.grid.points},
                   {"extent_MHz", internal_to_mhz(r.grid.extent)},
                   {"cell_MHz", internal_to_mhz(r.cell)},
                   {"ring_radius_MHz", internal_to_mhz(r.ring_radius_estimate)},
                   {"min_gap_MHz", internal_to_mhz(r.min_gap)},
                   {"grid_zero_bound_MHz", internal_to_mhz(r.grid_zero_bound)},
                   {"nodal_count", r.nodal_count},
                   {"local_minima", minima}};
    std::ostringstream csv;
    csv.precision(10);
    tp::spectral::write_gap_map_csv(csv, r, tp::two_pi);
    emit(sub, c, csv.str(), report);
    std::cout << "ring_radius_MHz=" << fixed(internal_to_mhz(r.ring_radius_estimate)) << " cell_MHz="
              << fixed(internal_to_mhz(r.cell)) << " min_gap_MHz=" << general(internal_to_mhz(r.min_gap), 6)
              << " nodal_count=" << r.nodal_count << " zero_minima=" << r.local_minima.size() << '\n';
}

// ---------------------------------------------------------------- modulate

struct ModulateOpts {
    std::vector<std::string> axes{"alpha"};
    std::string pattern = "linear";
    bool bar = false;
    std::string transition = "dq";
    double m = tp::dynamics::default_amplitude;
    double periods = 10.0;
    int samples = 400;
    bool bare = false;
    double omega_init = 10.0;  // MHz
    std::vector<double> readout;
    double sigma = 0.0;
};

tp::dynamics::DrivePattern drive_pattern(const ModulateOpts& o) {
    if (o.axes.empty() || o.axes.size() > 2) throw tp::ConfigError("--axes takes one or two axis names");
    tp::dynamics::DrivePattern d;
    d.mu = tp::model::parse_axis(o.axes[0]);
    if (o.axes.size() == 2) d.nu = tp::model::parse_axis(o.axes[1]);
    d.bar = o.bar;
    d.kind = tp::dynamics::parse_pattern(o.pattern);
    if (!d.nu && d.kind == tp::dynamics::Pattern::elliptical)
        throw tp::ConfigError("elliptical modulation needs two axes");
    return d;
}

void cmd_modulate(const CLI::App* sub, const Common& c, const ModulateOpts& mo) {
    namespace dyn = tp::dynamics;
    const auto p = point(c);
    const auto d = drive_pattern(mo);
    const auto t = dyn::parse_transition(mo.transition);
    dyn::ExperimentOptions opt;
    opt.m = mo.m;
    opt.periods = mo.periods;
    opt.samples = mo.samples;
    opt.dressed_resonance = !mo.bare;
    opt.omega_init = mhz_to_internal(mo.omega_init);
    opt.seed = c.seed;
    if (!mo.readout.empty()) {
        if (mo.readout.size() != 3) throw tp::ConfigError("--readout takes three reference levels r+,r0,r-");
        opt.readout = dyn::ReadoutModel{mo.readout[0], mo.readout[1], mo.readout[2], mo.sigma, c.seed};
    }
    const auto x = dyn::gamma_simulated(p, d, t, opt);
    const double direct = dyn::gamma_direct(p, d, t).value;
    std::ostringstream csv;
    dyn::write_trace_csv(csv, x.trace);
    json fit = {{"Omega_MHz", internal_to_mhz(x.fit.omega)},
                {"A", x.fit.amplitude},
                {"offset", x.fit.offset},
                {"residual_rms", x.fit.residual_rms},
                {"constrained", x.fit.constrained},
                {"Gamma_sim_MHz", internal_to_mhz(x.gamma.value)},
                {"Gamma_direct_MHz", internal_to_mhz(direct)},
                {"drive_MHz", internal_to_mhz(x.spec.omega)},
                {"protocol", dyn::protocol_name(x.protocol)},
                {"pattern", dyn::pattern_label(d)},
                {"transition", dyn::transition_name(t)},
                {"pulse_prep", x.pulse_prep}};
    emit(sub, c, csv.str(), fit);
    std::cout << "Gamma_sim_MHz=" << fixed(internal_to_mhz(x.gamma.value)) << " Gamma_direct_MHz="
              << fixed(internal_to_mhz(direct)) << " Omega_MHz=" << fixed(internal_to_mhz(x.fit.omega))
              << " residual=" << general(x.fit.residual_rms, 3) << " protocol=\"" << dyn::protocol_name(x.protocol)
              << "\"\n";
}

// ---------------------------------------------------------------- resonance

struct ResonanceOpts {
    double from = 0.0, to = 0.0;  // MHz, default 1.9 H0 .. 2.1 H0
    int steps = 41;
    double tau = 7.5;
    double m_alpha = 0.0, m_beta = 1.0 / 30.0, m_phi = 1.0 / 30.0;
    std::string pattern = "linear";
    bool refine = true;
};

void cmd_resonance(const CLI::App* sub, const Common& c, const ResonanceOpts& ro) {
    namespace dyn = tp::dynamics;
    dyn::ModulationSpec s;
    s.base = point(c);
    s.amplitude = {ro.m_alpha, ro.m_beta, ro.m_phi};
    s.pattern = dyn::parse_pattern(ro.pattern);
    dyn::validate(s);
    const double from = ro.from > 0.0 ? ro.from : 1.9 * c.h0, to = ro.to > 0.0 ? ro.to : 2.1 * c.h0;
    std::vector<double> om;
    for (double f : range(from, to, ro.steps)) om.push_back(mhz_to_internal(f));
    const auto r = dyn::resonance_scan(s, om, ro.tau, mhz_to_internal(10.0), ro.refine);
    std::ostringstream csv;
    csv << "omega_MHz,transfer\n";
    json rows = json::array();
    for (std::size_t i = 0; i < r.omega.size(); ++i) {
        csv << general(internal_to_mhz(r.omega[i])) << ',' << general(r.transfer[i]) << '\n';
        rows.push_back({internal_to_mhz(r.omega[i]), r.transfer[i]});
    }
    emit(sub, c, csv.str(),
         {{"spectrum", rows}, {"peak_MHz", internal_to_mhz(r.peak_omega)}, {"refined_MHz", internal_to_mhz(r.refined_omega)}});
    std::cout << "peak_MHz=" << fixed(internal_to_mhz(r.peak_omega)) << " refined_MHz="
              << fixed(internal_to_mhz(r.refined_omega)) << " transfer=" << fixed(r.transfer[r.peak_index], 4)
              << " step_MHz=" << fixed(ro.steps > 1 ? (to - from) / (ro.steps - 1) : 0.0) << '\n';
}

// ---------------------------------------------------------------- figure bundles

struct Bundle {
    std::filesystem::path dir;
    const CLI::App* sub;
    std::vector<std::string> files;

    void write(const std::string& name, const std::string& body) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw tp::ConfigError("cannot write " + (dir / name).string());
        f << csv_header(sub) << body;
        files.push_back(name);
    }
};

void fig2(Bundle& b, const Common& c) {
    namespace dyn = tp::dynamics;
    const double h0 = mhz_to_internal(c.h0);
    {
        dyn::ModulationSpec s;
        s.base = {h0, tp::pi / 4, 0.0, 0.0};
        s.amplitude = {0.0, 1.0 / 30.0, 1.0 / 30.0};
        std::vector<double> om;
        for (double f : range(1.9 * c.h0, 2.1 * c.h0, 41)) om.push_back(mhz_to_internal(f));
        const auto r = dyn::resonance_scan(s, om, 7.5, mhz_to_internal(10.0), false);
        std::ostringstream o;
        o << "omega_MHz,transfer\n";
        for (std::size_t i = 0; i < om.size(); ++i) o << general(internal_to_mhz(om[i])) << ',' << general(r.transfer[i]) << '\n';
        b.write("resonance.csv", o.str());
    }
    const auto alphas = tp::quadrature::nodes(0.0, tp::pi / 2, 9);
    std::ostringstream gam, met;
    gam << "alpha,pattern,transition,gamma_direct_MHz,gamma_sim_MHz,protocol\n";
    met << "alpha,g_aa,g_bb,g_ff,g_ab,g_af,g_bf,g_aa_exact,g_bb_exact,g_ff_exact,g_ab_exact,g_af_exact,g_bf_exact,H_emulated,H_exact\n";
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        const tp::model::ParamPoint p(h0, alphas[k], 0.0, 0.0);
        const auto e = dyn::emulate_qgt(p, {}, true, k * 100);
        if (k == 6) {
            std::ostringstream t;
            dyn::write_trace_csv(t, e.experiments.front().trace);
            b.write("rabi_trace_alpha_SQ.csv", t.str());
        }
        for (const auto& x : e.experiments)
            gam << general(alphas[k]) << ',' << dyn::pattern_label(x.gamma.pattern) << ','
                << dyn::transition_name(x.gamma.transition) << ','
                << general(internal_to_mhz(dyn::gamma_direct(p, x.gamma.pattern, x.gamma.transition).value)) << ','
                << general(internal_to_mhz(x.gamma.value)) << ',' << dyn::protocol_name(x.protocol) << '\n';
        const auto qa = tp::geometry::qgt_analytic(alphas[k]);
        auto row = [&](const tp::geometry::QGTensor& q) {
            met << ',' << general(q.g[0][0]) << ',' << general(q.g[1][1]) << ',' << general(q.g[2][2]) << ','
                << general(q.g[0][1]) << ',' << general(q.g[0][2]) << ',' << general(q.g[1][2]);
        };
        met << general(alphas[k]);
        row(e.qgt);
        row(qa);
        met << ',' << general(tp::geometry::three_form_from_metric(e.qgt).value) << ','
            << general(tp::geometry::three_form_analytic(alphas[k]).value) << '\n';
    }
    b.write("gammas.csv", gam.str());
    b.write("metric_emulated.csv", met.str());
}

void fig3(Bundle& b, const Common& c) {
    const double h0 = mhz_to_internal(c.h0);
    std::ostringstream q, h;
    q << "alpha,g_aa,g_bb,g_ff,g_ab,g_af,g_bf,f_ab,f_af,f_bf,g_aa_exact,g_bb_exact,g_ff_exact,g_bf_exact,f_ab_exact\n";
    h << "alpha,H_analytic,H_metric,H_connection,H_psi_averaged\n";
    for (int k = 0; k <= 64; ++k) {
        const double a = k * tp::pi / 128;
        const tp::model::ParamPoint p(h0, a, c.beta, c.phi);
        const auto g = tp::geometry::qgt_perturbative(p);
        const auto ga = tp::geometry::qgt_analytic(a);
        q << general(a) << ',' << general(g.g[0][0]) << ',' << general(g.g[1][1]) << ',' << general(g.g[2][2]) << ','
          << general(g.g[0][1]) << ',' << general(g.g[0][2]) << ',' << general(g.g[1][2]) << ',' << general(g.f[0][1])
          << ',' << general(g.f[0][2]) << ',' << general(g.f[1][2]) << ',' << general(ga.g[0][0]) << ','
          << general(ga.g[1][1]) << ',' << general(ga.g[2][2]) << ',' << general(ga.g[1][2]) << ','
          << general(ga.f[0][1]) << '\n';
        h << general(a) << ',' << general(tp::geometry::three_form_analytic(a).value) << ','
          << general(tp::geometry::three_form_from_metric(g).value) << ',';
        try {
            h << general(tp::geometry::three_form_from_connection(p).sample.value);
        } catch (const tp::NumericalError&) {
        }
        h << ',';
        if (k > 0 && k < 64) h << general(tp::geometry::three_form_psi_averaged(p, a));
        h << '\n';
    }
    b.write("qgt.csv", q.str());
    b.write("three_form.csv", h.str());
    const auto conn = tp::invariants::dd_connection(h0, 0.0, c.grid);
    std::ostringstream s;
    s << "route,value\n";
    s << "metric," << general(tp::invariants::dd_metric(h0, 0.0, c.grid), 15) << '\n';
    s << "connection_boundary," << general(conn.boundary, 15) << '\n';
    if (conn.quadrature) s << "connection_quadrature," << general(*conn.quadrature, 15) << '\n';
    s << "psi," << general(tp::invariants::psi_route_integral(h0, 0.0), 15) << '\n';
    b.write("dd_summary.csv", s.str());
}

void fig4(Bundle& b, const Common& c) {
    const double h0 = mhz_to_internal(c.h0);
    std::vector<double> hs = tp::dynamics::linspace(0.0, 3.0, 61);
    std::vector<double> bz;
    for (double h : hs) bz.push_back(h * h0);
    tp::invariants::Methods m;
    const auto d = tp::invariants::sweep(tp::invariants::SweepAxis::bz, bz, h0, m, c.grid);
    std::vector<double> psi(hs.size());
    tp::parallel_for(hs.size(), [&](std::size_t i) {
        if (std::abs(hs[i] - 1.0) > 1e-12) psi[i] = tp::invariants::psi_route_integral(h0, bz[i]);
    });
    std::ostringstream o;
    o << "h,bz_MHz,G,B_numeric,B_analytic,B_psi,error\n";
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const auto& p = d.points[i];
        o << general(hs[i]) << ',' << general(internal_to_mhz(bz[i])) << ',';
        if (p.dd_metric) o << general(*p.dd_metric);
        o << ',';
        if (p.dd_connection) o << general(*p.dd_connection);
        o << ',';
        if (p.b_analytic) o << general(*p.b_analytic);
        o << ',';
        if (std::abs(hs[i] - 1.0) > 1e-12) o << general(psi[i]);
        o << ",\"" << p.error << "\"\n";
    }
    b.write("sweep.csv", o.str());
}

void figS1(Bundle& b, const Common& c) {
    const double h0 = mhz_to_internal(c.h0);
    std::vector<double> ratios;
    for (int k = 0; k <= 20; ++k) {
        const double r = 0.1 * k;
        if (std::abs(r - 1.0) > 0.05) ratios.push_back(r);
    }
    std::vector<double> dd(ratios.size());
    tp::parallel_for(ratios.size(),
                     [&](std::size_t i) { dd[i] = tp::invariants::dd_displacement(h0, ratios[i] * h0, c.grid, c.grid); });
    std::ostringstream o;
    o << "dx_over_h0,DD\n";
    for (std::size_t i = 0; i < ratios.size(); ++i) o << general(ratios[i]) << ',' << general(dd[i]) << '\n';
    b.write("displacement.csv", o.str());
}

void figS2(Bundle& b, const Common& c) {
    const double h0 = mhz_to_internal(c.h0);
    const double bz = c.bz != 0.0 ? mhz_to_internal(c.bz) : mhz_to_internal(1.0);
    const int n = std::min(c.grid, 161);
    auto gap_map = [&](const std::string& name, double field, tp::spectral::Plane plane, std::optional<tp::Matrix3c> extra) {
        tp::spectral::GridSpec g;
        g.points = n;
        g.extent = 2.0 * std::max(bz, h0);
        const auto r = tp::spectral::nodal_scan(field, plane, g, extra);
        std::ostringstream o;
        o.precision(10);
        tp::spectral::write_gap_map_csv(o, r, tp::two_pi);
        b.write(name, o.str());
    };
    const auto l4 = tp::model::perturbation_term(tp::model::Perturbation::lambda4, 0.3 * h0);
    const auto l5 = tp::model::perturbation_term(tp::model::Perturbation::lambda5, 0.3 * h0);
    gap_map("ring_qx_qy.csv", bz, tp::spectral::Plane::qx_qy, std::nullopt);
    gap_map("lambda4_qx_qz.csv", 0.0, tp::spectral::Plane::qx_qz, l4);
    gap_map("lambda5_qx_qz.csv", 0.0, tp::spectral::Plane::qx_qz, l5);
    // band envelopes on the qy = qw = 0 slice projected onto qx
    std::ostringstream o;
    o << "perturbation,qx_MHz,band,min_MHz,max_MHz\n";
    const double ext = 2.0 * h0;
    for (const auto& [name, extra] : {std::pair{std::string("lambda4"), l4}, std::pair{std::string("lambda5"), l5}})
        for (int i = 0; i < n; ++i) {
            const double qx = -ext + 2.0 * ext * i / (n - 1);
            std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
            for (int j = 0; j < n; ++j) {
                const double qz = -ext + 2.0 * ext * j / (n - 1);
                const auto e = tp::spectral::eigenvalues(tp::model::hamiltonian_from_cartesian({qx, 0.0, qz, 0.0}) + extra);
                for (int k = 0; k < 3; ++k) {
                    lo[k] = std::min(lo[k], e[k]);
                    hi[k] = std::max(hi[k], e[k]);
                }
            }
            for (int k = 0; k < 3; ++k)
                o << name << ',' << general(internal_to_mhz(qx)) << ',' << k << ',' << general(internal_to_mhz(lo[k]))
                  << ',' << general(internal_to_mhz(hi[k])) << '\n';
        }
    b.write("band_envelopes.csv", o.str());
}

void cmd_figure(const CLI::App* sub, const Common& c, const std::string& name) {
    Bundle b{c.out.empty() ? std::filesystem::path("figures") / name : std::filesystem::path(c.out), sub, {}};
    std::error_code ec;
    std::filesystem::create_directories(b.dir, ec);
    if (ec) throw tp::ConfigError("cannot create output directory " + b.dir.string() + ": " + ec.message());
    if (name == "fig2") fig2(b, c);
    else if (name == "fig3") fig3(b, c);
    else if (name == "fig4") fig4(b, c);
    else if (name == "figS1") figS1(b, c);
    else if (name == "figS2") figS2(b, c);
    std::cout << "figure=" << name << " dir=" << b.dir.string() << " files=";
    for (std::size_t i = 0; i < b.files.size(); ++i) std::cout << (i ? "," : "") << b.files[i];
    std::cout << '\n';
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensorpole: tensor monopole geometry, invariants and modulation-spectroscopy emulator"};
    app.set_version_flag("--version", std::string(tp::io::version));
    app.set_config("--config", "", "key = value config file; flags override it");
    app.require_subcommand(1);

    Common c_spec, c_qgt, c_dd, c_sweep, c_nodal, c_mod, c_res, c_fig;

    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and gauge-fixed eigenvectors at one point");
    add_common(spectrum, c_spec, false);
    std::string gauge = "v2_real";
    spectrum->add_option("--gauge", gauge)->check(CLI::IsMember({"v2_real", "largest"}))->capture_default_str();

    auto* qgt = app.add_subcommand("qgt", "quantum geometric tensor at one point");
    add_common(qgt, c_qgt, false);
    std::string qgt_method = "all";
    int band = 0;
    double step = 1e-3;
    qgt->add_option("--method", qgt_method)->check(CLI::IsMember({"all", "perturbative", "analytic", "fd"}))->capture_default_str();
    qgt->add_option("--band", band)->check(CLI::Range(0, 2))->capture_default_str();
    qgt->add_option("--step", step, "finite-difference step (rad)")->capture_default_str();

    auto* dd = app.add_subcommand("dd", "DD invariant and the field-dependent generalizations");
    add_common(dd, c_dd);
    std::string dd_method = "both";
    int dd_beta_grid = 201;
    dd->add_option("--method", dd_method)
        ->check(CLI::IsMember({"metric", "connection", "both", "psi", "displacement"}))
        ->capture_default_str();
    dd->add_option("--beta-grid", dd_beta_grid, "beta nodes for the displacement route")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "phase diagram over bz or delta_x");
    add_common(sweep, c_sweep);
    std::string sweep_axis = "bz";
    double s_from = 0.0, s_to = 4.0;
    int s_steps = 17, s_beta = 201;
    sweep->add_option("--axis", sweep_axis)->check(CLI::IsMember({"bz", "dx"}))->capture_default_str();
    sweep->add_option("--from", s_from, "MHz")->capture_default_str();
    sweep->add_option("--to", s_to, "MHz")->capture_default_str();
    sweep->add_option("--steps", s_steps)->capture_default_str();
    sweep->add_option("--beta-grid", s_beta)->capture_default_str();

    auto* nodal = app.add_subcommand("nodal", "gap map and nodal structure on a momentum plane");
    add_common(nodal, c_nodal);
    c_nodal.grid = 256;
    std::string plane = "qx-qy", perturb = "none";
    double extent = 0.0, strength = 0.0;
    nodal->add_option("--plane", plane)->check(CLI::IsMember({"qx-qy", "qz-qw", "qx-qz"}))->capture_default_str();
    nodal->add_option("--extent", extent, "half-width in MHz (default 2 max(|bz|, 0.5))");
    nodal->add_option("--perturb", perturb)->check(CLI::IsMember({"none", "lambda4", "lambda5"}))->capture_default_str();
    nodal->add_option("--strength", strength, "perturbation strength in MHz (default 0.3 H0)");

    auto* modulate = app.add_subcommand("modulate", "one simulated parametric-modulation experiment");
    add_common(modulate, c_mod, false);
    ModulateOpts mo;
    modulate->add_option("--axes", mo.axes, "one or two of alpha, beta, phi")->delimiter(',')->capture_default_str();
    modulate->add_option("--pattern", mo.pattern)->check(CLI::IsMember({"linear", "elliptical"}))->capture_default_str();
    modulate->add_flag("--bar", mo.bar, "use the mu nu-bar sign pattern");
    modulate->add_option("--transition", mo.transition)->check(CLI::IsMember({"sq", "dq"}))->capture_default_str();
    modulate->add_option("--m", mo.m, "modulation amplitude")->capture_default_str();
    modulate->add_option("--periods", mo.periods)->capture_default_str();
    modulate->add_option("--samples", mo.samples)->capture_default_str();
    modulate->add_flag("--bare-resonance", mo.bare, "drive at the unmodulated gap");
    modulate->add_option("--omega-init", mo.omega_init, "prep pulse Rabi frequency in MHz")->capture_default_str();
    modulate->add_option("--readout", mo.readout, "reference levels r+,r0,r-")->delimiter(',');
    modulate->add_option("--sigma", mo.sigma, "readout noise")->capture_default_str();

    auto* resonance = app.add_subcommand("resonance", "transferred population vs drive frequency");
    add_common(resonance, c_res, false);
    ResonanceOpts ro;
    resonance->add_option("--from", ro.from, "MHz (default 1.9 H0)");
    resonance->add_option("--to", ro.to, "MHz (default 2.1 H0)");
    resonance->add_option("--steps", ro.steps)->capture_default_str();
    resonance->add_option("--tau", ro.tau, "modulation time in us")->capture_default_str();
    resonance->add_option("--m-alpha", ro.m_alpha)->capture_default_str();
    resonance->add_option("--m-beta", ro.m_beta)->capture_default_str();
    resonance->add_option("--m-phi", ro.m_phi)->capture_default_str();
    resonance->add_option("--pattern", ro.pattern)->check(CLI::IsMember({"linear", "elliptical"}))->capture_default_str();
    resonance->add_flag("!--no-refine", ro.refine, "skip golden-section refinement of the peak");

    auto* figure = app.add_subcommand("figure", "write the CSV series behind one figure");
    add_common(figure, c_fig);
    std::string fig_name;
    figure->add_option("name", fig_name)->required()->check(CLI::IsMember({"fig2", "fig3", "fig4", "figS1", "figS2"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", e.what(), 2);
    }

    std::cout.precision(12);
    try {
        if (*spectrum) cmd_spectrum(spectrum, c_spec, gauge);
        else if (*qgt) cmd_qgt(qgt, c_qgt, qgt_method, band, step);
        else if (*dd) cmd_dd(dd, c_dd, dd_method, dd_beta_grid);
        else if (*sweep) cmd_sweep(sweep, c_sweep, sweep_axis, s_from, s_to, s_steps, s_beta);
        else if (*nodal) cmd_nodal(nodal, c_nodal, plane, extent, perturb, strength);
        else if (*modulate) cmd_modulate(modulate, c_mod, mo);
        else if (*resonance) cmd_resonance(resonance, c_res, ro);
        else if (*figure) cmd_figure(figure, c_fig, fig_name);
    } catch (const tp::ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const tp::NumericalError& e) {
        return fail("numerical", e.what(), 3);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
