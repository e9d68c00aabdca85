// cli.hpp: command dispatch behind the optomech command-line tool
//
// Every command builds a Table (named columns, typed cells) and writes it as CSV
// or JSON. Errors leave the process through dispatch() as an exit status plus a
// JSON object {code, message, context} on the error stream.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "optomech/io.hpp"
#include "optomech/kernels.hpp"
#include "optomech/observables.hpp"
#include "optomech/sensitivity.hpp"
#include "optomech/validation.hpp"

namespace optomech::cli {

enum class Command { kernels, energy, signal, sensitivity, bounds, sweep, validate, fig };
enum class Format { csv, json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidInput = 1;
inline constexpr int kExitNumericalFailure = 2;
inline constexpr int kExitValidationFailure = 3;

inline std::string to_string(Command c) {
    switch (c) {
    case Command::kernels: return "kernels";
    case Command::energy: return "energy";
    case Command::signal: return "signal";
    case Command::sensitivity: return "sensitivity";
    case Command::bounds: return "bounds";
    case Command::sweep: return "sweep";
    case Command::validate: return "validate";
    case Command::fig: return "fig";
    }
    return "unknown";
}

struct RunConfig {
    Command command{Command::kernels};
    std::string params_path;  // empty selects the LIGO-type defaults
    std::string output_path;  // empty or "-" writes to standard output
    Format format{Format::csv};
    std::string t_axis;       // "value" or "start:stop:count[:log|lin]"; empty selects the command default
    std::string N_axis;
    std::string h_axis;
    int fig_id{0};
    std::uint64_t seed{20240611};
    unsigned threads{0};
    std::string method;       // kernels: closed_form | quadrature | leading_order; signal: closed_form | approx | series
    long trajectories{10000}; // validate only
};

using Cell = std::variant<double, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    ojson meta = ojson::object(); // extra top-level JSON fields
};

/// Thrown by validate when a tolerance fails; carries the already-built report.
class ValidationFailure : public Error {
public:
    ValidationFailure(const std::string& what, Table report) : Error(what), report_(std::move(report)) {}
    const Table& report() const noexcept { return report_; }

private:
    Table report_;
};

// ---- axis parsing ---------------------------------------------------------------

inline double parse_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v))
        throw InvalidInput("cannot parse '" + text + "' as a finite number for " + what);
    return v;
}

inline Axis parse_axis(const std::string& spec, const std::string& name) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    Axis a;
    if (parts.size() == 1) {
        a.start = a.stop = parse_double(parts[0], name);
        a.count = 1;
    } else if (parts.size() == 3 || parts.size() == 4) {
        a.start = parse_double(parts[0], name);
        a.stop = parse_double(parts[1], name);
        long count = 0;
        const auto& c = parts[2];
        const auto res = std::from_chars(c.data(), c.data() + c.size(), count);
        if (res.ec != std::errc{} || res.ptr != c.data() + c.size() || count < 1)
            throw InvalidInput("axis " + name + " needs a positive integer count, got '" + c + "'");
        a.count = static_cast<std::size_t>(count);
        if (parts.size() == 4) {
            if (parts[3] == "log") a.log = true;
            else if (parts[3] != "lin") throw InvalidInput("axis " + name + " spacing must be 'log' or 'lin'");
        }
    } else {
        throw InvalidInput("axis " + name + " must be 'value' or 'start:stop:count[:log|lin]', got '" + spec + "'");
    }
    a.validate(name.c_str());
    return a;
}

inline Axis axis_or(const std::string& spec, const std::string& fallback, const std::string& name) {
    return parse_axis(spec.empty() ? fallback : spec, name);
}

// ---- output -------------------------------------------------------------------

inline std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
    return std::get<std::string>(c);
}

inline ojson cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? ojson(*d) : ojson(nullptr);
    if (const auto* b = std::get_if<bool>(&c)) return *b;
    return std::get<std::string>(c);
}

inline void write_csv(const Table& t, std::ostream& os) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
        os << '\n';
    }
}

inline ojson table_json(const Table& t, Command command, const ojson& units, const ojson& params) {
    ojson js = {{"command", to_string(command)}, {"units", units}, {"params", params}};
    for (const auto& [k, v] : t.meta.items()) js[k] = v;
    js["columns"] = t.columns;
    ojson rows = ojson::array();
    for (const auto& row : t.rows) {
        ojson r = ojson::object();
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = cell_json(row[i]);
        rows.push_back(std::move(r));
    }
    js["rows"] = std::move(rows);
    return js;
}

// ---- commands -----------------------------------------------------------------

namespace detail {

inline KernelMethod kernel_method(const std::string& m) {
    if (m.empty() || m == "closed_form") return KernelMethod::closed_form;
    if (m == "quadrature") return KernelMethod::quadrature;
    if (m == "leading_order") return KernelMethod::leading_order;
    throw InvalidInput("kernels --method must be closed_form, quadrature or leading_order");
}

inline GWSource source(const ParamsFile& p, double h) {
    if (p.force.kind != ForceKind::sinusoid) throw InvalidInput("sensitivity commands need a sinusoidal force");
    if (!(h > 0.0)) throw InvalidInput("strain h must be > 0");
    return {h, p.force.omega_gr, p.force.phase};
}

inline std::string default_strain(const ParamsFile& p) { return format_number(p.strain()); }

} // namespace detail

inline Table run_kernels(const RunConfig& cfg, const ParamsFile& p) {
    const auto method = detail::kernel_method(cfg.method);
    const auto d = p.dynamics();
    Table t{{"t", "phi_t", "c_t", "s_t", "c0", "c1", "c2"}};
    for (double time : axis_or(cfg.t_axis, "0:10:101:lin", "t").values()) {
        const auto k = kernel_set(time, d, method);
        const auto e = energy_coeffs(time, d, method == KernelMethod::leading_order ? KernelMethod::closed_form : method);
        t.rows.push_back({time, k.phi, k.c, k.s, e.c0, e.c1, e.c2});
    }
    t.meta["method"] = cfg.method.empty() ? "closed_form" : cfg.method;
    return t;
}

inline Table run_energy(const RunConfig& cfg, const ParamsFile& p) {
    const auto d = p.dynamics();
    const double r = p.interferometer.reflectivity(), N_cavity = p.interferometer.N * r * r;
    Table t{{"t", "N", "energy", "energy_limit"}};
    for (double time : axis_or(cfg.t_axis, "0:10:101:lin", "t").values())
        for (double N : axis_or(cfg.N_axis, format_number(N_cavity), "N").values()) {
            if (!(N >= 0.0)) throw InvalidInput("N must be >= 0");
            t.rows.push_back({time, N, mean_energy(time, N, d), mean_energy_limit(N, d)});
        }
    return t;
}

inline Table run_signal(const RunConfig& cfg, const ParamsFile& p) {
    const auto d = p.dynamics();
    const std::string method = cfg.method.empty() ? "closed_form" : cfg.method;
    if (method != "closed_form" && method != "approx" && method != "series")
        throw InvalidInput("signal --method must be closed_form, approx or series");
    Table t{{"t", "N", "I", "D", "sigma2", "sigma2_infinite", "shot", "sql", "backaction"}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double time : axis_or(cfg.t_axis, "0:10:101:lin", "t").values())
        for (double N : axis_or(cfg.N_axis, format_number(p.interferometer.N), "N").values()) {
            auto ic = p.interferometer;
            ic.N = N;
            const SignalStats s = method == "approx" ? signal_approx_twin(time, d, ic)
                                  : method == "series" ? signal_series(time, d, ic)
                                                       : signal_closed_form(time, d, ic);
            const auto b = s.breakdown.value_or(NoiseBreakdown{nan, nan, nan});
            t.rows.push_back({time, N, s.I, s.D, s.sigma2, s.sigma2_infinite, b.shot, b.sql, b.backaction});
        }
    t.meta["method"] = method;
    t.meta["layout"] = to_string(p.interferometer.layout);
    return t;
}

inline Table run_sensitivity(const RunConfig& cfg, const ParamsFile& p) {
    const double g = derive_couplings(p.model, ForceSpec::zero(), p.constants).g;
    Table t{{"t", "N", "h", "phi_m", "c_m", "s_m", "shot", "sql", "backaction", "sigma2", "detectable"}};
    for (double time : axis_or(cfg.t_axis, "100", "t").values())
        for (double N : axis_or(cfg.N_axis, "1e8:1e17:10:log", "N").values())
            for (double h : axis_or(cfg.h_axis, detail::default_strain(p), "h").values()) {
                if (!(N >= 0.0)) throw InvalidInput("N must be >= 0");
                const auto a = envelope(time, p.model, detail::source(p, h), p.constants);
                const auto n = noise_terms(a, N, g);
                t.rows.push_back({time, N, h, a.phi_m, a.c_m, a.s_m, n.shot, n.sql, n.backaction, n.total(),
                                  n.total() <= 1.0});
            }
    return t;
}

inline Table run_bounds(const RunConfig& cfg, const ParamsFile& p) {
    Table t{{"t", "h", "N_min", "N_max", "N_opt", "t_max", "P_min", "P_max", "reflections", "sql", "window_nonempty",
             "N_lo", "N_hi"}};
    for (double time : axis_or(cfg.t_axis, "1:1000:4:log", "t").values())
        for (double h : axis_or(cfg.h_axis, detail::default_strain(p), "h").values()) {
            const auto b = operating_bounds(time, p.model, detail::source(p, h), p.constants, p.reflections);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            t.rows.push_back({time, h, b.N_min, b.N_max, b.N_opt, b.t_max, b.P_min, b.P_max, b.reflections, b.sql,
                              b.window_nonempty, b.exact.nonempty ? b.exact.N_lo : nan,
                              b.exact.nonempty ? b.exact.N_hi : nan});
        }
    return t;
}

inline SweepSpec sweep_spec(const RunConfig& cfg, const ParamsFile& p, const std::string& t_default,
                            const std::string& N_default) {
    const auto src = detail::source(p, p.strain() > 0.0 ? p.strain() : 1e-22);
    SweepSpec s;
    s.t = axis_or(cfg.t_axis, t_default, "t");
    s.N = axis_or(cfg.N_axis, N_default, "N");
    s.h = axis_or(cfg.h_axis, detail::default_strain(p), "h");
    s.model = p.model;
    s.constants = p.constants;
    s.omega_gr = src.omega_gr;
    s.phase = src.phase;
    s.threads = cfg.threads;
    return s;
}

inline Table run_sweep(const RunConfig& cfg, const ParamsFile& p) {
    const auto spec = sweep_spec(cfg, p, "1:1000:30:log", "1e8:1e17:30:log");
    Table t{{"t", "N", "h", "sigma2", "sigma2_raw", "I", "D", "detectable", "h_min"}};
    for (const auto& r : sweep_grid(spec))
        t.rows.push_back({r.t, r.N, r.h, r.sigma2, r.sigma2_raw, r.I, r.D, r.detectable, r.h_min});
    return t;
}

inline Table run_fig(const RunConfig& cfg, const ParamsFile& p) {
    Table t;
    t.meta["fig"] = cfg.fig_id;
    switch (cfg.fig_id) {
    case 2: { // relative fluctuation over measurement time and photon number, clipped at 1
        const auto spec = sweep_spec(cfg, p, "1:2000:60:log", "1e8:1e17:60:log");
        t.columns = {"t", "N", "h", "sigma2"};
        for (double time : spec.t.values())
            for (double N : spec.N.values())
                for (double h : spec.h.values()) {
                    const auto d = detectability(time, N, p.model, detail::source(p, h), p.constants);
                    t.rows.push_back({time, N, h, std::min(d.sigma2, 1.0)});
                }
        break;
    }
    case 3: { // sigma^2 at the optimal photon number, with the maximum duration
        t.columns = {"t", "h", "N_opt", "sigma2", "sigma2_clipped", "t_max"};
        for (double time : axis_or(cfg.t_axis, "1:3000:100:log", "t").values())
            for (double h : axis_or(cfg.h_axis, detail::default_strain(p), "h").values()) {
                const auto src = detail::source(p, h);
                const auto b = envelope_bounds(time, p.model, src, p.constants, p.reflections);
                const double s2 = detectability(time, b.N_opt, p.model, src, p.constants).sigma2;
                t.rows.push_back({time, h, b.N_opt, s2, std::min(s2, 1.0), b.t_max});
            }
        break;
    }
    case 4: { // minimal detectable strain; N defaults to the optimal photon number at each t
        t.columns = {"t", "N", "h_min"};
        const auto src = detail::source(p, p.strain() > 0.0 ? p.strain() : 1e-22);
        for (double time : axis_or(cfg.t_axis, "0.01:1000:100:log", "t").values()) {
            std::vector<double> Ns;
            if (cfg.N_axis.empty()) Ns = {envelope_bounds(time, p.model, src, p.constants, p.reflections).N_opt};
            else Ns = parse_axis(cfg.N_axis, "N").values();
            for (double N : Ns)
                t.rows.push_back({time, N, minimal_detectable_h(time, N, p.model, src.omega_gr, src.phase, p.constants)});
        }
        break;
    }
    case 5: { // laser power window
        t.columns = {"t", "h", "N_min", "N_max", "P_min", "P_max"};
        for (double time : axis_or(cfg.t_axis, "0.01:1000:100:log", "t").values())
            for (double h : axis_or(cfg.h_axis, detail::default_strain(p), "h").values()) {
                const auto b = envelope_bounds(time, p.model, detail::source(p, h), p.constants, p.reflections);
                t.rows.push_back({time, h, b.N_min, b.N_max, b.P_min, b.P_max});
            }
        break;
    }
    default:
        throw InvalidInput("fig takes an id in {2, 3, 4, 5}, got " + std::to_string(cfg.fig_id));
    }
    return t;
}

/// Oracle suite on the natural-units benchmark. Throws ValidationFailure (report attached) when a tolerance fails.
inline ojson run_validate(const RunConfig& cfg, Table& summary) {
    if (!cfg.params_path.empty()) throw InvalidInput("validate runs the fixed benchmark and takes no --params");
    if (cfg.trajectories < 1) throw InvalidInput("--trajectories must be >= 1");
    BenchmarkSetup bench;
    const auto d = bench.dynamics();
    const ValidationTolerances tol;
    const auto times = cfg.t_axis.empty() ? bench.times : parse_axis(cfg.t_axis, "t").values();

    IntegratorConfig integ;
    integ.dt = recommended_dt(d, bench.space);
    const auto analytic = compare_with_analytic(times, d, bench.interferometer, bench.space, integ, tol);
    const auto conv = rk4_convergence(d, bench.interferometer);

    TrajectoryEnsemble ens;
    ens.n_traj = cfg.trajectories;
    ens.seed = cfg.seed;
    ens.dt = bench.stochastic_dt;
    ens.threads = cfg.threads;
    const auto sto = compare_stochastic(times.back(), d, bench.interferometer, bench.stochastic_space, ens,
                                        recommended_dt(d, bench.stochastic_space), tol);

    const bool pass = analytic.pass && conv.pass && sto.pass;
    ojson report = {{"analytic", to_json(analytic)},
                    {"convergence", to_json(conv)},
                    {"stochastic", to_json(sto)},
                    {"tolerances",
                     {{"trace_distance", tol.trace_distance},
                      {"energy_rel", tol.energy_rel},
                      {"trace_drift", tol.trace_drift},
                      {"hermiticity", tol.hermiticity},
                      {"positivity", tol.positivity},
                      {"photon_diagonal", tol.photon_diagonal},
                      {"rk4_factor", {conv.factor_low, conv.factor_high}},
                      {"stochastic_sigmas", tol.stochastic_sigmas}}},
                    {"pass", pass}};

    summary.columns = {"check", "value", "tolerance", "pass"};
    auto row = [&](const std::string& name, double v, const std::string& bound, bool ok) {
        summary.rows.push_back({name, v, bound, ok});
    };
    row("max_trace_distance", analytic.max_trace_distance, "<= " + format_number(tol.trace_distance),
        analytic.max_trace_distance <= tol.trace_distance);
    row("max_energy_rel_err", analytic.max_energy_rel_err, "<= " + format_number(tol.energy_rel),
        analytic.max_energy_rel_err <= tol.energy_rel);
    row("max_trace_drift", analytic.max_trace_drift, "<= " + format_number(tol.trace_drift),
        analytic.max_trace_drift <= tol.trace_drift);
    row("max_hermiticity_drift", analytic.max_hermiticity_drift, "<= " + format_number(tol.hermiticity),
        analytic.max_hermiticity_drift <= tol.hermiticity);
    row("min_eigenvalue", analytic.min_eigenvalue, ">= " + format_number(tol.positivity),
        !(analytic.min_eigenvalue < tol.positivity));
    row("max_photon_diagonal_drift", analytic.max_photon_diagonal_drift, "<= " + format_number(tol.photon_diagonal),
        analytic.max_photon_diagonal_drift <= tol.photon_diagonal);
    row("leakage", analytic.leakage.max(), "<= 1e-08", analytic.leakage.max() <= 1e-8);
    row("rk4_factor", conv.factor, format_number(conv.factor_low) + ".." + format_number(conv.factor_high), conv.pass);
    row("stochastic_energy_sigmas", sto.energy_sigmas, "<= " + format_number(tol.stochastic_sigmas),
        sto.energy_sigmas <= tol.stochastic_sigmas);
    row("stochastic_trace_sigmas", sto.trace_sigmas, "<= " + format_number(tol.stochastic_sigmas),
        sto.trace_sigmas <= tol.stochastic_sigmas);
    summary.meta = report;
    if (!pass) throw ValidationFailure("oracle suite failed at least one tolerance", summary);
    return report;
}

// ---- dispatch -------------------------------------------------------------------

inline ojson error_json(const std::string& code, const std::string& message, ojson context) {
    return {{"code", code}, {"message", message}, {"context", std::move(context)}};
}

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.output_path.empty() || cfg.output_path == "-") {
        out << text;
        out.flush();
        return;
    }
    std::ofstream f(cfg.output_path, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInput("cannot open output file '" + cfg.output_path + "'");
    f << text;
    if (!f) throw InvalidInput("failed writing output file '" + cfg.output_path + "'");
}

inline std::string render(const RunConfig& cfg, const Table& t, const ojson& units, const ojson& params) {
    std::ostringstream os;
    if (cfg.format == Format::csv) {
        write_csv(t, os);
    } else {
        os << table_json(t, cfg.command, units, params).dump(2) << '\n';
    }
    return os.str();
}

inline std::string render_validation(const RunConfig& cfg, const Table& summary) {
    std::ostringstream os;
    if (cfg.format == Format::csv) {
        write_csv(summary, os);
    } else {
        ojson js = {{"command", "validate"},
                    {"units", units_block(UnitSystem::natural)},
                    {"params", to_json(BenchmarkSetup{}.dynamics())}};
        for (const auto& [k, v] : summary.meta.items()) js[k] = v;
        os << js.dump(2) << '\n';
    }
    return os.str();
}

} // namespace detail

/// Runs one command. Returns the process exit status; error details go to err as JSON.
inline int dispatch(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    ojson context = {{"command", to_string(cfg.command)}};
    if (cfg.command == Command::fig) context["fig"] = cfg.fig_id;
    if (!cfg.params_path.empty()) context["params"] = cfg.params_path;
    try {
        if (cfg.command == Command::validate) {
            Table summary;
            run_validate(cfg, summary);
            detail::emit(cfg, detail::render_validation(cfg, summary), out);
            return kExitOk;
        }
        const ParamsFile p = cfg.params_path.empty() ? default_params_file() : load_params(cfg.params_path);
        Table t;
        switch (cfg.command) {
        case Command::kernels: t = run_kernels(cfg, p); break;
        case Command::energy: t = run_energy(cfg, p); break;
        case Command::signal: t = run_signal(cfg, p); break;
        case Command::sensitivity: t = run_sensitivity(cfg, p); break;
        case Command::bounds: t = run_bounds(cfg, p); break;
        case Command::sweep: t = run_sweep(cfg, p); break;
        case Command::fig: t = run_fig(cfg, p); break;
        case Command::validate: break;
        }
        detail::emit(cfg, detail::render(cfg, t, units_block(p.constants.units), to_json(p)), out);
        return kExitOk;
    } catch (const ValidationFailure& e) {
        try {
            detail::emit(cfg, detail::render_validation(cfg, e.report()), out);
        } catch (const Error&) {
        }
        err << error_json("validation_failed", e.what(), context).dump() << '\n';
        return kExitValidationFailure;
    } catch (const TruncationError& e) {
        context["factor"] = e.factor();
        context["leakage"] = e.estimate();
        err << error_json("truncation", e.what(), context).dump() << '\n';
        return kExitNumericalFailure;
    } catch (const NumericalFailure& e) {
        context["estimate"] = std::isfinite(e.estimate()) ? ojson(e.estimate()) : ojson(nullptr);
        err << error_json("numerical_failure", e.what(), context).dump() << '\n';
        return kExitNumericalFailure;
    } catch (const RegimeError& e) {
        err << error_json("regime", e.what(), context).dump() << '\n';
        return kExitInvalidInput;
    } catch (const InvalidInput& e) {
        err << error_json("invalid_input", e.what(), context).dump() << '\n';
        return kExitInvalidInput;
    } catch (const nlohmann::json::exception& e) {
        err << error_json("invalid_input", e.what(), context).dump() << '\n';
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        err << error_json("internal", e.what(), context).dump() << '\n';
        return kExitNumericalFailure;
    }
}

} // namespace optomech::cli
