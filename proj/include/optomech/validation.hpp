// validation.hpp: oracle-versus-analytic comparison and the desk-scale validation suite

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optomech/lindblad.hpp"
#include "optomech/observables.hpp"
#include "optomech/stochastic.hpp"

namespace optomech {

/// Natural-units benchmark: Omega = 1, lambda = 0.1, g = 0.2, f_m = 0.1, omega_gr = 3.
/// omega = 0.2, L = 1, m = 2, hbar = 1 give g = 0.2; F_m = 0.2 gives f_m = 0.1.
struct BenchmarkSetup {
    ModelParams model{0.2, 1.0, 0.1, 2.0, 1.0};
    ForceSpec force = ForceSpec::sinusoid(0.2, 3.0);
    PhysicalConstants constants = PhysicalConstants::natural();
    InterferometerConfig interferometer{2.0, 1.0, Layout::general, 0.0};
    TruncatedSpace space{16, 40};
    TruncatedSpace stochastic_space{10, 24};
    std::vector<double> times{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    long n_traj{10000};
    std::uint64_t seed{20240611};
    double stochastic_dt{0.01};

    Dynamics dynamics() const { return Dynamics::from(model, force, constants); }
};

/// Photon and oscillator cuts whose truncation-edge populations stay below tol / 10
/// for a coherent input of mean photon number N evolved up to t.
inline TruncatedSpace default_space(double N, const Dynamics& d, double t, double tol = 1e-8) {
    auto poisson_tail_from = [](double mean, int level) {
        // sum_{k >= level} e^{-mean} mean^k / k!
        if (mean == 0.0) return level == 0 ? 1.0 : 0.0;
        double sum = 0.0;
        for (int k = level; k < level + 400; ++k) {
            const double term = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
            sum += term;
            if (k > mean && term < 1e-30) break;
        }
        return sum;
    };
    int P = 1;
    while (poisson_tail_from(N, P - 1) > 0.1 * tol) ++P;
    // |beta_n| <= (g n + f_m) min(t, 2 / |mu|)
    const double reach = std::min(t, 2.0 / std::hypot(0.5 * d.lambda, d.Omega));
    int K = 1;
    auto osc_tail = [&](int cut) {
        double sum = 0.0;
        for (int n = 0; n <= P; ++n) {
            const double pn = std::exp(-N + (N > 0.0 ? n * std::log(N) : (n ? -INFINITY : 0.0)) - std::lgamma(n + 1.0));
            const double beta = (d.g * n + d.force.amplitude) * reach;
            sum += pn * poisson_tail_from(beta * beta, cut - 1);
        }
        return sum;
    };
    while (osc_tail(K) > 0.1 * tol) ++K;
    TruncatedSpace s{P, K};
    s.validate();
    return s;
}

struct TimeMetrics {
    double t{0.0};
    double trace_distance{0.0};
    double energy_oracle{0.0};
    double energy_analytic{0.0};
    double energy_rel_err{0.0};
    double photon_diagonal_drift{0.0};
    double min_eigenvalue{0.0};
};

struct ValidationTolerances {
    double trace_distance{1e-4};
    double energy_rel{1e-5};
    double trace_drift{1e-6};
    double hermiticity{1e-10};
    double positivity{-1e-8};
    double photon_diagonal{1e-10};
    double stochastic_sigmas{3.0};
};

struct AnalyticComparison {
    Dynamics dynamics;
    InterferometerConfig interferometer;
    TruncatedSpace space;
    double dt{0.0};
    std::vector<TimeMetrics> rows;
    double max_trace_distance{0.0};
    double max_energy_rel_err{0.0};
    double max_photon_diagonal_drift{0.0};
    double min_eigenvalue{0.0};
    Leakage leakage;
    double max_trace_drift{0.0};
    double max_hermiticity_drift{0.0};
    bool pass{false};
};

/// Integrates the master equation from |i sigma z> (x) |0> and compares each output
/// time against the analytic reduced radiation state and mean energy.
inline AnalyticComparison compare_with_analytic(const std::vector<double>& t_grid, const Dynamics& d,
                                                const InterferometerConfig& cfg, const TruncatedSpace& space,
                                                IntegratorConfig integ = {}, const ValidationTolerances& tol = {}) {
    cfg.validate();
    if (t_grid.empty()) throw InvalidInput("t_grid is empty");
    const std::complex<double> alpha = std::complex<double>{0.0, cfg.reflectivity()} * cfg.z();
    const auto rho0 = coherent_product(space, alpha);
    integ.output_times = t_grid;
    integ.t_final = t_grid.back();
    const auto traj = evolve_master(rho0, integ, d);

    AnalyticComparison out{d, cfg, space, integ.dt};
    out.leakage = traj.max_leakage;
    out.max_trace_drift = traj.max_trace_drift;
    out.max_hermiticity_drift = traj.max_hermiticity_drift;
    out.min_eigenvalue = traj.min_eigenvalues.empty()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : *std::min_element(traj.min_eigenvalues.begin(), traj.min_eigenvalues.end());
    const Eigen::VectorXd diag0 = photon_reduced(rho0).diagonal().real();
    const double N_cavity = std::norm(alpha);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        const auto& state = traj.states[i];
        const DensityMatrix lab = integ.frame == Frame::rotating ? to_lab_frame(state, t, d.omega) : state;
        const Matrix reduced = photon_reduced(lab);
        TimeMetrics m;
        m.t = t;
        m.trace_distance = trace_distance(reduced, rho1_matrix(space.photon_cut, t, d, cfg));
        m.energy_oracle = oscillator_energy(state);
        m.energy_analytic = mean_energy(t, N_cavity, d);
        m.energy_rel_err = m.energy_analytic != 0.0 ? std::abs(m.energy_oracle / m.energy_analytic - 1.0)
                                                    : std::abs(m.energy_oracle);
        m.photon_diagonal_drift = (reduced.diagonal().real() - diag0).cwiseAbs().maxCoeff();
        m.min_eigenvalue = traj.min_eigenvalues.empty() ? std::numeric_limits<double>::quiet_NaN() : traj.min_eigenvalues[i];
        out.max_trace_distance = std::max(out.max_trace_distance, m.trace_distance);
        out.max_energy_rel_err = std::max(out.max_energy_rel_err, m.energy_rel_err);
        out.max_photon_diagonal_drift = std::max(out.max_photon_diagonal_drift, m.photon_diagonal_drift);
        out.rows.push_back(m);
    }
    out.pass = out.max_trace_distance <= tol.trace_distance && out.max_energy_rel_err <= tol.energy_rel &&
               out.max_trace_drift <= tol.trace_drift && out.max_hermiticity_drift <= tol.hermiticity &&
               !(out.min_eigenvalue < tol.positivity) && out.max_photon_diagonal_drift <= tol.photon_diagonal;
    return out;
}

struct StochasticComparison {
    TruncatedSpace space;
    long n_traj{0};
    long n_aborted{0};
    double dt{0.0};
    double t{0.0};
    double energy_master{0.0};
    EnsembleEstimate energy;
    EnsembleEstimate trace;
    double energy_sigmas{0.0}; // |stochastic - master| / standard error
    double trace_sigmas{0.0};
    bool pass{false};
};

/// Ensemble mean energy and trace against a master-equation run on the same truncation.
inline StochasticComparison compare_stochastic(double t, const Dynamics& d, const InterferometerConfig& cfg,
                                               const TruncatedSpace& space, const TrajectoryEnsemble& ens,
                                               double master_dt, const ValidationTolerances& tol = {}) {
    const std::complex<double> alpha = std::complex<double>{0.0, cfg.reflectivity()} * cfg.z();
    const auto rho0 = coherent_product(space, alpha);
    IntegratorConfig integ;
    integ.dt = master_dt;
    integ.t_final = t;
    integ.leakage_tol = 1.0; // both sides share the truncation, edge population is not an error here
    integ.check_positivity = false;
    const auto master = evolve_master(rho0, integ, d);
    const auto sto = evolve_stochastic(rho0, ens, d, t);

    StochasticComparison out;
    out.space = space;
    out.n_traj = sto.n_traj;
    out.n_aborted = sto.n_aborted;
    out.dt = ens.dt;
    out.t = t;
    out.energy_master = oscillator_energy(master.states.back());
    out.energy = sto.energy;
    out.trace = sto.trace;
    out.energy_sigmas = std::abs(sto.energy.mean - out.energy_master) / sto.energy.std_error;
    out.trace_sigmas = std::abs(sto.trace.mean - trace_real(master.states.back())) / sto.trace.std_error;
    out.pass = out.energy_sigmas <= tol.stochastic_sigmas && out.trace_sigmas <= tol.stochastic_sigmas;
    return out;
}

struct ConvergenceCheck {
    TruncatedSpace space{6, 14};
    double t{2.0};
    double dt_coarse{0.05};
    double dt_reference{0.002};
    double err_coarse{0.0}; // max |rho(dt) - rho_ref|
    double err_fine{0.0};   // same at dt / 2
    double factor{0.0};
    double factor_low{12.0};
    double factor_high{20.0};
    bool pass{false};
};

/// Error ratio on halving the RK4 step, against a run at a much finer step. Runs on a
/// small truncation: the ratio is a property of the integrator, not of the cutoffs.
inline ConvergenceCheck rk4_convergence(const Dynamics& d, const InterferometerConfig& cfg, ConvergenceCheck c = {}) {
    const std::complex<double> alpha = std::complex<double>{0.0, cfg.reflectivity()} * cfg.z();
    const auto rho0 = coherent_product(c.space, alpha);
    auto run = [&](double dt) {
        IntegratorConfig integ;
        integ.dt = dt;
        integ.t_final = c.t;
        integ.leakage_tol = 1.0;
        integ.check_positivity = false;
        return evolve_master(rho0, integ, d).states.back().rho;
    };
    const Matrix ref = run(c.dt_reference);
    c.err_coarse = (run(c.dt_coarse) - ref).cwiseAbs().maxCoeff();
    c.err_fine = (run(0.5 * c.dt_coarse) - ref).cwiseAbs().maxCoeff();
    c.factor = c.err_coarse / c.err_fine;
    c.pass = c.factor >= c.factor_low && c.factor <= c.factor_high;
    return c;
}

// ---- JSON report ------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ConvergenceCheck& c) {
    return {{"space", {{"photon_cut", c.space.photon_cut}, {"osc_cut", c.space.osc_cut}}},
            {"t", c.t},
            {"dt_coarse", c.dt_coarse},
            {"dt_fine", 0.5 * c.dt_coarse},
            {"dt_reference", c.dt_reference},
            {"err_coarse", c.err_coarse},
            {"err_fine", c.err_fine},
            {"factor", c.factor},
            {"pass", c.pass}};
}

inline nlohmann::ordered_json to_json(const TruncatedSpace& s) {
    return {{"photon_cut", s.photon_cut}, {"osc_cut", s.osc_cut}, {"dim", s.dim()}};
}

inline nlohmann::ordered_json to_json(const Dynamics& d) {
    return {{"omega", d.omega},
            {"Omega", d.Omega},
            {"lambda", d.lambda},
            {"g", d.g},
            {"f_m", d.force.amplitude},
            {"omega_gr", d.force.frequency},
            {"phase", d.force.phase}};
}

inline nlohmann::ordered_json to_json(const AnalyticComparison& c) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : c.rows)
        rows.push_back({{"t", r.t},
                        {"trace_distance", r.trace_distance},
                        {"energy_oracle", r.energy_oracle},
                        {"energy_analytic", r.energy_analytic},
                        {"energy_rel_err", r.energy_rel_err},
                        {"photon_diagonal_drift", r.photon_diagonal_drift}});
    return {{"params", to_json(c.dynamics)},
            {"N", c.interferometer.N},
            {"sigma_r", c.interferometer.reflectivity()},
            {"space", to_json(c.space)},
            {"dt", c.dt},
            {"metrics",
             {{"max_trace_distance", c.max_trace_distance},
              {"max_energy_rel_err", c.max_energy_rel_err},
              {"leakage", c.leakage.max()},
              {"max_trace_drift", c.max_trace_drift},
              {"max_hermiticity_drift", c.max_hermiticity_drift},
              {"min_eigenvalue", c.min_eigenvalue},
              {"max_photon_diagonal_drift", c.max_photon_diagonal_drift}}},
            {"times", rows},
            {"pass", c.pass}};
}

inline nlohmann::ordered_json to_json(const StochasticComparison& c) {
    return {{"space", to_json(c.space)},
            {"n_traj", c.n_traj},
            {"n_aborted", c.n_aborted},
            {"dt", c.dt},
            {"t", c.t},
            {"energy_master", c.energy_master},
            {"energy_mean", c.energy.mean},
            {"energy_std_error", c.energy.std_error},
            {"energy_sigmas", c.energy_sigmas},
            {"trace_mean", c.trace.mean},
            {"trace_std_error", c.trace.std_error},
            {"trace_sigmas", c.trace_sigmas},
            {"pass", c.pass}};
}

} // namespace optomech
