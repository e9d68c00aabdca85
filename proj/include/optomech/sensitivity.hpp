// sensitivity.hpp: detector-scale analysis on kernel envelopes
//
// Past one mirror period the kernels are replaced by their oscillation
// amplitudes phi_m, c_m, s_m; the relative fluctuation then reads
//
//   sigma^2 = 1/(16 g^2 phi^2 N) + c/(4 phi^2) + g^2 s^2 N/(4 phi^2)
//
// and every bound below is an algebraic consequence of it.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <string>
#include <limits>
#include <numbers>
#include <thread>
#include <vector>

#include "optomech/params.hpp"

namespace optomech {

struct GWSource {
    double h{1e-22};
    double omega_gr{2.0 * std::numbers::pi * 100.0};
    double phase{0.0};

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("h must be finite and > 0");
        if (!(omega_gr > 0.0) || !std::isfinite(omega_gr)) throw InvalidInput("omega_gr must be finite and > 0");
        if (!std::isfinite(phase)) throw InvalidInput("phase must be finite");
    }
};

struct AmplitudeSet {
    double t{0.0};
    double phi_m{0.0}; // peak |phi_t| over a mirror period
    double c_m{0.0};
    double s_m{0.0};
    // phi_t ~ a (cos Omega t - 1) - b sin Omega t to leading order
    double phi_cos_prefactor{0.0}; // a = f_m cos(phase) / (Omega omega_gr)
    double phi_sin_prefactor{0.0}; // b = f_m sin(phase) / omega_gr^2
};

struct NoiseTerms {
    double shot{0.0};
    double sql{0.0};
    double backaction{0.0};
    double total() const { return shot + sql + backaction; }
};

struct Detectability {
    bool detectable{false};
    double sigma2{0.0};
    NoiseTerms terms;
};

struct DetectableWindow {
    bool nonempty{false};
    double N_lo{0.0};
    double N_hi{0.0};
};

struct OperatingBounds {
    double t{0.0};
    double h{0.0};
    double N_min{0.0}; // shot term alone reaches 1
    double N_max{0.0}; // back-action term alone reaches 1
    double N_opt{0.0};
    double t_max{0.0};
    double P_min{0.0}; // W
    double P_max{0.0}; // W
    double reflections{1000.0};
    double sql{0.0};
    bool window_nonempty{false};
    DetectableWindow exact; // roots of sigma^2(N) = 1 with all three terms
};

inline Dynamics gw_dynamics(const ModelParams& p, const GWSource& src, const PhysicalConstants& k) {
    src.validate();
    return Dynamics::from(p, ForceSpec::from_strain(src.h, p, src.omega_gr, src.phase), k);
}

namespace detail {

inline double period(const ModelParams& p) { return 2.0 * std::numbers::pi / p.Omega; }

// max over x in [0, x_end] of |a (cos x - 1) - b sin x|
inline double running_peak(double a, double b, double x_end) {
    auto value = [&](double x) { return std::abs(a * (std::cos(x) - 1.0) - b * std::sin(x)); };
    double best = value(x_end);
    const double x0 = std::atan2(-b, a);
    for (double x = x0 < 0.0 ? x0 + std::numbers::pi : x0; x <= x_end; x += std::numbers::pi) best = std::max(best, value(x));
    return best;
}

inline AmplitudeSet prefactors(const ModelParams& p, const GWSource& src, const PhysicalConstants& k) {
    const double f_m = gw_dynamics(p, src, k).force.amplitude;
    AmplitudeSet a;
    a.phi_cos_prefactor = f_m * std::cos(src.phase) / (p.Omega * src.omega_gr);
    a.phi_sin_prefactor = f_m * std::sin(src.phase) / (src.omega_gr * src.omega_gr);
    return a;
}

} // namespace detail

/// Kernel oscillation amplitudes; valid once a full mirror period has elapsed.
inline AmplitudeSet amplitudes(double t, const ModelParams& p, const GWSource& src, const PhysicalConstants& k) {
    p.validate();
    if (!(t >= detail::period(p))) throw RegimeError("amplitudes require t >= 2 pi / Omega");
    AmplitudeSet a = detail::prefactors(p, src, k);
    a.t = t;
    const double A = a.phi_cos_prefactor, B = a.phi_sin_prefactor;
    a.phi_m = std::hypot(A, B) + std::abs(A);
    a.c_m = 2.0 / (p.Omega * p.Omega);
    a.s_m = t / p.Omega;
    return a;
}

/// Envelope kernels for any t >= 0: the amplitudes past one period, the running
/// maxima of the leading-order kernels before that. Continuous at t = 2 pi / Omega.
inline AmplitudeSet envelope(double t, const ModelParams& p, const GWSource& src, const PhysicalConstants& k) {
    p.validate();
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time must be finite and >= 0");
    const double T = detail::period(p);
    if (t >= T) return amplitudes(t, p, src, k);
    AmplitudeSet a = detail::prefactors(p, src, k);
    a.t = t;
    const double W = p.Omega;
    a.phi_m = detail::running_peak(a.phi_cos_prefactor, a.phi_sin_prefactor, W * t);
    a.c_m = (1.0 - std::cos(W * std::min(t, 0.5 * T))) / (W * W);
    a.s_m = t / W - std::sin(W * t) / (W * W);
    return a;
}

inline NoiseTerms noise_terms(const AmplitudeSet& a, double N, double g) {
    const double inf = std::numeric_limits<double>::infinity();
    const double phi2 = a.phi_m * a.phi_m;
    if (phi2 == 0.0) return {inf, inf, inf};
    return {N > 0.0 ? 1.0 / (16.0 * g * g * phi2 * N) : inf, a.c_m / (4.0 * phi2), g * g * a.s_m * a.s_m * N / (4.0 * phi2)};
}

/// sigma^2 <= 1 on envelope kernels.
inline Detectability detectability(double t, double N, const ModelParams& p, const GWSource& src,
                                   const PhysicalConstants& k) {
    if (!(N >= 0.0)) throw InvalidInput("N must be >= 0");
    const auto a = envelope(t, p, src, k);
    const double g = derive_couplings(p, ForceSpec::zero(), k).g;
    Detectability d;
    d.terms = noise_terms(a, N, g);
    d.sigma2 = d.terms.total();
    d.detectable = d.sigma2 <= 1.0;
    return d;
}

inline double photons_to_power(double N, const ModelParams& p, const PhysicalConstants& k, double reflections) {
    return k.hbar * p.omega * N / reflections * k.c_light / (2.0 * p.length);
}

namespace detail {

inline OperatingBounds bounds_from(const AmplitudeSet& a, const ModelParams& p, const GWSource& src,
                                   const PhysicalConstants& k, double reflections) {
    if (!(reflections > 0.0)) throw InvalidInput("reflections must be > 0");
    const auto dyn = gw_dynamics(p, src, k);
    const double g = dyn.g, g2 = g * g, phi2 = a.phi_m * a.phi_m;
    const double phi_amp = std::hypot(a.phi_cos_prefactor, a.phi_sin_prefactor) + std::abs(a.phi_cos_prefactor);
    OperatingBounds b;
    b.t = a.t;
    b.h = src.h;
    b.reflections = reflections;
    b.N_min = 1.0 / (16.0 * g2 * phi2);
    b.N_max = 4.0 * phi2 / (g2 * a.s_m * a.s_m);
    b.N_opt = 1.0 / (2.0 * g2 * a.s_m);
    // sigma^2(N_opt) without the SQL term is s_m / (4 phi_m^2) = t / (4 phi_m^2 Omega)
    b.t_max = 4.0 * phi_amp * phi_amp * p.Omega;
    b.P_min = photons_to_power(b.N_min, p, k, reflections);
    b.P_max = photons_to_power(b.N_max, p, k, reflections);
    b.window_nonempty = b.N_min <= b.N_max;
    b.sql = a.c_m / (4.0 * phi2);

    // B N^2 - (1 - sql) N + A = 0 with A = N_min, B = 1 / N_max
    const double A = b.N_min, B = 1.0 / b.N_max, rhs = 1.0 - b.sql;
    const double disc = rhs * rhs - 4.0 * A * B;
    if (rhs > 0.0 && disc >= 0.0) {
        const double root = std::sqrt(disc);
        b.exact.nonempty = true;
        b.exact.N_hi = (rhs + root) / (2.0 * B);
        b.exact.N_lo = A / (B * b.exact.N_hi); // product of roots, avoids cancellation
    }
    return b;
}

} // namespace detail

inline OperatingBounds operating_bounds(double t, const ModelParams& p, const GWSource& src, const PhysicalConstants& k,
                                        double reflections = 1000.0) {
    return detail::bounds_from(amplitudes(t, p, src, k), p, src, k, reflections);
}

/// Same bounds on envelope kernels, so that times below one mirror period are allowed.
/// t_max keeps its amplitude-regime value.
inline OperatingBounds envelope_bounds(double t, const ModelParams& p, const GWSource& src, const PhysicalConstants& k,
                                       double reflections = 1000.0) {
    return detail::bounds_from(envelope(t, p, src, k), p, src, k, reflections);
}

// ---- sweep grids ----------------------------------------------------------

struct Axis {
    double start{0.0};
    double stop{0.0};
    std::size_t count{1};
    bool log{false};

    void validate(const char* name) const {
        const std::string n = name;
        if (count == 0) throw InvalidInput("axis " + n + " is empty");
        if (!std::isfinite(start) || !std::isfinite(stop)) throw InvalidInput("axis " + n + " bounds must be finite");
        if (log && !(start > 0.0 && stop > 0.0)) throw InvalidInput("log axis " + n + " needs positive bounds");
        if (count > 1 && start == stop) throw InvalidInput("axis " + n + " has zero width");
    }

    double at(std::size_t i) const {
        if (count == 1) return start;
        const double u = static_cast<double>(i) / static_cast<double>(count - 1);
        if (i + 1 == count) return stop;
        return log ? start * std::pow(stop / start, u) : start + (stop - start) * u;
    }

    std::vector<double> values() const {
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = at(i);
        return v;
    }
};

struct SweepSpec {
    Axis t;
    Axis N;
    Axis h;
    ModelParams model;
    PhysicalConstants constants;
    double omega_gr{2.0 * std::numbers::pi * 100.0};
    double phase{0.0};
    unsigned threads{0}; // 0 selects hardware concurrency
};

struct SweepRow {
    double t{0.0};
    double N{0.0};
    double h{0.0};
    double sigma2{0.0};     // clipped at 1
    double sigma2_raw{0.0};
    double I{0.0};          // 4 N g phi_m
    double D{0.0};          // N + 4 N^2 g^2 c_m + 4 N^3 g^4 s_m^2
    bool detectable{false};
    double h_min{0.0};      // NaN when outside [1e-26, 1e-18]
};

inline constexpr double kHminLow = 1e-26;
inline constexpr double kHminHigh = 1e-18;

/// Smallest h with sigma^2(t, N, h) <= 1, by bisection in log h to 1e-3 relative.
inline double minimal_detectable_h(double t, double N, const ModelParams& p, double omega_gr, double phase,
                                   const PhysicalConstants& k) {
    auto sigma2 = [&](double h) { return detectability(t, N, p, {h, omega_gr, phase}, k).sigma2; };
    double lo = std::log(kHminLow), hi = std::log(kHminHigh);
    if (sigma2(std::exp(hi)) > 1.0) return std::numeric_limits<double>::quiet_NaN();
    if (sigma2(std::exp(lo)) <= 1.0) return std::numeric_limits<double>::quiet_NaN();
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        (sigma2(std::exp(mid)) > 1.0 ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

inline SweepRow sweep_point(double t, double N, double h, const SweepSpec& spec) {
    const GWSource src{h, spec.omega_gr, spec.phase};
    const auto a = envelope(t, spec.model, src, spec.constants);
    const double g = derive_couplings(spec.model, ForceSpec::zero(), spec.constants).g;
    const auto terms = noise_terms(a, N, g);
    SweepRow r;
    r.t = t;
    r.N = N;
    r.h = h;
    r.sigma2_raw = terms.total();
    r.sigma2 = std::min(r.sigma2_raw, 1.0);
    r.detectable = r.sigma2_raw <= 1.0;
    r.I = 4.0 * N * g * a.phi_m;
    r.D = N + 4.0 * N * N * g * g * a.c_m + 4.0 * N * N * N * std::pow(g, 4) * a.s_m * a.s_m;
    r.h_min = minimal_detectable_h(t, N, spec.model, spec.omega_gr, spec.phase, spec.constants);
    return r;
}

/// Dense grid, row-major over (t, N, h). Output order does not depend on the worker count.
inline std::vector<SweepRow> sweep_grid(const SweepSpec& spec) {
    spec.t.validate("t");
    spec.N.validate("N");
    spec.h.validate("h");
    spec.model.validate();
    spec.constants.validate();
    const auto ts = spec.t.values(), Ns = spec.N.values(), hs = spec.h.values();
    const std::size_t total = ts.size() * Ns.size() * hs.size();
    std::vector<SweepRow> rows(total);

    unsigned workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(workers);
    auto work = [&](unsigned w) {
        try {
            for (std::size_t i; (i = next.fetch_add(1)) < total;) {
                const std::size_t ih = i % hs.size(), iN = (i / hs.size()) % Ns.size(), it = i / (hs.size() * Ns.size());
                rows[i] = sweep_point(ts[it], Ns[iN], hs[ih], spec);
            }
        } catch (...) {
            failures[w] = std::current_exception();
            next = total;
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
    return rows;
}

} // namespace optomech
