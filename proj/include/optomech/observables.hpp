// observables.hpp: cavity density matrix, mirror energy and balanced-detector statistics

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optomech/kernels.hpp"

namespace optomech {

enum class Layout {
    general,    // reference arm carries a free coherent beam
    twin_cavity // both arms are cavities with movable mirrors, opposite force phase
};

inline std::string to_string(Layout l) { return l == Layout::general ? "general" : "twin_cavity"; }

struct InterferometerConfig {
    double N{0.0};       // mean photon number of the input beam, |z|^2
    double sigma_r{1.0}; // first-splitter reflectivity
    Layout layout{Layout::general};
    double z_phase{0.0}; // phase of z

    static InterferometerConfig twin(double N, double z_phase = 0.0) {
        return {N, 1.0 / std::numbers::sqrt2, Layout::twin_cavity, z_phase};
    }

    double reflectivity() const { return layout == Layout::twin_cavity ? 1.0 / std::numbers::sqrt2 : sigma_r; }
    cplx z() const { return std::polar(std::sqrt(N), z_phase); }

    void validate() const {
        if (!(N >= 0.0) || !std::isfinite(N)) throw InvalidInput("N must be finite and >= 0");
        if (!(sigma_r >= 0.0 && sigma_r <= 1.0)) throw InvalidInput("sigma_r must lie in [0, 1]");
    }
};

struct CavityMatrixElement {
    long n{0};
    long m{0};
    cplx value{};
};

/// Noise terms of the relative fluctuation in the small-coupling regime.
struct NoiseBreakdown {
    double shot{0.0};
    double sql{0.0};
    double backaction{0.0};
};

struct ApproxValidity {
    double g_phi{0.0};          // g |phi_t|
    double g2_c{0.0};           // g^2 c_t
    double g2_s{0.0};           // g^2 |s_t|
    double backaction_param{0}; // N g^4 s_t^2
    bool small_parameters{true};
    bool warning{false};        // set when N g^4 s_t^2 >= 1
};

struct SignalStats {
    double t{0.0};
    double I{0.0};
    double D{0.0};
    double sigma2{0.0};
    bool sigma2_infinite{false};
    std::optional<NoiseBreakdown> breakdown;
    std::optional<ApproxValidity> validity;
    double tail{0.0}; // truncation tail bound, series evaluation only
};

namespace detail {

inline void finish_sigma2(SignalStats& s) {
    if (s.I != 0.0) {
        s.sigma2 = s.D / (s.I * s.I);
    } else {
        s.sigma2 = std::numeric_limits<double>::infinity();
        s.sigma2_infinite = true;
    }
}

// One arm's coherent state |alpha> evolved with radiation pressure g and drive
// force_sign * f, as a Fock-basis element <n| rho |m>.
struct ArmState {
    cplx alpha{};
    double g{0.0};
    double force_sign{1.0};
};

inline cplx arm_element(long n, long m, const ArmState& arm, const KernelSet& k, double omega) {
    const double pop = std::norm(arm.alpha);
    if (pop == 0.0) return (n == 0 && m == 0) ? cplx{1.0} : cplx{};
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    const double log_mag =
        -pop + 0.5 * (nn + mm) * std::log(pop) - 0.5 * (std::lgamma(nn + 1.0) + std::lgamma(mm + 1.0));
    const double d = mm - nn;
    const double g2 = arm.g * arm.g;
    const double re = log_mag - g2 * d * d * k.c;
    const double im = (nn - mm) * std::arg(arm.alpha) + omega * d * k.t + g2 * d * (nn + mm) * k.s +
                      2.0 * arm.g * d * arm.force_sign * k.phi;
    return std::exp(cplx{re, im});
}

// Poisson tail beyond n_cut, sum_{k > n_cut} e^{-N} N^k / k!.
inline double poisson_tail(double N, long n_cut) {
    if (N == 0.0) return 0.0;
    const double k = static_cast<double>(n_cut + 1);
    const double head = std::exp(-N + k * std::log(N) - std::lgamma(k + 1.0));
    const double ratio = N / (k + 1.0);
    if (ratio >= 1.0) return 1.0;
    return head / (1.0 - ratio);
}

struct ArmMoments {
    cplx a{};  // <a>
    cplx a2{}; // <a^2>
    double n{0.0};
    double trace{0.0};
};

inline ArmMoments arm_moments(const ArmState& arm, const KernelSet& k, double omega, long n_cut) {
    ArmMoments mom;
    for (long n = 0; n <= n_cut; ++n) {
        const double nn = static_cast<double>(n);
        const double diag = arm_element(n, n, arm, k, omega).real();
        mom.trace += diag;
        mom.n += nn * diag;
        if (n + 1 <= n_cut) mom.a += std::sqrt(nn + 1.0) * arm_element(n + 1, n, arm, k, omega);
        if (n + 2 <= n_cut) mom.a2 += std::sqrt((nn + 1.0) * (nn + 2.0)) * arm_element(n + 2, n, arm, k, omega);
    }
    return mom;
}

inline std::pair<ArmState, ArmState> arms(const Dynamics& d, const InterferometerConfig& cfg) {
    const cplx z = cfg.z();
    const double sigma = cfg.reflectivity();
    const cplx i{0.0, 1.0};
    if (cfg.layout == Layout::twin_cavity) return {{i * sigma * z, d.g, 1.0}, {sigma * z, d.g, -1.0}};
    return {{i * sigma * z, d.g, 1.0}, {std::sqrt(1.0 - sigma * sigma) * z, 0.0, 0.0}};
}

} // namespace detail

/// <n| rho_1(t) |m> for the cavity arm that starts in |i sigma z>.
inline CavityMatrixElement rho1_element(long n, long m, double t, const Dynamics& d, const InterferometerConfig& cfg) {
    if (n < 0 || m < 0) throw InvalidInput("Fock indices must be >= 0");
    cfg.validate();
    const auto k = kernel_set(t, d);
    const auto [arm, unused] = detail::arms(d, cfg);
    return {n, m, detail::arm_element(n, m, arm, k, d.omega)};
}

/// Truncated cavity density matrix, indices 0..cut.
inline Eigen::MatrixXcd rho1_matrix(long cut, double t, const Dynamics& d, const InterferometerConfig& cfg) {
    cfg.validate();
    const auto k = kernel_set(t, d);
    const auto [arm, unused] = detail::arms(d, cfg);
    Eigen::MatrixXcd rho(cut + 1, cut + 1);
    for (long n = 0; n <= cut; ++n)
        for (long m = 0; m <= cut; ++m) rho(n, m) = detail::arm_element(n, m, arm, k, d.omega);
    return rho;
}

/// Mean mirror occupation <b^dagger b> for a cavity holding a coherent state with N photons.
inline double mean_energy(double t, double N, const Dynamics& d) {
    if (!(N >= 0.0)) throw InvalidInput("N must be >= 0");
    const auto e = energy_coeffs(t, d);
    return d.g * d.g * (N * N + N) * e.c2 + d.g * N * e.c1 + e.c0;
}

/// Force-free long-time limit g^2 N^2 / (Omega^2 + lambda^2 / 4).
inline double mean_energy_limit(double N, const Dynamics& d) {
    return d.g * d.g * N * N / (d.Omega * d.Omega + 0.25 * d.lambda * d.lambda);
}

/// Exact detector mean and variance.
inline SignalStats signal_closed_form(double t, const Dynamics& d, const InterferometerConfig& cfg) {
    cfg.validate();
    const auto k = kernel_set(t, d);
    const double N = cfg.N, g = d.g, g2 = g * g;
    SignalStats out;
    out.t = t;
    if (cfg.layout == Layout::twin_cavity) {
        const double sin1 = std::sin(g2 * k.s), sin2 = std::sin(2.0 * g2 * k.s);
        out.I = N * std::exp(-2.0 * g2 * k.c - 2.0 * N * sin1 * sin1) * std::sin(4.0 * g * k.phi);
        out.D = N + 0.5 * N * N -
                0.5 * N * N * std::exp(-8.0 * g2 * k.c - 2.0 * N * sin2 * sin2) * std::cos(8.0 * g * k.phi) -
                out.I * out.I;
    } else {
        const double sg = cfg.sigma_r, sg2 = sg * sg;
        const double sin1 = std::sin(g2 * k.s), sin2 = std::sin(2.0 * g2 * k.s);
        out.I = 2.0 * N * sg * std::sqrt(1.0 - sg2) * std::exp(-g2 * k.c - 2.0 * N * sg2 * sin1 * sin1) *
                std::sin(g * (2.0 * k.phi + g * k.s) + N * sg2 * std::sin(2.0 * g2 * k.s));
        const double mix = 2.0 * N * N * sg2 * (1.0 - sg2);
        out.D = N + mix -
                mix * std::exp(-4.0 * g2 * k.c - 2.0 * N * sg2 * sin2 * sin2) *
                    std::cos(4.0 * g * (k.phi + g * k.s) + N * sg2 * std::sin(4.0 * g2 * k.s)) -
                out.I * out.I;
    }
    detail::finish_sigma2(out);
    return out;
}

/// Twin-cavity statistics to leading order in g phi_t, g^2 c_t, g^2 s_t.
inline SignalStats signal_approx_twin(double t, const Dynamics& d, const InterferometerConfig& cfg) {
    cfg.validate();
    if (cfg.layout != Layout::twin_cavity) throw InvalidInput("signal_approx_twin requires the twin_cavity layout");
    const auto k = kernel_set(t, d);
    const double N = cfg.N, g = d.g, g2 = g * g;
    SignalStats out;
    out.t = t;
    out.I = 4.0 * N * g * k.phi;
    NoiseBreakdown noise{N, 4.0 * N * N * g2 * k.c, 4.0 * N * N * N * g2 * g2 * k.s * k.s};
    out.D = noise.shot + noise.sql + noise.backaction;
    out.breakdown = noise;

    ApproxValidity v;
    v.g_phi = std::abs(g * k.phi);
    v.g2_c = g2 * k.c;
    v.g2_s = g2 * std::abs(k.s);
    v.backaction_param = N * g2 * g2 * k.s * k.s;
    v.small_parameters = v.g_phi < 0.1 && v.g2_c < 0.1 && v.g2_s < 0.1;
    v.warning = v.backaction_param >= 1.0;
    out.validity = v;
    detail::finish_sigma2(out);
    return out;
}

/// Truncation index whose Poisson tail stays below 1e-12 for N up to 1e4.
/// Largest Fock index the series will sum to; beyond this use the closed form.
inline constexpr long kMaxSeriesCut = 20'000'000;

inline long default_series_cut(double N) {
    return static_cast<long>(std::ceil(N + 12.0 * std::sqrt(N) + 20.0));
}

/// Detector statistics from truncated Fock sums over both arms' matrix elements.
/// n_cut <= 0 selects default_series_cut(N).
inline SignalStats signal_series(double t, const Dynamics& d, const InterferometerConfig& cfg, long n_cut = 0) {
    cfg.validate();
    const auto k = kernel_set(t, d);
    const auto [arm1, arm2] = detail::arms(d, cfg);
    if (n_cut <= 0) n_cut = default_series_cut(cfg.N);
    if (n_cut > kMaxSeriesCut)
        throw NumericalFailure("series cut beyond the supported range; use the closed form", static_cast<double>(n_cut));
    const double tail = detail::poisson_tail(std::norm(arm1.alpha), n_cut) + detail::poisson_tail(std::norm(arm2.alpha), n_cut);
    if (tail > 1e-9) throw NumericalFailure("series truncation tail exceeds 1e-9; raise n_cut", tail);

    const auto m1 = detail::arm_moments(arm1, k, d.omega, n_cut);
    const auto m2 = detail::arm_moments(arm2, k, d.omega, n_cut);
    SignalStats out;
    out.t = t;
    out.tail = tail;
    // I = <a1^dagger><a2> + <a1><a2^dagger>
    out.I = 2.0 * std::real(std::conj(m1.a) * m2.a);
    const double second = 2.0 * std::real(std::conj(m1.a2) * m2.a2) + 2.0 * m1.n * m2.n + m1.n + m2.n;
    out.D = second - out.I * out.I;
    detail::finish_sigma2(out);
    return out;
}

struct Fluctuation {
    double t{0.0};
    double exact{0.0};       // D / I^2 from the closed form
    bool exact_infinite{false};
    double approx{0.0};      // shot + sql + backaction
    NoiseBreakdown terms;
    bool undetectable{false}; // phi_t == 0: no signal to first order
};

/// Square of the relative fluctuation of the twin-cavity signal.
inline Fluctuation relative_fluctuation(double t, double N, const Dynamics& d) {
    const auto cfg = InterferometerConfig::twin(N);
    cfg.validate();
    const auto k = kernel_set(t, d);
    Fluctuation out;
    out.t = t;
    const auto exact = signal_closed_form(t, d, cfg);
    out.exact = exact.sigma2;
    out.exact_infinite = exact.sigma2_infinite;
    if (k.phi == 0.0 || N == 0.0 || d.g == 0.0) {
        const double inf = std::numeric_limits<double>::infinity();
        out.undetectable = true;
        out.approx = inf;
        out.terms = {inf, k.phi == 0.0 ? inf : k.c / (4.0 * k.phi * k.phi), inf};
        return out;
    }
    const double g2 = d.g * d.g, phi2 = k.phi * k.phi;
    out.terms.shot = 1.0 / (16.0 * g2 * phi2 * N);
    out.terms.sql = k.c / (4.0 * phi2);
    out.terms.backaction = g2 * k.s * k.s * N / (4.0 * phi2);
    out.approx = out.terms.shot + out.terms.sql + out.terms.backaction;
    return out;
}

} // namespace optomech
