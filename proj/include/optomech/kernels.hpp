// kernels.hpp: time kernels phi_t, c_t, s_t, energy coefficients and beta^+_n
//
// Every closed-form observable is a function of the three double integrals
//
//   phi_t = int_0^t dtau int_0^tau ds f(s) e^{lambda/2 (s-tau)} sin Omega(s-tau)
//   c_t   = int_0^t dtau int_0^tau ds      e^{lambda/2 (s-tau)} cos Omega(s-tau)
//   s_t   = int_0^t dtau int_0^tau ds      e^{lambda/2 (s-tau)} sin Omega(s-tau)
//
// and of the one-dimensional transforms int_0^t (g n + f) e^{mu tau} dtau with
// mu = lambda/2 + i Omega. Each quantity has a closed-form path and an independent
// quadrature path.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "optomech/params.hpp"
#include "optomech/quadrature.hpp"

namespace optomech {

using cplx = std::complex<double>;

enum class KernelMethod { closed_form, quadrature, leading_order };

struct KernelSet {
    double t{0.0};
    double phi{0.0}; // force kernel phi_t
    double c{0.0};   // cosine kernel c_t
    double s{0.0};   // sine kernel s_t
};

struct EnergyCoefficients {
    double t{0.0};
    double c2{0.0};
    double c1{0.0};
    double c0{0.0};
    double Phi{0.0}; // auxiliary phase, tan Phi = lambda / (2 Omega)
};

struct BetaPlus {
    long n{0};
    double t{0.0};
    cplx value{};
};

namespace detail {

inline constexpr cplx I{0.0, 1.0};

inline cplx rate(const Dynamics& d) { return {0.5 * d.lambda, d.Omega}; }

// int_0^t e^{a tau} dtau, stable for small |a| t.
inline cplx exp_integral(cplx a, double t) {
    const cplx z = a * t;
    if (std::abs(z) < 0.5) {
        cplx term = t, sum = t;
        for (int k = 1; k < 24; ++k) {
            term *= z / static_cast<double>(k + 1);
            sum += term;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / a;
}

// int_0^t tau^k e^{a tau} dtau.
inline cplx moment(int k, cplx a, double t) {
    const double at = std::abs(a) * t;
    if (at < static_cast<double>(k) + 8.0) {
        // sum_j a^j t^{j+k+1} / (j! (j+k+1))
        cplx sum = 0.0;
        cplx power = std::pow(t, k + 1); // a^j t^{j+k+1} / j!
        for (int j = 0; j < 200; ++j) {
            const cplx term = power / static_cast<double>(j + k + 1);
            sum += term;
            if (j > at && std::abs(term) < 1e-18 * std::abs(sum)) break;
            power *= a * t / static_cast<double>(j + 1);
        }
        return sum;
    }
    cplx m = (std::exp(a * t) - 1.0) / a;
    for (int j = 1; j <= k; ++j) m = (std::pow(t, j) * std::exp(a * t) - static_cast<double>(j) * m) / a;
    return m;
}

// int_0^t dtau e^{a tau} int_0^tau ds e^{kappa s}.
inline cplx nested_exp_integral(cplx a, cplx kappa, double t) {
    if (std::abs(kappa) * t < 1e-2) {
        // (e^{kappa tau} - 1)/kappa = sum_j kappa^j tau^{j+1} / (j+1)!
        cplx sum = 0.0;
        cplx coeff = 1.0;
        for (int j = 0; j < 8; ++j) {
            coeff = j == 0 ? cplx{1.0} : coeff * kappa / static_cast<double>(j + 1);
            sum += coeff * moment(j + 1, a, t);
        }
        return sum;
    }
    return (exp_integral(a + kappa, t) - exp_integral(a, t)) / kappa;
}

// K_t = c_t + i s_t = int_0^t dtau int_0^tau ds e^{mu (s - tau)}.
inline cplx kernel_series(cplx mu, double t) {
    // sum_{k>=2} (-mu)^{k-2} t^k / k!
    cplx term = 0.5 * t * t, sum = term;
    for (int k = 3; k < 30; ++k) {
        term *= -mu * t / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

// int_0^t f(tau) e^{mu tau} dtau for the sinusoidal drive.
inline cplx force_transform(const Dynamics& d, double t) {
    const auto& f = d.force;
    if (!f.active()) return 0.0;
    const cplx mu = rate(d);
    const cplx up = std::exp(I * f.phase) * exp_integral(mu + I * f.frequency, t);
    const cplx down = std::exp(-I * f.phase) * exp_integral(mu - I * f.frequency, t);
    return f.amplitude * (up - down) / (2.0 * I);
}

// phi_t as Im int_0^t dtau e^{-mu tau} int_0^tau f(s) e^{mu s} ds, four exponentials.
inline double force_kernel_exact(const Dynamics& d, double t) {
    const auto& f = d.force;
    if (!f.active() || t == 0.0) return 0.0;
    const cplx mu = rate(d);
    const cplx up = std::exp(I * f.phase) * nested_exp_integral(-mu, mu + I * f.frequency, t);
    const cplx down = std::exp(-I * f.phase) * nested_exp_integral(-mu, mu - I * f.frequency, t);
    return std::imag(f.amplitude * (up - down) / (2.0 * I));
}

inline std::size_t oscillation_panels(double t, double frequency) {
    return 1 + 2 * static_cast<std::size_t>(t * frequency / (2.0 * std::numbers::pi));
}

template <typename Integrand>
double nested_quadrature(Integrand&& h, double t, double frequency, const quad::Tolerance& tol) {
    const auto panels = oscillation_panels(t, frequency);
    auto outer = [&](double tau) {
        if (tau == 0.0) return 0.0;
        auto inner = [&](double s) { return h(s, tau); };
        return quad::integrate(inner, 0.0, tau, tol, oscillation_panels(tau, frequency)).value;
    };
    return quad::integrate(outer, 0.0, t, tol, panels).value;
}

} // namespace detail

inline void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time must be finite and >= 0");
}

/// phi_t, c_t, s_t. The closed form evaluates the printed c_t/s_t expressions (with a
/// power series below |mu| t = 0.5, where they cancel catastrophically) and the exact
/// damped sinusoid result for phi_t. `leading_order` keeps only the lambda -> 0,
/// Omega << omega_gr terms.
inline KernelSet kernel_set(double t, const Dynamics& d, KernelMethod method = KernelMethod::closed_form,
                            const quad::Tolerance& tol = {}) {
    check_time(t);
    d.validate();
    KernelSet k{t, 0.0, 0.0, 0.0};
    if (t == 0.0) return k;

    const double W = d.Omega, lam = d.lambda;
    switch (method) {
    case KernelMethod::closed_form: {
        const cplx mu = detail::rate(d);
        const double mod2 = std::norm(mu);
        if (std::abs(mu) * t < 0.5) {
            const cplx K = detail::kernel_series(mu, t);
            k.c = K.real();
            k.s = K.imag();
        } else {
            const double phase = std::atan2(lam * W, 0.25 * lam * lam - W * W);
            const double decay = std::exp(-0.5 * lam * t);
            k.c = (-0.25 * lam * lam + lam * lam * lam * t / 8.0 + W * W + 0.5 * lam * t * W * W) / (mod2 * mod2) +
                  decay * std::cos(W * t + phase) / mod2;
            k.s = -W * (0.25 * lam * lam * t + t * W * W - lam) / (mod2 * mod2) -
                  decay * std::sin(W * t + phase) / mod2;
        }
        k.phi = detail::force_kernel_exact(d, t);
        break;
    }
    case KernelMethod::quadrature: {
        k.c = detail::nested_quadrature(
            [&](double s, double tau) { return std::exp(0.5 * lam * (s - tau)) * std::cos(W * (s - tau)); }, t, W,
            tol);
        k.s = detail::nested_quadrature(
            [&](double s, double tau) { return std::exp(0.5 * lam * (s - tau)) * std::sin(W * (s - tau)); }, t, W,
            tol);
        if (d.force.active()) {
            k.phi = detail::nested_quadrature(
                [&](double s, double tau) {
                    return d.force(s) * std::exp(0.5 * lam * (s - tau)) * std::sin(W * (s - tau));
                },
                t, W + d.force.frequency, tol);
        }
        break;
    }
    case KernelMethod::leading_order: {
        k.c = (1.0 - std::cos(W * t)) / (W * W);
        k.s = std::sin(W * t) / (W * W) - t / W;
        if (d.force.active()) {
            const auto& f = d.force;
            k.phi = f.amplitude * (std::cos(W * t) - 1.0) * std::cos(f.phase) / (W * f.frequency) -
                    f.amplitude * std::sin(W * t) * std::sin(f.phase) / (f.frequency * f.frequency);
        }
        break;
    }
    }
    return k;
}

/// Coefficients of <b^dagger b> = g^2 (N^2 + N) c2 + g N c1 + c0.
inline EnergyCoefficients energy_coeffs(double t, const Dynamics& d, KernelMethod method = KernelMethod::closed_form,
                                        const quad::Tolerance& tol = {}) {
    check_time(t);
    d.validate();
    const double W = d.Omega, lam = d.lambda;
    const cplx mu = detail::rate(d);
    EnergyCoefficients e{t, 0.0, 0.0, 0.0, std::atan2(0.5 * lam, W)};
    if (t == 0.0) return e;

    const double decay = std::exp(-0.5 * lam * t);
    if (method == KernelMethod::quadrature) {
        const auto panels = detail::oscillation_panels(t, W + d.force.frequency);
        const cplx B = quad::integrate([&](double tau) { return std::exp(mu * tau); }, 0.0, t, tol, panels).value;
        cplx F = 0.0;
        if (d.force.active())
            F = quad::integrate([&](double tau) { return d.force(tau) * std::exp(mu * tau); }, 0.0, t, tol, panels)
                    .value;
        e.c2 = decay * decay * std::norm(B);
        e.c1 = 2.0 * decay * decay * std::real(B * std::conj(F));
        e.c0 = decay * decay * std::norm(F);
        return e;
    }

    const cplx F = detail::force_transform(d, t);
    e.c0 = decay * decay * std::norm(F);
    if (std::abs(mu) * t < 0.5) {
        const cplx B = detail::exp_integral(mu, t);
        e.c2 = decay * decay * std::norm(B);
        e.c1 = 2.0 * decay * decay * std::real(B * std::conj(F));
        return e;
    }
    const double mod = std::abs(mu);
    e.c2 = (1.0 - 2.0 * decay * std::cos(W * t) + decay * decay) / (mod * mod);
    // int_0^t f(tau) e^{lambda/2 (tau - t)} {cos, sin} Omega tau dtau
    const double cos_part = decay * F.real();
    const double sin_part = decay * F.imag();
    const double Phi = e.Phi;
    e.c1 = 2.0 * ((std::sin(W * t + Phi) - std::sin(Phi) * decay) / mod * cos_part -
                  (std::cos(W * t + Phi) - std::cos(Phi) * decay) / mod * sin_part);
    return e;
}

/// beta^+_n(t) = int_0^t (g n + f(tau)) e^{(i Omega + lambda/2) tau} dtau.
inline BetaPlus beta_plus(long n, double t, const Dynamics& d) {
    check_time(t);
    if (n < 0) throw InvalidInput("photon number must be >= 0");
    d.validate();
    const cplx mu = detail::rate(d);
    return {n, t, d.g * static_cast<double>(n) * detail::exp_integral(mu, t) + detail::force_transform(d, t)};
}

} // namespace optomech
