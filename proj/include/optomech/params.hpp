// params.hpp: physical parameters, unit systems and derived coupling constants

#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "optomech/error.hpp"

namespace optomech {

enum class UnitSystem { si, natural };

inline std::string to_string(UnitSystem u) { return u == UnitSystem::si ? "SI" : "natural"; }

struct PhysicalConstants {
    UnitSystem units{UnitSystem::si};
    double hbar{1.054571817e-34}; // J s
    double c_light{299792458.0};  // m / s

    static PhysicalConstants si() { return {}; }
    static PhysicalConstants natural() { return {UnitSystem::natural, 1.0, 1.0}; }

    void validate() const {
        if (!(hbar > 0.0) || !(c_light > 0.0))
            throw InvalidInput("hbar and c_light must be strictly positive");
    }
};

/// Cavity and mirror parameters. omega is the laser angular frequency, Omega the
/// mirror eigenfrequency, lambda the zero-temperature damping rate.
struct ModelParams {
    double omega{1.0};
    double Omega{1.0};
    double lambda{0.0};
    double mass{1.0};
    double length{1.0};

    void validate() const {
        if (!(omega > 0.0)) throw InvalidInput("omega must be > 0");
        if (!(Omega > 0.0)) throw InvalidInput("Omega must be > 0");
        if (!(mass > 0.0)) throw InvalidInput("mass must be > 0");
        if (!(length > 0.0)) throw InvalidInput("length must be > 0");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be >= 0");
    }
};

enum class ForceKind { zero, sinusoid };

/// Classical force on the mirror, F(t) = F_m sin(omega_gr t + phase).
struct ForceSpec {
    ForceKind kind{ForceKind::zero};
    double F_m{0.0};
    double omega_gr{1.0};
    double phase{0.0};

    static ForceSpec zero() { return {}; }

    static ForceSpec sinusoid(double F_m, double omega_gr, double phase = 0.0) {
        return {ForceKind::sinusoid, F_m, omega_gr, phase};
    }

    /// Tidal force of a wave with strain amplitude h on a mirror of mass m at arm length L.
    static ForceSpec from_strain(double h, const ModelParams& p, double omega_gr, double phase = 0.0) {
        return sinusoid(h * p.length * p.mass * omega_gr * omega_gr, omega_gr, phase);
    }

    void validate() const {
        if (kind == ForceKind::zero) {
            if (F_m != 0.0) throw InvalidInput("zero force must have F_m = 0");
            return;
        }
        if (!(omega_gr > 0.0)) throw InvalidInput("omega_gr must be > 0 for a sinusoidal force");
        if (!std::isfinite(F_m) || !std::isfinite(phase)) throw InvalidInput("force fields must be finite");
    }
};

struct DerivedCouplings {
    double g{0.0};   // radiation-pressure coupling, 1/s
    double f_m{0.0}; // reduced force amplitude, 1/s
};

inline DerivedCouplings derive_couplings(const ModelParams& p, const ForceSpec& f, const PhysicalConstants& k) {
    p.validate();
    f.validate();
    k.validate();
    DerivedCouplings d;
    d.g = (p.omega / p.length) * std::sqrt(2.0 * k.hbar / (p.mass * p.Omega));
    d.f_m = f.kind == ForceKind::zero ? 0.0 : f.F_m / std::sqrt(2.0 * p.mass * p.Omega * k.hbar);
    return d;
}

/// Reduced drive f(t) = amplitude sin(frequency t + phase) acting on b + b^dagger.
struct ReducedForce {
    double amplitude{0.0};
    double frequency{1.0};
    double phase{0.0};

    bool active() const { return amplitude != 0.0; }
    double operator()(double t) const { return amplitude * std::sin(frequency * t + phase); }
};

/// Rates that fully determine the dynamics once units are divided out. Everything
/// downstream of `params` works on this.
struct Dynamics {
    double omega{0.0};  // laser frequency (free phase only)
    double Omega{1.0};
    double lambda{0.0};
    double g{0.0};
    ReducedForce force{};

    static Dynamics from(const ModelParams& p, const ForceSpec& f, const PhysicalConstants& k) {
        auto d = derive_couplings(p, f, k);
        Dynamics dyn{p.omega, p.Omega, p.lambda, d.g, {}};
        if (f.kind == ForceKind::sinusoid) dyn.force = {d.f_m, f.omega_gr, f.phase};
        return dyn;
    }

    void validate() const {
        if (!(Omega > 0.0)) throw InvalidInput("Omega must be > 0");
        if (!(lambda >= 0.0)) throw InvalidInput("lambda must be >= 0");
        if (!std::isfinite(g)) throw InvalidInput("g must be finite");
        if (force.active() && !(force.frequency > 0.0)) throw InvalidInput("force frequency must be > 0");
    }
};

/// The interferometer of the LIGO-type estimate. The laser frequency is not quoted
/// exactly; 1.77e15 rad/s (1064 nm) reproduces the quoted coupling.
struct LigoSetup {
    ModelParams model;
    ForceSpec force;
    PhysicalConstants constants;
};

inline constexpr double kLigoLaserOmega = 1.77e15;

inline LigoSetup ligo_defaults(double h = 1e-22) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    ModelParams m{kLigoLaserOmega, two_pi, 1e-5, 10.0, 4e3};
    return {m, ForceSpec::from_strain(h, m, two_pi * 100.0, 0.0), PhysicalConstants::si()};
}

} // namespace optomech
