// io.hpp: JSON parameter files and number formatting for tabular output
//
// Parameter file:
//   {
//     "units": "SI" | "natural",
//     "omega": ..., "Omega": ..., "lambda": ..., "mass": ..., "length": ...,
//     "force": {"kind": "zero" | "sinusoid", "F_m" | "h": ..., "omega_gr": ..., "phase": ...},
//     "interferometer": {"N": ..., "sigma_r": ..., "layout": "general" | "twin_cavity", "z_phase": ...},
//     "reflections": ...
//   }
// "interferometer" and "reflections" are optional; unknown keys are rejected.

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "optomech/observables.hpp"
#include "optomech/params.hpp"

namespace optomech {

using ojson = nlohmann::ordered_json;

struct ParamsFile {
    ModelParams model;
    ForceSpec force;
    PhysicalConstants constants;
    std::optional<double> h; // strain, when the force was given through h
    InterferometerConfig interferometer{1e10, 1.0, Layout::twin_cavity, 0.0};
    double reflections{1000.0};

    /// Strain amplitude of the force: the given h, else F_m / (L m omega_gr^2).
    double strain() const {
        if (h) return *h;
        if (force.kind == ForceKind::zero) return 0.0;
        return force.F_m / (model.length * model.mass * force.omega_gr * force.omega_gr);
    }

    Dynamics dynamics() const { return Dynamics::from(model, force, constants); }

    void validate() const {
        model.validate();
        force.validate();
        constants.validate();
        interferometer.validate();
        if (!(reflections > 0.0) || !std::isfinite(reflections)) throw InvalidInput("reflections must be finite and > 0");
    }
};

/// LIGO-type defaults with a strain of 1e-22 driving the mirror.
inline ParamsFile default_params_file() {
    const auto ligo = ligo_defaults(1e-22);
    ParamsFile p;
    p.model = ligo.model;
    p.force = ligo.force;
    p.constants = ligo.constants;
    p.h = 1e-22;
    return p;
}

namespace detail {

inline void reject_unknown(const ojson& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw InvalidInput("unknown key '" + key + "' in " + where);
}

inline double number_at(const ojson& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw InvalidInput(where + "." + key + " must be a number");
    return v.get<double>();
}

inline double number_or(const ojson& obj, const std::string& key, double fallback, const std::string& where) {
    return obj.contains(key) ? number_at(obj, key, where) : fallback;
}

inline double required_number(const ojson& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw InvalidInput("missing required key '" + key + "' in " + where);
    return number_at(obj, key, where);
}

} // namespace detail

inline ParamsFile parse_params(const ojson& js) {
    using namespace detail;
    if (!js.is_object()) throw InvalidInput("parameter file must hold a JSON object");
    reject_unknown(js, {"units", "omega", "Omega", "lambda", "mass", "length", "force", "interferometer", "reflections"},
                   "params");
    ParamsFile p;
    const std::string units = js.value("units", std::string("SI"));
    if (units == "SI") p.constants = PhysicalConstants::si();
    else if (units == "natural") p.constants = PhysicalConstants::natural();
    else throw InvalidInput("units must be \"SI\" or \"natural\"");

    p.model.omega = required_number(js, "omega", "params");
    p.model.Omega = required_number(js, "Omega", "params");
    p.model.lambda = number_or(js, "lambda", 0.0, "params");
    p.model.mass = required_number(js, "mass", "params");
    p.model.length = required_number(js, "length", "params");
    p.model.validate();

    p.force = ForceSpec::zero();
    if (js.contains("force")) {
        const auto& f = js.at("force");
        if (!f.is_object()) throw InvalidInput("params.force must be an object");
        reject_unknown(f, {"kind", "F_m", "h", "omega_gr", "phase"}, "params.force");
        const std::string kind = f.value("kind", std::string("sinusoid"));
        if (kind == "zero") {
            if (f.contains("F_m") || f.contains("h")) throw InvalidInput("a zero force takes neither F_m nor h");
        } else if (kind == "sinusoid") {
            if (f.contains("F_m") == f.contains("h")) throw InvalidInput("a sinusoidal force needs exactly one of F_m or h");
            const double w = required_number(f, "omega_gr", "params.force");
            const double phase = number_or(f, "phase", 0.0, "params.force");
            if (f.contains("h")) {
                p.h = number_at(f, "h", "params.force");
                if (!(*p.h > 0.0)) throw InvalidInput("params.force.h must be > 0");
                p.force = ForceSpec::from_strain(*p.h, p.model, w, phase);
            } else {
                p.force = ForceSpec::sinusoid(number_at(f, "F_m", "params.force"), w, phase);
            }
        } else {
            throw InvalidInput("params.force.kind must be \"zero\" or \"sinusoid\"");
        }
    }

    if (js.contains("interferometer")) {
        const auto& c = js.at("interferometer");
        if (!c.is_object()) throw InvalidInput("params.interferometer must be an object");
        reject_unknown(c, {"N", "sigma_r", "layout", "z_phase"}, "params.interferometer");
        auto& cfg = p.interferometer;
        cfg.N = number_or(c, "N", cfg.N, "params.interferometer");
        cfg.sigma_r = number_or(c, "sigma_r", cfg.sigma_r, "params.interferometer");
        cfg.z_phase = number_or(c, "z_phase", cfg.z_phase, "params.interferometer");
        const std::string layout = c.value("layout", to_string(cfg.layout));
        if (layout == "general") cfg.layout = Layout::general;
        else if (layout == "twin_cavity") cfg.layout = Layout::twin_cavity;
        else throw InvalidInput("params.interferometer.layout must be \"general\" or \"twin_cavity\"");
    }
    p.reflections = number_or(js, "reflections", p.reflections, "params");
    p.validate();
    return p;
}

inline ParamsFile load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open parameter file '" + path + "'");
    ojson js;
    try {
        js = ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput("parameter file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_params(js);
}

inline ojson to_json(const ParamsFile& p) {
    ojson force;
    if (p.force.kind == ForceKind::zero) {
        force = {{"kind", "zero"}};
    } else {
        force = {{"kind", "sinusoid"}, {"F_m", p.force.F_m}};
        if (p.h) force["h"] = *p.h;
        force["omega_gr"] = p.force.omega_gr;
        force["phase"] = p.force.phase;
    }
    const auto c = derive_couplings(p.model, p.force, p.constants);
    return {{"units", to_string(p.constants.units)},
            {"omega", p.model.omega},
            {"Omega", p.model.Omega},
            {"lambda", p.model.lambda},
            {"mass", p.model.mass},
            {"length", p.model.length},
            {"force", force},
            {"interferometer",
             {{"N", p.interferometer.N},
              {"sigma_r", p.interferometer.sigma_r},
              {"layout", to_string(p.interferometer.layout)},
              {"z_phase", p.interferometer.z_phase}}},
            {"reflections", p.reflections},
            {"derived", {{"g", c.g}, {"f_m", c.f_m}}}};
}

/// Unit labels echoed in every JSON artifact.
inline ojson units_block(UnitSystem u) {
    if (u == UnitSystem::natural)
        return {{"system", "natural"},
                {"hbar", 1},
                {"time", "1/Omega-scaled natural units"},
                {"rate", "natural"},
                {"power", "natural"},
                {"photon_number", "dimensionless"},
                {"strain", "dimensionless"}};
    return {{"system", "SI"},
            {"time", "s"},
            {"rate", "1/s"},
            {"angular_frequency", "rad/s"},
            {"power", "W"},
            {"mass", "kg"},
            {"length", "m"},
            {"photon_number", "dimensionless"},
            {"strain", "dimensionless"}};
}

/// Shortest decimal string that parses back to the same double.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

} // namespace optomech
