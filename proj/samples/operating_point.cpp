// Picks a measurement duration, prints the photon-number window and laser power
// for a LIGO-type interferometer, then checks the analytic cavity state against a
// short master-equation run in natural units.

#include <cstdio>

#include "optomech/observables.hpp"
#include "optomech/sensitivity.hpp"
#include "optomech/validation.hpp"

using namespace optomech;

int main() {
    const auto ligo = ligo_defaults();
    const GWSource wave{1e-22};
    std::printf("%8s %12s %12s %12s %12s %12s\n", "t [s]", "N_min", "N_opt", "N_max", "P_min [W]", "P_max [W]");
    for (double t : {1.0, 10.0, 100.0, 1000.0}) {
        const auto b = operating_bounds(t, ligo.model, wave, ligo.constants);
        std::printf("%8.0f %12.3e %12.3e %12.3e %12.3e %12.3e\n", t, b.N_min, b.N_opt, b.N_max, b.P_min, b.P_max);
    }
    const auto b = operating_bounds(100.0, ligo.model, wave, ligo.constants);
    const auto at_opt = detectability(100.0, b.N_opt, ligo.model, wave, ligo.constants);
    std::printf("sigma^2 at N_opt, t = 100 s: %.4f (%s); maximum duration %.0f s\n", at_opt.sigma2,
                at_opt.detectable ? "detectable" : "not detectable", b.t_max);

    // Natural units: the analytic reduced radiation state against the oracle.
    const BenchmarkSetup bench;
    IntegratorConfig integ;
    integ.dt = recommended_dt(bench.dynamics(), bench.space);
    const auto report = compare_with_analytic({0.5, 1.0}, bench.dynamics(), bench.interferometer, bench.space, integ);
    for (const auto& r : report.rows)
        std::printf("t = %.1f  trace distance %.2e  <b^dagger b> %.8f (analytic %.8f)\n", r.t, r.trace_distance,
                    r.energy_oracle, r.energy_analytic);
    return 0;
}
