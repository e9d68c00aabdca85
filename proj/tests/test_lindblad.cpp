#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "optomech/lindblad.hpp"
#include "optomech/observables.hpp"
#include "optomech/stochastic.hpp"
#include "optomech/validation.hpp"

using namespace optomech;
using cd = std::complex<double>;

namespace {

Dynamics driven(double g = 0.2, double f_m = 0.1, double lambda = 0.1, double omega = 0.0) {
    return Dynamics{omega, 1.0, lambda, g, {f_m, 3.0, 0.0}};
}

// Full-space operators built directly, then L(rho) = -i[H, rho] + lambda (b rho b+ - {b+b, rho}/2).
Matrix direct_generator(const Matrix& rho, double t, const Dynamics& d, const TruncatedSpace& s, bool lab) {
    const int P = s.photon_levels(), K = s.osc_levels(), D = s.dim();
    Matrix a = Matrix::Zero(D, D), b = Matrix::Zero(D, D);
    for (int n = 0; n < P; ++n)
        for (int k = 0; k < K; ++k) {
            if (n > 0) a(s.index(n - 1, k), s.index(n, k)) = std::sqrt(double(n));
            if (k > 0) b(s.index(n, k - 1), s.index(n, k)) = std::sqrt(double(k));
        }
    const Matrix na = a.adjoint() * a, nb = b.adjoint() * b;
    Matrix H = d.Omega * nb + (d.g * na + d.force(t) * Matrix::Identity(D, D)) * (b + b.adjoint());
    if (lab) H += d.omega * na;
    const cd i{0.0, 1.0};
    return -i * (H * rho - rho * H) + d.lambda * (b * rho * b.adjoint() - 0.5 * (nb * rho + rho * nb));
}

Matrix random_density(int D, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    Matrix A(D, D);
    for (int r = 0; r < D; ++r)
        for (int c = 0; c < D; ++c) A(r, c) = cd(nd(gen), nd(gen));
    Matrix rho = A * A.adjoint();
    return rho / rho.trace().real();
}

Vector row_major_vec(const Matrix& m) {
    Vector v(m.size());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
    return v;
}

// <b>_t for photon Fock state n from the vacuum: d<b>/dt = -mu <b> - i (g n + f(t)).
cd driven_mean_b(double t, int n, const Dynamics& d, int panels = 4000) {
    const cd mu{0.5 * d.lambda, d.Omega};
    const double h = t / panels;
    auto integrand = [&](double s) { return std::exp(-mu * (t - s)) * (d.g * n + d.force(s)); };
    cd sum = integrand(0.0) + integrand(t);
    for (int j = 1; j < panels; ++j) sum += (j % 2 ? 4.0 : 2.0) * integrand(j * h);
    return cd{0.0, -1.0} * sum * h / 3.0;
}

IntegratorConfig config(double dt, double t_final, double leakage_tol = 1e-8) {
    IntegratorConfig c;
    c.dt = dt;
    c.t_final = t_final;
    c.leakage_tol = leakage_tol;
    return c;
}

} // namespace

TEST(Generator, MatchesDirectCommutatorForm) {
    const TruncatedSpace s{3, 5};
    const auto d = driven(0.3, 0.2, 0.15, 0.7);
    const Matrix rho = random_density(s.dim(), 3);
    for (bool lab : {false, true}) {
        const Frame frame = lab ? Frame::lab : Frame::rotating;
        const Matrix ref = direct_generator(rho, 0.4, d, s, lab);
        EXPECT_LT((apply_generator({s, rho}, 0.4, d, frame) - ref).cwiseAbs().maxCoeff(), 1e-13);
        const Vector dense = dense_generator(0.4, d, s, frame) * row_major_vec(rho);
        EXPECT_LT((dense - row_major_vec(ref)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Generator, IsTraceless) {
    const TruncatedSpace s{4, 9};
    const Matrix rho = random_density(s.dim(), 11);
    const Matrix L = apply_generator({s, rho}, 1.3, driven(0.5, 0.3, 0.4));
    EXPECT_LT(std::abs(L.trace()), 1e-13);
}

TEST(Generator, DenseReferenceRejectsLargeSpaces) {
    EXPECT_THROW(dense_generator(0.0, driven(), TruncatedSpace{10, 20}), InvalidInput);
}

TEST(Master, GroundStateIsStationaryWithoutCoupling) {
    const TruncatedSpace s{2, 6};
    const auto rho0 = coherent_product(s, 0.0);
    const auto out = evolve_master(rho0, config(0.01, 5.0), Dynamics{0.0, 1.0, 0.3, 0.0, {}});
    EXPECT_LT((out.states.back().rho - rho0.rho).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Master, SinglePhononDecaysAtLambda) {
    const TruncatedSpace s{1, 6};
    const auto rho0 = pure_state(s, product_state(s, fock_amplitudes(0, 1), fock_amplitudes(1, 6)));
    const double lambda = 0.3;
    auto cfg = config(0.01, 4.0, 1.0);
    cfg.output_times = {1.0, 2.0, 4.0};
    const auto out = evolve_master(rho0, cfg, Dynamics{0.0, 1.0, lambda, 0.0, {}});
    for (std::size_t i = 0; i < out.times.size(); ++i)
        EXPECT_NEAR(oscillator_energy(out.states[i]), std::exp(-lambda * out.times[i]), 1e-10);
}

TEST(Master, CoherentAmplitudeSpiralsIn) {
    const TruncatedSpace s{1, 24};
    const cd beta{0.8, -0.5};
    const Dynamics d{0.0, 1.0, 0.2, 0.0, {}};
    const auto out = evolve_master(coherent_product(s, 0.0, beta), config(0.01, 3.0, 1e-6), d);
    const cd expected = beta * std::exp(-cd{0.5 * d.lambda, d.Omega} * 3.0);
    EXPECT_LT(std::abs(oscillator_lowering(out.states.back()) - expected), 1e-9);
}

TEST(Master, DrivenAmplitudeMatchesLinearResponse) {
    // The mean of b obeys a closed linear equation, solved here by quadrature.
    const TruncatedSpace s{5, 20};
    const auto d = driven(0.2, 0.1, 0.1);
    const auto rho0 = pure_state(s, product_state(s, fock_amplitudes(2, 5), fock_amplitudes(0, 20)));
    auto cfg = config(0.01, 3.0, 1e-8);
    cfg.output_times = {0.5, 1.5, 3.0};
    const auto out = evolve_master(rho0, cfg, d);
    for (std::size_t i = 0; i < out.times.size(); ++i)
        EXPECT_LT(std::abs(oscillator_lowering(out.states[i]) - driven_mean_b(out.times[i], 2, d)), 1e-9)
            << "t = " << out.times[i];
}

TEST(Master, PhotonDiagonalIsConserved) {
    const TruncatedSpace s{8, 20};
    const auto rho0 = coherent_product(s, cd{0.0, 1.2});
    const auto out = evolve_master(rho0, config(0.01, 2.0, 1.0), driven(0.3, 0.2, 0.2));
    const Eigen::VectorXd before = photon_reduced(rho0).diagonal().real();
    const Eigen::VectorXd after = photon_reduced(out.states.back()).diagonal().real();
    EXPECT_LT((after - before).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(photon_number(out.states.back()), photon_number(rho0), 1e-12);
}

TEST(Master, LabFrameAgreesWithRotatingFrame) {
    const TruncatedSpace s{5, 14};
    const auto d = driven(0.2, 0.1, 0.1, 0.6);
    const auto rho0 = coherent_product(s, cd{0.0, 0.9});
    auto rot = config(0.005, 1.7, 1.0);
    auto lab = rot;
    lab.frame = Frame::lab;
    const auto a = evolve_master(rho0, rot, d);
    const auto b = evolve_master(rho0, lab, d);
    const auto mapped = to_lab_frame(a.states.back(), 1.7, d.omega);
    EXPECT_LT((mapped.rho - b.states.back().rho).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Master, DiagnosticsStayClean) {
    const TruncatedSpace s{8, 20};
    const auto out = evolve_master(coherent_product(s, cd{0.0, 1.0}), config(0.01, 3.0, 1e-4), driven());
    EXPECT_LT(out.max_trace_drift, 1e-12);
    EXPECT_LT(out.max_hermiticity_drift, 1e-14);
    ASSERT_EQ(out.min_eigenvalues.size(), 1u);
    EXPECT_GT(out.min_eigenvalues[0], -1e-8);
    EXPECT_EQ(out.steps, 300);
}

TEST(Master, LandsExactlyOnOutputTimes) {
    const TruncatedSpace s{2, 6};
    auto cfg = config(0.3, 1.0, 1.0);
    cfg.output_times = {0.1, 0.25, 1.0};
    const auto out = evolve_master(coherent_product(s, 0.5), cfg, driven());
    ASSERT_EQ(out.times.size(), 3u);
    EXPECT_EQ(out.times[0], 0.1);
    EXPECT_EQ(out.times[1], 0.25);
    EXPECT_EQ(out.times[2], 1.0);
    EXPECT_EQ(out.steps, 1 + 1 + 3);
}

TEST(Master, RK4ConvergesAtFourthOrder) {
    const TruncatedSpace s{6, 14};
    const auto d = driven(0.3, 0.2, 0.1);
    const auto rho0 = coherent_product(s, cd{0.0, 0.8});
    auto final_state = [&](double dt) { return evolve_master(rho0, config(dt, 2.0, 1e-3), d).states.back().rho; };
    const Matrix ref = final_state(0.002);
    const double e1 = (final_state(0.05) - ref).cwiseAbs().maxCoeff();
    const double e2 = (final_state(0.025) - ref).cwiseAbs().maxCoeff();
    EXPECT_NEAR(e1 / e2, 16.0, 4.0);
}

TEST(Master, EdgePopulationRaisesTruncationError) {
    const TruncatedSpace s{6, 10};
    try {
        evolve_master(coherent_product(s, cd{0.0, 3.0}), config(0.01, 0.1), driven());
        FAIL() << "expected TruncationError";
    } catch (const TruncationError& e) {
        EXPECT_EQ(e.factor(), "photon");
        EXPECT_GT(e.estimate(), 1e-8);
    }
    try {
        evolve_master(coherent_product(TruncatedSpace{2, 4}, 0.0), config(0.01, 3.0), driven(0.0, 3.0, 0.0));
        FAIL() << "expected TruncationError";
    } catch (const TruncationError& e) {
        EXPECT_EQ(e.factor(), "oscillator");
    }
}

TEST(Master, UnstableStepRaisesStepSizeError) {
    const TruncatedSpace s{2, 12};
    EXPECT_THROW(evolve_master(coherent_product(s, 0.5), config(4.0, 2000.0, 1.0), driven(0.5, 0.5, 0.0)),
                 StepSizeError);
}

TEST(Master, RejectsBadInputs) {
    const auto rho0 = coherent_product(TruncatedSpace{2, 3}, 0.5);
    EXPECT_THROW(evolve_master(rho0, config(0.0, 1.0), driven()), InvalidInput);
    auto cfg = config(0.1, 1.0);
    cfg.output_times = {0.5, 0.2};
    EXPECT_THROW(evolve_master(rho0, cfg, driven()), InvalidInput);
    EXPECT_THROW((TruncatedSpace{80, 60}.validate()), InvalidInput);
    DensityMatrix wrong{TruncatedSpace{2, 3}, Matrix::Identity(5, 5)};
    EXPECT_THROW(evolve_master(wrong, config(0.1, 1.0), driven()), InvalidInput);
}

TEST(Benchmark, OracleMatchesAnalyticReducedState) {
    // Shorter horizon and smaller oscillator space than the acceptance run, same tolerances.
    const BenchmarkSetup bench;
    auto integ = config(0.01, 1.0);
    const auto report =
        compare_with_analytic({0.5, 1.0}, bench.dynamics(), bench.interferometer, TruncatedSpace{16, 30}, integ);
    EXPECT_LT(report.max_trace_distance, 1e-4);
    EXPECT_LT(report.max_energy_rel_err, 1e-5);
    EXPECT_LT(report.max_photon_diagonal_drift, 1e-10);
    EXPECT_LT(report.leakage.max(), 1e-8);
    EXPECT_TRUE(report.pass);
    const auto js = to_json(report);
    EXPECT_EQ(js["space"]["photon_cut"], 16);
    EXPECT_EQ(js["times"].size(), 2u);
}

TEST(Benchmark, SetupReproducesNaturalUnitCouplings) {
    const auto d = BenchmarkSetup{}.dynamics();
    EXPECT_NEAR(d.g, 0.2, 1e-15);
    EXPECT_NEAR(d.force.amplitude, 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(d.force.frequency, 3.0);
    EXPECT_DOUBLE_EQ(d.Omega, 1.0);
    EXPECT_DOUBLE_EQ(d.lambda, 0.1);
}

TEST(Benchmark, DefaultSpaceKeepsLeakageBelowTolerance) {
    const auto d = BenchmarkSetup{}.dynamics();
    const auto s = default_space(2.0, d, 1.0);
    auto cfg = config(0.02, 1.0);
    cfg.check_positivity = false;
    const auto out = evolve_master(coherent_product(s, cd{0.0, std::sqrt(2.0)}), cfg, d);
    EXPECT_LT(out.max_leakage.max(), 1e-8);
}

// ---- stochastic unraveling ---------------------------------------------------

namespace {

TrajectoryEnsemble ensemble(long n, double dt, StochasticScheme scheme = StochasticScheme::strang) {
    TrajectoryEnsemble e;
    e.n_traj = n;
    e.dt = dt;
    e.scheme = scheme;
    e.seed = 7;
    e.threads = 1;
    return e;
}

double master_energy(const DensityMatrix& rho0, const Dynamics& d, double t, double dt = 0.005) {
    auto cfg = config(dt, t, 1.0);
    cfg.check_positivity = false;
    return oscillator_energy(evolve_master(rho0, cfg, d).states.back());
}

} // namespace

TEST(Stochastic, WithoutDampingEveryTrajectoryIsTheSchrodingerPath) {
    const TruncatedSpace s{4, 12};
    const auto d = driven(0.2, 0.1, 0.0);
    const auto rho0 = coherent_product(s, cd{0.0, 1.0});
    const auto r = evolve_stochastic(rho0, ensemble(8, 0.01), d, 2.0);
    EXPECT_LT(r.energy.std_error, 1e-12);
    EXPECT_NEAR(r.trace.mean, 1.0, 1e-10);
    EXPECT_NEAR(r.energy.mean, master_energy(rho0, d, 2.0), 1e-7);
}

TEST(Stochastic, StrangEnsembleMatchesMasterEquation) {
    const TruncatedSpace s{4, 12};
    const auto d = driven(0.3, 0.2, 0.3);
    const auto rho0 = coherent_product(s, cd{0.0, 1.0});
    auto ens = ensemble(4000, 0.01);
    ens.keep_density = true;
    const auto r = evolve_stochastic(rho0, ens, d, 2.0);
    EXPECT_EQ(r.n_aborted, 0);
    EXPECT_LT(std::abs(r.energy.mean - master_energy(rho0, d, 2.0)), 3.0 * r.energy.std_error);
    EXPECT_LT(std::abs(r.trace.mean - 1.0), 3.0 * r.trace.std_error);
    // photon number commutes with every trajectory step
    EXPECT_NEAR(r.photons.mean / r.trace.mean, photon_number(rho0), 0.05);
    ASSERT_TRUE(r.density.has_value());
    EXPECT_LT(hermiticity_defect(r.density->rho), 1e-12);
    EXPECT_NEAR(trace_real(*r.density), r.trace.mean, 1e-10);
}

TEST(Stochastic, EulerMaruyamaEnsembleMatchesMasterEquation) {
    const TruncatedSpace s{3, 10};
    const auto d = driven(0.3, 0.2, 0.3);
    const auto rho0 = coherent_product(s, cd{0.0, 0.8});
    const auto r = evolve_stochastic(rho0, ensemble(3000, 0.002, StochasticScheme::euler_maruyama), d, 1.5);
    EXPECT_LT(std::abs(r.energy.mean - master_energy(rho0, d, 1.5)), 3.0 * r.energy.std_error);
    EXPECT_LT(std::abs(r.trace.mean - 1.0), 3.0 * r.trace.std_error);
}

TEST(Stochastic, MixedInitialStateIsPurified) {
    const TruncatedSpace s{2, 10};
    const auto d = driven(0.3, 0.2, 0.2);
    const auto a = coherent_product(s, 0.7), b = coherent_product(s, cd{0.0, 1.1});
    const DensityMatrix rho0{s, 0.3 * a.rho + 0.7 * b.rho};
    const auto r = evolve_stochastic(rho0, ensemble(3000, 0.01), d, 1.5);
    EXPECT_LT(std::abs(r.energy.mean - master_energy(rho0, d, 1.5)), 3.0 * r.energy.std_error);
}

TEST(Stochastic, ResultsDoNotDependOnThreadCount) {
    const TruncatedSpace s{3, 8};
    const auto d = driven(0.3, 0.2, 0.3);
    const auto rho0 = coherent_product(s, cd{0.0, 0.8});
    auto one = ensemble(600, 0.02);
    auto three = one;
    three.threads = 3;
    const auto r1 = evolve_stochastic(rho0, one, d, 1.0);
    const auto r3 = evolve_stochastic(rho0, three, d, 1.0);
    EXPECT_EQ(r1.energy.mean, r3.energy.mean);
    EXPECT_EQ(r1.energy.std_error, r3.energy.std_error);
    EXPECT_EQ(r1.trace.mean, r3.trace.mean);
    auto other_seed = one;
    other_seed.seed = 8;
    EXPECT_NE(evolve_stochastic(rho0, other_seed, d, 1.0).energy.mean, r1.energy.mean);
}

TEST(Stochastic, RejectsBadEnsembles) {
    const auto rho0 = coherent_product(TruncatedSpace{2, 3}, 0.5);
    auto e = ensemble(0, 0.01);
    EXPECT_THROW(evolve_stochastic(rho0, e, driven(), 1.0), InvalidInput);
    e = ensemble(10, -1.0);
    EXPECT_THROW(evolve_stochastic(rho0, e, driven(), 1.0), InvalidInput);
    EXPECT_THROW(evolve_stochastic(rho0, ensemble(10, 0.01), driven(), -1.0), InvalidInput);
}
