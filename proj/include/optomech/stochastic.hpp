// stochastic.hpp: linear quantum-trajectory unraveling of the master equation
//
//   du = [A_t dt + sqrt(lambda) b dw] u,   A_t = -(lambda/2) b^dagger b - i H_t   (Ito)
//   rho_t = E u_t rho_0 u_t^dagger
//
// Trajectories are not normalized. Because photon number is conserved, each photon
// block n of a trajectory evolves under its own oscillator drift, and the drift
// propagator of a time step is shared by every trajectory. Trajectories are therefore
// advanced in batches with one dense product per block and step.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "optomech/fock.hpp"
#include "optomech/lindblad.hpp"
#include "optomech/params.hpp"

namespace optomech {

enum class StochasticScheme {
    strang,        // half drift (Stratonovich-corrected), exact e^{sqrt(lambda) b dW}, half drift
    euler_maruyama // u += A u dt + sqrt(lambda) b u dW
};

struct TrajectoryEnsemble {
    long n_traj{1000};
    std::uint64_t seed{1};
    double dt{0.01};
    StochasticScheme scheme{StochasticScheme::strang};
    Frame frame{Frame::rotating};
    unsigned threads{0};       // 0 selects hardware concurrency
    bool keep_density{false};  // accumulate the full ensemble-mean density matrix
    double abort_fraction{0.01};

    void validate() const {
        if (n_traj < 1) throw InvalidInput("n_traj must be >= 1");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("dt must be finite and > 0");
        if (!(abort_fraction >= 0.0 && abort_fraction <= 1.0)) throw InvalidInput("abort_fraction must lie in [0, 1]");
    }
};

struct EnsembleEstimate {
    double mean{0.0};
    double std_error{0.0};
};

struct EnsembleResult {
    double t{0.0};
    long n_traj{0};
    long n_aborted{0};
    long steps{0};
    EnsembleEstimate trace;
    EnsembleEstimate energy;  // <b^dagger b>
    EnsembleEstimate photons; // <a^dagger a>
    std::optional<DensityMatrix> density;
};

inline constexpr long kTrajectoryBatch = 256;

namespace detail {

// Oscillator-block drift pieces: A_n(t) = base_n + f(t) * drive.
struct BlockDrift {
    std::vector<Matrix> base;
    Matrix drive;
    Matrix lower; // b on the oscillator factor
};

inline BlockDrift block_drift(const Dynamics& d, const TruncatedSpace& s, Frame frame, bool stratonovich) {
    const int P = s.photon_levels(), K = s.osc_levels();
    const std::complex<double> i{0.0, 1.0};
    Matrix b = Matrix::Zero(K, K);
    for (int k = 1; k < K; ++k) b(k - 1, k) = std::sqrt(double(k));
    const Matrix nb = b.adjoint() * b, x = b + b.adjoint();
    BlockDrift out;
    out.lower = b;
    out.drive = -i * x;
    for (int n = 0; n < P; ++n) {
        Matrix a = -(0.5 * d.lambda + i * d.Omega) * nb - i * (d.g * n) * x;
        if (frame == Frame::lab) a -= i * (d.omega * n) * Matrix::Identity(K, K);
        if (stratonovich) a -= 0.5 * d.lambda * (b * b);
        out.base.push_back(std::move(a));
    }
    return out;
}

// One RK4 step of dU/dt = A(t) U from U = I over [t0, t0 + h].
inline Matrix rk4_propagator(const Matrix& base, const Matrix& drive, const ReducedForce& f, double t0, double h) {
    const int K = static_cast<int>(base.rows());
    auto A = [&](double t) -> Matrix { return base + f(t) * drive; };
    const Matrix I = Matrix::Identity(K, K);
    const Matrix A0 = A(t0), Am = A(t0 + 0.5 * h), A1 = A(t0 + h);
    const Matrix k1 = A0;
    const Matrix k2 = Am * (I + 0.5 * h * k1);
    const Matrix k3 = Am * (I + 0.5 * h * k2);
    const Matrix k4 = A1 * (I + h * k3);
    return I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Propagator sequence, one matrix per photon block per stage.
struct PropagatorCache {
    // strang: stages = steps + 1 (half, full midpoint-to-midpoint x (steps-1), half)
    // euler:  stages = steps, each I + h A(t_j)
    std::vector<std::vector<Matrix>> stages;
    double h{0.0};
    long steps{0};
};

inline PropagatorCache build_propagators(const Dynamics& d, const TruncatedSpace& s, Frame frame,
                                         StochasticScheme scheme, double t_final, double dt) {
    PropagatorCache c;
    c.steps = std::max<long>(1, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
    c.h = t_final / c.steps;
    const bool strang = scheme == StochasticScheme::strang;
    const auto drift = block_drift(d, s, frame, strang);
    const int P = s.photon_levels(), K = s.osc_levels();
    const double h = c.h;
    if (strang) {
        c.stages.resize(c.steps + 1);
        for (long j = 0; j <= c.steps; ++j) {
            const double t0 = j == 0 ? 0.0 : (j - 0.5) * h;
            const double len = (j == 0 || j == c.steps) ? 0.5 * h : h;
            for (int n = 0; n < P; ++n) c.stages[j].push_back(rk4_propagator(drift.base[n], drift.drive, d.force, t0, len));
        }
    } else {
        c.stages.resize(c.steps);
        for (long j = 0; j < c.steps; ++j)
            for (int n = 0; n < P; ++n)
                c.stages[j].push_back(Matrix::Identity(K, K) + h * (drift.base[n] + d.force(j * h) * drift.drive));
    }
    return c;
}

// Column-wise e^{s_c b} on every photon block of a batch:
//   (e^{s b} psi)_k = sum_j s^j / j! sqrt((k+j)! / k!) psi_{k+j}
// The sum stops once the largest remaining coefficient falls below 1e-17.
inline void apply_noise_exponential(Matrix& psi, Matrix& scratch, const Eigen::VectorXd& s, int P, int K) {
    const double s_max = s.cwiseAbs().maxCoeff();
    if (s_max == 0.0) return;
    scratch = psi;
    Eigen::VectorXd power = Eigen::VectorXd::Ones(s.size());
    Eigen::VectorXd coeff(K);
    double log_fact = 0.0;
    for (int j = 1; j < K; ++j) {
        power = power.cwiseProduct(s);
        log_fact += std::log(double(j));
        // coeff_k = sqrt((k+j)!/k!) / j!
        for (int k = 0; k + j < K; ++k)
            coeff(k) = std::exp(0.5 * (std::lgamma(k + j + 1.0) - std::lgamma(k + 1.0)) - log_fact);
        for (int n = 0; n < P; ++n)
            psi.middleRows(n * K, K - j).noalias() +=
                coeff.head(K - j).asDiagonal() * scratch.middleRows(n * K + j, K - j) * power.asDiagonal();
        if (std::pow(s_max, j) * coeff.head(K - j).maxCoeff() < 1e-17) break;
    }
}

inline void apply_lowering_add(Matrix& psi, const Matrix& old, const Eigen::VectorXd& s, int P, int K) {
    for (int n = 0; n < P; ++n) {
        const auto src = old.middleRows(n * K, K);
        auto dst = psi.middleRows(n * K, K);
        for (int k = 0; k + 1 < K; ++k) dst.row(k) += std::sqrt(double(k + 1)) * src.row(k + 1).cwiseProduct(s.transpose());
    }
}

inline std::mt19937_64 trajectory_stream(std::uint64_t seed, long index) {
    const auto i = static_cast<std::uint64_t>(index);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    return std::mt19937_64(seq);
}

inline EnsembleEstimate estimate(const std::vector<double>& x, const std::vector<char>& ok) {
    double sum = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (ok[i]) {
            sum += x[i];
            ++n;
        }
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (ok[i]) ss += (x[i] - mean) * (x[i] - mean);
    const double var = n > 1 ? ss / (n - 1) : 0.0;
    return {mean, std::sqrt(var / n)};
}

} // namespace detail

/// Ensemble estimate of rho_t from the linear unraveling. rho0 may be mixed; its
/// weighted eigenvectors all see the same noise path within a trajectory.
inline EnsembleResult evolve_stochastic(const DensityMatrix& rho0, const TrajectoryEnsemble& ens, const Dynamics& d,
                                        double t_final) {
    rho0.check_shape();
    ens.validate();
    d.validate();
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidInput("t_final must be finite and >= 0");

    const auto& s = rho0.space;
    const int P = s.photon_levels(), K = s.osc_levels(), D = s.dim();

    // purification columns sqrt(p_i) v_i
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho0.rho + rho0.rho.adjoint()));
    const double top = es.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < D; ++i)
        if (es.eigenvalues()(i) > 1e-14 * top) keep.push_back(i);
    const int r = static_cast<int>(keep.size());
    Matrix purif(D, r);
    for (int c = 0; c < r; ++c) purif.col(c) = std::sqrt(es.eigenvalues()(keep[c])) * es.eigenvectors().col(keep[c]);

    const auto cache = detail::build_propagators(d, s, ens.frame, ens.scheme, t_final, ens.dt);
    const double sqrt_lambda = std::sqrt(d.lambda);
    const double sqrt_h = std::sqrt(cache.h);

    const long n = ens.n_traj;
    const long n_batches = (n + kTrajectoryBatch - 1) / kTrajectoryBatch;
    std::vector<double> trace(n), energy(n), photons(n);
    std::vector<char> ok(n, 1);
    std::vector<Matrix> batch_density(ens.keep_density ? n_batches : 0);

    Eigen::VectorXd k_weight(D), n_weight(D);
    for (int p = 0; p < P; ++p)
        for (int k = 0; k < K; ++k) {
            k_weight(p * K + k) = k;
            n_weight(p * K + k) = p;
        }

    auto run_batch = [&](long b) {
        const long first = b * kTrajectoryBatch;
        const long count = std::min(kTrajectoryBatch, n - first);
        const long cols = count * r;
        Matrix psi(D, cols), tmp(D, cols), scratch(D, cols);
        for (long j = 0; j < count; ++j) psi.middleCols(j * r, r) = purif;

        std::vector<std::mt19937_64> rng;
        rng.reserve(count);
        for (long j = 0; j < count; ++j) rng.push_back(detail::trajectory_stream(ens.seed, first + j));
        std::normal_distribution<double> normal;
        Eigen::VectorXd noise(cols);

        auto apply_stage = [&](const std::vector<Matrix>& U) {
            for (int p = 0; p < P; ++p) tmp.middleRows(p * K, K).noalias() = U[p] * psi.middleRows(p * K, K);
            psi.swap(tmp);
        };
        auto draw = [&] {
            for (long j = 0; j < count; ++j) {
                const double dw = d.lambda > 0.0 ? sqrt_h * normal(rng[j]) : 0.0;
                noise.segment(j * r, r).setConstant(sqrt_lambda * dw);
            }
        };

        if (ens.scheme == StochasticScheme::strang) {
            apply_stage(cache.stages[0]);
            for (long step = 0; step < cache.steps; ++step) {
                draw();
                if (d.lambda > 0.0) detail::apply_noise_exponential(psi, scratch, noise, P, K);
                apply_stage(cache.stages[step + 1]);
            }
        } else {
            for (long step = 0; step < cache.steps; ++step) {
                draw();
                const Matrix old = psi;
                apply_stage(cache.stages[step]);
                if (d.lambda > 0.0) detail::apply_lowering_add(psi, old, noise, P, K);
            }
        }

        Matrix density;
        if (ens.keep_density) density = Matrix::Zero(D, D);
        for (long j = 0; j < count; ++j) {
            const auto block = psi.middleCols(j * r, r);
            const long idx = first + j;
            if (!block.allFinite()) {
                ok[idx] = 0;
                continue;
            }
            const Eigen::VectorXd w = block.cwiseAbs2().rowwise().sum();
            trace[idx] = w.sum();
            energy[idx] = w.dot(k_weight);
            photons[idx] = w.dot(n_weight);
            if (ens.keep_density) density.noalias() += block * block.adjoint();
        }
        if (ens.keep_density) batch_density[b] = std::move(density);
    };

    unsigned workers = ens.threads ? ens.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<long>(workers, n_batches));
    std::atomic<long> next{0};
    std::vector<std::exception_ptr> failures(workers);
    auto work = [&](unsigned w) {
        try {
            for (long b; (b = next.fetch_add(1)) < n_batches;) run_batch(b);
        } catch (...) {
            failures[w] = std::current_exception();
            next = n_batches;
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

    EnsembleResult out;
    out.t = t_final;
    out.n_traj = n;
    out.steps = cache.steps;
    out.n_aborted = static_cast<long>(std::count(ok.begin(), ok.end(), 0));
    if (out.n_aborted > ens.abort_fraction * n)
        throw NumericalFailure("more than the allowed fraction of trajectories became non-finite",
                               double(out.n_aborted) / double(n));
    out.trace = detail::estimate(trace, ok);
    out.energy = detail::estimate(energy, ok);
    out.photons = detail::estimate(photons, ok);
    if (ens.keep_density) {
        Matrix sum = Matrix::Zero(D, D);
        for (const auto& m : batch_density) sum += m; // batch order keeps the reduction deterministic
        out.density = DensityMatrix{s, sum / double(n - out.n_aborted)};
    }
    return out;
}

} // namespace optomech
