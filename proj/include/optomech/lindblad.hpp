// lindblad.hpp: master-equation oracle on a truncated Fock space
//
//   d rho/dt = -i [H_t, rho] - (lambda/2)(b^dagger b rho + rho b^dagger b - 2 b rho b^dagger)
//   H_t      = omega a^dagger a + Omega b^dagger b + (g a^dagger a + f(t))(b^dagger + b)
//
// a^dagger a commutes with H_t and with the dissipator, so block (n, m) evolves on
// its own with the oscillator Hamiltonians H_n = Omega b^dagger b + (g n + f)(b + b^dagger).
// The generator is applied blockwise with banded updates instead of dense products.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "optomech/fock.hpp"
#include "optomech/params.hpp"

namespace optomech {

enum class Frame {
    rotating, // e^{-i omega a^dagger a t} removed, omega drops out of the dynamics
    lab
};

enum class Scheme { rk4 };

struct IntegratorConfig {
    double dt{1e-3};
    Scheme scheme{Scheme::rk4};
    double t_final{1.0};
    double leakage_tol{1e-8};
    Frame frame{Frame::rotating};
    std::vector<double> output_times; // empty selects {t_final}
    bool check_positivity{true};
    double trace_drift_tol{1e-6};
};

struct MasterTrajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    std::vector<double> min_eigenvalues; // empty unless positivity was checked
    double max_trace_drift{0.0};
    double max_hermiticity_drift{0.0}; // per step, before symmetrization
    Leakage max_leakage;
    long steps{0};
};

/// Step size resolving the fastest coherent rate of the truncated problem; in the lab
/// frame the free photon phase omega * photon_cut counts as well.
inline double recommended_dt(const Dynamics& d, const TruncatedSpace& s, Frame frame = Frame::rotating) {
    double rate = std::max(d.Omega, std::abs(d.g) * s.photon_cut);
    if (frame == Frame::lab) rate = std::max(rate, std::abs(d.omega) * s.photon_cut);
    return 0.01 / rate;
}

namespace detail {

struct GeneratorWorkspace {
    Eigen::VectorXd sq; // sqrt(1..K)
    Eigen::MatrixXcd base; // -i Omega (k - l) - (lambda/2)(k + l)

    GeneratorWorkspace(const Dynamics& d, const TruncatedSpace& s) {
        const int K = s.osc_levels();
        sq.resize(K - 1);
        for (int j = 0; j < K - 1; ++j) sq(j) = std::sqrt(double(j + 1));
        base.resize(K, K);
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < K; ++l)
                base(k, l) = std::complex<double>{-0.5 * d.lambda * (k + l), -d.Omega * (k - l)};
    }
};

inline void apply_generator_into(Matrix& out, const Matrix& rho, double t, const Dynamics& d, const TruncatedSpace& s,
                                 Frame frame, const GeneratorWorkspace& ws) {
    using cd = std::complex<double>;
    const int P = s.photon_levels(), K = s.osc_levels(), Km = K - 1;
    const Eigen::Index ld = rho.outerStride(), ldo = out.outerStride();
    const double f = d.force(t);
    const double* sq = ws.sq.data();
    for (int n = 0; n < P; ++n) {
        const double cn = d.g * n + f;
        for (int m = 0; m < P; ++m) {
            const double cm = d.g * m + f;
            const double shift = frame == Frame::lab ? d.omega * (n - m) : 0.0;
            // Column-major block (n, m): R(k, l) = r[l * ld + k].
            const cd* r = rho.data() + static_cast<Eigen::Index>(m) * K * ld + n * K;
            cd* o = out.data() + static_cast<Eigen::Index>(m) * K * ldo + n * K;
            for (int l = 0; l < K; ++l) {
                const cd* rc = r + l * ld;
                const cd* rl = l > 0 ? rc - ld : nullptr; // column l - 1
                const cd* rr = l < Km ? rc + ld : nullptr; // column l + 1
                const cd* bc = ws.base.data() + static_cast<Eigen::Index>(l) * K;
                cd* oc = o + l * ldo;
                for (int k = 0; k < K; ++k) {
                    cd acc = (bc[k] - cd{0.0, shift}) * rc[k];
                    // -i c_n (X R)(k, l) with X = b + b^dagger
                    cd xr = 0.0;
                    if (k < Km) xr += sq[k] * rc[k + 1];
                    if (k > 0) xr += sq[k - 1] * rc[k - 1];
                    // +i c_m (R X)(k, l)
                    cd rx = 0.0;
                    if (rr) rx += rr[k] * sq[l];
                    if (rl) rx += rl[k] * sq[l - 1];
                    acc += cd{0.0, 1.0} * (cm * rx - cn * xr);
                    // lambda (b R b^dagger)(k, l)
                    if (rr && k < Km) acc += d.lambda * sq[k] * sq[l] * rr[k + 1];
                    oc[k] = acc;
                }
            }
        }
    }
}

} // namespace detail

/// Right-hand side of the master equation at time t.
inline Matrix apply_generator(const DensityMatrix& rho, double t, const Dynamics& d, Frame frame = Frame::rotating) {
    rho.check_shape();
    Matrix out(rho.rho.rows(), rho.rho.cols());
    detail::apply_generator_into(out, rho.rho, t, d, rho.space, frame, detail::GeneratorWorkspace(d, rho.space));
    return out;
}

/// Dense Kronecker-product generator acting on row-major vec(rho); reference for small spaces.
inline Matrix dense_generator(double t, const Dynamics& d, const TruncatedSpace& s, Frame frame = Frame::rotating) {
    s.validate();
    const int P = s.photon_levels(), K = s.osc_levels(), D = s.dim();
    if (D > 200) throw InvalidInput("dense_generator is limited to dim <= 200");
    Matrix a = Matrix::Zero(P, P), b = Matrix::Zero(K, K);
    for (int j = 1; j < P; ++j) a(j - 1, j) = std::sqrt(double(j));
    for (int j = 1; j < K; ++j) b(j - 1, j) = std::sqrt(double(j));
    const Matrix IP = Matrix::Identity(P, P), IK = Matrix::Identity(K, K);
    auto kron = [](const Matrix& x, const Matrix& y) {
        Matrix r(x.rows() * y.rows(), x.cols() * y.cols());
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < x.cols(); ++j) r.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        return r;
    };
    const Matrix na = a.adjoint() * a, nb = b.adjoint() * b, x = b + b.adjoint();
    Matrix H = d.Omega * kron(IP, nb) + kron(d.g * na + d.force(t) * IP, x);
    if (frame == Frame::lab) H += d.omega * kron(na, IK);
    const Matrix B = kron(IP, b), BB = B.adjoint() * B, ID = Matrix::Identity(D, D);
    const std::complex<double> i{0.0, 1.0};
    // row-major vec: vec(X rho Y) = (X (x) Y^T) vec(rho)
    return -i * (kron(H, ID) - kron(ID, H.transpose())) -
           0.5 * d.lambda * (kron(BB, ID) + kron(ID, BB.transpose()) - 2.0 * kron(B, B.conjugate()));
}

/// RK4 integration with exact landing on the output times.
inline MasterTrajectory evolve_master(const DensityMatrix& rho0, const IntegratorConfig& cfg, const Dynamics& d) {
    rho0.check_shape();
    d.validate();
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InvalidInput("dt must be finite and > 0");
    if (!(cfg.t_final >= 0.0)) throw InvalidInput("t_final must be >= 0");
    std::vector<double> outputs = cfg.output_times.empty() ? std::vector<double>{cfg.t_final} : cfg.output_times;
    if (!std::is_sorted(outputs.begin(), outputs.end()) || outputs.front() < 0.0)
        throw InvalidInput("output times must be sorted and >= 0");

    const auto& s = rho0.space;
    const detail::GeneratorWorkspace ws(d, s);
    const double trace0 = rho0.rho.trace().real();
    Matrix rho = rho0.rho, k1(rho.rows(), rho.cols()), k2 = k1, k3 = k1, k4 = k1, tmp = k1;

    MasterTrajectory out;
    double t = 0.0;
    auto record = [&](double when) {
        DensityMatrix snap{s, rho};
        const auto leak = leakage(snap);
        out.max_leakage.photon = std::max(out.max_leakage.photon, leak.photon);
        out.max_leakage.oscillator = std::max(out.max_leakage.oscillator, leak.oscillator);
        if (leak.max() > cfg.leakage_tol)
            throw TruncationError("population reached the " + leak.worst_factor() + " truncation edge",
                                  leak.worst_factor(), leak.max());
        if (cfg.check_positivity) out.min_eigenvalues.push_back(min_eigenvalue(rho));
        out.times.push_back(when);
        out.states.push_back(std::move(snap));
    };

    for (double target : outputs) {
        const double span = target - t;
        const long n = span > 0.0 ? static_cast<long>(std::ceil(span / cfg.dt - 1e-9)) : 0;
        const double h = n > 0 ? span / n : 0.0;
        for (long j = 0; j < n; ++j) {
            detail::apply_generator_into(k1, rho, t, d, s, cfg.frame, ws);
            tmp = rho + (0.5 * h) * k1;
            detail::apply_generator_into(k2, tmp, t + 0.5 * h, d, s, cfg.frame, ws);
            tmp = rho + (0.5 * h) * k2;
            detail::apply_generator_into(k3, tmp, t + 0.5 * h, d, s, cfg.frame, ws);
            tmp = rho + h * k3;
            detail::apply_generator_into(k4, tmp, t + h, d, s, cfg.frame, ws);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = (j + 1 == n) ? target : t + h;

            out.max_hermiticity_drift = std::max(out.max_hermiticity_drift, symmetrize(rho));
            const double drift = std::abs(rho.trace().real() - trace0);
            out.max_trace_drift = std::max(out.max_trace_drift, drift);
            if (!(drift <= cfg.trace_drift_tol))
                throw StepSizeError("trace drift exceeds tolerance; reduce dt", drift);
            ++out.steps;
        }
        record(target);
    }
    return out;
}

/// Rotating-frame state expressed in the lab frame at time t: block (n, m) picks up e^{-i omega (n - m) t}.
inline DensityMatrix to_lab_frame(const DensityMatrix& rot, double t, double omega) {
    DensityMatrix lab = rot;
    const int P = rot.space.photon_levels(), K = rot.space.osc_levels();
    for (int n = 0; n < P; ++n)
        for (int m = 0; m < P; ++m)
            if (n != m) lab.rho.block(n * K, m * K, K, K) *= std::polar(1.0, -omega * (n - m) * t);
    return lab;
}

} // namespace optomech
