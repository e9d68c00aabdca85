// fock.hpp: truncated photon (x) oscillator Fock space and density-matrix utilities
//
// Composite basis |n> (x) |k>, n = 0..photon_cut, k = 0..osc_cut, flattened as
// n * (osc_cut + 1) + k. Block (n, m) of a density matrix is the oscillator
// operator <n| rho |m>.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "optomech/error.hpp"

namespace optomech {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct TruncatedSpace {
    int photon_cut{1};
    int osc_cut{1};

    static constexpr int kMaxDim = 4096;

    int photon_levels() const { return photon_cut + 1; }
    int osc_levels() const { return osc_cut + 1; }
    int dim() const { return photon_levels() * osc_levels(); }
    int index(int n, int k) const { return n * osc_levels() + k; }

    void validate() const {
        if (photon_cut < 1 || osc_cut < 1) throw InvalidInput("photon_cut and osc_cut must be >= 1");
        if (static_cast<long>(photon_levels()) * osc_levels() > kMaxDim)
            throw InvalidInput("truncated space exceeds the 4096-dimensional cap");
    }

    friend bool operator==(const TruncatedSpace&, const TruncatedSpace&) = default;
};

struct DensityMatrix {
    TruncatedSpace space;
    Matrix rho;

    void check_shape() const {
        space.validate();
        if (rho.rows() != space.dim() || rho.cols() != space.dim())
            throw InvalidInput("density matrix dimension does not match the truncated space");
    }
};

/// Truncated coherent-state amplitudes <k|alpha>, renormalized on the truncated range.
inline Vector coherent_amplitudes(std::complex<double> alpha, int cut) {
    Vector v = Vector::Zero(cut + 1);
    const double pop = std::norm(alpha);
    if (pop == 0.0) {
        v(0) = 1.0;
        return v;
    }
    for (int k = 0; k <= cut; ++k) {
        const double log_mag = -0.5 * pop + 0.5 * k * std::log(pop) - 0.5 * std::lgamma(k + 1.0);
        v(k) = std::polar(std::exp(log_mag), k * std::arg(alpha));
    }
    return v / v.norm();
}

inline Vector fock_amplitudes(int level, int cut) {
    if (level < 0 || level > cut) throw InvalidInput("Fock level outside the truncated range");
    Vector v = Vector::Zero(cut + 1);
    v(level) = 1.0;
    return v;
}

inline Vector product_state(const TruncatedSpace& s, const Vector& photon, const Vector& osc) {
    s.validate();
    if (photon.size() != s.photon_levels() || osc.size() != s.osc_levels())
        throw InvalidInput("factor dimensions do not match the truncated space");
    Vector psi(s.dim());
    for (int n = 0; n < s.photon_levels(); ++n) psi.segment(n * s.osc_levels(), s.osc_levels()) = photon(n) * osc;
    return psi;
}

inline DensityMatrix pure_state(const TruncatedSpace& s, const Vector& psi) {
    return {s, psi * psi.adjoint()};
}

/// |i sigma z> (x) |beta> with the photon amplitude alpha given directly.
inline DensityMatrix coherent_product(const TruncatedSpace& s, std::complex<double> alpha, std::complex<double> beta = 0.0) {
    return pure_state(s, product_state(s, coherent_amplitudes(alpha, s.photon_cut), coherent_amplitudes(beta, s.osc_cut)));
}

/// Reduced radiation state, tr over the oscillator.
inline Matrix photon_reduced(const DensityMatrix& d) {
    const int P = d.space.photon_levels(), K = d.space.osc_levels();
    Matrix r(P, P);
    for (int n = 0; n < P; ++n)
        for (int m = 0; m < P; ++m) r(n, m) = d.rho.block(n * K, m * K, K, K).trace();
    return r;
}

/// Reduced oscillator state, tr over the photons.
inline Matrix oscillator_reduced(const DensityMatrix& d) {
    const int P = d.space.photon_levels(), K = d.space.osc_levels();
    Matrix r = Matrix::Zero(K, K);
    for (int n = 0; n < P; ++n) r += d.rho.block(n * K, n * K, K, K);
    return r;
}

inline double trace_real(const DensityMatrix& d) { return d.rho.trace().real(); }

/// <b^dagger b>.
inline double oscillator_energy(const DensityMatrix& d) {
    const int P = d.space.photon_levels(), K = d.space.osc_levels();
    double e = 0.0;
    for (int n = 0; n < P; ++n)
        for (int k = 0; k < K; ++k) e += k * d.rho(n * K + k, n * K + k).real();
    return e;
}

/// <a^dagger a>.
inline double photon_number(const DensityMatrix& d) {
    const int P = d.space.photon_levels(), K = d.space.osc_levels();
    double e = 0.0;
    for (int n = 0; n < P; ++n)
        for (int k = 0; k < K; ++k) e += n * d.rho(n * K + k, n * K + k).real();
    return e;
}

/// <b>.
inline std::complex<double> oscillator_lowering(const DensityMatrix& d) {
    const Matrix r = oscillator_reduced(d);
    std::complex<double> v = 0.0;
    for (int k = 1; k < r.rows(); ++k) v += std::sqrt(double(k)) * r(k, k - 1);
    return v;
}

struct Leakage {
    double photon{0.0};
    double oscillator{0.0};
    double max() const { return std::max(photon, oscillator); }
    std::string worst_factor() const { return photon >= oscillator ? "photon" : "oscillator"; }
};

/// Population in the top two levels of each factor; the ground level never counts.
inline Leakage leakage(const DensityMatrix& d) {
    const int P = d.space.photon_levels(), K = d.space.osc_levels();
    const int photon_edge = std::max(1, P - 2), osc_edge = std::max(1, K - 2);
    Leakage l;
    for (int n = 0; n < P; ++n)
        for (int k = 0; k < K; ++k) {
            const double p = d.rho(n * K + k, n * K + k).real();
            if (n >= photon_edge) l.photon += p;
            if (k >= osc_edge) l.oscillator += p;
        }
    return l;
}

/// Largest |rho - rho^dagger| entry.
inline double hermiticity_defect(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

/// Replaces m by (m + m^dagger) / 2 in place and returns the defect it removed.
inline double symmetrize(Matrix& m) {
    const Eigen::Index n = m.rows();
    double defect = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const auto upper = m(i, j), lower = std::conj(m(j, i));
            defect = std::max(defect, std::abs(upper - lower));
            const auto avg = 0.5 * (upper + lower);
            m(i, j) = avg;
            m(j, i) = std::conj(avg);
        }
        defect = std::max(defect, 2.0 * std::abs(m(j, j).imag()));
        m(j, j) = m(j, j).real();
    }
    return defect;
}

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// (1/2) sum of |eigenvalues| of the Hermitian difference.
inline double trace_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput("trace_distance: shape mismatch");
    const Matrix diff = a - b;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

} // namespace optomech
