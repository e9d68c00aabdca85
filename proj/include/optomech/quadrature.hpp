// quadrature.hpp: globally adaptive Gauss–Kronrod (7/15) integration

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <type_traits>
#include <vector>

#include "optomech/error.hpp"

namespace optomech::quad {

struct Tolerance {
    double absolute{1e-12};
    double relative{1e-12};
    std::size_t max_panels{1'000'000};
};

template <typename T>
struct Result {
    T value{};
    double error{0.0};
    std::size_t panels{0};
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};

inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7.
inline constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z); }

template <typename T>
struct Panel {
    double a, b;
    T value;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

// One 15-point Kronrod panel with the QUADPACK error heuristic.
template <typename T, typename F>
Panel<T> evaluate_panel(F& f, double a, double b) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    std::array<T, 15> fx;
    fx[7] = f(centre);
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_nodes[j];
        fx[j] = f(centre - dx);
        fx[14 - j] = f(centre + dx);
    }

    T kronrod = kronrod_weights[7] * fx[7];
    T gauss = gauss_weights[3] * fx[7];
    double abs_sum = kronrod_weights[7] * magnitude(fx[7]);
    for (int j = 0; j < 7; ++j) {
        const T pair = fx[j] + fx[14 - j];
        kronrod += kronrod_weights[j] * pair;
        abs_sum += kronrod_weights[j] * (magnitude(fx[j]) + magnitude(fx[14 - j]));
        if (j % 2 == 1) gauss += gauss_weights[j / 2] * pair;
    }
    const T mean = kronrod * 0.5;
    double asc = kronrod_weights[7] * magnitude(fx[7] - mean);
    for (int j = 0; j < 7; ++j)
        asc += kronrod_weights[j] * (magnitude(fx[j] - mean) + magnitude(fx[14 - j] - mean));

    double err = magnitude(kronrod - gauss) * std::abs(half);
    const double resasc = asc * std::abs(half);
    const double resabs = abs_sum * std::abs(half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
    return {a, b, kronrod * half, err};
}

} // namespace detail

/// Integrates f over [a, b], starting from `initial_panels` equal panels and bisecting
/// the worst panel until the summed error estimate is below abs + rel * |value|.
/// Throws NumericalFailure (carrying the worst-panel estimate) past the panel cap.
template <typename F>
auto integrate(F&& f, double a, double b, const Tolerance& tol = {}, std::size_t initial_panels = 1)
    -> Result<std::decay_t<decltype(f(a))>> {
    using T = std::decay_t<decltype(f(a))>;
    if (a == b) return {T{}, 0.0, 0};
    initial_panels = std::max<std::size_t>(1, initial_panels);

    std::priority_queue<detail::Panel<T>> heap;
    T total{};
    double total_err = 0.0;
    const double width = (b - a) / static_cast<double>(initial_panels);
    for (std::size_t i = 0; i < initial_panels; ++i) {
        const double lo = a + width * static_cast<double>(i);
        const double hi = i + 1 == initial_panels ? b : lo + width;
        auto p = detail::evaluate_panel<T>(f, lo, hi);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }

    std::size_t panels = initial_panels;
    while (total_err > tol.absolute + tol.relative * detail::magnitude(total)) {
        if (panels >= tol.max_panels) {
            throw NumericalFailure("adaptive quadrature did not converge within " +
                                       std::to_string(tol.max_panels) + " panels",
                                   heap.top().error);
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::evaluate_panel<T>(f, worst.a, mid);
        auto right = detail::evaluate_panel<T>(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++panels;
        // The running sums drift after many updates; recompute occasionally.
        if (panels % 4096 == 0) {
            auto copy = heap;
            total = T{};
            total_err = 0.0;
            while (!copy.empty()) {
                total += copy.top().value;
                total_err += copy.top().error;
                copy.pop();
            }
        }
    }
    return {total, total_err, panels};
}

} // namespace optomech::quad
