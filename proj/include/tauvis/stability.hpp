#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "geometry.hpp"

namespace tauvis {

struct Mat2 {
    double a{0.0}, b{0.0};
    double c{0.0}, d{0.0};

    [[nodiscard]] double trace() const { return a + d; }
    [[nodiscard]] double det() const { return a * d - b * c; }
    bool operator==(const Mat2&) const = default;
};

using EigenPair = std::array<std::complex<double>, 2>;

/// Eigenvalues of a real 2x2 matrix, ordered by real part then imaginary part.
inline EigenPair eig2(const Mat2& m) {
    const double half_tr = 0.5 * m.trace();
    const double det = m.det();
    // Discriminant of l^2 - tr l + det; computed as ((a-d)/2)^2 + bc to avoid
    // cancellation between tr^2/4 and det.
    const double half_diff = 0.5 * (m.a - m.d);
    const double disc = half_diff * half_diff + m.b * m.c;
    EigenPair out;
    if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        const double q = half_tr + std::copysign(root, half_tr);
        double l1 = q;
        double l2 = q != 0.0 ? det / q : half_tr - root;
        if (q == 0.0) l1 = half_tr + root;
        out = {std::complex<double>(l1, 0.0), std::complex<double>(l2, 0.0)};
    } else {
        const double im = std::sqrt(-disc);
        out = {std::complex<double>(half_tr, -im), std::complex<double>(half_tr, im)};
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return out;
}

inline bool is_hurwitz(const Mat2& m) {
    const auto e = eig2(m);
    return e[0].real() < 0.0 && e[1].real() < 0.0;
}

struct RestPoint {
    double x{0.0};
    double theta{0.0};
};

struct StabilityParams {
    double k_f{0.0}, k_m{0.0}, k{0.0};
    double f_f{0.0}, f_m{0.0}, f{0.0};
    double c{0.0}, R{0.0};
};

struct Linearization {
    Mat2 matrix;
    RestPoint rest_point;
    StabilityParams params;
};

namespace detail {
inline void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string(name) + " must be a finite value > 0");
}
}  // namespace detail

/// Tau-balancing closed loop linearized about (x, theta) = (0, pi/2).
inline Linearization tau_balance_linearization(double k_f, double k_m, double f_f, double f_m,
                                               double R) {
    detail::require_positive(k_f, "k_f");
    detail::require_positive(k_m, "k_m");
    detail::require_positive(f_f, "f_f");
    detail::require_positive(f_m, "f_m");
    if (!(R >= 0.0) || !std::isfinite(R)) throw DomainError("R must be a finite value >= 0");
    Linearization lin;
    lin.matrix = {0.0, -1.0, 2.0 * (f_f * k_f + f_m * k_m),
                  -2.0 * (k_f * f_f * f_f + k_m * f_m * f_m + k_f * R * f_f * f_f +
                          k_m * R * f_m * f_m)};
    lin.rest_point = {0.0, std::numbers::pi / 2.0};
    lin.params = {.k_f = k_f, .k_m = k_m, .f_f = f_f, .f_m = f_m, .R = R};
    return lin;
}

/// Single-wall closed loop linearized about its rest point. `side` is +1 for
/// the sign in front of the rest-point offset, -1 for the mirrored case.
inline Linearization single_wall_linearization(double k, double f, double c, double R = 0.0,
                                               int side = 1) {
    detail::require_positive(k, "k");
    detail::require_positive(f, "f");
    detail::require_positive(c, "c");
    Linearization lin;
    lin.matrix = {0.0, -1.0, f * k, -k * f * c};
    lin.rest_point = {(side >= 0 ? 1.0 : -1.0) * (c - f * R - f) / f, std::numbers::pi / 2.0};
    lin.params = {.k = k, .f = f, .c = c, .R = R};
    return lin;
}

/// Closed-form single-wall eigenvalues -kfc/2 +- sqrt(kf(kfc^2 - 4))/2, ordered
/// like eig2.
inline EigenPair single_wall_eigs_closed_form(double k, double f, double c) {
    const double centre = -k * f * c / 2.0;
    const std::complex<double> root =
        std::sqrt(std::complex<double>(k * f * (k * f * c * c - 4.0), 0.0)) / 2.0;
    EigenPair out{centre - root, centre + root};
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return out;
}

/// The single-wall loop oscillates (complex eigenvalues) iff k < 4 / (f c^2).
inline bool single_wall_oscillatory(double k, double f, double c) { return k < 4.0 / (f * c * c); }

/// The published closed-form tau-balancing eigenvalue expression, evaluated
/// verbatim. It does not in general match eig2 of the linearization matrix;
/// it is kept only as a diagnostic.
inline EigenPair tau_balance_eigs_printed(double k_f, double k_m, double f_f, double f_m,
                                          double R) {
    const double centre = -(f_f * f_f * k_f + f_m * f_m * k_f) * (1.0 + R);
    const double radicand = (f_f * k_f + f_m * k_m) *
                            ((f_f * f_f * f_f * k_f + f_m * f_m * f_m * k_m) * (1.0 + R) * (1.0 + R) - 2.0);
    const std::complex<double> root = std::sqrt(std::complex<double>(radicand, 0.0));
    EigenPair out{centre - root, centre + root};
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return out;
}

struct RealEigCondition {
    bool gain_condition{false};      ///< (f_f^3 k_f + f_m^3 k_m) > 2 / (1+R)^2
    double matrix_discriminant{0.0};  ///< tr^2/4 - det of the linearization
    bool matrix_real{false};          ///< matrix_discriminant >= 0
    [[nodiscard]] bool consistent() const { return gain_condition == matrix_real; }
};

inline RealEigCondition tau_balance_real_eig_condition(double k_f, double k_m, double f_f,
                                                       double f_m, double R) {
    RealEigCondition out;
    out.gain_condition = (f_f * f_f * f_f * k_f + f_m * f_m * f_m * k_m) > 2.0 / ((1.0 + R) * (1.0 + R));
    const Mat2 m = tau_balance_linearization(k_f, k_m, f_f, f_m, R).matrix;
    const double half_tr = 0.5 * m.trace();
    out.matrix_discriminant = half_tr * half_tr - m.det();
    out.matrix_real = out.matrix_discriminant >= 0.0;
    return out;
}

inline bool eigs_close(const EigenPair& x, const EigenPair& y, double tol) {
    for (std::size_t i = 0; i < 2; ++i)
        if (std::abs(x[i] - y[i]) > tol * std::max(1.0, std::abs(y[i]))) return false;
    return true;
}

}  // namespace tauvis
