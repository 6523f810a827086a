#ifndef OSCGRAPH_BASIS_HPP
#define OSCGRAPH_BASIS_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "oscgraph/params.hpp"
#include "oscgraph/piecewise_exp.hpp"

namespace oscgraph {

inline double sinc(double t) {
    if (std::abs(t) < 1e-4) {
        const double t2 = t * t;
        return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0);
    }
    return std::sin(t) / t;
}

/// |sinh z|^2 = sinh^2(Re z) + sin^2(Im z).
inline double abs_sinh_sq(cplx z) {
    const double sh = std::sinh(z.real());
    const double sn = std::sin(z.imag());
    return sh * sh + sn * sn;
}

inline void require_no_resonance_full(cplx zeta) {
    if (abs_sinh_sq(2.0 * zeta) < 1e-24) throw std::domain_error("interior resonance");
}

inline void require_no_resonance_half(cplx zeta) {
    if (abs_sinh_sq(zeta) < 1e-24) throw std::domain_error("interior resonance");
}

inline void require_valid_zeta(cplx zeta) {
    if (!(zeta.real() > 0.0)) throw std::domain_error("Re zeta must be positive");
}

enum class BasisKind { FullPlus, FullMinus, HalfPlus, HalfMinus, GreenKernel };

/// Exponential-decay boundary elements:
///   FullPlus:  0 for x < -1,  sinh(z(x+1))/sinh(2z) on [-1,1],  e^{-z(x-1)} for x > 1
///   FullMinus: FullPlus mirrored through x -> -x
///   HalfPlus:  0 for x < 0,   sinh(zx)/sinh(z) on [0,1],        e^{-z(x-1)} for x > 1
///   HalfMinus: HalfPlus mirrored
///   GreenKernel: e^{-z|x|}
struct BasisFunction {
    BasisKind kind;
    cplx zeta;

    /// Pointwise value.  All interior ratios are evaluated in the scaled form
    /// e^{z(|x|-1)}(1 - e^{-2z(...)})/(1 - e^{-2z or -4z}), so nothing
    /// overflows; exterior tails underflow cleanly to 0 (lossless: the true
    /// value is below the double range there).
    cplx operator()(double x) const {
        switch (kind) {
            case BasisKind::FullMinus: return BasisFunction{BasisKind::FullPlus, zeta}(-x);
            case BasisKind::HalfMinus: return BasisFunction{BasisKind::HalfPlus, zeta}(-x);
            case BasisKind::GreenKernel: return decay_exp(std::abs(x));
            case BasisKind::FullPlus:
                if (x < -1.0) return 0.0;
                if (x <= 1.0) {
                    require_no_resonance_full(zeta);
                    return std::exp(zeta * (x - 1.0)) * detail_ratio(2.0 * zeta * (x + 1.0), 4.0 * zeta);
                }
                return decay_exp(x - 1.0);
            case BasisKind::HalfPlus:
                if (x < 0.0) return 0.0;
                if (x <= 1.0) {
                    require_no_resonance_half(zeta);
                    return std::exp(zeta * (x - 1.0)) * detail_ratio(2.0 * zeta * x, 2.0 * zeta);
                }
                return decay_exp(x - 1.0);
        }
        return 0.0;
    }

    /// Closed-form piecewise representation (interior coefficients written as
    /// e^{-z}/(1-e^{-4z}) etc., safe for Re zeta up to ~350).
    PiecewiseExpPoly pw() const {
        switch (kind) {
            case BasisKind::FullPlus: {
                require_no_resonance_full(zeta);
                const cplx den = 1.0 - std::exp(-4.0 * zeta);
                const cplx c1 = std::exp(-zeta) / den;
                const cplx c2 = -std::exp(-3.0 * zeta) / den;
                return PiecewiseExpPoly::from_pieces(
                    {-1.0, 1.0},
                    {{}, {{c1, 0, zeta}, {c2, 0, -zeta}}, {{std::exp(zeta), 0, -zeta}}});
            }
            case BasisKind::FullMinus:
                return BasisFunction{BasisKind::FullPlus, zeta}.pw().reflected();
            case BasisKind::HalfPlus: {
                require_no_resonance_half(zeta);
                const cplx den = 1.0 - std::exp(-2.0 * zeta);
                const cplx c1 = std::exp(-zeta) / den;
                return PiecewiseExpPoly::from_pieces(
                    {0.0, 1.0},
                    {{}, {{c1, 0, zeta}, {-c1, 0, -zeta}}, {{std::exp(zeta), 0, -zeta}}});
            }
            case BasisKind::HalfMinus:
                return BasisFunction{BasisKind::HalfPlus, zeta}.pw().reflected();
            case BasisKind::GreenKernel:
                return PiecewiseExpPoly::from_pieces(
                    {0.0}, {{{cplx{1.0, 0.0}, 0, zeta}}, {{cplx{1.0, 0.0}, 0, -zeta}}});
        }
        return PiecewiseExpPoly::zero();
    }

private:
    cplx decay_exp(double d) const {
        if (zeta.real() * d > 700.0) return 0.0;
        return std::exp(-zeta * d);
    }
    // sinh-ratio (1 - e^{-a}) / (1 - e^{-b}) used by the scaled interior form
    static cplx detail_ratio(cplx a, cplx b) {
        return (1.0 - std::exp(-a)) / (1.0 - std::exp(-b));
    }
};

inline BasisFunction phi_full(cplx zeta, int sign) {
    require_valid_zeta(zeta);
    return {sign >= 0 ? BasisKind::FullPlus : BasisKind::FullMinus, zeta};
}
inline BasisFunction phi_half(cplx zeta, int sign) {
    require_valid_zeta(zeta);
    return {sign >= 0 ? BasisKind::HalfPlus : BasisKind::HalfMinus, zeta};
}
inline BasisFunction g_kernel(cplx zeta) {
    require_valid_zeta(zeta);
    return {BasisKind::GreenKernel, zeta};
}

/// ||phi_z^{+-}||^2 = 1/(2g) + (g^{-1} sinh 4g - d^{-1} sin 4d) / (4 (sinh^2 2g + sin^2 2d)),
/// with the removable d -> 0 limit d^{-1} sin 4d -> 4.  Implemented with
/// E = e^{-4g} factored out so it stays finite for large g.
inline double norm_sq_full(cplx zeta) {
    require_valid_zeta(zeta);
    require_no_resonance_full(zeta);
    const double g = zeta.real(), d = zeta.imag();
    const double E = std::exp(-4.0 * g);
    const double sn = std::sin(2.0 * d);
    const double num = (1.0 - E * E) / (2.0 * g) - 4.0 * E * sinc(4.0 * d);
    const double den = (1.0 - E) * (1.0 - E) + 4.0 * E * sn * sn;
    return 0.5 / g + num / den;
}

/// Half-line analogue: ||phi_z^{o,+-}||^2 with the same structure at half the
/// interior width.
inline double norm_sq_half(cplx zeta) {
    require_valid_zeta(zeta);
    require_no_resonance_half(zeta);
    const double g = zeta.real(), d = zeta.imag();
    const double E = std::exp(-2.0 * g);
    const double sn = std::sin(d);
    const double num = (1.0 - E * E) / (2.0 * g) - 2.0 * E * sinc(2.0 * d);
    const double den = (1.0 - E) * (1.0 - E) + 4.0 * E * sn * sn;
    return 0.5 / g + num / den;
}

/// L2 inner product (phi^+, phi^-); decays like e^{-2 Re zeta}.
inline cplx overlap_full(cplx zeta) {
    const auto p = phi_full(zeta, +1).pw();
    const auto m = phi_full(zeta, -1).pw();
    return inner(p, m);
}

/// ||phi^{o,pm} - phi^{pm}||; decays like e^{-Re zeta}.
inline double basis_distance(cplx zeta, int sign) {
    const auto d = phi_half(zeta, sign).pw() - phi_full(zeta, sign).pw();
    return d.norm();
}

/// Derivative jumps of v = C+ phi^+ + C- phi^- at x = +1 and x = -1:
///   [v'](+1) = -2z/(1-e^{-4z}) (C+ - e^{-2z} C-)
///   [v'](-1) = -2z/(1-e^{-4z}) (C- - e^{-2z} C+)
inline std::pair<cplx, cplx> jump_full(cplx c_plus, cplx c_minus, cplx zeta) {
    require_valid_zeta(zeta);
    require_no_resonance_full(zeta);
    const cplx pref = -2.0 * zeta / (1.0 - std::exp(-4.0 * zeta));
    const cplx e2 = std::exp(-2.0 * zeta);
    return {pref * (c_plus - e2 * c_minus), pref * (c_minus - e2 * c_plus)};
}

/// Jump of C phi^{o,pm} at the matching point x = +-1 it carries:
///   [v'](+-1) = -2z/(1-e^{-2z}) C.
inline cplx jump_half(cplx coeff, cplx zeta) {
    require_valid_zeta(zeta);
    require_no_resonance_half(zeta);
    return -2.0 * zeta / (1.0 - std::exp(-2.0 * zeta)) * coeff;
}

/// 2x2 Gram matrix of {phi^+, phi^-} packed as (n, o): G = [[n, o], [conj o, n]].
struct GramFull {
    double diag;
    cplx off;
    bool positive_definite() const { return diag > std::abs(off); }
};

inline GramFull gram_full(cplx zeta) {
    return {norm_sq_full(zeta), overlap_full(zeta)};
}

/// ||C+ phi^+ + C- phi^-||^2 from the Gram matrix.
inline double combo_norm_sq(cplx c_plus, cplx c_minus, const GramFull& G) {
    const double a = std::norm(c_plus) + std::norm(c_minus);
    const double cross = 2.0 * (c_plus * std::conj(c_minus) * std::conj(G.off)).real();
    return a * G.diag + cross;
}

/// Two-sided comparability data for the coefficient norm: returns
/// (gamma * ||v||^2, |C+|^2 + |C-|^2).  The ratio tends to a constant as
/// gamma grows, but no sharp value is pinned down, so callers report the
/// observed ratio rather than assert fixed bounds.
inline std::pair<double, double> coeff_norm_bounds(cplx c_plus, cplx c_minus, cplx zeta) {
    const auto G = gram_full(zeta);
    return {zeta.real() * combo_norm_sq(c_plus, c_minus, G),
            std::norm(c_plus) + std::norm(c_minus)};
}

} // namespace oscgraph

#endif
