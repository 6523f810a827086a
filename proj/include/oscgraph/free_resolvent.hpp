#ifndef OSCGRAPH_FREE_RESOLVENT_HPP
#define OSCGRAPH_FREE_RESOLVENT_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "basis.hpp"
#include "piecewise_exp.hpp"
#include "sources.hpp"

namespace oscgraph {

namespace detail {

/// Antiderivative of x^k e^{sx} as e^{sx} sum_j d_j x^j (s != 0).
inline std::vector<std::complex<double>> antideriv_coeffs(int k, std::complex<double> s) {
    std::vector<std::complex<double>> cur{1.0 / s};
    for (int j = 1; j <= k; ++j) {
        std::vector<std::complex<double>> next(std::size_t(j) + 1);
        next[std::size_t(j)] = 1.0 / s;
        for (int i = 0; i < j; ++i) next[std::size_t(i)] = -(double(j) / s) * cur[std::size_t(i)];
        cur = std::move(next);
    }
    return cur;
}

inline std::complex<double> eval_antideriv(const std::vector<std::complex<double>>& d,
                                           std::complex<double> s, double x) {
    std::complex<double> p{};
    for (std::size_t j = d.size(); j-- > 0;) p = p * x + d[j];
    return p * std::exp(s * x);
}

inline void push_term(std::vector<ExpTerm>& out, std::complex<double> c, int k,
                      std::complex<double> s) {
    if (c == std::complex<double>(0.0, 0.0)) return;
    for (auto& t : out)
        if (t.k == k && t.s == s) {
            t.c += c;
            return;
        }
    out.push_back({c, k, s});
}

} // namespace detail

/// Exact u = (2ζ)^{-1} ∫ e^{-ζ|x-t|} f(t) dt for piecewise-exponential f.
/// The solution of -u'' + ζ²u = f on R is again piecewise exponential on the
/// same breakpoints: per piece, the kernel splits into e^{-ζx}·(left
/// accumulation) + e^{ζx}·(right accumulation), each with closed-form
/// antiderivatives.  Near-resonant rates (source rate within ~0 of ∓ζ) take a
/// Taylor branch on finite pieces to avoid the cancelling antiderivative.
inline PiecewiseExpPoly apply_phi_pw(std::complex<double> zeta, const PiecewiseExpPoly& f) {
    require_valid_zeta(zeta);
    if (f.is_zero()) return PiecewiseExpPoly::zero();
    const auto& br = f.breakpoints();
    const auto& pcs = f.pieces();
    if (br.empty()) throw std::domain_error("source must have breakpoints");
    const double gamma = zeta.real();
    double bmax = 0.0;
    for (double b : br) bmax = std::max(bmax, std::abs(b));
    if (gamma * bmax > 650.0)
        throw std::overflow_error("piece extent too large for decay rate");

    for (const auto& t : pcs.front())
        if (t.c != std::complex<double>(0.0, 0.0) && !(t.s.real() + gamma > 0.0))
            throw std::domain_error("left tail of source not integrable against kernel");
    for (const auto& t : pcs.back())
        if (t.c != std::complex<double>(0.0, 0.0) && !(t.s.real() - gamma < 0.0))
            throw std::domain_error("right tail of source not integrable against kernel");

    const std::complex<double> half = 1.0 / (2.0 * zeta);
    const std::size_t np = pcs.size();
    const std::complex<double> zero_c{0.0, 0.0};

    // L[i] = ∫_{-inf}^{left end of piece i} e^{ζt} f;  Rt[i] = ∫_{right end}^{inf} e^{-ζt} f
    std::vector<std::complex<double>> L(np), Rt(np);
    for (std::size_t i = 1; i < np; ++i) {
        L[i] = L[i - 1];
        for (const auto& t : pcs[i - 1]) {
            if (t.c == zero_c) continue;
            const std::complex<double> sig = t.s + zeta;
            L[i] += (i - 1 == 0) ? t.c * exp_monomial_integral_left(t.k, sig, br[0])
                                 : t.c * exp_monomial_integral(t.k, sig, br[i - 2], br[i - 1]);
        }
    }
    for (std::size_t i = np - 1; i-- > 0;) {
        Rt[i] = Rt[i + 1];
        for (const auto& t : pcs[i + 1]) {
            if (t.c == zero_c) continue;
            const std::complex<double> tau = t.s - zeta;
            Rt[i] += (i + 1 == np - 1) ? t.c * exp_monomial_integral_right(t.k, tau, br[i])
                                       : t.c * exp_monomial_integral(t.k, tau, br[i], br[i + 1]);
        }
    }

    const auto small_rate = [](std::complex<double> s, double a, double b) {
        return std::abs(s) * std::max(std::abs(a), std::abs(b)) < 0.25;
    };
    constexpr int taylor_order = 13;

    std::vector<std::vector<ExpTerm>> out(np);
    for (std::size_t i = 0; i < np; ++i) {
        auto& o = out[i];
        const bool left_inf = (i == 0), right_inf = (i == np - 1);
        const double a = left_inf ? 0.0 : br[i - 1];
        const double b = right_inf ? 0.0 : br[i];
        if (!left_inf) detail::push_term(o, half * L[i], 0, -zeta);
        if (!right_inf) detail::push_term(o, half * Rt[i], 0, zeta);
        for (const auto& t : pcs[i]) {
            if (t.c == zero_c) continue;

            // e^{-ζx} ∫_{a}^{x} e^{ζt} t^k e^{ρt} dt
            const std::complex<double> sig = t.s + zeta;
            if (sig == zero_c) {
                detail::push_term(o, half * t.c / double(t.k + 1), t.k + 1, -zeta);
                detail::push_term(o, -half * t.c * std::pow(a, t.k + 1) / double(t.k + 1), 0,
                                  -zeta);
            } else if (!left_inf && small_rate(sig, a, b)) {
                std::complex<double> spow{1.0, 0.0}, cpart{};
                double fact = 1.0;
                for (int n = 0; n <= taylor_order; ++n) {
                    const std::complex<double> w = spow / (fact * double(t.k + n + 1));
                    detail::push_term(o, half * t.c * w, t.k + n + 1, -zeta);
                    cpart += w * std::pow(a, t.k + n + 1);
                    spow *= sig;
                    fact *= double(n + 1);
                }
                detail::push_term(o, -half * t.c * cpart, 0, -zeta);
            } else {
                if (left_inf && std::abs(sig) < 1e-6 * (1.0 + gamma))
                    throw std::domain_error("source rate too close to kernel rate on a tail");
                const auto d = detail::antideriv_coeffs(t.k, sig);
                for (int j = 0; j <= t.k; ++j)
                    detail::push_term(o, half * t.c * d[std::size_t(j)], j, t.s);
                if (!left_inf)
                    detail::push_term(o, -half * t.c * detail::eval_antideriv(d, sig, a), 0,
                                      -zeta);
            }

            // e^{ζx} ∫_{x}^{b} e^{-ζt} t^k e^{ρt} dt
            const std::complex<double> tau = t.s - zeta;
            if (tau == zero_c) {
                detail::push_term(o, -half * t.c / double(t.k + 1), t.k + 1, zeta);
                detail::push_term(o, half * t.c * std::pow(b, t.k + 1) / double(t.k + 1), 0,
                                  zeta);
            } else if (!right_inf && small_rate(tau, a, b)) {
                std::complex<double> tpow{1.0, 0.0}, cpart{};
                double fact = 1.0;
                for (int n = 0; n <= taylor_order; ++n) {
                    const std::complex<double> w = tpow / (fact * double(t.k + n + 1));
                    detail::push_term(o, -half * t.c * w, t.k + n + 1, zeta);
                    cpart += w * std::pow(b, t.k + n + 1);
                    tpow *= tau;
                    fact *= double(n + 1);
                }
                detail::push_term(o, half * t.c * cpart, 0, zeta);
            } else {
                if (right_inf && std::abs(tau) < 1e-6 * (1.0 + gamma))
                    throw std::domain_error("source rate too close to kernel rate on a tail");
                const auto d = detail::antideriv_coeffs(t.k, tau);
                for (int j = 0; j <= t.k; ++j)
                    detail::push_term(o, -half * t.c * d[std::size_t(j)], j, t.s);
                if (!right_inf)
                    detail::push_term(o, half * t.c * detail::eval_antideriv(d, tau, b), 0,
                                      zeta);
            }
        }
    }
    return PiecewiseExpPoly::from_pieces(br, std::move(out));
}

/// Exact Dirichlet-at-0 solution: image-kernel formula per half line, zero
/// across the origin.
inline PiecewiseExpPoly apply_phi_circ_pw(std::complex<double> zeta,
                                          const PiecewiseExpPoly& f) {
    require_valid_zeta(zeta);
    const double inf = std::numeric_limits<double>::infinity();
    const std::complex<double> half = 1.0 / (2.0 * zeta);
    PiecewiseExpPoly out = PiecewiseExpPoly::zero();
    const PiecewiseExpPoly fp = f.restricted(0.0, inf);
    if (!fp.is_zero()) {
        const std::complex<double> ip = exp_weighted_integral(fp, -zeta, 0.0, inf);
        const PiecewiseExpPoly image =
            PiecewiseExpPoly::from_pieces({0.0}, {{}, {{-half * ip, 0, -zeta}}});
        out = out + (apply_phi_pw(zeta, fp) + image).restricted(0.0, inf);
    }
    const PiecewiseExpPoly fm = f.restricted(-inf, 0.0);
    if (!fm.is_zero()) {
        const std::complex<double> im = exp_weighted_integral(fm, zeta, -inf, 0.0);
        const PiecewiseExpPoly image =
            PiecewiseExpPoly::from_pieces({0.0}, {{{-half * im, 0, zeta}}, {}});
        out = out + (apply_phi_pw(zeta, fm) + image).restricted(-inf, 0.0);
    }
    return out;
}

/// Pointwise full-line free solution; closed-form sources use the exact
/// engine, others adaptive quadrature against the kernel.
inline std::complex<double> apply_phi(std::complex<double> zeta, const SourceFunction& f,
                                      double x) {
    require_valid_zeta(zeta);
    if (f.exact()) return apply_phi_pw(zeta, f.pw())(x);
    double err = 0.0;
    const std::complex<double> raw = f.integrate_kernel(
        [zeta, x](double t) { return std::exp(-zeta * std::abs(x - t)); }, {x}, 1e-12, &err);
    if (f.kind() != SourceFunction::Kind::GridSamples && err > 1e-8 * (1.0 + std::abs(raw)))
        throw std::runtime_error("kernel quadrature failed; achieved error " +
                                 std::to_string(err));
    return raw / (2.0 * zeta);
}

/// Pointwise Dirichlet-at-0 solution.
inline std::complex<double> apply_phi_circ(std::complex<double> zeta, const SourceFunction& f,
                                           double x) {
    require_valid_zeta(zeta);
    if (x == 0.0) return {};
    if (f.exact()) return apply_phi_circ_pw(zeta, f.pw())(x);
    double err = 0.0;
    const auto kernel = [zeta, x](double t) -> std::complex<double> {
        if ((x > 0.0) != (t > 0.0) || t == 0.0) return {};
        return std::exp(-zeta * std::abs(x - t)) -
               std::exp(-zeta * (std::abs(x) + std::abs(t)));
    };
    const std::complex<double> raw = f.integrate_kernel(kernel, {0.0, x}, 1e-12, &err);
    if (f.kind() != SourceFunction::Kind::GridSamples && err > 1e-8 * (1.0 + std::abs(raw)))
        throw std::runtime_error("kernel quadrature failed; achieved error " +
                                 std::to_string(err));
    return raw / (2.0 * zeta);
}

/// The rank-one difference Qf = (Φ° − Φ)f = coefficient · g_ζ.
struct RankOnePart {
    std::complex<double> coefficient;
    BasisFunction kernel;

    std::complex<double> operator()(double x) const { return coefficient * kernel(x); }
    PiecewiseExpPoly pw() const { return kernel.pw().scaled(coefficient); }
};

inline RankOnePart apply_q(std::complex<double> zeta, const SourceFunction& f) {
    require_valid_zeta(zeta);
    std::complex<double> pairing;
    if (f.exact()) {
        pairing = bilinear(f.pw(), g_kernel(zeta).pw());
    } else {
        pairing = f.integrate_kernel(
            [zeta](double t) { return std::exp(-zeta * std::abs(t)); }, {0.0});
    }
    return {-pairing / (2.0 * zeta), g_kernel(zeta)};
}

/// Operator norm of the rank-one difference: (2|ζ| Re ζ)^{-1}.
inline double q_norm(std::complex<double> zeta) {
    require_valid_zeta(zeta);
    return 1.0 / (2.0 * std::abs(zeta) * zeta.real());
}

/// Schur-test bound for Φ (and Φ°): both sup-integrals of the absolute
/// kernel equal (2|ζ|)^{-1} · 2/Re ζ, so the bound is (|ζ| Re ζ)^{-1}.
inline double schur_norm_bound(std::complex<double> zeta) {
    require_valid_zeta(zeta);
    return 1.0 / (std::abs(zeta) * zeta.real());
}

} // namespace oscgraph

#endif
