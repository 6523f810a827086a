#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "params.hpp"

namespace oscgraph {

// Strength of one coupling constant relative to the nu*sqrt(2) threshold.
enum class Coupling { Zero, Weak, Critical, Strong };

// The threshold comparison is done on squares, alpha^2 vs 2 nu^2, inside a
// relative tolerance band.  The band absorbs the rounding of inputs like
// alpha = std::sqrt(2.0) * nu, whose square lands within a few ulp of 2 nu^2,
// while staying far below any physically distinct coupling.
inline Coupling classify_coupling(double alpha, double nu, double rel_tol = 1e-12) {
    if (!(nu > 0.0) || !(alpha >= 0.0) || !std::isfinite(alpha) || !std::isfinite(nu))
        throw std::invalid_argument("classify_coupling: need finite nu > 0 and alpha >= 0");
    if (alpha == 0.0) return Coupling::Zero;
    const double a2 = alpha * alpha;
    const double c2 = 2.0 * nu * nu;
    if (std::abs(a2 - c2) <= rel_tol * std::max(a2, c2)) return Coupling::Critical;
    return a2 > c2 ? Coupling::Strong : Coupling::Weak;
}

enum class RegimeTag { SubSub, CritSub, SubCrit, CritCrit, Supercritical };

inline const char* regime_name(RegimeTag tag) {
    switch (tag) {
        case RegimeTag::SubSub: return "SubSub";
        case RegimeTag::CritSub: return "CritSub";
        case RegimeTag::SubCrit: return "SubCrit";
        case RegimeTag::CritCrit: return "CritCrit";
        case RegimeTag::Supercritical: return "Supercritical";
    }
    throw std::logic_error("regime_name: invalid tag");
}

// Regime of the coupled pair together with the bottom of the continuous
// spectrum.  edge is -infinity in the supercritical regime.
struct Regime {
    RegimeTag tag;
    double edge;
};

inline Regime classify(const ModelParams& par, double rel_tol = 1e-12) {
    par.validate();
    const Coupling cp = classify_coupling(par.alpha_plus, par.nu_plus, rel_tol);
    const Coupling cm = classify_coupling(par.alpha_minus, par.nu_minus, rel_tol);
    if (cp == Coupling::Strong || cm == Coupling::Strong)
        return {RegimeTag::Supercritical, -std::numeric_limits<double>::infinity()};
    const bool crit_p = cp == Coupling::Critical;
    const bool crit_m = cm == Coupling::Critical;
    if (crit_p && crit_m) return {RegimeTag::CritCrit, 0.0};
    if (crit_p) return {RegimeTag::CritSub, 0.5 * par.nu_minus * par.nu_minus};
    if (crit_m) return {RegimeTag::SubCrit, 0.5 * par.nu_plus * par.nu_plus};
    return {RegimeTag::SubSub, 0.5 * (par.nu_plus * par.nu_plus + par.nu_minus * par.nu_minus)};
}

// Spectral multiplicity count; the supercritical regime makes it infinite.
struct Multiplicity {
    std::int64_t value = 0;
    bool infinite = false;

    static Multiplicity finite(std::int64_t v) { return {v, false}; }
    static Multiplicity inf() { return {0, true}; }

    friend bool operator==(const Multiplicity&, const Multiplicity&) = default;
};

inline std::string to_string(const Multiplicity& m) {
    return m.infinite ? std::string("inf") : std::to_string(m.value);
}

inline std::ostream& operator<<(std::ostream& os, const Multiplicity& m) {
    return os << to_string(m);
}

// Multiplicity of the half-line problem with one transversal oscillator.
// The free count is the number of open channels: the n with
// -nu^2/2 <= lambda - nu^2 n < nu^2/2 (zero below the spectrum).  Critical
// coupling adds one extra branch on [0, inf), strong coupling adds it on all
// of R.  Intervals are closed on the left, so a lambda sitting exactly on a
// channel threshold counts the channel that opens there.
inline Multiplicity mult_one_osc(double lambda, double alpha, double nu,
                                 double rel_tol = 1e-12) {
    const Coupling cpl = classify_coupling(alpha, nu, rel_tol);
    const double t = lambda / (nu * nu) + 0.5;
    const std::int64_t open = t < 0.0 ? 0 : static_cast<std::int64_t>(std::floor(t));
    switch (cpl) {
        case Coupling::Zero:
        case Coupling::Weak: return Multiplicity::finite(open);
        case Coupling::Critical: return Multiplicity::finite(lambda >= 0.0 ? open + 1 : 0);
        case Coupling::Strong: return Multiplicity::finite(open + 1);
    }
    throw std::logic_error("mult_one_osc: invalid coupling");
}

// Multiplicity of the coupled pair: infinite when supercritical, otherwise
// each channel of one oscillator shifts the half-line problem of the other
// and the contributions add.  Terms vanish once the shifted argument falls
// below the one-oscillator edge, which truncates both sums.
inline Multiplicity mult_two_osc(double lambda, const ModelParams& par,
                                 double rel_tol = 1e-12) {
    par.validate();
    if (classify(par, rel_tol).tag == RegimeTag::Supercritical) return Multiplicity::inf();
    std::int64_t total = 0;
    const auto side = [&](double alpha, double nu, double shift_nu) {
        const double step = shift_nu * shift_nu;
        for (std::int64_t k = 0;; ++k) {
            const double arg = lambda - step * (static_cast<double>(k) + 0.5);
            if (arg < -0.5 * nu * nu) break;
            total += mult_one_osc(arg, alpha, nu, rel_tol).value;
        }
    };
    side(par.alpha_plus, par.nu_plus, par.nu_minus);
    side(par.alpha_minus, par.nu_minus, par.nu_plus);
    return Multiplicity::finite(total);
}

// Decoupled full-line reference: every channel with r_{m,n} <= lambda carries
// two plane-wave branches.
inline Multiplicity mult_free_full_line(double lambda, const ModelParams& par) {
    par.validate();
    const double sp = par.nu_plus * par.nu_plus;
    const double sm = par.nu_minus * par.nu_minus;
    std::int64_t pairs = 0;
    for (std::int64_t m = 0;; ++m) {
        const double rem = lambda - sp * (static_cast<double>(m) + 0.5);
        if (rem < 0.5 * sm) break;
        pairs += static_cast<std::int64_t>(std::floor(rem / sm + 0.5));
    }
    return Multiplicity::finite(2 * pairs);
}

}  // namespace oscgraph
