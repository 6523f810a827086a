#ifndef OSCGRAPH_PARAMS_HPP
#define OSCGRAPH_PARAMS_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oscgraph {

using cplx = std::complex<double>;

/// Two-oscillator model data: coupling strengths alpha_pm >= 0 and
/// oscillator frequencies nu_pm > 0.
struct ModelParams {
    double alpha_plus  = 1.0;
    double alpha_minus = 1.0;
    double nu_plus     = 1.0;
    double nu_minus    = 1.0;

    void validate() const {
        if (!(nu_plus > 0.0) || !(nu_minus > 0.0))
            throw std::domain_error("nu must be positive");
        if (alpha_plus < 0.0 || alpha_minus < 0.0)
            throw std::domain_error("alpha must be nonnegative");
    }

    /// Swap the two boundary points (x -> -x symmetry).
    ModelParams mirrored() const {
        return ModelParams{alpha_minus, alpha_plus, nu_minus, nu_plus};
    }
};

/// Transverse channel label (m, n), both >= 0.
struct ChannelIndex {
    int m = 0;
    int n = 0;
    friend bool operator==(const ChannelIndex&, const ChannelIndex&) = default;
    friend bool operator<(const ChannelIndex& a, const ChannelIndex& b) {
        return a.m != b.m ? a.m < b.m : a.n < b.n;
    }
};

/// Channel energy r_{m,n} = nu_+^2 (m + 1/2) + nu_-^2 (n + 1/2).
inline double channel_energy(const ModelParams& p, ChannelIndex idx) {
    if (idx.m < 0 || idx.n < 0) throw std::domain_error("negative channel index");
    return p.nu_plus * p.nu_plus * (idx.m + 0.5) +
           p.nu_minus * p.nu_minus * (idx.n + 0.5);
}

/// Smallest channel energy r_{0,0}.
inline double ground_energy(const ModelParams& p) {
    return channel_energy(p, {0, 0});
}

/// zeta_{m,n}(Lambda) = sqrt(r - Lambda) on the branch with Re zeta > 0 and
/// Im Lambda * Im zeta <= 0.  Throws for Lambda on [r, infinity) where no such
/// branch exists.
inline cplx zeta_branch(double r, cplx Lambda) {
    const cplx w = cplx(r, 0.0) - Lambda;
    if (w == cplx(0.0, 0.0)) throw std::domain_error("branch point");
    cplx z = std::sqrt(w);
    if (z.real() < 0.0) z = -z;
    if (!(z.real() > 0.0)) throw std::domain_error("branch point");
    // principal sqrt maps +-upper/lower half planes into Re > 0 with the
    // opposite Im sign relative to Lambda; keep this pinned.
    if (Lambda.imag() * z.imag() > 0.0) throw std::logic_error("zeta branch violated");
    return z;
}

/// Spectral parameter wrapper.  Formula evaluation accepts any Lambda off
/// [r_{0,0}, infinity); inversions additionally require Im Lambda != 0.
struct SpectralParam {
    cplx Lambda{0.0, 1.0};

    bool invertible_side() const { return Lambda.imag() != 0.0; }
    void require_invertible() const {
        if (!invertible_side())
            throw std::domain_error("Im Lambda = 0: resolvent-side operations need a nonreal spectral parameter");
    }
};

/// Per-channel scalar pack: r, zeta, p = zeta sqrt(r) and the Jacobi couplings
/// q^+_{m,n} = sqrt(m) (r_{m,n} r_{m-1,n})^{1/4},
/// q^-_{m,n} = sqrt(n) (r_{m,n} r_{m,n-1})^{1/4}.
struct ChannelScalars {
    ChannelIndex idx;
    double r = 0.0;
    cplx zeta{};
    cplx p{};
    double q_plus  = 0.0;   // 0 when m = 0
    double q_minus = 0.0;   // 0 when n = 0

    double gamma() const { return zeta.real(); }
    double delta() const { return zeta.imag(); }
};

inline ChannelScalars channel_scalars(const ModelParams& p, ChannelIndex idx, cplx Lambda) {
    ChannelScalars s;
    s.idx = idx;
    s.r = channel_energy(p, idx);
    s.zeta = zeta_branch(s.r, Lambda);
    s.p = s.zeta * std::sqrt(s.r);
    if (idx.m > 0) {
        const double rm = channel_energy(p, {idx.m - 1, idx.n});
        s.q_plus = std::sqrt(double(idx.m)) * std::pow(s.r * rm, 0.25);
    }
    if (idx.n > 0) {
        const double rn = channel_energy(p, {idx.m, idx.n - 1});
        s.q_minus = std::sqrt(double(idx.n)) * std::pow(s.r * rn, 0.25);
    }
    return s;
}

/// mu_pm = sqrt(2)/alpha_pm; only defined for alpha > 0.
inline double mu_coupling(double alpha) {
    if (!(alpha > 0.0)) throw std::domain_error("mu undefined for alpha = 0");
    return std::sqrt(2.0) / alpha;
}

/// Normalized Hermite functions chi_n(q) = H_n(q) e^{-q^2/2} / (pi^{1/4} 2^{n/2} sqrt(n!)),
/// evaluated by the upward recurrence
///   sqrt(n+1) chi_{n+1} = sqrt(2) q chi_n - sqrt(n) chi_{n-1}.
inline double hermite_chi(int n, double q) {
    if (n < 0) throw std::domain_error("negative Hermite index");
    const double chi0 = std::exp(-0.5 * q * q) / std::pow(M_PI, 0.25);
    if (n == 0) return chi0;
    double prev = chi0;
    double cur = std::sqrt(2.0) * q * chi0;
    for (int k = 1; k < n; ++k) {
        double next = (std::sqrt(2.0) * q * cur - std::sqrt(double(k)) * prev) / std::sqrt(double(k + 1));
        prev = cur;
        cur = next;
    }
    return cur;
}

/// First n+1 values chi_0(q) .. chi_n(q) in one sweep.
inline std::vector<double> hermite_chi_row(int n, double q) {
    std::vector<double> out(std::size_t(n) + 1);
    out[0] = std::exp(-0.5 * q * q) / std::pow(M_PI, 0.25);
    if (n >= 1) out[1] = std::sqrt(2.0) * q * out[0];
    for (int k = 1; k < n; ++k)
        out[std::size_t(k) + 1] =
            (std::sqrt(2.0) * q * out[std::size_t(k)] - std::sqrt(double(k)) * out[std::size_t(k) - 1]) /
            std::sqrt(double(k + 1));
    return out;
}

} // namespace oscgraph

#endif
