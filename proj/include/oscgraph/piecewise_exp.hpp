#ifndef OSCGRAPH_PIECEWISE_EXP_HPP
#define OSCGRAPH_PIECEWISE_EXP_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace oscgraph {

namespace detail {

inline std::complex<double> cexpm1(std::complex<double> z) {
    if (std::abs(z) < 1e-2) {
        // series keeps full precision where exp(z)-1 would cancel
        std::complex<double> term = z, sum = z;
        for (int j = 2; j < 12; ++j) {
            term *= z / double(j);
            sum += term;
        }
        return sum;
    }
    return std::exp(z) - 1.0;
}

} // namespace detail

/// One monomial c * x^k * e^{s x}.
struct ExpTerm {
    std::complex<double> c{};
    int k = 0;
    std::complex<double> s{};
};

namespace detail {

/// Moment functions M_j(z) = int_0^1 t^j e^{zt} dt for j = 0..jmax.
/// Upward recurrence M_j = (e^z - j M_{j-1})/z is stable while j <= |z|;
/// above |z| the values come from the downward recurrence
/// M_{j-1} = (e^z - z M_j)/j seeded far enough up that the seed error damps
/// out (the homogeneous solution grows upward like j!/z^j).
inline void moment_funcs(std::complex<double> z, int jmax,
                         std::vector<std::complex<double>>& M) {
    M.assign(std::size_t(jmax) + 1, {});
    const double az = std::abs(z);
    if (az < 0.5) {
        // series: M_j = sum_i z^i / (i! (j+i+1))
        for (int j = 0; j <= jmax; ++j) {
            std::complex<double> zp{1.0, 0.0}, sum{};
            double fact = 1.0;
            for (int i = 0; i < 40; ++i) {
                const std::complex<double> term = zp / (fact * double(j + i + 1));
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum) && i > 2) break;
                zp *= z;
                fact *= double(i + 1);
            }
            M[std::size_t(j)] = sum;
        }
        return;
    }
    const std::complex<double> ez = std::exp(z);
    const int up_to = std::min(jmax, int(az));
    M[0] = cexpm1(z) / z;
    for (int j = 1; j <= up_to; ++j) M[std::size_t(j)] = (ez - double(j) * M[std::size_t(j) - 1]) / z;
    if (up_to < jmax) {
        const int jstar = jmax + int(az) + 30;
        std::complex<double> cur{};
        for (int j = jstar; j > up_to; --j) {
            const std::complex<double> prev = (ez - z * cur) / double(j);
            if (j - 1 <= jmax && j - 1 > up_to) M[std::size_t(j) - 1] = prev;
            cur = prev;
        }
    }
}

} // namespace detail

/// Integral of x^k e^{sx} over [a, b] (finite), via the substitution
/// x = a + (b-a) t and binomial expansion onto the moment functions.
inline std::complex<double> exp_monomial_integral(int k, std::complex<double> s,
                                                  double a, double b) {
    if (k < 0) throw std::invalid_argument("negative power");
    if (b <= a) return {};
    if (s == std::complex<double>(0.0, 0.0)) {
        const long double acc =
            std::pow((long double)b, k + 1) - std::pow((long double)a, k + 1);
        return std::complex<double>(double(acc / (k + 1)), 0.0);
    }
    const double h = b - a;
    const std::complex<double> z = s * h;
    std::vector<std::complex<double>> M;
    detail::moment_funcs(z, k, M);
    // sum_j C(k,j) a^{k-j} h^j M_j(z)
    std::complex<double> sum{};
    long double binom = 1.0L;
    for (int j = 0; j <= k; ++j) {
        const long double w =
            binom * std::pow((long double)a, k - j) * std::pow((long double)h, j);
        sum += std::complex<double>(double(w), 0.0) * M[std::size_t(j)];
        binom = binom * (k - j) / (j + 1.0L);
    }
    return h * std::exp(s * a) * sum;
}

/// Integral of x^k e^{sx} over [a, +inf); requires Re s < 0.  Exact gamma
/// sums: int_0^inf u^j e^{su} du = j!/(-s)^{j+1}.
inline std::complex<double> exp_monomial_integral_right(int k, std::complex<double> s, double a) {
    if (!(s.real() < 0.0)) throw std::domain_error("divergent tail integral");
    std::complex<double> sum{};
    long double binom = 1.0L, fact = 1.0L;
    std::complex<double> ms_pow = -s;
    for (int j = 0; j <= k; ++j) {
        sum += std::complex<double>(double(binom * std::pow((long double)a, k - j) * fact), 0.0) /
               ms_pow;
        binom = binom * (k - j) / (j + 1.0L);
        fact *= (j + 1.0L);
        ms_pow *= -s;
    }
    return std::exp(s * a) * sum;
}

/// Integral of x^k e^{sx} over (-inf, b]; requires Re s > 0.
inline std::complex<double> exp_monomial_integral_left(int k, std::complex<double> s, double b) {
    if (!(s.real() > 0.0)) throw std::domain_error("divergent tail integral");
    std::complex<double> sum{};
    long double binom = 1.0L, fact = 1.0L;
    std::complex<double> s_pow = s;
    for (int j = 0; j <= k; ++j) {
        const long double sign = (j % 2 == 0) ? 1.0L : -1.0L;
        sum += std::complex<double>(double(sign * binom * std::pow((long double)b, k - j) * fact),
                                    0.0) /
               s_pow;
        binom = binom * (k - j) / (j + 1.0L);
        fact *= (j + 1.0L);
        s_pow *= s;
    }
    return std::exp(s * b) * sum;
}

/// Piecewise function on R whose pieces are finite sums of c x^k e^{sx}.
/// Piece i lives on (breaks[i-1], breaks[i]); the first and last pieces extend
/// to -inf / +inf.  An empty term list means the piece is identically zero.
class PiecewiseExpPoly {
public:
    PiecewiseExpPoly() : pieces_(1) {}

    static PiecewiseExpPoly zero() { return PiecewiseExpPoly(); }

    /// Single term on [lo, hi], zero outside.
    static PiecewiseExpPoly supported(double lo, double hi, std::vector<ExpTerm> terms) {
        PiecewiseExpPoly f;
        f.breaks_ = {lo, hi};
        f.pieces_ = {{}, std::move(terms), {}};
        return f;
    }

    /// Piecewise definition from explicit breakpoints; pieces.size() must be
    /// breaks.size() + 1.
    static PiecewiseExpPoly from_pieces(std::vector<double> breaks,
                                        std::vector<std::vector<ExpTerm>> pieces) {
        if (pieces.size() != breaks.size() + 1)
            throw std::invalid_argument("pieces/breaks mismatch");
        if (!std::is_sorted(breaks.begin(), breaks.end()))
            throw std::invalid_argument("breakpoints not sorted");
        PiecewiseExpPoly f;
        f.breaks_ = std::move(breaks);
        f.pieces_ = std::move(pieces);
        return f;
    }

    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<std::vector<ExpTerm>>& pieces() const { return pieces_; }

    bool is_zero() const {
        for (const auto& pc : pieces_)
            for (const auto& t : pc)
                if (t.c != std::complex<double>(0.0, 0.0)) return false;
        return true;
    }

    /// Value at x (right-continuous at breakpoints).
    std::complex<double> operator()(double x) const { return eval_piece(piece_at(x, +1), x); }

    /// One-sided value; side < 0 evaluates the piece to the left of x.
    std::complex<double> eval(double x, int side = +1) const {
        return eval_piece(piece_at(x, side), x);
    }

    /// One-sided first derivative.
    std::complex<double> eval_deriv(double x, int side = +1) const {
        const auto& pc = pieces_[piece_at(x, side)];
        std::complex<double> v{};
        for (const auto& t : pc) {
            std::complex<double> e = std::exp(t.s * x);
            std::complex<double> xp = (t.k == 0) ? 1.0 : std::pow(x, t.k);
            v += t.c * e * (t.s * xp + (t.k > 0 ? double(t.k) * std::pow(x, t.k - 1) : 0.0));
        }
        return v;
    }

    /// Piecewise derivative (ignores jump deltas at breakpoints).
    PiecewiseExpPoly derivative() const {
        PiecewiseExpPoly d;
        d.breaks_ = breaks_;
        d.pieces_.assign(pieces_.size(), {});
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            for (const auto& t : pieces_[i]) {
                if (t.s != std::complex<double>(0.0, 0.0) || t.k == 0)
                    d.pieces_[i].push_back({t.c * t.s, t.k, t.s});
                if (t.k > 0) d.pieces_[i].push_back({t.c * double(t.k), t.k - 1, t.s});
            }
        }
        return d;
    }

    PiecewiseExpPoly conjugated() const {
        PiecewiseExpPoly g = *this;
        for (auto& pc : g.pieces_)
            for (auto& t : pc) {
                t.c = std::conj(t.c);
                t.s = std::conj(t.s);
            }
        return g;
    }

    /// x -> -x.
    PiecewiseExpPoly reflected() const {
        PiecewiseExpPoly g;
        g.breaks_.assign(breaks_.rbegin(), breaks_.rend());
        for (auto& b : g.breaks_) b = -b;
        g.pieces_.assign(pieces_.rbegin(), pieces_.rend());
        for (auto& pc : g.pieces_)
            for (auto& t : pc) {
                if (t.k % 2 == 1) t.c = -t.c;
                t.s = -t.s;
            }
        return g;
    }

    PiecewiseExpPoly scaled(std::complex<double> a) const {
        PiecewiseExpPoly g = *this;
        for (auto& pc : g.pieces_)
            for (auto& t : pc) t.c *= a;
        return g;
    }

    friend PiecewiseExpPoly operator+(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g) {
        return combine(f, g, false);
    }
    friend PiecewiseExpPoly operator-(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g) {
        return combine(f, g, true);
    }

    friend PiecewiseExpPoly operator*(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g) {
        std::vector<double> br = merged_breaks(f.breaks_, g.breaks_);
        PiecewiseExpPoly h;
        h.breaks_ = br;
        h.pieces_.assign(br.size() + 1, {});
        for (std::size_t i = 0; i <= br.size(); ++i) {
            const double probe = probe_point(br, i);
            const auto& pf = f.pieces_[f.piece_at(probe, 0)];
            const auto& pg = g.pieces_[g.piece_at(probe, 0)];
            auto& out = h.pieces_[i];
            out.reserve(pf.size() * pg.size());
            for (const auto& a : pf)
                for (const auto& b : pg)
                    out.push_back({a.c * b.c, a.k + b.k, a.s + b.s});
        }
        return h;
    }

    /// Zero the function outside [lo, hi]; either bound may be infinite.
    PiecewiseExpPoly restricted(double lo, double hi) const {
        PiecewiseExpPoly g = *this;
        if (std::isfinite(lo)) g = g.with_break(lo);
        if (std::isfinite(hi)) g = g.with_break(hi);
        for (std::size_t i = 0; i < g.pieces_.size(); ++i) {
            const double probe = probe_point(g.breaks_, i);
            if (probe < lo || probe > hi) g.pieces_[i].clear();
        }
        return g;
    }

    /// Copy with x0 inserted as a breakpoint.
    PiecewiseExpPoly with_break(double x0) const {
        PiecewiseExpPoly g = *this;
        auto it = std::lower_bound(g.breaks_.begin(), g.breaks_.end(), x0);
        if (it != g.breaks_.end() && *it == x0) return g;
        const std::size_t pos = std::size_t(it - g.breaks_.begin());
        g.breaks_.insert(it, x0);
        g.pieces_.insert(g.pieces_.begin() + long(pos), g.pieces_[pos]);
        return g;
    }

    /// Exact integral over all of R.  Throws if a nonzero tail fails to decay.
    std::complex<double> integral() const {
        std::complex<double> total{};
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const bool left_inf = (i == 0);
            const bool right_inf = (i == pieces_.size() - 1);
            for (const auto& t : pieces_[i]) {
                if (t.c == std::complex<double>(0.0, 0.0)) continue;
                if (left_inf && breaks_.empty())
                    throw std::domain_error("integral over R of unbroken piece");
                if (left_inf)
                    total += t.c * exp_monomial_integral_left(t.k, t.s, breaks_.front());
                else if (right_inf)
                    total += t.c * exp_monomial_integral_right(t.k, t.s, breaks_.back());
                else
                    total += t.c * exp_monomial_integral(t.k, t.s, breaks_[i - 1], breaks_[i]);
            }
        }
        return total;
    }

    std::complex<double> integrate(double a, double b) const {
        return restricted(a, b).integral();
    }

    /// Bilinear pairing  ∫ f g dx  (no conjugation).
    friend std::complex<double> bilinear(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g) {
        return (f * g).integral();
    }

    /// Sesquilinear inner product  ∫ f conj(g) dx.
    friend std::complex<double> inner(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g) {
        return (f * g.conjugated()).integral();
    }

    double norm_sq() const { return inner(*this, *this).real(); }
    double norm() const { return std::sqrt(norm_sq()); }

    /// Drop terms with |c| below drop_tol * max|c| and merge identical (k, s).
    PiecewiseExpPoly compacted(double drop_tol = 0.0) const {
        PiecewiseExpPoly g;
        g.breaks_ = breaks_;
        g.pieces_.assign(pieces_.size(), {});
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            double cmax = 0.0;
            for (const auto& t : pieces_[i]) cmax = std::max(cmax, std::abs(t.c));
            std::vector<ExpTerm> out;
            for (const auto& t : pieces_[i]) {
                if (std::abs(t.c) <= drop_tol * cmax) continue;
                bool merged = false;
                for (auto& u : out)
                    if (u.k == t.k && u.s == t.s) {
                        u.c += t.c;
                        merged = true;
                        break;
                    }
                if (!merged) out.push_back(t);
            }
            g.pieces_[i] = std::move(out);
        }
        return g;
    }

    std::size_t piece_at(double x, int side) const {
        // side > 0: right-continuous; side < 0: left piece at a breakpoint;
        // side == 0: x is assumed interior to a piece.
        std::size_t i;
        if (side < 0)
            i = std::size_t(std::lower_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
        else
            i = std::size_t(std::upper_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
        return i;
    }

private:
    std::complex<double> eval_piece(std::size_t i, double x) const {
        std::complex<double> v{};
        for (const auto& t : pieces_[i]) {
            const std::complex<double> e = std::exp(t.s * x);
            v += t.c * (t.k == 0 ? e : std::pow(x, t.k) * e);
        }
        return v;
    }

    static std::vector<double> merged_breaks(const std::vector<double>& a,
                                             const std::vector<double>& b) {
        std::vector<double> out;
        out.reserve(a.size() + b.size());
        std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    static double probe_point(const std::vector<double>& br, std::size_t i) {
        if (br.empty()) return 0.0;
        if (i == 0) return br.front() - 1.0;
        if (i == br.size()) return br.back() + 1.0;
        return 0.5 * (br[i - 1] + br[i]);
    }

    static PiecewiseExpPoly combine(const PiecewiseExpPoly& f, const PiecewiseExpPoly& g,
                                    bool subtract) {
        std::vector<double> br = merged_breaks(f.breaks_, g.breaks_);
        PiecewiseExpPoly h;
        h.breaks_ = br;
        h.pieces_.assign(br.size() + 1, {});
        for (std::size_t i = 0; i <= br.size(); ++i) {
            const double probe = probe_point(br, i);
            auto& out = h.pieces_[i];
            out = f.pieces_[f.piece_at(probe, 0)];
            for (auto t : g.pieces_[g.piece_at(probe, 0)]) {
                if (subtract) t.c = -t.c;
                out.push_back(t);
            }
        }
        return h;
    }

    std::vector<double> breaks_;
    std::vector<std::vector<ExpTerm>> pieces_;
};

/// ∫_{lo}^{hi} e^{s t} f(t) dt with lo/hi possibly infinite.  Throws
/// domain_error when a tail fails to decay against the weight.
inline std::complex<double> exp_weighted_integral(const PiecewiseExpPoly& f,
                                                  std::complex<double> s, double lo,
                                                  double hi) {
    const PiecewiseExpPoly g = f.restricted(lo, hi);
    const auto& br = g.breakpoints();
    const auto& pcs = g.pieces();
    std::complex<double> total{};
    for (std::size_t i = 0; i < pcs.size(); ++i) {
        for (const auto& t : pcs[i]) {
            if (t.c == std::complex<double>(0.0, 0.0)) continue;
            const std::complex<double> rate = t.s + s;
            if (i == 0) {
                if (br.empty()) throw std::domain_error("weighted integral of unbroken piece");
                total += t.c * exp_monomial_integral_left(t.k, rate, br.front());
            } else if (i == pcs.size() - 1) {
                total += t.c * exp_monomial_integral_right(t.k, rate, br.back());
            } else {
                total += t.c * exp_monomial_integral(t.k, rate, br[i - 1], br[i]);
            }
        }
    }
    return total;
}

} // namespace oscgraph

#endif
