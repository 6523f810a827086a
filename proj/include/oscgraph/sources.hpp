#ifndef OSCGRAPH_SOURCES_HPP
#define OSCGRAPH_SOURCES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "piecewise_exp.hpp"
#include "quadrature.hpp"

namespace oscgraph {

/// Sample points for grid-represented functions.  Always contains -1, 0, 1
/// exactly so boundary values and the Dirichlet point are on-grid.
struct Grid {
    std::vector<double> points;
    double spacing = 0.02;

    static Grid uniform(double extent, double h) {
        if (!(extent > 1.0) || !(h > 0.0)) throw std::invalid_argument("bad grid request");
        Grid g;
        g.spacing = h;
        const double anchors[] = {-extent, -1.0, 0.0, 1.0, extent};
        for (int seg = 0; seg < 4; ++seg) {
            const double a = anchors[seg], b = anchors[seg + 1];
            const int n = std::max(1, int(std::ceil((b - a) / h)));
            for (int j = 0; j < n; ++j) g.points.push_back(a + (b - a) * j / n);
        }
        g.points.push_back(extent);
        return g;
    }

    void validate() const {
        if (points.size() < 2) throw std::invalid_argument("grid too small");
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i] > points[i - 1]))
                throw std::invalid_argument("grid not strictly increasing");
        for (double anchor : {-1.0, 0.0, 1.0})
            if (!std::binary_search(points.begin(), points.end(), anchor))
                throw std::invalid_argument("grid must contain -1, 0, 1");
        if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    }

    std::size_t size() const { return points.size(); }
};

struct QuadratureEstimate {
    std::complex<double> value{};
    double error = 0.0;
};

/// Composite Simpson on arbitrary sorted nodes (quadratic through each triple
/// of consecutive points; trapezoid on a leftover last interval).
inline std::complex<double> simpson_nodes(const std::vector<double>& x,
                                          const std::vector<std::complex<double>>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("node/value size mismatch");
    const std::size_t n = x.size();
    if (n < 2) return {};
    std::complex<double> total{};
    std::size_t i = 0;
    for (; i + 2 < n; i += 2) {
        const double h0 = x[i + 1] - x[i], h1 = x[i + 2] - x[i + 1];
        total += (h0 + h1) / 6.0 *
                 ((2.0 - h1 / h0) * y[i] + (h0 + h1) * (h0 + h1) / (h0 * h1) * y[i + 1] +
                  (2.0 - h0 / h1) * y[i + 2]);
    }
    if (i + 2 == n) total += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    return total;
}

/// Simpson value plus a Richardson error estimate from the half-resolution rule.
inline QuadratureEstimate simpson_with_estimate(const std::vector<double>& x,
                                                const std::vector<std::complex<double>>& y) {
    QuadratureEstimate out;
    out.value = simpson_nodes(x, y);
    if (x.size() >= 5) {
        std::vector<double> xc;
        std::vector<std::complex<double>> yc;
        for (std::size_t i = 0; i < x.size(); i += 2) {
            xc.push_back(x[i]);
            yc.push_back(y[i]);
        }
        if (xc.back() != x.back()) {
            xc.push_back(x.back());
            yc.push_back(y.back());
        }
        out.error = std::abs(out.value - simpson_nodes(xc, yc)) / 15.0;
    } else {
        std::complex<double> trap{};
        for (std::size_t i = 0; i + 1 < x.size(); ++i)
            trap += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
        out.error = std::abs(out.value - trap);
    }
    return out;
}

/// Channel source / solution function.  Closed-form kinds carry an exact
/// piecewise-exponential representation; the Gaussian integrates by adaptive
/// quadrature; grid samples integrate by composite Simpson with a reported
/// error estimate.
class SourceFunction {
public:
    enum class Kind { PiecewiseExp, Gaussian, SplineBump, GridSamples };

    SourceFunction() : kind_(Kind::PiecewiseExp), rep_(PiecewiseExpPoly::zero()) {}

    static SourceFunction piecewise(PiecewiseExpPoly f) {
        SourceFunction s;
        s.kind_ = Kind::PiecewiseExp;
        s.rep_ = std::move(f);
        return s;
    }

    /// amplitude * exp(-(x-center)^2 / (2 width^2)); support truncated at
    /// |x-center| > 10 width (relative mass below 1e-21).
    static SourceFunction gaussian(double center, double width, std::complex<double> amplitude) {
        if (!(width > 0.0)) throw std::invalid_argument("gaussian width must be positive");
        SourceFunction s;
        s.kind_ = Kind::Gaussian;
        s.rep_ = GaussianData{center, width, amplitude};
        return s;
    }

    /// amplitude * B3((x-center)/scale) with the cubic B-spline B3 supported
    /// on [-2, 2]; exactly piecewise cubic, C^2, peak value 2/3 * amplitude.
    static SourceFunction spline_bump(double center, double scale,
                                      std::complex<double> amplitude) {
        if (!(scale > 0.0)) throw std::invalid_argument("spline scale must be positive");
        SourceFunction s;
        s.kind_ = Kind::SplineBump;
        s.rep_ = spline_pw(center, scale, amplitude);
        return s;
    }

    static SourceFunction samples(Grid grid, std::vector<std::complex<double>> values) {
        grid.validate();
        if (values.size() != grid.points.size())
            throw std::invalid_argument("sample count does not match grid");
        SourceFunction s;
        s.kind_ = Kind::GridSamples;
        s.rep_ = SamplesData{std::move(grid), std::move(values)};
        return s;
    }

    static SourceFunction zero() { return SourceFunction(); }

    Kind kind() const { return kind_; }

    /// True when an exact piecewise-exponential representation is available.
    bool exact() const { return std::holds_alternative<PiecewiseExpPoly>(rep_); }

    const PiecewiseExpPoly& pw() const {
        if (!exact()) throw std::logic_error("source has no exact closed form");
        return std::get<PiecewiseExpPoly>(rep_);
    }

    const Grid& grid() const {
        const auto* sd = std::get_if<SamplesData>(&rep_);
        if (!sd) throw std::logic_error("source is not grid-sampled");
        return sd->grid;
    }

    bool is_zero() const {
        if (exact()) return pw().is_zero();
        if (const auto* g = std::get_if<GaussianData>(&rep_)) return g->amplitude == 0.0;
        const auto& sd = std::get<SamplesData>(rep_);
        for (const auto& v : sd.values)
            if (v != std::complex<double>(0.0, 0.0)) return false;
        return true;
    }

    std::complex<double> operator()(double x) const {
        if (exact()) return pw()(x);
        if (const auto* g = std::get_if<GaussianData>(&rep_)) {
            const double u = (x - g->center) / g->width;
            if (std::abs(u) > 10.0) return {};
            return g->amplitude * std::exp(-0.5 * u * u);
        }
        const auto& sd = std::get<SamplesData>(rep_);
        const auto& xs = sd.grid.points;
        if (x <= xs.front() || x >= xs.back()) {
            if (x == xs.front()) return sd.values.front();
            if (x == xs.back()) return sd.values.back();
            return {};
        }
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t i = std::size_t(it - xs.begin());
        const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return (1.0 - w) * sd.values[i - 1] + w * sd.values[i];
    }

    double support_lo() const {
        if (exact()) return pw_support(pw()).first;
        if (const auto* g = std::get_if<GaussianData>(&rep_)) return g->center - 10.0 * g->width;
        return std::get<SamplesData>(rep_).grid.points.front();
    }

    double support_hi() const {
        if (exact()) return pw_support(pw()).second;
        if (const auto* g = std::get_if<GaussianData>(&rep_)) return g->center + 10.0 * g->width;
        return std::get<SamplesData>(rep_).grid.points.back();
    }

    /// ∫ w(t) f(t) dt.  `kinks` lists kernel break locations (kernel itself
    /// continuous).  For grid samples the achieved error estimate is written
    /// through err_out and may exceed rel_tol; closed forms honor rel_tol.
    std::complex<double>
    integrate_kernel(const std::function<std::complex<double>(double)>& w,
                     const std::vector<double>& kinks, double rel_tol = 1e-12,
                     double* err_out = nullptr) const {
        if (err_out) *err_out = 0.0;
        if (kind_ == Kind::GridSamples) {
            const auto& sd = std::get<SamplesData>(rep_);
            std::vector<double> xs = sd.grid.points;
            std::vector<std::complex<double>> ys = sd.values;
            for (double kx : kinks) insert_node(xs, ys, kx);
            for (std::size_t i = 0; i < xs.size(); ++i) ys[i] *= w(xs[i]);
            const QuadratureEstimate est = simpson_with_estimate(xs, ys);
            if (err_out) *err_out = est.error;
            return est.value;
        }
        const double lo = support_lo(), hi = support_hi();
        std::vector<double> pts{lo};
        if (exact())
            for (double b : pw().breakpoints())
                if (b > lo && b < hi) pts.push_back(b);
        for (double kx : kinks)
            if (kx > lo && kx < hi) pts.push_back(kx);
        pts.push_back(hi);
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        std::complex<double> total{};
        double err = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const auto res = AdaptiveGK::integrate(
                [&](double t) { return w(t) * (*this)(t); }, pts[i], pts[i + 1], rel_tol);
            total += res.value;
            err += res.error;
        }
        if (err_out) *err_out = err;
        return total;
    }

    double norm() const {
        if (exact()) return pw().norm();
        if (const auto* g = std::get_if<GaussianData>(&rep_))
            return std::abs(g->amplitude) * std::sqrt(g->width * std::sqrt(M_PI));
        const auto& sd = std::get<SamplesData>(rep_);
        std::vector<std::complex<double>> sq(sd.values.size());
        for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(sd.values[i]);
        return std::sqrt(std::max(0.0, simpson_nodes(sd.grid.points, sq).real()));
    }

private:
    struct GaussianData {
        double center, width;
        std::complex<double> amplitude;
    };
    struct SamplesData {
        Grid grid;
        std::vector<std::complex<double>> values;
    };

    static std::pair<double, double> pw_support(const PiecewiseExpPoly& f) {
        const auto& br = f.breakpoints();
        const auto& pcs = f.pieces();
        const double inf = std::numeric_limits<double>::infinity();
        double lo = 0.0, hi = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < pcs.size(); ++i) {
            if (pcs[i].empty()) continue;
            const double plo = (i == 0) ? -inf : br[i - 1];
            const double phi = (i == pcs.size() - 1) ? inf : br[i];
            if (!any) {
                lo = plo;
                hi = phi;
                any = true;
            } else {
                lo = std::min(lo, plo);
                hi = std::max(hi, phi);
            }
        }
        return {lo, hi};
    }

    static void insert_node(std::vector<double>& xs, std::vector<std::complex<double>>& ys,
                            double x) {
        if (x <= xs.front() || x >= xs.back()) return;
        const auto it = std::lower_bound(xs.begin(), xs.end(), x);
        if (*it == x) return;
        const std::size_t i = std::size_t(it - xs.begin());
        const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        ys.insert(ys.begin() + long(i), (1.0 - w) * ys[i - 1] + w * ys[i]);
        xs.insert(it, x);
    }

    static PiecewiseExpPoly spline_pw(double c, double s, std::complex<double> amp) {
        // B3 on [-2,2]:  (2-|u|)^3/6 on 1<=|u|<=2;  (4 - 6u^2 + 3|u|^3)/6 on |u|<=1
        const std::vector<double> breaks = {c - 2 * s, c - s, c, c + s, c + 2 * s};
        std::vector<std::vector<ExpTerm>> pieces(6);
        const double u3[4][4] = {
            {8.0 / 6, 12.0 / 6, 6.0 / 6, 1.0 / 6},   // (2+u)^3/6 on [-2,-1]
            {4.0 / 6, 0.0, -6.0 / 6, -3.0 / 6},      // (4 - 6u^2 - 3u^3)/6 on [-1,0]
            {4.0 / 6, 0.0, -6.0 / 6, 3.0 / 6},       // (4 - 6u^2 + 3u^3)/6 on [0,1]
            {8.0 / 6, -12.0 / 6, 6.0 / 6, -1.0 / 6}, // (2-u)^3/6 on [1,2]
        };
        for (int seg = 0; seg < 4; ++seg) {
            double cx[4] = {0, 0, 0, 0};  // coefficients in x after u = (x-c)/s
            for (int j = 0; j < 4; ++j) {
                double binom = 1.0;
                for (int i = 0; i <= j; ++i) {
                    cx[i] += u3[seg][j] * binom * std::pow(-c, j - i) / std::pow(s, j);
                    binom = binom * (j - i) / (i + 1.0);
                }
            }
            auto& pc = pieces[std::size_t(seg) + 1];
            for (int i = 0; i < 4; ++i)
                if (cx[i] != 0.0) pc.push_back({amp * cx[i], i, {}});
        }
        return PiecewiseExpPoly::from_pieces(breaks, std::move(pieces));
    }

    Kind kind_;
    std::variant<PiecewiseExpPoly, GaussianData, SamplesData> rep_;
};

} // namespace oscgraph

#endif
