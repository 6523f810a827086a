#ifndef OSCGRAPH_COUPLED_RESOLVENT_HPP
#define OSCGRAPH_COUPLED_RESOLVENT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "basis.hpp"
#include "boundary_system.hpp"
#include "free_resolvent.hpp"
#include "params.hpp"
#include "piecewise_exp.hpp"
#include "sources.hpp"

namespace oscgraph {

/// Raised when the box-doubling self-check is requested and fails.
struct BoxNotConvergedError : std::runtime_error {
    double difference;
    explicit BoxNotConvergedError(double diff)
        : std::runtime_error("non-convergent box (doubling changed the solution by " +
                             std::to_string(diff) + ")"),
          difference(diff) {}
};

struct ResolventOutput {
    ChannelFunctionSet solution;
    BoundaryVector boundary;          // correction coefficients in the (phi+, phi-) basis
    double ode_residual = 0.0;        // normalized second-difference residual of the ODE
    double matching_residual = 0.0;   // derivative-jump conditions, interior channels
    double edge_residual = 0.0;       // same conditions on box-edge channels (truncation proxy)
    double dirichlet_residual = 0.0;  // |u(0±)| for the half-line variant, 0 otherwise
    double solver_residual = 0.0;     // relative residual of the boundary solve
};

/// Uniform grid sized so that solutions decaying like e^{-gamma|x|} are
/// captured to ~e^{-12} at the slowest boxed channel.
inline Grid default_grid(const ModelParams& params, cplx Lambda, TruncationBox box) {
    double min_gamma = std::numeric_limits<double>::infinity();
    for (const ChannelIndex idx : box.channel_list())
        min_gamma = std::min(min_gamma, channel_scalars(params, idx, Lambda).gamma());
    const double extent = 1.0 + 12.0 / min_gamma;
    return Grid::uniform(extent, 0.02);
}

namespace detail {

/// Per-channel free solution u0 = Phi f with pointwise evaluation dispatch.
struct FreePart {
    SourceFunction source;
    cplx zeta{};
    bool circ = false;
    std::optional<PiecewiseExpPoly> exact;

    static FreePart make(const SourceFunction& f, cplx zeta, bool circ) {
        FreePart fp{f, zeta, circ, std::nullopt};
        if (f.is_zero())
            fp.exact = PiecewiseExpPoly::zero();
        else if (f.exact())
            fp.exact = circ ? apply_phi_circ_pw(zeta, f.pw()) : apply_phi_pw(zeta, f.pw());
        return fp;
    }

    cplx operator()(double x) const {
        if (exact) return (*exact)(x);
        return circ ? apply_phi_circ(zeta, source, x) : apply_phi(zeta, source, x);
    }
};

/// Extends F by zeros onto a (not smaller) box.
inline ChannelFunctionSet extend_sources(const ChannelFunctionSet& F, TruncationBox box) {
    if (F.box.m_max > box.m_max || F.box.n_max > box.n_max)
        throw std::invalid_argument("source box exceeds the truncation box");
    ChannelFunctionSet out(box);
    for (const ChannelIndex idx : F.box.channel_list()) out.at(idx) = F.at(idx);
    return out;
}

/// Tridiagonal lane systems for the half-coupled cases (one alpha = 0): the
/// correction in each lane uses a single-jump kernel, so each lane of the
/// matching conditions closes on its own.
struct LaneSolve {
    std::vector<cplx> coeff;  // kernel coefficients along the lane
    double residual = 0.0;
};

inline LaneSolve solve_lane(const std::vector<cplx>& jump_factor, const std::vector<double>& sq,
                            const std::vector<cplx>& boundary_value, double kappa) {
    const long n = long(jump_factor.size());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    Eigen::VectorXcd b(n);
    for (long i = 0; i < n; ++i) {
        A(i, i) = jump_factor[std::size_t(i)];
        cplx rhs{};
        if (i + 1 < n) {
            A(i, i + 1) = -kappa * sq[std::size_t(i) + 1];
            rhs += kappa * sq[std::size_t(i) + 1] * boundary_value[std::size_t(i) + 1];
        }
        if (i > 0) {
            A(i, i - 1) = -kappa * sq[std::size_t(i)];
            rhs += kappa * sq[std::size_t(i)] * boundary_value[std::size_t(i) - 1];
        }
        b[i] = rhs;
    }
    LaneSolve out;
    Eigen::VectorXcd x = A.partialPivLu().solve(b);
    const double bn = b.norm();
    out.residual = bn > 0.0 ? (A * x - b).norm() / bn : 0.0;
    out.coeff.assign(x.data(), x.data() + n);
    return out;
}

} // namespace detail

/// Derivative-jump (matching) residual of a solution set: for interior
/// channels, |[u'](±1) − coupling·(neighbour values)|; edge channels are
/// reported separately because their residual measures truncation.
inline double matching_residual(const ChannelFunctionSet& U, const ModelParams& params,
                                double* edge_out = nullptr) {
    const TruncationBox& box = U.box;
    const double kp = params.alpha_plus / std::sqrt(2.0);
    const double km = params.alpha_minus / std::sqrt(2.0);

    const auto value = [&](ChannelIndex idx, double x) -> cplx {
        if (!box.contains(idx)) return {};
        return U.at(idx)(x);
    };
    const auto jump = [&](const SourceFunction& u, double x) -> cplx {
        if (u.is_zero()) return {};
        if (u.exact()) return u.pw().eval_deriv(x, +1) - u.pw().eval_deriv(x, -1);
        // sampled representation: one-sided second-order differences on the
        // actual grid nodes (±1 are grid points by construction)
        const auto& pts = u.grid().points;
        const auto it = std::lower_bound(pts.begin(), pts.end(), x - 1e-12);
        const std::size_t i = std::size_t(it - pts.begin());
        if (i < 2 || i + 2 >= pts.size()) return {};
        const double hr = pts[i + 1] - pts[i], hl = pts[i] - pts[i - 1];
        const cplx right =
            (-3.0 * u(pts[i]) + 4.0 * u(pts[i + 1]) - u(pts[i + 2])) / (2.0 * hr);
        const cplx left = (3.0 * u(pts[i]) - 4.0 * u(pts[i - 1]) + u(pts[i - 2])) / (2.0 * hl);
        return right - left;
    };

    double interior = 0.0, edge = 0.0;
    for (const ChannelIndex idx : box.channel_list()) {
        const SourceFunction& u = U.at(idx);
        const cplx jp = jump(u, 1.0);
        const cplx jm = jump(u, -1.0);
        const double res_p =
            std::abs(jp - kp * (std::sqrt(double(idx.m + 1)) * value({idx.m + 1, idx.n}, 1.0) +
                                std::sqrt(double(idx.m)) * value({idx.m - 1, idx.n}, 1.0)));
        const double res_m =
            std::abs(jm - km * (std::sqrt(double(idx.n + 1)) * value({idx.m, idx.n + 1}, -1.0) +
                                std::sqrt(double(idx.n)) * value({idx.m, idx.n - 1}, -1.0)));
        double& bucket_p = (idx.m == box.m_max) ? edge : interior;
        bucket_p = std::max(bucket_p, res_p);
        double& bucket_m = (idx.n == box.n_max) ? edge : interior;
        bucket_m = std::max(bucket_m, res_m);
    }
    if (edge_out) *edge_out = edge;
    return interior;
}

namespace detail {

struct RichSolution {
    std::vector<FreePart> free;          // per boxed channel
    std::vector<PiecewiseExpPoly> corr;  // per boxed channel
    TruncationBox box;

    cplx value(ChannelIndex idx, double x) const {
        if (!box.contains(idx)) return {};
        const std::size_t c = box.channel_slot(idx);
        return free[c](x) + corr[c](x);
    }
};

/// Fourth-order central second difference of the full solution.
inline cplx second_derivative(const RichSolution& rich, ChannelIndex idx, double x, double h) {
    const auto u = [&](double t) { return rich.value(idx, t); };
    return (-u(x - 2.0 * h) + 16.0 * u(x - h) - 30.0 * u(x) + 16.0 * u(x + h) - u(x + 2.0 * h)) /
           (12.0 * h * h);
}

inline double ode_residual(const RichSolution& rich, const ModelParams& params, cplx Lambda,
                           const ChannelFunctionSet& F, bool circ) {
    double worst = 0.0;
    for (const ChannelIndex idx : rich.box.channel_list()) {
        const std::size_t c = rich.box.channel_slot(idx);
        const SourceFunction& f = F.at(idx);
        if (f.is_zero() && rich.corr[c].is_zero()) continue;
        const ChannelScalars cs = channel_scalars(params, idx, Lambda);
        const double h = std::min(0.02, 0.05 / (std::abs(cs.zeta) + 1.0));

        // probe midpoints of the structural pieces, skipping kink neighbourhoods
        std::vector<double> breaks{-1.0, 0.0, 1.0};
        if (f.exact() && !f.is_zero())
            for (double b : f.pw().breakpoints()) breaks.push_back(b);
        else if (!f.is_zero()) {
            breaks.push_back(f.support_lo());
            breaks.push_back(f.support_hi());
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        std::vector<double> probes{breaks.front() - 0.8, breaks.back() + 0.8};
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            if (breaks[i + 1] - breaks[i] > 8.0 * h)
                probes.push_back(0.5 * (breaks[i] + breaks[i + 1]));
        }

        double res = 0.0, scale = 0.0;
        for (double x : probes) {
            if (circ && std::abs(x) < 8.0 * h) continue;
            const cplx u = rich.value(idx, x);
            const cplx lhs = -second_derivative(rich, idx, x, h) + cs.zeta * cs.zeta * u;
            const cplx fx = circ && x == 0.0 ? cplx{} : f(x);
            res = std::max(res, std::abs(lhs - fx));
            scale = std::max(scale, (std::norm(cs.zeta) + 1.0) * std::abs(u) + std::abs(fx));
        }
        if (scale > 0.0) worst = std::max(worst, res / scale);
    }
    return worst;
}

/// Matching residual evaluated on the rich representation: derivative jumps
/// come from the correction alone (the free part is C¹ across ±1).
inline void rich_matching(const RichSolution& rich, const ModelParams& params, double& interior,
                          double& edge) {
    const TruncationBox& box = rich.box;
    const double kp = params.alpha_plus / std::sqrt(2.0);
    const double km = params.alpha_minus / std::sqrt(2.0);
    interior = edge = 0.0;
    for (const ChannelIndex idx : box.channel_list()) {
        const std::size_t c = box.channel_slot(idx);
        const auto& corr = rich.corr[c];
        const cplx jp = corr.is_zero() ? cplx{} : corr.eval_deriv(1.0, +1) - corr.eval_deriv(1.0, -1);
        const cplx jm = corr.is_zero() ? cplx{} : corr.eval_deriv(-1.0, +1) - corr.eval_deriv(-1.0, -1);
        const double res_p =
            std::abs(jp - kp * (std::sqrt(double(idx.m + 1)) * rich.value({idx.m + 1, idx.n}, 1.0) +
                                std::sqrt(double(idx.m)) * rich.value({idx.m - 1, idx.n}, 1.0)));
        const double res_m =
            std::abs(jm - km * (std::sqrt(double(idx.n + 1)) * rich.value({idx.m, idx.n + 1}, -1.0) +
                                std::sqrt(double(idx.n)) * rich.value({idx.m, idx.n - 1}, -1.0)));
        double& bucket_p = (idx.m == box.m_max) ? edge : interior;
        bucket_p = std::max(bucket_p, res_p);
        double& bucket_m = (idx.n == box.n_max) ? edge : interior;
        bucket_m = std::max(bucket_m, res_m);
    }
}

/// Correction coefficients C in the (phi+, phi-) basis.
inline BoundaryVector correction_coefficients(const ModelParams& params, cplx Lambda,
                                              const ChannelFunctionSet& F, TruncationBox box,
                                              bool circ, const std::vector<FreePart>& free,
                                              double& solver_residual) {
    const bool plus_on = params.alpha_plus > 0.0;
    const bool minus_on = params.alpha_minus > 0.0;
    BoundaryVector C(box);
    solver_residual = 0.0;

    if (plus_on && minus_on) {
        const auto S = build_S(params, Lambda, box, circ);
        const BoundaryVector SF = S.apply(F);
        const auto M = build(circ ? OperatorKind::Mcirc : OperatorKind::M, params, Lambda, box);
        const auto R = build(circ ? OperatorKind::Rcirc : OperatorKind::R, params, Lambda, box);
        const auto Pinv = build(OperatorKind::Pinv, params, Lambda, box);
        BoundaryVector rhs(box);
        rhs.data = 2.0 * (M.matrix * SF.data);
        const BoundaryVector Z = solve(R, rhs);
        const double rn = rhs.data.norm();
        solver_residual = rn > 0.0 ? (R.matrix * Z.data - rhs.data).norm() / rn : 0.0;
        C.data = Z.data - Pinv.matrix * SF.data;
        return C;
    }

    // half-coupled: independent lanes with single-jump kernel corrections
    const auto lane_boundary_values = [&](int sign) {
        std::vector<cplx> v(box.channels());
        for (const ChannelIndex idx : box.channel_list())
            v[box.channel_slot(idx)] = free[box.channel_slot(idx)](double(sign));
        return v;
    };

    if (plus_on) {
        const double kappa = params.alpha_plus / std::sqrt(2.0);
        const auto vals = lane_boundary_values(+1);
        for (int n = 0; n <= box.n_max; ++n) {
            std::vector<cplx> jf, bv;
            std::vector<ChannelScalars> lane;
            for (int m = 0; m <= box.m_max; ++m) {
                const ChannelScalars cs = channel_scalars(params, {m, n}, Lambda);
                lane.push_back(cs);
                // jump of the kernel correction at the marked point
                jf.push_back(circ ? -2.0 * cs.zeta / (1.0 - std::exp(-2.0 * cs.zeta))
                                  : -2.0 * cs.zeta);
                bv.push_back(vals[box.channel_slot({m, n})]);
            }
            std::vector<double> sqf(lane.size());
            for (std::size_t m = 0; m < lane.size(); ++m) sqf[m] = std::sqrt(double(m));
            const auto ls = detail::solve_lane(jf, sqf, bv, kappa);
            solver_residual = std::max(solver_residual, ls.residual);
            for (int m = 0; m <= box.m_max; ++m) {
                const ChannelScalars& cs = lane[std::size_t(m)];
                const cplx d = ls.coeff[std::size_t(m)];
                const double w = std::pow(cs.r, -0.25);
                if (circ) {
                    C.plus({m, n}) = d * w;
                } else {
                    C.plus({m, n}) = d * w;
                    C.minus({m, n}) += d * std::exp(-2.0 * cs.zeta) * w;
                }
            }
        }
    }
    if (minus_on) {
        const double kappa = params.alpha_minus / std::sqrt(2.0);
        const auto vals = lane_boundary_values(-1);
        for (int m = 0; m <= box.m_max; ++m) {
            std::vector<cplx> jf, bv;
            std::vector<ChannelScalars> lane;
            for (int n = 0; n <= box.n_max; ++n) {
                const ChannelScalars cs = channel_scalars(params, {m, n}, Lambda);
                lane.push_back(cs);
                jf.push_back(circ ? -2.0 * cs.zeta / (1.0 - std::exp(-2.0 * cs.zeta))
                                  : -2.0 * cs.zeta);
                bv.push_back(vals[box.channel_slot({m, n})]);
            }
            std::vector<double> sqf(lane.size());
            for (std::size_t n = 0; n < lane.size(); ++n) sqf[n] = std::sqrt(double(n));
            const auto ls = detail::solve_lane(jf, sqf, bv, kappa);
            solver_residual = std::max(solver_residual, ls.residual);
            for (int n = 0; n <= box.n_max; ++n) {
                const ChannelScalars& cs = lane[std::size_t(n)];
                const cplx d = ls.coeff[std::size_t(n)];
                const double w = std::pow(cs.r, -0.25);
                if (circ) {
                    C.minus({m, n}) = d * w;
                } else {
                    C.minus({m, n}) += d * w;
                    C.plus({m, n}) += d * std::exp(-2.0 * cs.zeta) * w;
                }
            }
        }
    }
    return C;
}

inline ResolventOutput resolve_impl(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F_in, TruncationBox box, bool circ,
                                    const Grid* grid_in, double box_doubling_tol);

/// L² norm of the correction difference between two coefficient vectors
/// (free parts cancel, so this is the exact solution difference).
inline double correction_difference(const ModelParams& params, cplx Lambda,
                                    const BoundaryVector& big, const BoundaryVector& small,
                                    bool circ) {
    double sum = 0.0;
    const auto T = build_T(params, Lambda, big.box, circ);
    for (const ChannelIndex idx : big.box.channel_list()) {
        cplx cp = big.plus(idx), cm = big.minus(idx);
        if (small.box.contains(idx)) {
            cp -= small.plus(idx);
            cm -= small.minus(idx);
        }
        if (cp == cplx{} && cm == cplx{}) continue;
        sum += T.channel_function(idx, cp, cm).norm_sq();
    }
    return std::sqrt(sum);
}

inline ResolventOutput resolve_impl(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F_in, TruncationBox box, bool circ,
                                    const Grid* grid_in, double box_doubling_tol) {
    params.validate();
    box.validate();
    SpectralParam{Lambda}.require_invertible();
    const ChannelFunctionSet F = extend_sources(F_in, box);

    RichSolution rich;
    rich.box = box;
    rich.free.reserve(box.channels());
    for (const ChannelIndex idx : box.channel_list()) {
        const SourceFunction& f = F.at(idx);
        const ChannelScalars cs = channel_scalars(params, idx, Lambda);
        rich.free.push_back(FreePart::make(f, cs.zeta, circ));
    }

    ResolventOutput out;
    out.boundary = correction_coefficients(params, Lambda, F, box, circ, rich.free,
                                           out.solver_residual);

    const auto T = build_T(params, Lambda, box, circ);
    rich.corr.reserve(box.channels());
    for (const ChannelIndex idx : box.channel_list())
        rich.corr.push_back(T.channel_function(idx, out.boundary.plus(idx),
                                               out.boundary.minus(idx)));

    // diagnostics on the rich representation
    out.ode_residual = ode_residual(rich, params, Lambda, F, circ);
    rich_matching(rich, params, out.matching_residual, out.edge_residual);
    if (circ) {
        double dr = 0.0;
        for (const ChannelIndex idx : box.channel_list()) {
            const std::size_t c = box.channel_slot(idx);
            dr = std::max(dr, std::abs(rich.value(idx, 0.0)));
            if (!rich.corr[c].is_zero())
                dr = std::max({dr, std::abs(rich.corr[c].eval(0.0, +1)),
                               std::abs(rich.corr[c].eval(0.0, -1))});
        }
        out.dirichlet_residual = dr;
    }

    // output representation: exact piecewise where possible, else sampled
    const Grid grid = grid_in ? *grid_in : default_grid(params, Lambda, box);
    out.solution = ChannelFunctionSet(box);
    for (const ChannelIndex idx : box.channel_list()) {
        const std::size_t c = box.channel_slot(idx);
        if (rich.free[c].exact) {
            PiecewiseExpPoly total = *rich.free[c].exact + rich.corr[c];
            out.solution.at(idx) = total.is_zero() ? SourceFunction::zero()
                                                   : SourceFunction::piecewise(std::move(total));
        } else {
            std::vector<cplx> vals(grid.points.size());
            for (std::size_t i = 0; i < grid.points.size(); ++i)
                vals[i] = rich.value(idx, grid.points[i]);
            out.solution.at(idx) = SourceFunction::samples(grid, std::move(vals));
        }
    }

    if (box_doubling_tol > 0.0) {
        const TruncationBox doubled{2 * box.m_max, 2 * box.n_max};
        ResolventOutput big = resolve_impl(params, Lambda, F_in, doubled, circ, grid_in, 0.0);
        const double diff = correction_difference(params, Lambda, big.boundary, out.boundary, circ);
        if (diff > box_doubling_tol) throw BoxNotConvergedError(diff);
    }
    return out;
}

} // namespace detail

inline ResolventOutput resolve_full(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F, TruncationBox box,
                                    const Grid& grid, double box_doubling_tol = 0.0) {
    return detail::resolve_impl(params, Lambda, F, box, false, &grid, box_doubling_tol);
}

inline ResolventOutput resolve_full(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F, TruncationBox box) {
    return detail::resolve_impl(params, Lambda, F, box, false, nullptr, 0.0);
}

inline ResolventOutput resolve_circ(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F, TruncationBox box,
                                    const Grid& grid, double box_doubling_tol = 0.0) {
    return detail::resolve_impl(params, Lambda, F, box, true, &grid, box_doubling_tol);
}

inline ResolventOutput resolve_circ(const ModelParams& params, cplx Lambda,
                                    const ChannelFunctionSet& F, TruncationBox box) {
    return detail::resolve_impl(params, Lambda, F, box, true, nullptr, 0.0);
}

struct ConvergenceRow {
    TruncationBox box;
    double diff_from_prev = 0.0;  // exact L² difference of successive solutions
    double tail_norm = 0.0;       // ℓ² of the outermost-layer coefficients
};

/// Successive-box study: solves on each box, reports exact solution
/// differences (free parts cancel) and coefficient tails.
inline std::vector<ConvergenceRow> convergence_study(const ModelParams& params, cplx Lambda,
                                                     const ChannelFunctionSet& F,
                                                     const std::vector<TruncationBox>& boxes) {
    if (boxes.empty()) return {};
    for (std::size_t i = 1; i < boxes.size(); ++i) {
        const bool grows = boxes[i].m_max >= boxes[i - 1].m_max &&
                           boxes[i].n_max >= boxes[i - 1].n_max &&
                           (boxes[i].m_max > boxes[i - 1].m_max ||
                            boxes[i].n_max > boxes[i - 1].n_max);
        if (!grows) throw std::invalid_argument("boxes must increase");
    }

    std::vector<ConvergenceRow> rows;
    std::optional<BoundaryVector> prev;
    for (const TruncationBox& box : boxes) {
        const ResolventOutput out = detail::resolve_impl(params, Lambda, F, box, false, nullptr, 0.0);
        ConvergenceRow row;
        row.box = box;
        if (prev)
            row.diff_from_prev =
                detail::correction_difference(params, Lambda, out.boundary, *prev, false);
        double tail = 0.0;
        for (const ChannelIndex idx : box.channel_list()) {
            if (!box.on_edge(idx)) continue;
            tail += std::norm(out.boundary.plus(idx)) + std::norm(out.boundary.minus(idx));
        }
        row.tail_norm = std::sqrt(tail);
        rows.push_back(row);
        prev = out.boundary;
    }
    return rows;
}

} // namespace oscgraph

#endif
