#ifndef OSCGRAPH_BOUNDARY_SYSTEM_HPP
#define OSCGRAPH_BOUNDARY_SYSTEM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "basis.hpp"
#include "params.hpp"
#include "piecewise_exp.hpp"
#include "sources.hpp"

namespace oscgraph {

/// Finite index window {0..m_max} x {0..n_max} replacing the full lattice.
struct TruncationBox {
    int m_max = 1;
    int n_max = 1;

    void validate() const {
        if (m_max < 1 || n_max < 1) throw std::invalid_argument("box must be at least 1x1");
    }
    int m_count() const { return m_max + 1; }
    int n_count() const { return n_max + 1; }
    std::size_t channels() const { return std::size_t(m_count()) * std::size_t(n_count()); }
    std::size_t dim() const { return 2 * channels(); }

    bool contains(ChannelIndex idx) const {
        return idx.m >= 0 && idx.n >= 0 && idx.m <= m_max && idx.n <= n_max;
    }
    bool on_edge(ChannelIndex idx) const { return idx.m == m_max || idx.n == n_max; }

    std::size_t channel_slot(ChannelIndex idx) const {
        if (!contains(idx)) throw std::out_of_range("channel outside box");
        return std::size_t(idx.m) * std::size_t(n_count()) + std::size_t(idx.n);
    }
    std::size_t plus_slot(ChannelIndex idx) const { return 2 * channel_slot(idx); }
    std::size_t minus_slot(ChannelIndex idx) const { return 2 * channel_slot(idx) + 1; }

    std::vector<ChannelIndex> channel_list() const {
        std::vector<ChannelIndex> out;
        out.reserve(channels());
        for (int m = 0; m <= m_max; ++m)
            for (int n = 0; n <= n_max; ++n) out.push_back({m, n});
        return out;
    }
};

/// Element of the boundary space: one (C+, C-) pair per boxed channel,
/// row-major in (m, n) with the pair adjacent.
struct BoundaryVector {
    TruncationBox box;
    Eigen::VectorXcd data;

    BoundaryVector() = default;
    explicit BoundaryVector(TruncationBox b) : box(b), data(Eigen::VectorXcd::Zero(long(b.dim()))) {}

    cplx& plus(ChannelIndex idx) { return data[long(box.plus_slot(idx))]; }
    cplx& minus(ChannelIndex idx) { return data[long(box.minus_slot(idx))]; }
    cplx plus(ChannelIndex idx) const { return data[long(box.plus_slot(idx))]; }
    cplx minus(ChannelIndex idx) const { return data[long(box.minus_slot(idx))]; }

    double norm() const { return data.norm(); }
};

/// Per-channel source functions over a box, with the Hilbert-space norm
/// (ℓ² over channels of the L² norms).
struct ChannelFunctionSet {
    TruncationBox box;
    std::vector<SourceFunction> funcs;

    ChannelFunctionSet() = default;
    explicit ChannelFunctionSet(TruncationBox b) : box(b), funcs(b.channels()) {}

    SourceFunction& at(ChannelIndex idx) { return funcs[box.channel_slot(idx)]; }
    const SourceFunction& at(ChannelIndex idx) const { return funcs[box.channel_slot(idx)]; }

    double norm() const {
        double s = 0.0;
        for (const auto& f : funcs) {
            const double n = f.norm();
            s += n * n;
        }
        return std::sqrt(s);
    }
};

enum class OperatorKind { R, Rprime, N, Rcirc, Ncirc, M, Mcirc, P, Pinv };

inline const char* operator_name(OperatorKind k) {
    switch (k) {
        case OperatorKind::R: return "R";
        case OperatorKind::Rprime: return "Rprime";
        case OperatorKind::N: return "N";
        case OperatorKind::Rcirc: return "Rcirc";
        case OperatorKind::Ncirc: return "Ncirc";
        case OperatorKind::M: return "M";
        case OperatorKind::Mcirc: return "Mcirc";
        case OperatorKind::P: return "P";
        case OperatorKind::Pinv: return "Pinv";
    }
    return "?";
}

struct TruncatedOperator {
    OperatorKind kind{};
    ModelParams params;
    cplx Lambda{};
    TruncationBox box;
    Eigen::SparseMatrix<cplx> matrix;

    BoundaryVector apply(const BoundaryVector& v) const {
        if (v.box.m_max != box.m_max || v.box.n_max != box.n_max)
            throw std::invalid_argument("vector box mismatch");
        BoundaryVector out(box);
        out.data = matrix * v.data;
        return out;
    }

    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(matrix); }
};

/// Raised when a solve is rejected because the estimated condition number
/// exceeds the precision budget (box too small or Lambda too close to R).
struct IllConditionedError : std::runtime_error {
    double condition;
    explicit IllConditionedError(double cond)
        : std::runtime_error("ill-conditioned boundary system (estimated condition " +
                             std::to_string(cond) + ")"),
          condition(cond) {}
};

namespace detail {

inline bool needs_mu(OperatorKind k) {
    switch (k) {
        case OperatorKind::P:
        case OperatorKind::Pinv: return false;
        default: return true;
    }
}

inline std::vector<ChannelScalars> boxed_scalars(const ModelParams& params, cplx Lambda,
                                                 const TruncationBox& box) {
    std::vector<ChannelScalars> out;
    out.reserve(box.channels());
    for (const ChannelIndex idx : box.channel_list())
        out.push_back(channel_scalars(params, idx, Lambda));
    return out;
}

} // namespace detail

/// Assembles one truncated boundary operator.  The coupled kinds R and Rcirc
/// are written directly from the row formulas of the matched system (not as
/// Rprime + N), so the splitting identities stay a nontrivial check.
inline TruncatedOperator build(OperatorKind kind, const ModelParams& params, cplx Lambda,
                               TruncationBox box) {
    params.validate();
    box.validate();
    if (detail::needs_mu(kind) && (params.alpha_plus <= 0.0 || params.alpha_minus <= 0.0))
        throw std::domain_error("mu undefined: zero coupling requires the decoupled path");

    const double mu_p = detail::needs_mu(kind) ? mu_coupling(params.alpha_plus) : 0.0;
    const double mu_m = detail::needs_mu(kind) ? mu_coupling(params.alpha_minus) : 0.0;
    const auto scal = detail::boxed_scalars(params, Lambda, box);

    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(box.dim() * 3);
    const auto add = [&](std::size_t row, std::size_t col, cplx v) {
        if (v != cplx{}) trip.emplace_back(long(row), long(col), v);
    };

    for (const ChannelIndex idx : box.channel_list()) {
        const ChannelScalars& cs = scal[box.channel_slot(idx)];
        const std::size_t sp = box.plus_slot(idx), sm = box.minus_slot(idx);
        const cplx e2 = std::exp(-2.0 * cs.zeta);
        const cplx e4 = e2 * e2;
        const cplx den4 = 1.0 - e4, den2 = 1.0 - e2;

        switch (kind) {
            case OperatorKind::Rprime:
            case OperatorKind::R:
            case OperatorKind::Rcirc: {
                if (kind == OperatorKind::Rprime) {
                    add(sp, sp, 2.0 * mu_p * cs.p);
                    add(sm, sm, 2.0 * mu_m * cs.p);
                } else if (kind == OperatorKind::R) {
                    add(sp, sp, 2.0 * mu_p * cs.p / den4);
                    add(sp, sm, -2.0 * mu_p * cs.p * e2 / den4);
                    add(sm, sm, 2.0 * mu_m * cs.p / den4);
                    add(sm, sp, -2.0 * mu_m * cs.p * e2 / den4);
                } else {
                    add(sp, sp, 2.0 * mu_p * cs.p / den2);
                    add(sm, sm, 2.0 * mu_m * cs.p / den2);
                }
                if (idx.m + 1 <= box.m_max) {
                    const ChannelIndex up{idx.m + 1, idx.n};
                    const double q = scal[box.channel_slot(up)].q_plus;
                    add(sp, box.plus_slot(up), q);
                    add(box.plus_slot(up), sp, q);
                }
                if (idx.n + 1 <= box.n_max) {
                    const ChannelIndex up{idx.m, idx.n + 1};
                    const double q = scal[box.channel_slot(up)].q_minus;
                    add(sm, box.minus_slot(up), q);
                    add(box.minus_slot(up), sm, q);
                }
                break;
            }
            case OperatorKind::N: {
                const cplx f = 2.0 * cs.p * e2 / den4;
                add(sp, sp, f * mu_p * e2);
                add(sp, sm, -f * mu_p);
                add(sm, sp, -f * mu_m);
                add(sm, sm, f * mu_m * e2);
                break;
            }
            case OperatorKind::Ncirc: {
                const cplx f = 2.0 * cs.p * e2 / den2;
                add(sp, sp, f * mu_p);
                add(sm, sm, f * mu_m);
                break;
            }
            case OperatorKind::M: {
                add(sp, sp, mu_p / den4);
                add(sp, sm, -mu_p * e2 / den4);
                add(sm, sp, -mu_m * e2 / den4);
                add(sm, sm, mu_m / den4);
                break;
            }
            case OperatorKind::Mcirc: {
                add(sp, sp, mu_p / den2);
                add(sm, sm, mu_m / den2);
                break;
            }
            case OperatorKind::P: {
                add(sp, sp, cs.p);
                add(sm, sm, cs.p);
                break;
            }
            case OperatorKind::Pinv: {
                add(sp, sp, 1.0 / cs.p);
                add(sm, sm, 1.0 / cs.p);
                break;
            }
        }
    }

    TruncatedOperator op{kind, params, Lambda, box, {}};
    op.matrix.resize(long(box.dim()), long(box.dim()));
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    return op;
}

/// Boundary-sampling operator S (or the half-line S° when circ): channel
/// sources to weighted kernel integrals at the marked points.
struct BoundaryIntegralOperator {
    ModelParams params;
    cplx Lambda{};
    TruncationBox box;
    bool circ = false;

    BoundaryVector apply(const ChannelFunctionSet& F) const {
        if (F.box.m_max != box.m_max || F.box.n_max != box.n_max)
            throw std::invalid_argument("source box mismatch");
        BoundaryVector out(box);
        for (const ChannelIndex idx : box.channel_list()) {
            const SourceFunction& f = F.at(idx);
            if (f.is_zero()) continue;
            const ChannelScalars cs = channel_scalars(params, idx, Lambda);
            const double w = std::pow(cs.r, 0.25) / 2.0;
            out.plus(idx) = w * (circ ? circ_plus(cs.zeta, f) : full_side(cs.zeta, f, +1));
            out.minus(idx) = w * (circ ? circ_minus(cs.zeta, f) : full_side(cs.zeta, f, -1));
        }
        return out;
    }

private:
    static cplx full_side(cplx zeta, const SourceFunction& f, int side) {
        const double x0 = (side > 0) ? 1.0 : -1.0;
        if (f.exact()) {
            const double inf = std::numeric_limits<double>::infinity();
            const auto& p = f.pw();
            return std::exp(-zeta * x0) * exp_weighted_integral(p, zeta, -inf, x0) +
                   std::exp(zeta * x0) * exp_weighted_integral(p, -zeta, x0, inf);
        }
        return f.integrate_kernel(
            [zeta, x0](double t) { return std::exp(-zeta * std::abs(t - x0)); }, {x0});
    }

    static cplx circ_plus(cplx zeta, const SourceFunction& f) {
        if (f.exact()) {
            const double inf = std::numeric_limits<double>::infinity();
            const auto& p = f.pw();
            return std::exp(-zeta) * exp_weighted_integral(p, zeta, 0.0, 1.0) +
                   std::exp(zeta) * exp_weighted_integral(p, -zeta, 1.0, inf) -
                   std::exp(-zeta) * exp_weighted_integral(p, -zeta, 0.0, inf);
        }
        return f.integrate_kernel(
            [zeta](double t) -> cplx {
                if (t <= 0.0) return {};
                return std::exp(-zeta * std::abs(t - 1.0)) - std::exp(-zeta * (t + 1.0));
            },
            {0.0, 1.0});
    }

    static cplx circ_minus(cplx zeta, const SourceFunction& f) {
        if (f.exact()) {
            const double inf = std::numeric_limits<double>::infinity();
            const auto& p = f.pw();
            return std::exp(zeta) * exp_weighted_integral(p, zeta, -inf, -1.0) +
                   std::exp(-zeta) * exp_weighted_integral(p, -zeta, -1.0, 0.0) -
                   std::exp(-zeta) * exp_weighted_integral(p, zeta, -inf, 0.0);
        }
        return f.integrate_kernel(
            [zeta](double t) -> cplx {
                if (t >= 0.0) return {};
                return std::exp(-zeta * std::abs(t + 1.0)) - std::exp(zeta * (t - 1.0));
            },
            {-1.0, 0.0});
    }
};

inline BoundaryIntegralOperator build_S(const ModelParams& params, cplx Lambda,
                                        TruncationBox box, bool circ) {
    params.validate();
    box.validate();
    SpectralParam{Lambda}.require_invertible();
    return {params, Lambda, box, circ};
}

/// Correction operator T (or T°): boundary coefficients to channel functions
/// r^{1/4} (C+ φ+ + C- φ-).
struct CorrectionOperator {
    ModelParams params;
    cplx Lambda{};
    TruncationBox box;
    bool circ = false;

    PiecewiseExpPoly channel_function(ChannelIndex idx, cplx c_plus, cplx c_minus) const {
        const ChannelScalars cs = channel_scalars(params, idx, Lambda);
        const double w = std::pow(cs.r, 0.25);
        PiecewiseExpPoly out = PiecewiseExpPoly::zero();
        if (c_plus != cplx{})
            out = out + (circ ? phi_half(cs.zeta, +1) : phi_full(cs.zeta, +1))
                            .pw()
                            .scaled(w * c_plus);
        if (c_minus != cplx{})
            out = out + (circ ? phi_half(cs.zeta, -1) : phi_full(cs.zeta, -1))
                            .pw()
                            .scaled(w * c_minus);
        return out;
    }

    std::vector<PiecewiseExpPoly> apply(const BoundaryVector& C) const {
        if (C.box.m_max != box.m_max || C.box.n_max != box.n_max)
            throw std::invalid_argument("coefficient box mismatch");
        std::vector<PiecewiseExpPoly> out;
        out.reserve(box.channels());
        for (const ChannelIndex idx : box.channel_list())
            out.push_back(channel_function(idx, C.plus(idx), C.minus(idx)));
        return out;
    }
};

inline CorrectionOperator build_T(const ModelParams& params, cplx Lambda, TruncationBox box,
                                  bool circ) {
    params.validate();
    box.validate();
    return {params, Lambda, box, circ};
}

/// Power-iteration condition estimate using a prefactorized LU.
inline double estimate_condition(const Eigen::SparseMatrix<cplx>& A,
                                 Eigen::SparseLU<Eigen::SparseMatrix<cplx>>& lu,
                                 int iterations = 32) {
    const long n = A.rows();
    Eigen::VectorXcd v(n);
    for (long i = 0; i < n; ++i)
        v[i] = cplx(std::cos(0.7 * double(i) + 0.3), std::sin(1.3 * double(i) + 0.1));
    v.normalize();
    Eigen::VectorXcd w = v;
    double smax = 0.0;
    for (int it = 0; it < iterations; ++it) {
        w = A * w;
        w = A.adjoint() * w;
        smax = std::sqrt(w.norm());
        w.normalize();
    }
    double smin_inv = 0.0;
    w = v;
    for (int it = 0; it < iterations; ++it) {
        w = lu.solve(w);
        w = lu.adjoint().solve(w);
        smin_inv = std::sqrt(w.norm());
        w.normalize();
    }
    if (smin_inv == 0.0) return std::numeric_limits<double>::infinity();
    return smax * smin_inv;
}

/// Solves op · Z = rhs for the invertible kinds; rejects when the estimated
/// condition number exceeds 1e12, refines until the relative residual is at
/// most 1e-10.
inline BoundaryVector solve(const TruncatedOperator& op, const BoundaryVector& rhs) {
    if (op.kind != OperatorKind::R && op.kind != OperatorKind::Rcirc &&
        op.kind != OperatorKind::Rprime)
        throw std::invalid_argument("solve expects R, Rcirc, or Rprime");
    SpectralParam{op.Lambda}.require_invertible();
    if (rhs.box.m_max != op.box.m_max || rhs.box.n_max != op.box.n_max)
        throw std::invalid_argument("rhs box mismatch");

    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(op.matrix);
    if (lu.info() != Eigen::Success) throw IllConditionedError(std::numeric_limits<double>::infinity());

    const double cond = estimate_condition(op.matrix, lu);
    if (cond > 1e12) throw IllConditionedError(cond);

    BoundaryVector z(op.box);
    z.data = lu.solve(rhs.data);
    const double rhs_norm = rhs.data.norm();
    if (rhs_norm == 0.0) {
        z.data.setZero();
        return z;
    }
    for (int it = 0; it < 3; ++it) {
        const Eigen::VectorXcd resid = rhs.data - op.matrix * z.data;
        if (resid.norm() <= 1e-10 * rhs_norm) return z;
        z.data += lu.solve(resid);
    }
    if ((rhs.data - op.matrix * z.data).norm() <= 1e-10 * rhs_norm) return z;
    throw IllConditionedError(cond);
}

/// Truncation diagnostic: size of the couplings dropped at the box edge.
inline double edge_residual(const ModelParams& params, cplx Lambda, const TruncationBox& box,
                            const BoundaryVector& Z) {
    double worst = 0.0;
    for (int n = 0; n <= box.n_max; ++n) {
        const ChannelScalars out = channel_scalars(params, {box.m_max + 1, n}, Lambda);
        worst = std::max(worst, out.q_plus * std::abs(Z.plus({box.m_max, n})));
    }
    for (int m = 0; m <= box.m_max; ++m) {
        const ChannelScalars out = channel_scalars(params, {m, box.n_max + 1}, Lambda);
        worst = std::max(worst, out.q_minus * std::abs(Z.minus({m, box.n_max})));
    }
    return worst;
}

struct InvertibilityRow {
    double tau = 0.0;
    double min_jacobi_sv = 0.0;  // smallest singular value over all boxed Jacobi blocks
    double min_im_p = 0.0;       // min over channels of |Im p(i tau)|
    double imag_part_bound = 0.0; // 2 min(mu+, mu-) * min |Im p|
};

/// Scans R'(i tau) invertibility along the imaginary axis.
inline std::vector<InvertibilityRow> invertibility_scan(const ModelParams& params,
                                                        const std::vector<double>& tau_list,
                                                        TruncationBox box) {
    params.validate();
    box.validate();
    const double mu_p = mu_coupling(params.alpha_plus);
    const double mu_m = mu_coupling(params.alpha_minus);
    std::vector<InvertibilityRow> rows;
    rows.reserve(tau_list.size());
    for (double tau : tau_list) {
        if (tau == 0.0) throw std::invalid_argument("tau must be nonzero");
        const cplx Lambda(0.0, tau);
        const auto scal = detail::boxed_scalars(params, Lambda, box);
        InvertibilityRow row;
        row.tau = tau;
        row.min_im_p = std::numeric_limits<double>::infinity();
        for (const auto& cs : scal)
            row.min_im_p = std::min(row.min_im_p, std::abs(cs.p.imag()));
        row.imag_part_bound = 2.0 * std::min(mu_p, mu_m) * row.min_im_p;

        double min_sv = std::numeric_limits<double>::infinity();
        // J+ blocks: fixed n, tridiagonal in m
        for (int n = 0; n <= box.n_max; ++n) {
            Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(box.m_count(), box.m_count());
            for (int m = 0; m <= box.m_max; ++m) {
                const auto& cs = scal[box.channel_slot({m, n})];
                J(m, m) = 2.0 * mu_p * cs.p;
                if (m + 1 <= box.m_max) {
                    const double q = scal[box.channel_slot({m + 1, n})].q_plus;
                    J(m, m + 1) = q;
                    J(m + 1, m) = q;
                }
            }
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(J);
            min_sv = std::min(min_sv, svd.singularValues().minCoeff());
        }
        // J- blocks: fixed m, tridiagonal in n
        for (int m = 0; m <= box.m_max; ++m) {
            Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(box.n_count(), box.n_count());
            for (int n = 0; n <= box.n_max; ++n) {
                const auto& cs = scal[box.channel_slot({m, n})];
                J(n, n) = 2.0 * mu_m * cs.p;
                if (n + 1 <= box.n_max) {
                    const double q = scal[box.channel_slot({m, n + 1})].q_minus;
                    J(n, n + 1) = q;
                    J(n + 1, n) = q;
                }
            }
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(J);
            min_sv = std::min(min_sv, svd.singularValues().minCoeff());
        }
        row.min_jacobi_sv = min_sv;
        rows.push_back(row);
    }
    return rows;
}

} // namespace oscgraph

#endif
