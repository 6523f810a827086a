#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <vector>

#include <oscgraph/basis.hpp>
#include <oscgraph/coupled_resolvent.hpp>
#include <oscgraph/free_resolvent.hpp>
#include <oscgraph/params.hpp>

using namespace oscgraph;
using Catch::Approx;

namespace {

cplx rand_unit(std::mt19937& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    return {d(rng), d(rng)};
}

PiecewiseExpPoly random_source(std::mt19937& rng) {
    std::uniform_real_distribution<double> mag(0.5, 1.5), im(-1.0, 1.0), inner(-0.8, 0.8);
    std::uniform_int_distribution<int> deg(0, 2);
    const std::vector<double> br = {-1.3, 0.2, 0.9};
    std::vector<std::vector<ExpTerm>> pieces(4);
    pieces[0].push_back({rand_unit(rng), deg(rng), cplx(mag(rng), im(rng))});
    pieces[3].push_back({rand_unit(rng), deg(rng), cplx(-mag(rng), im(rng))});
    for (int i = 1; i <= 2; ++i)
        for (int t = 0; t < 2; ++t)
            pieces[std::size_t(i)].push_back({rand_unit(rng), deg(rng), cplx(inner(rng), im(rng))});
    return PiecewiseExpPoly::from_pieces(br, std::move(pieces));
}

std::vector<cplx> dense_solve_oracle(std::vector<std::vector<cplx>> a, std::vector<cplx> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<cplx> x(n);
    for (std::size_t i = n; i-- > 0;) {
        cplx s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

cplx channel_inner(const ChannelFunctionSet& A, const ChannelFunctionSet& B) {
    cplx s{};
    for (const ChannelIndex idx : A.box.channel_list()) {
        const auto& a = A.at(idx);
        const auto& b = B.box.contains(idx) ? B.at(idx) : SourceFunction::zero();
        if (a.is_zero() || b.is_zero()) continue;
        s += inner(a.pw(), b.pw());
    }
    return s;
}

} // namespace

TEST_CASE("uncoupled resolvent reduces to the free convolution") {
    std::mt19937 rng(901);
    const ModelParams params{0.0, 0.0, 1.0, 1.2};
    const cplx Lambda(0.0, 1.0);
    const TruncationBox box{2, 2};

    ChannelFunctionSet F(box);
    F.at({1, 0}) = SourceFunction::piecewise(random_source(rng));
    F.at({0, 1}) = SourceFunction::spline_bump(-0.2, 0.5, {1.0, -0.5});

    for (bool circ : {false, true}) {
        const ResolventOutput out = circ ? resolve_circ(params, Lambda, F, box)
                                         : resolve_full(params, Lambda, F, box);
        REQUIRE(out.boundary.norm() == 0.0);
        REQUIRE(out.solver_residual == 0.0);
        REQUIRE(out.matching_residual < 1e-10);
        REQUIRE(out.ode_residual < 1e-6);
        for (const ChannelIndex idx : box.channel_list()) {
            const SourceFunction& f = F.at(idx);
            const auto cs = channel_scalars(params, idx, Lambda);
            if (f.is_zero()) {
                REQUIRE(out.solution.at(idx).is_zero());
                continue;
            }
            const PiecewiseExpPoly expect =
                circ ? apply_phi_circ_pw(cs.zeta, f.pw()) : apply_phi_pw(cs.zeta, f.pw());
            for (double x : {-2.1, -0.6, 0.4, 1.0, 1.9}) {
                REQUIRE(std::abs(out.solution.at(idx)(x) - expect(x)) <
                        1e-13 * (1.0 + std::abs(expect(x))));
            }
        }
    }
}

TEST_CASE("coupled solve satisfies the matching conditions") {
    const ModelParams params{1.0, 1.0, 1.0, 1.0};
    const cplx Lambda(0.0, 1.0);
    const TruncationBox box{10, 10};

    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({0, 0}) = SourceFunction::spline_bump(-0.3, 0.6, {1.0, 0.4});

    const ResolventOutput out = resolve_full(params, Lambda, F, box);
    REQUIRE(out.boundary.norm() > 1e-3);
    REQUIRE(out.solver_residual < 1e-10);
    REQUIRE(out.matching_residual < 1e-7);
    REQUIRE(out.ode_residual < 1e-6);
    REQUIRE(std::isfinite(out.edge_residual));

    // the standalone residual on the assembled solution agrees
    double edge = 0.0;
    const double standalone = matching_residual(out.solution, params, &edge);
    REQUIRE(standalone < 1e-7);
    REQUIRE(std::abs(standalone - out.matching_residual) < 1e-9);
    REQUIRE(std::abs(edge - out.edge_residual) < 1e-9);

    // corrupting one sizable interior coefficient must break the conditions
    BoundaryVector bad = out.boundary;
    ChannelIndex worst{1, 1};
    double best = 0.0;
    for (const ChannelIndex idx : box.channel_list()) {
        if (box.on_edge(idx)) continue;
        if (std::abs(bad.plus(idx)) > best) {
            best = std::abs(bad.plus(idx));
            worst = idx;
        }
    }
    bad.plus(worst) *= 1.1;
    const auto T = build_T(params, Lambda, box, false);
    ChannelFunctionSet corrupted(box);
    for (const ChannelIndex idx : box.channel_list()) {
        PiecewiseExpPoly u = T.channel_function(idx, bad.plus(idx), bad.minus(idx));
        if (F.box.contains(idx) && !F.at(idx).is_zero()) {
            const auto cs = channel_scalars(params, idx, Lambda);
            u = u + apply_phi_pw(cs.zeta, F.at(idx).pw());
        }
        corrupted.at(idx) = SourceFunction::piecewise(std::move(u));
    }
    REQUIRE(matching_residual(corrupted, params) > 1e-3);
}

TEST_CASE("gaussian source goes through the sampled path") {
    const ModelParams params{0.5, 1.0, 1.0, 1.0};
    const cplx Lambda(0.0, 2.0);
    const TruncationBox box{6, 6};

    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({0, 0}) = SourceFunction::gaussian(0.2, 0.4, {1.0, 0.0});

    const ResolventOutput out = resolve_full(params, Lambda, F, box);
    REQUIRE(out.solution.at({0, 0}).kind() == SourceFunction::Kind::GridSamples);
    REQUIRE(out.solution.at({1, 0}).exact());
    REQUIRE(out.matching_residual < 1e-7);
    REQUIRE(out.ode_residual < 1e-6);
    REQUIRE(out.dirichlet_residual == 0.0);

    // spectral-theorem norm bound at the truncated level
    const double ratio = out.solution.norm() / (F.at({0, 0}).norm() / std::abs(Lambda.imag()));
    REQUIRE(ratio < 1.05);
}

TEST_CASE("half-line solve matches an independent one-oscillator oracle") {
    std::mt19937 rng(903);
    const ModelParams params{0.9, 0.0, 1.0, 1.3};
    const cplx Lambda(0.0, 1.2);
    const TruncationBox box{12, 3};
    const double kappa = params.alpha_plus / std::sqrt(2.0);

    ChannelFunctionSet F(TruncationBox{2, 3});
    F.at({0, 0}) = SourceFunction::piecewise(random_source(rng));
    F.at({1, 2}) = SourceFunction::piecewise(random_source(rng));
    F.at({2, 1}) = SourceFunction::spline_bump(0.8, 0.5, {0.3, 0.9});

    const ResolventOutput out = resolve_circ(params, Lambda, F, box);
    REQUIRE(out.dirichlet_residual < 1e-10);
    REQUIRE(out.matching_residual < 1e-8);

    const ChannelFunctionSet FF = detail::extend_sources(F, box);
    for (int n = 0; n <= box.n_max; ++n) {
        // one-oscillator data at the shifted spectral parameter
        const cplx shifted = Lambda - params.nu_minus * params.nu_minus * (n + 0.5);
        const std::size_t count = std::size_t(box.m_max) + 1;
        std::vector<cplx> zeta(count), v(count);
        std::vector<PiecewiseExpPoly> u0(count);
        for (std::size_t m = 0; m < count; ++m) {
            const double r_one = params.nu_plus * params.nu_plus * (double(m) + 0.5);
            zeta[m] = zeta_branch(r_one, shifted);
            const SourceFunction& f = FF.at({int(m), n});
            u0[m] = f.is_zero() ? PiecewiseExpPoly::zero() : apply_phi_circ_pw(zeta[m], f.pw());
            v[m] = u0[m](1.0);
        }
        std::vector<std::vector<cplx>> A(count, std::vector<cplx>(count));
        std::vector<cplx> b(count);
        for (std::size_t m = 0; m < count; ++m) {
            A[m][m] = jump_half(1.0, zeta[m]);
            cplx rhs{};
            if (m + 1 < count) {
                A[m][m + 1] = -kappa * std::sqrt(double(m + 1));
                rhs += kappa * std::sqrt(double(m + 1)) * v[m + 1];
            }
            if (m > 0) {
                A[m][m - 1] = -kappa * std::sqrt(double(m));
                rhs += kappa * std::sqrt(double(m)) * v[m - 1];
            }
            b[m] = rhs;
        }
        const std::vector<cplx> c = dense_solve_oracle(A, b);
        for (std::size_t m = 0; m < count; ++m) {
            const auto phi = phi_half(zeta[m], +1);
            for (double x : {0.3, 1.0, 1.7, 3.2}) {
                const cplx expect = u0[m](x) + c[m] * phi(x);
                const cplx got = out.solution.at({int(m), n})(x);
                REQUIRE(std::abs(got - expect) < 1e-9 * (1.0 + std::abs(expect)));
            }
        }
    }
}

TEST_CASE("conjugation symmetry") {
    std::mt19937 rng(904);
    const ModelParams params{0.7, 1.1, 1.0, 1.2};
    const cplx Lambda(0.5, 1.3);
    const TruncationBox box{5, 5};

    ChannelFunctionSet F(TruncationBox{2, 2});
    F.at({0, 0}) = SourceFunction::piecewise(random_source(rng));
    F.at({1, 2}) = SourceFunction::piecewise(random_source(rng));
    ChannelFunctionSet Fc(F.box);
    for (const ChannelIndex idx : F.box.channel_list())
        if (!F.at(idx).is_zero())
            Fc.at(idx) = SourceFunction::piecewise(F.at(idx).pw().conjugated());

    const ResolventOutput a = resolve_full(params, Lambda, F, box);
    const ResolventOutput b = resolve_full(params, std::conj(Lambda), Fc, box);
    for (const ChannelIndex idx : box.channel_list()) {
        for (double x : {-1.7, -0.4, 0.9, 2.2}) {
            const cplx lhs = std::conj(a.solution.at(idx)(x));
            const cplx rhs = b.solution.at(idx)(x);
            REQUIRE(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
        }
    }
}

TEST_CASE("resolvent adjoint identity across the spectral gap") {
    std::mt19937 rng(905);
    const ModelParams params{1.0, 1.0, 1.0, 1.0};
    const cplx Lambda(0.0, 1.0);
    const TruncationBox box{6, 6};

    ChannelFunctionSet F(TruncationBox{1, 1}), G(TruncationBox{2, 2});
    F.at({0, 0}) = SourceFunction::piecewise(random_source(rng));
    G.at({1, 1}) = SourceFunction::piecewise(random_source(rng));

    const ResolventOutput rf = resolve_full(params, Lambda, F, box);
    const ResolventOutput rg = resolve_full(params, std::conj(Lambda), G, box);

    const ChannelFunctionSet FF = detail::extend_sources(F, box);
    const ChannelFunctionSet GG = detail::extend_sources(G, box);
    const cplx lhs = channel_inner(rf.solution, GG);
    const cplx rhs = channel_inner(FF, rg.solution);
    REQUIRE(std::abs(lhs - rhs) < 1e-8 * (1.0 + std::abs(lhs)));
}

TEST_CASE("mirror symmetry under oscillator swap") {
    std::mt19937 rng(906);
    const ModelParams params{0.8, 1.2, 1.0, 1.3};
    const cplx Lambda(0.0, 1.1);
    const TruncationBox box{5, 5};

    const PiecewiseExpPoly f = random_source(rng);
    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({1, 0}) = SourceFunction::piecewise(f);
    ChannelFunctionSet Fm(TruncationBox{1, 1});
    Fm.at({0, 1}) = SourceFunction::piecewise(f.reflected());

    const ResolventOutput a = resolve_full(params, Lambda, F, box);
    const ResolventOutput b = resolve_full(params.mirrored(), Lambda, Fm, box);
    for (const ChannelIndex idx : box.channel_list()) {
        for (double x : {-2.0, -1.0, -0.3, 0.6, 1.4}) {
            const cplx lhs = a.solution.at(idx)(x);
            const cplx rhs = b.solution.at({idx.n, idx.m})(-x);
            REQUIRE(std::abs(lhs - rhs) < 1e-9 * (1.0 + std::abs(lhs)));
        }
    }
}

TEST_CASE("box doubling self-check") {
    std::mt19937 rng(907);
    const ModelParams params{1.0, 1.0, 1.0, 1.0};
    const cplx Lambda(0.0, 1.0);
    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({0, 0}) = SourceFunction::piecewise(random_source(rng));

    const Grid grid = default_grid(params, Lambda, TruncationBox{10, 10});
    REQUIRE_NOTHROW(resolve_full(params, Lambda, F, TruncationBox{10, 10}, grid, 1e-5));
    REQUIRE_THROWS_AS(resolve_full(params, Lambda, F, TruncationBox{1, 1}, grid, 1e-12),
                      BoxNotConvergedError);
}

TEST_CASE("successive boxes converge geometrically") {
    const cplx Lambda(0.0, 1.0);
    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({0, 0}) = SourceFunction::spline_bump(0.1, 0.7, {1.0, 0.0});
    const std::vector<TruncationBox> boxes{{2, 2}, {4, 4}, {8, 8}, {16, 16}};

    const ModelParams weak{0.25, 0.25, 1.0, 1.0};
    const auto rows = convergence_study(weak, Lambda, F, boxes);
    REQUIRE(rows.size() == 4);
    REQUIRE(rows[0].diff_from_prev == 0.0);
    for (std::size_t i = 2; i < rows.size(); ++i)
        REQUIRE(rows[i].diff_from_prev < rows[i - 1].diff_from_prev);
    for (std::size_t i = 1; i < rows.size(); ++i)
        REQUIRE(rows[i].tail_norm < rows[i - 1].tail_norm);

    const ModelParams off{0.0, 0.0, 1.0, 1.0};
    for (const auto& row : convergence_study(off, Lambda, F, boxes)) {
        REQUIRE(row.diff_from_prev == 0.0);
        REQUIRE(row.tail_norm == 0.0);
    }

    REQUIRE_THROWS_AS(convergence_study(weak, Lambda, F, {{4, 4}, {2, 2}}),
                      std::invalid_argument);
}

TEST_CASE("coefficient shells decay with channel order") {
    const ModelParams params{1.0, 1.0, 1.0, 1.0};
    const cplx Lambda(0.0, 2.0);
    const TruncationBox box{12, 12};
    ChannelFunctionSet F(TruncationBox{1, 1});
    F.at({0, 0}) = SourceFunction::spline_bump(0.0, 0.8, {1.0, 0.0});

    const ResolventOutput out = resolve_full(params, Lambda, F, box);
    std::vector<double> shell(std::size_t(box.m_max + box.n_max) + 1, 0.0);
    for (const ChannelIndex idx : box.channel_list()) {
        const std::size_t k = std::size_t(idx.m + idx.n);
        shell[k] = std::max({shell[k], std::abs(out.boundary.plus(idx)),
                             std::abs(out.boundary.minus(idx))});
    }
    for (std::size_t k = 2; k + 2 < shell.size(); ++k) REQUIRE(shell[k + 1] < shell[k]);
}
