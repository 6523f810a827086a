// Closed-form integration of piecewise exponential-polynomials against the
// adaptive Gauss-Kronrod oracle: single monomials, products, tails,
// restriction, derivatives.

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "oscgraph/piecewise_exp.hpp"
#include "oscgraph/quadrature.hpp"

using namespace oscgraph;
using cd = std::complex<double>;

TEST_CASE("monomial integrals match quadrature") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ab(-3.0, 3.0), sre(-2.0, 2.0);
    std::uniform_int_distribution<int> kd(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        double a = ab(rng), b = ab(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 1e-3) continue;
        const int k = kd(rng);
        cd s{sre(rng), sre(rng)};
        if (trial % 5 == 0) s = cd{0.0, 0.0};
        if (trial % 7 == 0) s *= 1e-6;  // near-degenerate rate
        const cd exact = exp_monomial_integral(k, s, a, b);
        const cd quad = AdaptiveGK::integrate(
                            [&](double x) { return std::pow(x, k) * std::exp(s * x); },
                            a, b, 1e-13)
                            .value;
        CHECK(std::abs(exact - quad) < 1e-11 * (1.0 + std::abs(quad)));
    }
}

TEST_CASE("tail integrals") {
    const cd s{-1.3, 0.7};
    const cd exact = exp_monomial_integral_right(3, s, 0.5);
    const cd quad = AdaptiveGK::integrate(
                        [&](double x) { return std::pow(x, 3) * std::exp(s * x); },
                        0.5, 40.0, 1e-13)
                        .value;
    CHECK(std::abs(exact - quad) < 1e-11);

    const cd exactL = exp_monomial_integral_left(2, -s, -0.25);
    const cd quadL = AdaptiveGK::integrate(
                         [&](double x) { return std::pow(x, 2) * std::exp(-s * x); },
                         -40.0, -0.25, 1e-13)
                         .value;
    CHECK(std::abs(exactL - quadL) < 1e-11);

    CHECK_THROWS_AS(exp_monomial_integral_right(0, cd{0.2, 0.0}, 0.0), std::domain_error);
}

namespace {

PiecewiseExpPoly random_pw(std::mt19937& rng) {
    std::uniform_real_distribution<double> cd_(-1.0, 1.0), rr(-1.5, -0.2);
    std::uniform_int_distribution<int> kd(0, 3);
    std::vector<double> breaks = {-1.0, 0.3, 1.2};
    std::vector<std::vector<ExpTerm>> pieces(4);
    for (std::size_t i = 1; i <= 2; ++i)
        for (int t = 0; t < 2; ++t)
            pieces[i].push_back({cd{cd_(rng), cd_(rng)}, kd(rng), cd{cd_(rng), cd_(rng)}});
    pieces[3].push_back({cd{cd_(rng), cd_(rng)}, kd(rng), cd{rr(rng), cd_(rng)}});
    pieces[0].push_back({cd{cd_(rng), cd_(rng)}, kd(rng), cd{-rr(rng), cd_(rng)}});
    return PiecewiseExpPoly::from_pieces(std::move(breaks), std::move(pieces));
}

std::complex<double> quad_over(const PiecewiseExpPoly& f, double lo, double hi) {
    std::vector<double> pts = {lo};
    for (double b : f.breakpoints())
        if (b > lo && b < hi) pts.push_back(b);
    pts.push_back(hi);
    return integrate_segmented([&](double x) { return f(x); }, pts, 1e-13);
}

} // namespace

TEST_CASE("piecewise product and integral vs quadrature") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const auto f = random_pw(rng);
        const auto g = random_pw(rng);
        const cd exact = bilinear(f, g);
        const cd quad = quad_over(f * g, -100.0, 100.0);
        CHECK(std::abs(exact - quad) < 1e-9 * (1.0 + std::abs(exact)));

        const cd ip = inner(f, g);
        const auto prod = f * g.conjugated();
        const cd quad2 = quad_over(prod, -100.0, 100.0);
        CHECK(std::abs(ip - quad2) < 1e-9 * (1.0 + std::abs(ip)));
    }
}

TEST_CASE("eval, one-sided derivative, reflection") {
    std::mt19937 rng(31);
    const auto f = random_pw(rng);

    const double h = 1e-6;
    for (double x : {-0.5, 0.7, 2.0}) {
        const cd fd = (f(x + h) - f(x - h)) / (2.0 * h);
        CHECK(std::abs(f.eval_deriv(x) - fd) < 1e-6 * (1.0 + std::abs(fd)));
        CHECK(std::abs(f.derivative()(x) - f.eval_deriv(x)) < 1e-12);
    }

    const auto r = f.reflected();
    for (double x : {-2.0, -0.4, 0.1, 0.9, 1.5})
        CHECK(std::abs(r(x) - f(-x)) < 1e-12 * (1.0 + std::abs(f(-x))));

    const auto c = f.conjugated();
    CHECK(std::abs(c(0.4) - std::conj(f(0.4))) < 1e-14);

    // one-sided evaluation picks the correct piece at a breakpoint
    const auto step = PiecewiseExpPoly::from_pieces(
        {0.0}, {{{cd{1.0, 0.0}, 0, cd{1.0, 0.0}}}, {{cd{2.0, 0.0}, 0, cd{-1.0, 0.0}}}});
    CHECK(std::abs(step.eval(0.0, -1) - 1.0) < 1e-15);
    CHECK(std::abs(step.eval(0.0, +1) - 2.0) < 1e-15);
}

TEST_CASE("restriction and partial integrals") {
    std::mt19937 rng(41);
    const auto f = random_pw(rng);
    const cd part = f.integrate(-0.7, 0.9);
    const cd quad = quad_over(f, -0.7, 0.9);
    CHECK(std::abs(part - quad) < 1e-10 * (1.0 + std::abs(quad)));

    const auto g = f.restricted(-0.7, 0.9);
    CHECK(std::abs(g(-0.8)) == 0.0);
    CHECK(std::abs(g(1.0)) == 0.0);
    CHECK(std::abs(g(0.0) - f(0.0)) < 1e-14);
}

TEST_CASE("compaction merges duplicate terms") {
    const auto f = PiecewiseExpPoly::supported(
        0.0, 1.0, {{cd{1.0, 0.0}, 1, cd{2.0, 0.0}}, {cd{0.5, 0.0}, 1, cd{2.0, 0.0}}});
    const auto g = f.compacted();
    CHECK(g.pieces()[1].size() == 1);
    CHECK(std::abs(g(0.5) - f(0.5)) < 1e-14);
}
