#ifndef OSCGRAPH_QUADRATURE_HPP
#define OSCGRAPH_QUADRATURE_HPP

#include <cmath>
#include <complex>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oscgraph {

/// Adaptive Gauss(7)-Kronrod(15) quadrature for complex-valued integrands on a
/// finite interval.  The worst panel is split until the summed error estimate
/// is below tolerance; the error scale uses the L1 estimate so near-cancelling
/// integrals terminate.
class AdaptiveGK {
public:
    struct Result {
        std::complex<double> value{};
        double error = 0.0;
        std::size_t evals = 0;
    };

    static Result integrate(const std::function<std::complex<double>(double)>& f,
                            double a, double b,
                            double rel_tol = 1e-12, double abs_floor = 1e-300,
                            std::size_t max_panels = 4000) {
        struct Panel {
            double a, b, error, resabs;
            std::complex<double> value;
        };
        auto make_panel = [&](double lo, double hi, Result& acct) {
            Panel p;
            p.a = lo;
            p.b = hi;
            gk15(f, lo, hi, p.value, p.error, p.resabs);
            acct.evals += 15;
            return p;
        };

        Result acct;
        std::deque<Panel> panels{make_panel(a, b, acct)};
        while (panels.size() < max_panels) {
            double err_sum = 0.0, resabs_sum = 0.0;
            std::complex<double> val{};
            std::size_t worst = 0;
            for (std::size_t i = 0; i < panels.size(); ++i) {
                err_sum += panels[i].error;
                resabs_sum += panels[i].resabs;
                val += panels[i].value;
                if (panels[i].error > panels[worst].error) worst = i;
            }
            const double scale =
                std::max({std::abs(val), 1e-4 * resabs_sum, abs_floor});
            if (err_sum <= rel_tol * scale) break;
            const Panel w = panels[worst];
            if (w.b - w.a < 1e-14 * (std::abs(w.a) + std::abs(w.b) + 1.0)) break;
            panels.erase(panels.begin() + long(worst));
            const double mid = 0.5 * (w.a + w.b);
            panels.push_back(make_panel(w.a, mid, acct));
            panels.push_back(make_panel(mid, w.b, acct));
        }
        for (const auto& p : panels) {
            acct.value += p.value;
            acct.error += p.error;
        }
        return acct;
    }

private:
    static void gk15(const std::function<std::complex<double>(double)>& f,
                     double a, double b, std::complex<double>& value,
                     double& error, double& resabs) {
        // Kronrod 15 nodes/weights on [-1,1]; Gauss 7 weights on the odd nodes.
        static const double xk[8] = {
            0.991455371120813, 0.949107912342759, 0.864864423359769,
            0.741531185599394, 0.586087235467691, 0.405845151377397,
            0.207784955007898, 0.0};
        static const double wk[8] = {
            0.022935322010529, 0.063092092629979, 0.104790010322250,
            0.140653259715525, 0.169004726639267, 0.190350578064785,
            0.204432940075298, 0.209482141084728};
        static const double wg[4] = {
            0.129484966168870, 0.279705391489277, 0.381830050505119,
            0.417959183673469};
        const double h = 0.5 * (b - a);
        const double c = 0.5 * (a + b);
        std::complex<double> ik{}, ig{};
        double rabs = 0.0;
        for (int i = 0; i < 8; ++i) {
            if (xk[i] == 0.0) {
                const std::complex<double> fc = f(c);
                ik += wk[i] * fc;
                ig += wg[3] * fc;
                rabs += wk[i] * std::abs(fc);
            } else {
                const std::complex<double> f1 = f(c - h * xk[i]);
                const std::complex<double> f2 = f(c + h * xk[i]);
                ik += wk[i] * (f1 + f2);
                if (i % 2 == 1) ig += wg[i / 2] * (f1 + f2);
                rabs += wk[i] * (std::abs(f1) + std::abs(f2));
            }
        }
        value = ik * h;
        error = std::abs(ik - ig) * std::abs(h);
        resabs = rabs * std::abs(h);
    }
};

/// Integrate over consecutive panels given by a breakpoint list, e.g. for
/// piecewise-smooth integrands with known kinks.
inline std::complex<double> integrate_segmented(
    const std::function<std::complex<double>(double)>& f,
    const std::vector<double>& pts, double rel_tol = 1e-12) {
    if (pts.size() < 2) throw std::invalid_argument("need at least one segment");
    std::complex<double> total{};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        total += AdaptiveGK::integrate(f, pts[i], pts[i + 1], rel_tol).value;
    return total;
}

} // namespace oscgraph

#endif
