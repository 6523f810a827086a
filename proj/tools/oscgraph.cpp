// Command-line front end: parses a flat key = value config, dispatches one
// subcommand, and writes a CSV or JSON report.  Exit codes: 0 success,
// 2 config error, 3 I/O error, 4 failed diagnostic or invariant,
// 5 ill-conditioned system.

#include <complex>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "oscgraph/coupled_resolvent.hpp"
#include "oscgraph/io.hpp"
#include "oscgraph/multiplicity.hpp"
#include "oscgraph/parallel.hpp"
#include "oscgraph/verify.hpp"

namespace {

using namespace oscgraph;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiagnostic = 4;
constexpr int kExitIllConditioned = 5;

struct CliOptions {
    std::string config_path;
    std::string out;
    std::string format;
    std::string box;
    std::string suite;
    std::string force_regime;
    bool circ = false;
};

RunConfig load_config(const CliOptions& opt) {
    RunConfig cfg = parse_config_file(opt.config_path);
    if (!opt.out.empty()) cfg.out = opt.out;
    if (!opt.format.empty())
        cfg.format = opt.format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
    if (!opt.box.empty()) cfg.box = parse_box(opt.box);
    if (opt.circ) cfg.circ = true;
    if (!opt.suite.empty()) cfg.suite = opt.suite;
    if (!opt.force_regime.empty()) cfg.force_regime = opt.force_regime;
    cfg.validate();
    return cfg;
}

void append_config_meta(ReportTable& t, const RunConfig& cfg, const char* command) {
    t.add_meta("command", std::string(command));
    for (auto& kv : resolved_meta(cfg)) t.meta.push_back(std::move(kv));
}

SourceFunction make_source(const SourceSpec& s) {
    return s.kind == SourceSpec::Kind::Gaussian
               ? SourceFunction::gaussian(s.center, s.width, s.amplitude)
               : SourceFunction::spline_bump(s.center, s.width, s.amplitude);
}

int cmd_multiplicity(const RunConfig& cfg) {
    const std::vector<double> grid = cfg.lambda_grid.points();
    const std::optional<RegimeTag> forced = parse_regime(cfg.force_regime);
    const ModelParams par = forced ? regime_representative(cfg.params, *forced) : cfg.params;
    const Regime regime = classify(par);

    std::vector<Multiplicity> mult(grid.size());
    parallel_for_index(grid.size(), [&](std::size_t i) { mult[i] = mult_two_osc(grid[i], par); });

    ReportTable t;
    t.columns = {"lambda", "regime", "edge", "multiplicity"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Cell m = mult[i].infinite ? Cell{std::string("inf")} : Cell{std::int64_t(mult[i].value)};
        t.add_row({grid[i], std::string(regime_name(regime.tag)), regime.edge, m});
    }
    append_config_meta(t, cfg, "multiplicity");
    write_report(t, cfg.out, cfg.format);
    return kExitOk;
}

int cmd_resolve(const RunConfig& cfg) {
    if (cfg.Lambda.imag() == 0.0) throw ConfigError("resolve needs Im lambda != 0");
    ChannelFunctionSet F(cfg.box);
    F.at({cfg.source.m, cfg.source.n}) = make_source(cfg.source);
    const double extent = default_grid(cfg.params, cfg.Lambda, cfg.box).points.back();
    const Grid grid = Grid::uniform(extent, cfg.h);

    const auto solve = [&](TruncationBox box) {
        return cfg.circ ? resolve_circ(cfg.params, cfg.Lambda, F, box, grid)
                        : resolve_full(cfg.params, cfg.Lambda, F, box, grid);
    };
    const ResolventOutput out = solve(cfg.box);
    const ResolventOutput big = solve({2 * cfg.box.m_max, 2 * cfg.box.n_max});
    const double doubling =
        detail::correction_difference(cfg.params, cfg.Lambda, big.boundary, out.boundary, cfg.circ);

    const bool converged = doubling <= cfg.tolerance("doubling");
    bool ok = converged && out.ode_residual <= cfg.tolerance("ode") &&
              out.matching_residual <= cfg.tolerance("matching") &&
              out.edge_residual <= cfg.tolerance("edge") &&
              out.solver_residual <= cfg.tolerance("solver");
    if (cfg.circ) ok = ok && out.dirichlet_residual <= cfg.tolerance("dirichlet");

    ReportTable t;
    t.columns = {"m", "n", "x", "u_re", "u_im"};
    for (const ChannelIndex idx : cfg.box.channel_list()) {
        const SourceFunction& u = out.solution.at(idx);
        for (const double x : grid.points) {
            const cplx v = u(x);
            t.add_row({std::int64_t(idx.m), std::int64_t(idx.n), x, v.real(), v.imag()});
        }
    }
    append_config_meta(t, cfg, "resolve");
    t.add_meta("ode_residual", out.ode_residual);
    t.add_meta("matching_residual", out.matching_residual);
    t.add_meta("edge_residual", out.edge_residual);
    t.add_meta("solver_residual", out.solver_residual);
    if (cfg.circ) t.add_meta("dirichlet_residual", out.dirichlet_residual);
    t.add_meta("doubling_difference", doubling);
    t.add_meta("converged", std::string(converged ? "true" : "false"));
    t.add_meta("diagnostics_pass", std::string(ok ? "true" : "false"));
    write_report(t, cfg.out, cfg.format);
    return ok ? kExitOk : kExitDiagnostic;
}

int cmd_verify(const RunConfig& cfg) {
    const bool basis = cfg.suite == "basis" || cfg.suite == "all";
    const bool jacobi = cfg.suite == "jacobi" || cfg.suite == "all";
    const bool trace = cfg.suite == "traceclass" || cfg.suite == "all";
    if ((jacobi || trace) && (cfg.params.alpha_plus <= 0.0 || cfg.params.alpha_minus <= 0.0))
        throw ConfigError("the jacobi and traceclass suites need positive couplings");

    std::vector<CheckResult> checks;
    const auto append = [&](std::vector<CheckResult> more) {
        for (auto& c : more) checks.push_back(std::move(c));
    };
    if (basis) append(verify_basis());
    if (jacobi) append(verify_jacobi(cfg.params, cfg.tau, cfg.box));
    if (trace) append(verify_traceclass(cfg.params, cfg.Lambda));

    ReportTable t;
    t.columns = {"suite", "check", "value", "bound", "pass", "detail"};
    std::int64_t failed = 0;
    for (const CheckResult& c : checks) {
        failed += c.pass ? 0 : 1;
        t.add_row({c.suite, c.name, c.value, c.bound, std::string(c.pass ? "true" : "false"),
                   c.detail});
    }
    append_config_meta(t, cfg, "verify");
    t.add_meta("checks_total", std::int64_t(checks.size()));
    t.add_meta("checks_failed", failed);
    write_report(t, cfg.out, cfg.format);
    return failed == 0 ? kExitOk : kExitDiagnostic;
}

int cmd_jacobi_scan(const RunConfig& cfg) {
    const std::vector<InvertibilityRow> rows = invertibility_scan(cfg.params, cfg.tau, cfg.box);

    ReportTable t;
    t.columns = {"tau", "min_singular_value", "min_im_p", "imag_part_bound"};
    for (const InvertibilityRow& row : rows)
        t.add_row({row.tau, row.min_jacobi_sv, row.min_im_p, row.imag_part_bound});
    append_config_meta(t, cfg, "jacobi-scan");
    if (rows.size() >= 2) {
        std::vector<double> ts, sv;
        for (const InvertibilityRow& row : rows) {
            ts.push_back(std::abs(row.tau));
            sv.push_back(row.min_jacobi_sv);
        }
        t.add_meta("growth_exponent", fit_power_law(ts, sv).slope);
    }
    write_report(t, cfg.out, cfg.format);
    return kExitOk;
}

int cmd_convergence(const RunConfig& cfg) {
    if (cfg.Lambda.imag() == 0.0) throw ConfigError("convergence needs Im lambda != 0");
    ChannelFunctionSet F(cfg.box);
    F.at({cfg.source.m, cfg.source.n}) = make_source(cfg.source);
    const std::vector<TruncationBox> boxes = {
        cfg.box,
        {2 * cfg.box.m_max, 2 * cfg.box.n_max},
        {4 * cfg.box.m_max, 4 * cfg.box.n_max}};
    const std::vector<ConvergenceRow> rows =
        convergence_study(cfg.params, cfg.Lambda, F, boxes);

    ReportTable t;
    t.columns = {"m_count", "n_count", "diff_from_prev", "tail_norm"};
    for (const ConvergenceRow& row : rows)
        t.add_row({std::int64_t(row.box.m_max + 1), std::int64_t(row.box.n_max + 1),
                   row.diff_from_prev, row.tail_norm});
    append_config_meta(t, cfg, "convergence");
    write_report(t, cfg.out, cfg.format);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coupled-oscillator channel model toolkit"};
    app.require_subcommand(1);

    CliOptions opt;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "run configuration file")->required();
        sub->add_option("--out", opt.out, "output path (default from config; empty = stdout)");
        sub->add_option("--format", opt.format, "report format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--box", opt.box, "truncation box MxN (channel counts)");
        sub->add_flag("--circ", opt.circ, "Dirichlet comparison variant");
        return sub;
    };
    CLI::App* mult =
        add_common(app.add_subcommand("multiplicity", "spectral multiplicity over a lambda grid"));
    mult->add_option("--force-regime", opt.force_regime,
                     "override the fragile coupling classification")
        ->check(CLI::IsMember({"subsub", "critsub", "subcrit", "critcrit", "supercritical"}));
    CLI::App* resolve =
        add_common(app.add_subcommand("resolve", "solve the coupled channel system"));
    CLI::App* verify = add_common(app.add_subcommand("verify", "run invariant suites"));
    verify->add_option("--suite", opt.suite, "which suite to run")
        ->check(CLI::IsMember({"basis", "traceclass", "jacobi", "all"}));
    CLI::App* jacobi =
        add_common(app.add_subcommand("jacobi-scan", "imaginary-axis invertibility scan"));
    add_common(app.add_subcommand("convergence", "successive-box truncation study"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        const RunConfig cfg = load_config(opt);
        if (mult->parsed()) return cmd_multiplicity(cfg);
        if (resolve->parsed()) return cmd_resolve(cfg);
        if (verify->parsed()) return cmd_verify(cfg);
        if (jacobi->parsed()) return cmd_jacobi_scan(cfg);
        return cmd_convergence(cfg);
    } catch (const IllConditionedError& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitIllConditioned;
    } catch (const BoxNotConvergedError& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitDiagnostic;
    } catch (const IoError& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitIo;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "oscgraph: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "oscgraph: unexpected error: %s\n", e.what());
        return 1;
    }
}
