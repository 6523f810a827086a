#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path scratch = [] {
    const fs::path dir = fs::temp_directory_path() / "oscgraph_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}();

int run(const std::string& args) {
    const std::string cmd = std::string(OSCGRAPH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = scratch / name;
    std::ofstream out(p);
    out << text;
    REQUIRE(out.good());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.is_open());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');) out.push_back(f);
    return out;
}

bool has_meta(const std::vector<std::string>& lines, const std::string& entry) {
    for (const auto& l : lines)
        if (l == "# " + entry) return true;
    return false;
}

}  // namespace

TEST_CASE("multiplicity scan tabulates the regime and the counts") {
    const fs::path cfg = write_config("mult.cfg",
                                      "alpha_plus = 1\nalpha_minus = 1\n"
                                      "lambda_start = 0\nlambda_stop = 4\nlambda_step = 0.25\n");
    const fs::path out = scratch / "mult.csv";
    REQUIRE(run("multiplicity --config " + cfg.string() + " --out " + out.string()) == 0);

    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.at(0) == "lambda,regime,edge,multiplicity");
    bool seen_onset = false;
    for (std::size_t i = 1; i < lines.size() && lines[i][0] != '#'; ++i) {
        const auto f = split_csv(lines[i]);
        REQUIRE(f.size() == 4);
        CHECK(f[1] == "SubSub");
        CHECK(f[2] == "1");
        const double lambda = std::strtod(f[0].c_str(), nullptr);
        if (lambda < 1.0) CHECK(f[3] == "0");  // below the band edge
        if (lines[i] == "1,SubSub,1,2") seen_onset = true;
    }
    CHECK(seen_onset);
    CHECK(has_meta(lines, "command = multiplicity"));
    CHECK(has_meta(lines, "box = 24x24"));
}

TEST_CASE("forced regimes override the couplings") {
    const fs::path cfg = write_config("force.cfg",
                                      "lambda_start = 0\nlambda_stop = 1\nlambda_step = 0.5\n");
    const fs::path out = scratch / "force.csv";

    REQUIRE(run("multiplicity --config " + cfg.string() + " --force-regime supercritical --out " +
                out.string()) == 0);
    auto lines = lines_of(slurp(out));
    CHECK(lines.at(1) == "0,Supercritical,-inf,inf");
    CHECK(lines.at(2) == "0.5,Supercritical,-inf,inf");
    CHECK(has_meta(lines, "force_regime = supercritical"));

    REQUIRE(run("multiplicity --config " + cfg.string() + " --force-regime critsub --out " +
                out.string()) == 0);
    lines = lines_of(slurp(out));
    CHECK(lines.at(1) == "0,CritSub,0.5,0");
    CHECK(lines.at(2) == "0.5,CritSub,0.5,1");
    CHECK(lines.at(3) == "1,CritSub,0.5,3");
}

TEST_CASE("an empty scan still reports its configuration") {
    const fs::path cfg = write_config("empty.cfg",
                                      "lambda_start = 2\nlambda_stop = 2\nlambda_step = 0.1\n");
    const fs::path out = scratch / "empty.csv";
    REQUIRE(run("multiplicity --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.size() > 1);
    CHECK(lines[0] == "lambda,regime,edge,multiplicity");
    for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].rfind("# ", 0) == 0);
}

TEST_CASE("uncoupled resolve is exact and converged") {
    const fs::path cfg = write_config("free.cfg",
                                      "alpha_plus = 0\nalpha_minus = 0\nlambda = 0,1\n"
                                      "box = 8x8\nsource_kind = spline\n");
    const fs::path out = scratch / "free.csv";
    REQUIRE(run("resolve --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    CHECK(lines.at(0) == "m,n,x,u_re,u_im");
    CHECK(has_meta(lines, "doubling_difference = 0"));
    CHECK(has_meta(lines, "converged = true"));
    CHECK(has_meta(lines, "diagnostics_pass = true"));
    // channels away from the source stay exactly zero
    for (std::size_t i = 1; i < lines.size() && lines[i][0] != '#'; ++i) {
        const auto f = split_csv(lines[i]);
        if (f[0] != "0" || f[1] != "0") {
            CHECK(f[3] == "0");
            CHECK(f[4] == "0");
        }
    }
}

TEST_CASE("half-line resolve pins the solution at the vertex") {
    const fs::path cfg = write_config("circ.cfg",
                                      "lambda = 0,1\nbox = 12x12\nsource_kind = spline\n"
                                      "source_center = 0.4\ntol.doubling = 1e-3\n");
    const fs::path out = scratch / "circ.csv";
    REQUIRE(run("resolve --config " + cfg.string() + " --circ --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    bool seen_residual = false;
    for (const auto& l : lines)
        if (l.rfind("# dirichlet_residual = ", 0) == 0) {
            CHECK(std::strtod(l.c_str() + 23, nullptr) < 1e-10);
            seen_residual = true;
        }
    CHECK(seen_residual);
    for (std::size_t i = 1; i < lines.size() && lines[i][0] != '#'; ++i) {
        const auto f = split_csv(lines[i]);
        if (f[2] == "0" || f[2] == "-0") {
            CHECK(std::abs(std::strtod(f[3].c_str(), nullptr)) < 1e-12);
            CHECK(std::abs(std::strtod(f[4].c_str(), nullptr)) < 1e-12);
        }
    }
}

TEST_CASE("a failed diagnostic is a distinct exit code") {
    const fs::path cfg = write_config("tight.cfg",
                                      "lambda = 0,1\nbox = 8x8\nsource_kind = spline\n"
                                      "tol.doubling = 1e-16\n");
    CHECK(run("resolve --config " + cfg.string() + " --out " + (scratch / "tight.csv").string()) ==
          4);
}

TEST_CASE("config and io failures map to their exit codes") {
    const fs::path bad = write_config("bad.cfg", "bogus = 1\n");
    const fs::path ok = write_config("ok.cfg", "lambda_stop = 1\n");
    CHECK(run("multiplicity --config " + bad.string()) == 2);
    CHECK(run("multiplicity --config " + (scratch / "missing.cfg").string()) == 3);
    CHECK(run("multiplicity --config " + ok.string() + " --out /nonexistent_dir/x.csv") == 3);
    CHECK(run("multiplicity --config " + ok.string() + " --format yaml") == 2);
    CHECK(run("multiplicity --config " + ok.string() + " --box 1x1") == 2);
    CHECK(run("multiplicity") == 2);
    CHECK(run("frobnicate --config " + ok.string()) == 2);
    CHECK(run("") == 2);  // a subcommand is required
    CHECK(run("--help") == 0);
    CHECK(run("resolve --config " + write_config("real.cfg", "lambda = 1,0\n").string()) == 2);
    const fs::path neg = write_config("neg.cfg", "suite = jacobi\nalpha_plus = 0\n");
    CHECK(run("verify --config " + neg.string()) == 2);
}

TEST_CASE("repeated runs are byte-identical") {
    const fs::path cfg = write_config("det.cfg",
                                      "lambda_start = 0\nlambda_stop = 3\nlambda_step = 0.125\n"
                                      "alpha_plus = 1.2\nnu_minus = 0.8\n");
    const fs::path out = scratch / "det.csv";
    REQUIRE(run("multiplicity --config " + cfg.string() + " --out " + out.string()) == 0);
    const std::string first = slurp(out);
    REQUIRE(run("multiplicity --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(slurp(out) == first);

    const fs::path jout = scratch / "det.json";
    const std::string jargs =
        "jacobi-scan --config " + cfg.string() + " --format json --out " + jout.string();
    REQUIRE(run(jargs) == 0);
    const std::string jfirst = slurp(jout);
    REQUIRE(run(jargs) == 0);
    CHECK(slurp(jout) == jfirst);
}

TEST_CASE("json reports parse and carry the meta block") {
    const fs::path cfg = write_config("json.cfg",
                                      "lambda_start = 0\nlambda_stop = 2\nlambda_step = 1\n");
    const fs::path out = scratch / "scan.json";
    REQUIRE(run("multiplicity --config " + cfg.string() + " --format json --box 6x6 --out " +
                out.string()) == 0);
    const nlohmann::json doc = nlohmann::json::parse(slurp(out));
    REQUIRE(doc.at("rows").size() == 3);
    CHECK(doc.at("rows").at(0).at("lambda") == 0.0);
    CHECK(doc.at("rows").at(0).at("regime") == "SubSub");
    CHECK(doc.at("meta").at("box") == "6x6");  // command-line override wins
    CHECK(doc.at("meta").at("format") == "json");
    CHECK(doc.at("meta").at("command") == "multiplicity");
}

TEST_CASE("jacobi scan reports the growth of the smallest singular value") {
    const fs::path cfg = write_config("jac.cfg", "tau = 10,40,160,640\nbox = 16x16\n");
    const fs::path out = scratch / "jac.csv";
    REQUIRE(run("jacobi-scan --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.at(0) == "tau,min_singular_value,min_im_p,imag_part_bound");
    double prev = 0.0;
    bool saw_exponent = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].rfind("# growth_exponent = ", 0) == 0) {
            const double e = std::strtod(lines[i].c_str() + 20, nullptr);
            CHECK(e == Catch::Approx(0.5).margin(0.1));
            saw_exponent = true;
        }
        if (lines[i][0] == '#') continue;
        const auto f = split_csv(lines[i]);
        REQUIRE(f.size() == 4);
        const double sv = std::strtod(f[1].c_str(), nullptr);
        const double bound = std::strtod(f[3].c_str(), nullptr);
        CHECK(sv >= bound * (1.0 - 1e-9));  // rigorous lower bound
        CHECK(sv > prev);                   // grows with the offset
        prev = sv;
    }
    CHECK(saw_exponent);
}

TEST_CASE("convergence study shrinks under box doubling") {
    const fs::path cfg = write_config("conv.cfg",
                                      "lambda = 0,1\nbox = 6x6\nsource_kind = spline\n");
    const fs::path out = scratch / "conv.csv";
    REQUIRE(run("convergence --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.at(0) == "m_count,n_count,diff_from_prev,tail_norm");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 1; i < lines.size() && lines[i][0] != '#'; ++i)
        rows.push_back(split_csv(lines[i]));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "6");
    CHECK(rows[1][0] == "11");
    CHECK(rows[2][0] == "21");
    CHECK(rows[0][2] == "0");  // nothing to compare against yet
    const auto col = [&](std::size_t r, std::size_t c) {
        return std::strtod(rows[r][c].c_str(), nullptr);
    };
    CHECK(col(2, 2) < 0.1 * col(1, 2));
    CHECK(col(1, 3) < 0.1 * col(0, 3));
    CHECK(col(2, 3) < 0.1 * col(1, 3));
}

TEST_CASE("verify suites run clean through the command line") {
    const fs::path cfg = write_config("ver.cfg", "tau = 10,40\nbox = 12x12\n");
    const fs::path out = scratch / "ver.csv";
    REQUIRE(run("verify --config " + cfg.string() + " --suite jacobi --out " + out.string()) == 0);
    const auto lines = lines_of(slurp(out));
    REQUIRE(lines.at(0) == "suite,check,value,bound,pass,detail");
    CHECK(has_meta(lines, "checks_failed = 0"));

    REQUIRE(run("verify --config " + cfg.string() + " --suite basis --out " + out.string()) == 0);
    const auto blines = lines_of(slurp(out));
    int rows = 0;
    for (std::size_t i = 1; i < blines.size() && blines[i][0] != '#'; ++i) {
        const auto f = split_csv(blines[i]);
        REQUIRE(f.size() == 6);
        CHECK(f[0] == "basis");
        CHECK(f[4] == "true");
        ++rows;
    }
    CHECK(rows == 5);
}
