#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mafl/cli.hpp"
#include "mafl/snapshot.hpp"

using namespace mafl;
namespace fs = std::filesystem;

namespace {

fs::path workdir() {
    fs::path d = fs::temp_directory_path() / "mafl_cli_tests";
    fs::create_directories(d);
    return d;
}

fs::path write_cfg(const std::string& name, const std::string& text) {
    fs::path p = workdir() / name;
    std::ofstream f(p, std::ios::binary);
    f << text;
    return p;
}

int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"mafl"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// artifact body: everything after the timestamp header line
std::string body_of(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::string first;
    std::getline(f, first);
    REQUIRE(first.rfind("# run ", 0) == 0);
    std::string rest((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return rest;
}

}  // namespace

TEST_CASE("config parser: sections, types, and unknown-key rejection") {
    RunConfig cfg = parse_config_text(
        "seed = 7\n[grid]\nn = 2\nres = 24\nperiods = 1.0 2.0 3.0 4.0\n"
        "# comment\n[smoothing]\nlevels = 8 16 32\n");
    CHECK(cfg.geti("", "seed", 0) == 7);
    CHECK(cfg.geti("grid", "n", 1) == 2);
    CHECK(cfg.getds("grid", "periods", {}).size() == 4);
    CHECK(cfg.getis("smoothing", "levels", {})[2] == 32);
    CHECK(cfg.geti("grid", "missing", 42) == 42);

    CHECK_THROWS_AS(parse_config_text("[nosuch]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\nno equals sign\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\nres = twelve\n").geti("grid", "res", 0),
                    ConfigError);
}

TEST_CASE("verify-geometry: pass at res 16, fail under-resolved, usage errors") {
    fs::path cfg = write_cfg("v.cfg", "[verify]\nn = 2\nres = 16\nseeds = 2\n");
    fs::path out = workdir() / "vg";
    CHECK(run({"verify-geometry", "--config", cfg.string(), "--out", out.string()}) == 0);
    std::string b = body_of(out / "geometry_report.json");
    CHECK(b.find("\"identity_name\"") != std::string::npos);
    CHECK(b.find("config: [verify]") != std::string::npos);  // config echoed

    CHECK(run({"verify-geometry", "--config", cfg.string(), "--res", "8", "--out",
               (workdir() / "vg8").string()}) == 1);

    fs::path bad = write_cfg("bad.cfg", "[verify]\nwhat = 1\n");
    CHECK(run({"verify-geometry", "--config", bad.string()}) == 2);
    CHECK(run({"verify-geometry", "--config", (workdir() / "missing.cfg").string()}) == 2);
    CHECK(run({"no-such-command"}) == 2);
}

TEST_CASE("run-flow: artifacts, verdict gate, and config guards") {
    fs::path cfg = write_cfg("f.cfg",
                             "[grid]\nn = 1\nres = 32\n[flow]\nt_end = 0.05\n"
                             "snapshot_every = 0.01\nphi0 = band\nphi0_amp = 0.05\n");
    fs::path out = workdir() / "fl";
    CHECK(run({"run-flow", "--config", cfg.string(), "--out", out.string()}) == 0);
    std::string csv = body_of(out / "trajectory.csv");
    CHECK(csv.find("t,sup_phi,sup_phidot") != std::string::npos);
    std::string vj = body_of(out / "flow_verdicts.json");
    CHECK(vj.find("\"pass\": true") != std::string::npos);

    fs::path zero = write_cfg("f0.cfg", "[flow]\nt_end = 0\n");
    CHECK(run({"run-flow", "--config", zero.string()}) == 2);
}

TEST_CASE("run-flow: corrupted envelope constant flips the verdict") {
    std::string base =
        "[grid]\nn = 1\nres = 16\n[forcing]\nkind = expression\nexpr = phi\n"
        "[flow]\nt_end = 0.3\nsnapshot_every = 0.05\nphi0 = band\nphi0_amp = 0.1\n";
    fs::path honest = write_cfg("fe.cfg", base);
    fs::path out1 = workdir() / "fe";
    CHECK(run({"run-flow", "--config", honest.string(), "--out", out1.string()}) == 0);

    fs::path tight = write_cfg("fe2.cfg", base + "[estimates]\nfprime_scale = 0.5\n");
    fs::path out2 = workdir() / "fe2";
    CHECK(run({"run-flow", "--config", tight.string(), "--out", out2.string()}) == 1);
    CHECK(body_of(out2 / "flow_verdicts.json").find("\"pass\": false") !=
          std::string::npos);
}

TEST_CASE("solve-elliptic: report, loadable solution, determinism") {
    fs::path cfg = write_cfg("e.cfg",
                             "[grid]\nn = 1\nres = 48\nperiods = 5.3 7.1\n"
                             "[forcing]\nkind = linear\nlambda = 1.0\nhamp = 0.05\n");
    fs::path out1 = workdir() / "el1";
    fs::path out2 = workdir() / "el2";
    CHECK(run({"solve-elliptic", "--config", cfg.string(), "--out", out1.string()}) == 0);
    CHECK(run({"solve-elliptic", "--config", cfg.string(), "--out", out2.string()}) == 0);

    std::string b1 = body_of(out1 / "elliptic_report.json");
    CHECK(b1.find("\"residual\"") != std::string::npos);
    CHECK(b1 == body_of(out2 / "elliptic_report.json"));  // byte-identical bodies

    ScalarField sol = load_scalar_snapshot((out1 / "elliptic_solution.snap").string());
    CHECK(sol.grid.res == 48);
    CHECK(sol.grid.periods[1] == 7.1);

    fs::path badnorm =
        write_cfg("en.cfg", "[elliptic]\nnormalization = upside-down\n");
    CHECK(run({"solve-elliptic", "--config", badnorm.string()}) == 2);
}

TEST_CASE("smoothing: ladder gate, level guard, corruption trips exit 1") {
    std::string base =
        "[grid]\nn = 1\nres = 128\n[smoothing]\nlevels = 8 16 32\nT = 0.1\n"
        "snapshot_every = 0.01\n";
    fs::path cfg = write_cfg("s.cfg", base);
    fs::path out = workdir() / "sm";
    CHECK(run({"smoothing", "--config", cfg.string(), "--out", out.string()}) == 0);
    std::string rj = body_of(out / "smoothing_report.json");
    CHECK(rj.find("\"cauchy\"") != std::string::npos);
    CHECK(rj.find("\"recovery\"") != std::string::npos);
    CHECK(body_of(out / "pairwise.csv").find("t,d_8_16") != std::string::npos);

    fs::path one = write_cfg("s1.cfg", "[smoothing]\nlevels = 8\n");
    CHECK(run({"smoothing", "--config", one.string()}) == 2);

    fs::path sab = write_cfg("s2.cfg", base + "c_scale = 2\n");
    CHECK(run({"smoothing", "--config", sab.string(), "--out",
               (workdir() / "sm2").string()}) == 1);
}

TEST_CASE("report emits columnar data and repeated runs are byte-identical") {
    fs::path cfg = write_cfg("r.cfg",
                             "[grid]\nn = 1\nres = 32\n[flow]\nt_end = 0.03\n"
                             "snapshot_every = 0.01\nphi0 = band\nphi0_amp = 0.05\n");
    fs::path out1 = workdir() / "rp1";
    fs::path out2 = workdir() / "rp2";
    CHECK(run({"report", "--config", cfg.string(), "--out", out1.string()}) == 0);
    CHECK(run({"report", "--config", cfg.string(), "--out", out2.string()}) == 0);
    std::string b = body_of(out1 / "flow_series.dat");
    CHECK(b.find("# t sup_phi") != std::string::npos);
    CHECK(b == body_of(out2 / "flow_series.dat"));
}
