// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of
// failures. Each criterion is self-contained and uses independent data.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mafl/cli.hpp"
#include "mafl/elliptic.hpp"
#include "mafl/errors.hpp"
#include "mafl/estimates.hpp"
#include "mafl/flow.hpp"
#include "mafl/forcing.hpp"
#include "mafl/geometry.hpp"
#include "mafl/smoothing.hpp"
#include "support/fd_flow.hpp"
#include "support/testutil.hpp"

using namespace mafl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

TorusGrid square_grid(int n, int res) {
    return make_grid(n, std::vector<double>(2 * n, 2 * M_PI), res);
}

TensorField seeded_vector(const TorusGrid& g, std::uint64_t seed) {
    TensorField X(g, {IndexKind::UpperHolo});
    for (int m = 0; m < g.n; ++m)
        X.comps[m] = testutil::seeded_band(g, seed + 101 * m, 2, 1.0).v;
    return X;
}

TensorField seeded_form(const TorusGrid& g, std::uint64_t seed) {
    TensorField a(g, {IndexKind::LowerHolo});
    for (int m = 0; m < g.n; ++m)
        a.comps[m] = testutil::seeded_band(g, seed + 707 * m, 2, 1.0).v;
    return a;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
        s = std::max(s, std::abs(a[p].real() - b[p].real()));
    return s;
}

double tensor_sup(const TensorField& t) {
    double s = 0.0;
    for (const auto& c : t.comps)
        for (const Complex& x : c) s = std::max(s, std::abs(x));
    return s;
}

std::map<std::string, double> residual_map(const std::vector<ResidualReport>& rs) {
    std::map<std::string, double> m;
    for (const auto& r : rs) m[r.identity_name] = r.sup_residual;
    return m;
}

ScalarField shift_half_cell(const ScalarField& f) {
    const TorusGrid& g = f.grid;
    CVec spec = spectrum(f);
    std::vector<long> m(g.real_dim());
    for (std::size_t p = 0; p < spec.size(); ++p) {
        g.unravel(p, m.data());
        double phase = 0.0;
        for (int a = 0; a < g.real_dim(); ++a) {
            long k = fft::signed_freq(m[a], g.res);
            if (2 * k == g.res) k = 0;
            phase += 2.0 * M_PI * k / g.periods[a] * (0.5 * g.spacing(a));
        }
        spec[p] *= Complex(std::cos(phase), std::sin(phase));
    }
    return from_spectrum(g, spec);
}

struct Manufactured {
    EllipticProblem pb;
    ScalarField phi_star;
};

// F' = 1 problem with known solution on detuned periods (no resonance of the
// flat linearization).
Manufactured manufactured(std::uint64_t seed, double amp, int res) {
    TorusGrid g = make_grid(1, {5.3, 7.1}, res);
    HermitianMetricField gh = flat_metric(g);
    ScalarField ps = testutil::seeded_band(g, seed, 2, amp, true);
    HermitianMetricField gm = metric_from_potential(gh, ps);
    ScalarField ht(g);
    for (std::size_t p = 0; p < ht.size(); ++p)
        ht[p] = Complex(gm.logdet[p].real() - gh.logdet[p].real() + ps[p].real(), 0.0);
    Manufactured m;
    m.pb = {gh, forcing_linear(1.0, ht), Normalization::None};
    m.phi_star = ps;
    return m;
}

// 1. Identity suite on 20 seeded non-Kahler metrics plus refinement shrink.
bool criterion1(std::string& msg) {
    auto t0 = Clock::now();
    TorusGrid g32 = square_grid(2, 32);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        std::uint64_t seed = 100 + s;
        HermitianMetricField m = perturbed_metric(g32, seed, 0.05, 2);
        auto rs = verify_identities(m, seeded_vector(g32, seed + 500),
                                    seeded_form(g32, seed + 900), seed);
        for (const auto& r : rs) worst = std::max(worst, r.sup_residual);
    }
    bool resid_ok = worst < 1e-6;

    // refinement on a fixed metric: each residual must shrink 10x per
    // doubling until it reaches the 1e-11 roundoff floor
    const double floor = 1e-11;
    auto leg = [&](int res) {
        TorusGrid g = square_grid(2, res);
        HermitianMetricField m = perturbed_metric(g, 7, 0.05, 2, res <= 32);
        return residual_map(verify_identities(m, seeded_vector(g, 507),
                                              seeded_form(g, 907), 7));
    };
    std::map<std::string, double> r16 = leg(16), r32 = leg(32);
    bool shrink_ok = true;
    bool need64 = false;
    for (const auto& [name, coarse] : r16) {
        double fine = r32.at(name);
        if (!(fine <= coarse / 10.0 || fine < floor)) shrink_ok = false;
        if (fine >= floor) need64 = true;
    }
    if (need64) {
        std::map<std::string, double> r64 = leg(64);
        for (const auto& [name, coarse] : r32)
            if (!(r64.at(name) <= coarse / 10.0 || r64.at(name) < floor))
                shrink_ok = false;
    }
    double dt = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "20 metrics, max residual %.2e; 16->32 shrink-or-floor %s%s; %.0fs",
                  worst, shrink_ok ? "ok" : "violated",
                  need64 ? " (64 leg run)" : " (res-32 at floor, 64 leg vacuous)", dt);
    msg = buf;
    return resid_ok && shrink_ok && dt < 120.0;
}

// 2. Kahler degeneration: potential metrics have no torsion and the
// torsion-Bianchi lines collapse to classical symmetries.
bool criterion2(std::string& msg) {
    TorusGrid g = square_grid(2, 32);
    HermitianMetricField flat = flat_metric(g);
    ScalarField psi = testutil::seeded_band(g, 11, 2, 0.05, true);
    HermitianMetricField m = metric_from_potential(flat, psi);
    double tnorm = tensor_sup(torsion(m));
    double worst = 0.0;
    for (const auto& r : verify_torsion_bianchi(m, 11))
        worst = std::max(worst, r.sup_residual);
    char buf[160];
    std::snprintf(buf, sizeof buf, "|T| = %.2e, worst torsion-Bianchi line %.2e", tnorm,
                  worst);
    msg = buf;
    return tnorm < 1e-8 && worst < 1e-8;
}

// 3. Spectral flow vs staggered finite-difference oracle, n = 1, res 128.
bool criterion3(std::string& msg) {
    auto t0 = Clock::now();
    const int res = 128;
    const double T = 0.05;
    TorusGrid g = square_grid(1, res);
    HermitianMetricField ghat = flat_metric(g);
    double worst_all = 0.0;
    for (bool with_forcing : {false, true}) {
        ScalarField phi0(g), h(g);
        std::vector<long> m(2);
        for (std::size_t p = 0; p < phi0.size(); ++p) {
            g.unravel(p, m.data());
            double x = g.coord(0, m[0]), y = g.coord(1, m[1]);
            phi0[p] = 0.1 * std::cos(x);
            h[p] = 0.05 * std::cos(x) + 0.03 * std::sin(y);
        }
        ForcingSpec f = with_forcing ? forcing_linear(1.0, h) : forcing_zero();
        Trajectory tr = run_flow(phi0, ghat, f, T);

        FdFlow fd(res, 2 * M_PI, 2 * M_PI);
        for (int i = 0; i < res; ++i)
            for (int j = 0; j < res; ++j)
                fd.phi[static_cast<std::size_t>(i) * res + j] = 0.1 * std::cos(fd.x_at(i));
        if (with_forcing)
            fd.F = [](double phi, double x, double y) {
                return phi - (0.05 * std::cos(x) + 0.03 * std::sin(y));
            };
        fd.run(T, 2e-4);

        ScalarField ours = shift_half_cell(tr.points.back().phi);
        for (int i = 0; i < res; ++i)
            for (int j = 0; j < res; ++j)
                worst_all = std::max(
                    worst_all, std::abs(ours[static_cast<std::size_t>(i) * res + j].real() -
                                        fd.phi[static_cast<std::size_t>(i) * res + j]));
    }
    double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "sup difference %.2e over F in {0, phi-h}; %.0fs",
                  worst_all, dt);
    msg = buf;
    return worst_all < 1e-4 && dt < 60.0;
}

// 4. Lemma 3.1 envelope in its three regimes.
bool criterion4(std::string& msg) {
    TorusGrid g = square_grid(1, 32);
    HermitianMetricField ghat = flat_metric(g);
    DtPolicy pol;
    pol.snapshot_every = 0.02;

    // F = 0: sup|phidot| nonincreasing up to roundoff slack
    ScalarField band = testutil::seeded_band(g, 17, 2, 0.05, true);
    Trajectory t1 = run_flow(band, ghat, forcing_zero(), 0.2, pol);
    bool mono = true;
    double slack = 1e-8 * (1.0 + sup_norm(t1.points.front().phidot));
    for (std::size_t k = 1; k < t1.points.size(); ++k)
        if (sup_norm(t1.points[k].phidot) > sup_norm(t1.points[k - 1].phidot) + slack)
            mono = false;
    BoundVerdict v1 = check_lemma31(t1, forcing_zero());

    // F = phi with constant data: exact e^t growth inside the 1.05 envelope
    ScalarField cdata(g);
    for (auto& c : cdata.v) c = Complex(0.1, 0.0);
    Trajectory t2 = run_flow(cdata, ghat, forcing_expression("phi"), 0.3, pol);
    BoundVerdict v2 = check_lemma31(t2, forcing_expression("phi"));

    // F = phi - h with seeded nonconstant data: fitted envelope at all times
    ScalarField h = testutil::seeded_band(g, 19, 2, 0.1, true);
    Trajectory t3 = run_flow(band, ghat, forcing_linear(1.0, h), 0.2, pol);
    BoundVerdict v3 = check_lemma31(t3, forcing_linear(1.0, h));

    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "F=0 monotone %s; F=phi margin %.2e; F=phi-h margin %.2e",
                  mono ? "yes" : "no", v2.margin, v3.margin);
    msg = buf;
    return mono && v1.pass && v2.pass && v2.margin > 0 && v3.pass;
}

// 5. Elliptic solution is a fixed point of the parabolic flow.
bool criterion5(std::string& msg) {
    Manufactured m = manufactured(13, 0.06, 48);
    SolveReport rep = solve_elliptic(m.pb, ScalarField(m.pb.ghat.grid()));
    DtPolicy pol;
    pol.snapshot_every = 0.01;
    Trajectory tr = run_flow(rep.phi, m.pb.ghat, m.pb.F, 0.05, pol);
    double worst = 0.0;
    for (const auto& pt : tr.points) worst = std::max(worst, sup_diff(pt.phi, rep.phi));
    char buf[96];
    std::snprintf(buf, sizeof buf, "max drift %.2e over [0, 0.05]", worst);
    msg = buf;
    return worst < 1e-8;
}

// 6. Volume identity across the potential corpus, n = 1 and n = 2.
bool criterion6(std::string& msg) {
    double worst = 0.0;
    TorusGrid g1 = square_grid(1, 64);
    std::vector<ScalarField> pots1;
    pots1.push_back(testutil::seeded_band(g1, 3, 3, 0.2, true));
    pots1.push_back(testutil::seeded_band(g1, 23, 2, 0.1, true));
    pots1.push_back(testutil::kink_field(g1, 0.3));
    for (const auto& gh : {flat_metric(g1), perturbed_metric(g1, 5, 0.1)})
        for (const auto& phi : pots1)
            worst = std::max(worst, volume_identity(phi, gh));

    TorusGrid g2 = square_grid(2, 16);
    HermitianMetricField gh2 = flat_metric(g2);
    for (std::uint64_t s : {4ull, 14ull, 24ull})
        worst = std::max(worst,
                         volume_identity(testutil::seeded_band(g2, s, 2, 0.04, true), gh2));
    char buf[96];
    std::snprintf(buf, sizeof buf, "max defect %.2e over 9 corpus cases", worst);
    msg = buf;
    return worst < 1e-10;
}

// 7. Stability: two Newton starts agree up to the gauged constant.
bool criterion7(std::string& msg) {
    Manufactured m = manufactured(41, 0.06, 48);
    SolveReport a = solve_elliptic(m.pb, ScalarField(m.pb.ghat.grid()));
    std::mt19937_64 rng(7);
    SolveReport b =
        solve_elliptic(m.pb, testutil::random_band(m.pb.ghat.grid(), 2, rng, 0.05));
    double gap = stability_gap(a.phi, b.phi, m.pb);
    char buf[96];
    std::snprintf(buf, sizeof buf, "stability gap %.2e", gap);
    msg = buf;
    return gap < 1e-8;
}

// 8. Smoothing ladder at res 256: monotone data errors, shrinking Cauchy
// distances, uniform flow-time bounds, recovery.
bool criterion8(std::string& msg) {
    auto t0 = Clock::now();
    TorusGrid g = square_grid(1, 256);
    HermitianMetricField gh = flat_metric(g);
    NonsmoothSolution ns = build_nonsmooth_solution(gh, KinkSpec{});
    SmoothingExperiment exp{gh, ns.phi, ns.F};
    exp.levels = {8, 16, 32, 64};
    exp.T = 0.1;
    exp.snapshot_every = 0.01;
    SmoothingReport rep = run_pipeline(exp);

    bool ok_levels = true, mono_phij = true, mono_dot = true;
    for (std::size_t i = 0; i < rep.results.size(); ++i) {
        if (!rep.results[i].ok) ok_levels = false;
        if (i > 0 && !(rep.results[i].phij_err < rep.results[i - 1].phij_err))
            mono_phij = false;
        if (i > 0 && !(rep.results[i].phidot0 < rep.results[i - 1].phidot0))
            mono_dot = false;
    }
    double dot64 = rep.results.back().phidot0;
    bool cauchy = false, bounds = false, recovery = false;
    if (ok_levels) {
        cauchy = cauchy_check(rep, 0.05).pass;
        recovery = recovery_check(rep).pass;
        std::vector<Trajectory> family;
        for (const auto& lr : rep.results) family.push_back(lr.tr);
        bounds = check_smoothing_bounds(family, gh, 0.05).pass;
    }
    double dt = seconds_since(t0);
    char buf[224];
    std::snprintf(buf, sizeof buf,
                  "phij_err %s, phidot0 %s (j=64: %.2e), cauchy %s, bounds %s, "
                  "recovery %s; %.0fs",
                  mono_phij ? "dec" : "NOT dec", mono_dot ? "dec" : "NOT dec", dot64,
                  cauchy ? "pass" : "fail", bounds ? "pass" : "fail",
                  recovery ? "pass" : "fail", dt);
    msg = buf;
    return ok_levels && mono_phij && mono_dot && dot64 < 1e-2 && cauchy && bounds &&
           recovery && dt < 600.0;
}

// 9. Direct residuals of the two curvature-potential identities on random
// admissible states.
bool criterion9(std::string& msg) {
    TorusGrid g = square_grid(2, 32);
    double w1 = 0.0, w2 = 0.0;
    for (int i = 0; i < 10; ++i) {
        HermitianMetricField ghat = perturbed_metric(g, 200 + i, 0.05, 2);
        ScalarField phi = testutil::seeded_band(g, 300 + i, 2, 0.02, true);
        HermitianMetricField gm = metric_from_potential(ghat, phi);
        w1 = std::max(w1, identity_dbar_phi_residual(gm, ghat));
        w2 = std::max(w2, identity_ricci_residual(gm, ghat));
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "dbar-Phi %.2e, Ricci difference %.2e over 10 states",
                  w1, w2);
    msg = buf;
    return w1 < 1e-6 && w2 < 1e-6;
}

std::string body_of(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) return "<missing " + p.string() + ">";
    std::string first;
    std::getline(f, first);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

// 10. Byte-identical artifacts for identical config + seed.
bool criterion10(std::string& msg) {
    fs::path work = fs::temp_directory_path() / "mafl_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream f(work / name, std::ios::binary);
        f << text;
        return (work / name).string();
    };
    std::string fcfg = write("f.cfg",
                             "[grid]\nn = 1\nres = 32\n[flow]\nt_end = 0.03\n"
                             "snapshot_every = 0.01\nphi0 = band\nphi0_amp = 0.05\n");
    std::string vcfg = write("v.cfg", "[verify]\nn = 2\nres = 16\nseeds = 2\n");

    auto run = [&](std::initializer_list<std::string> args) {
        std::vector<const char*> argv{"mafl"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
    };
    std::string o1 = (work / "a").string(), o2 = (work / "b").string();
    bool ok = true;
    ok &= run({"run-flow", "--config", fcfg, "--out", o1, "--seed", "9"}) == 0;
    ok &= run({"run-flow", "--config", fcfg, "--out", o2, "--seed", "9"}) == 0;
    ok &= run({"verify-geometry", "--config", vcfg, "--out", o1}) == 0;
    ok &= run({"verify-geometry", "--config", vcfg, "--out", o2}) == 0;
    int same = 0, total = 0;
    for (const char* name :
         {"trajectory.csv", "flow_verdicts.json", "geometry_report.json"}) {
        ++total;
        if (body_of(fs::path(o1) / name) == body_of(fs::path(o2) / name)) ++same;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d/%d artifact bodies byte-identical", same, total);
    msg = buf;
    return ok && same == total;
}

}  // namespace

int main() {
    struct Crit {
        const char* name;
        bool (*fn)(std::string&);
    };
    const Crit crits[] = {
        {"geometry identity suite", criterion1},
        {"Kahler degeneration", criterion2},
        {"finite-difference oracle equivalence", criterion3},
        {"Lemma 3.1 envelopes", criterion4},
        {"elliptic/parabolic consistency", criterion5},
        {"volume identity", criterion6},
        {"two-start stability", criterion7},
        {"smoothing experiment", criterion8},
        {"curvature-potential identities", criterion9},
        {"determinism", criterion10},
    };
    int failures = 0;
    for (int i = 0; i < 10; ++i) {
        std::string msg;
        bool ok = false;
        try {
            ok = crits[i].fn(msg);
        } catch (const std::exception& e) {
            msg = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::printf("%s criterion %2d (%s): %s\n", ok ? "PASS" : "FAIL", i + 1,
                    crits[i].name, msg.c_str());
        std::fflush(stdout);
    }
    return failures;
}
