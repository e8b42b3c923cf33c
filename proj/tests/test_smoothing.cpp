#include <cmath>

#include "doctest.h"
#include "mafl/errors.hpp"
#include "mafl/smoothing.hpp"
#include "support/testutil.hpp"

using namespace mafl;

namespace {

TorusGrid grid1(int res) { return make_grid(1, {2 * M_PI, 2 * M_PI}, res); }

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
        s = std::max(s, std::abs(a[p].real() - b[p].real()));
    return s;
}

// largest second difference along the first axis, kink detector
double max_second_difference(const ScalarField& f) {
    const TorusGrid& g = f.grid;
    const double h2 = g.spacing(0) * g.spacing(0);
    std::size_t stride = 1;
    for (int a = 1; a < g.real_dim(); ++a) stride *= g.res;
    double mx = 0.0;
    for (long i = 0; i < g.res; ++i) {
        long ip = (i + 1) % g.res, im = (i + g.res - 1) % g.res;
        double d = (f[ip * stride].real() - 2.0 * f[i * stride].real() +
                    f[im * stride].real()) /
                   h2;
        mx = std::max(mx, std::abs(d));
    }
    return mx;
}

}  // namespace

TEST_CASE("nonsmooth construction: exact solution, kink spike, admissibility guard") {
    TorusGrid g = grid1(128);
    HermitianMetricField gh = flat_metric(g);

    KinkSpec smooth;
    smooth.pieces = 1;
    NonsmoothSolution trivial = build_nonsmooth_solution(gh, smooth);
    EllipticProblem pbt{gh, trivial.F, Normalization::None};
    CHECK(sup_norm(ma_residual(trivial.phi, pbt)) < 1e-12);
    CHECK(max_second_difference(trivial.phi) < 1.1 * smooth.amp);

    KinkSpec kinked;  // two cosines, kink width 2h
    NonsmoothSolution ns = build_nonsmooth_solution(gh, kinked);
    EllipticProblem pbk{gh, ns.F, Normalization::None};
    CHECK(sup_norm(ma_residual(ns.phi, pbk)) < 1e-12);
    // kink spike grows like 1/tau as the grid refines, unlike the smooth case
    double spike = max_second_difference(ns.phi);
    CHECK(spike > 2.0 * kinked.amp);
    TorusGrid gf = grid1(256);
    NonsmoothSolution nsf = build_nonsmooth_solution(flat_metric(gf), kinked);
    CHECK(max_second_difference(nsf.phi) > 1.4 * spike);

    KinkSpec big = kinked;
    big.amp = 5.0;
    CHECK_THROWS_AS(build_nonsmooth_solution(gh, big), InadmissibleConstruction);

    KinkSpec strict = kinked;
    strict.margin = 0.999;
    CHECK_THROWS_AS(build_nonsmooth_solution(gh, strict), InadmissibleConstruction);
}

TEST_CASE("smooth base collapses to a fixed point at high mollification levels") {
    TorusGrid g = grid1(64);
    HermitianMetricField gh = flat_metric(g);
    KinkSpec smooth;
    smooth.pieces = 1;
    NonsmoothSolution base = build_nonsmooth_solution(gh, smooth);

    SmoothingExperiment exp{gh, base.phi, base.F};
    exp.levels = {8192, 16384};
    exp.T = 0.05;
    exp.snapshot_every = 0.01;
    SmoothingReport rep = run_pipeline(exp);

    for (const auto& lr : rep.results) {
        REQUIRE(lr.ok);
        CHECK(lr.phij_err < 1e-8);
        CHECK(lr.psij_err < 1e-7);
        CHECK(lr.phidot0 < 1e-8);
        CHECK(lr.eq47_residual < 1e-9);
        CHECK(sup_diff(lr.tr.points.back().phi, base.phi) < 1e-6);
    }
    BoundVerdict rc = recovery_check(rep);
    CHECK(rc.pass);

    CHECK_THROWS_AS(cauchy_check(rep, 0.02), std::invalid_argument);  // two levels only
}

TEST_CASE("kinked ladder: monotone errors, t=0 identity, cauchy and recovery pass") {
    TorusGrid g = grid1(128);
    HermitianMetricField gh = flat_metric(g);
    NonsmoothSolution ns = build_nonsmooth_solution(gh, KinkSpec{});

    SmoothingExperiment exp{gh, ns.phi, ns.F};
    exp.levels = {8, 16, 32};
    exp.T = 0.1;
    exp.snapshot_every = 0.01;
    SmoothingReport rep = run_pipeline(exp);

    REQUIRE(rep.results.size() == 3);
    for (const auto& lr : rep.results) {
        REQUIRE(lr.ok);
        CHECK(lr.cj > 0.0);
        CHECK(lr.eq47_residual < 1e-9);
    }
    CHECK(rep.results[1].phij_err < rep.results[0].phij_err);
    CHECK(rep.results[2].phij_err < rep.results[1].phij_err);
    CHECK(rep.results[1].phidot0 < rep.results[0].phidot0);
    CHECK(rep.results[2].phidot0 < rep.results[1].phidot0);

    BoundVerdict cc = cauchy_check(rep, 0.05);
    CHECK(cc.pass);
    CHECK(cc.margin >= 0.0);
    BoundVerdict rc = recovery_check(rep);
    CHECK(rc.pass);

    CHECK_THROWS_AS(cauchy_check(rep, 0.0123), std::invalid_argument);
}

TEST_CASE("cauchy check on an identical-data ladder reports zero distances") {
    TorusGrid g = grid1(32);
    HermitianMetricField gh = flat_metric(g);
    KinkSpec smooth;
    smooth.pieces = 1;
    NonsmoothSolution base = build_nonsmooth_solution(gh, smooth);

    SmoothingExperiment exp{gh, base.phi, base.F};
    exp.levels = {8192};
    exp.T = 0.02;
    exp.snapshot_every = 0.01;
    SmoothingReport one = run_pipeline(exp);
    REQUIRE(one.results[0].ok);

    SmoothingReport rep = one;  // three copies of the same level
    rep.results.push_back(one.results[0]);
    rep.results.push_back(one.results[0]);
    BoundVerdict cc = cauchy_check(rep, 0.01);
    CHECK(cc.pass);
    for (const auto& [k, val] : cc.constants)
        if (k.rfind("d_", 0) == 0) CHECK(val == 0.0);
}

TEST_CASE("corrupted c constant trips the recovery check") {
    TorusGrid g = grid1(64);
    HermitianMetricField gh = flat_metric(g);
    NonsmoothSolution ns = build_nonsmooth_solution(gh, KinkSpec{});

    SmoothingExperiment exp{gh, ns.phi, ns.F};
    exp.levels = {8, 16};
    exp.T = 0.05;
    exp.snapshot_every = 0.01;
    exp.c_scale = 2.0;
    SmoothingReport rep = run_pipeline(exp);
    for (const auto& lr : rep.results) {
        REQUIRE(lr.ok);
        CHECK(lr.eq47_residual > 0.1);  // the corruption is visible at t=0
    }
    CHECK_FALSE(recovery_check(rep).pass);
}

TEST_CASE("pipeline is deterministic and serializes consistently") {
    TorusGrid g = grid1(64);
    HermitianMetricField gh = flat_metric(g);
    NonsmoothSolution ns = build_nonsmooth_solution(gh, KinkSpec{});

    SmoothingExperiment exp{gh, ns.phi, ns.F};
    exp.levels = {8, 16, 32};
    exp.T = 0.03;
    exp.snapshot_every = 0.01;
    SmoothingReport a = run_pipeline(exp);
    SmoothingReport b = run_pipeline(exp);
    CHECK(smoothing_report_json(a) == smoothing_report_json(b));
    CHECK(pairwise_csv(a) == pairwise_csv(b));

    std::string csv = pairwise_csv(a);
    CHECK(csv.rfind("t,d_8_16,d_8_32,d_16_32\n", 0) == 0);
}
