#include <cmath>
#include <random>

#include "doctest.h"
#include "mafl/elliptic.hpp"
#include "mafl/errors.hpp"
#include "mafl/flow.hpp"
#include "mafl/forcing.hpp"
#include "support/testutil.hpp"

using namespace mafl;

namespace {

// Detuned periods keep Lap_flat + 1 away from resonance on the torus.
TorusGrid grid1d(int res) { return make_grid(1, {5.3, 7.1}, res); }
TorusGrid grid2d(int res) { return make_grid(2, {5.3, 7.1, 6.1, 4.3}, res); }

ScalarField cos_x(const TorusGrid& g, double amp) {
    ScalarField f(g);
    std::vector<long> m(g.real_dim());
    for (std::size_t p = 0; p < f.size(); ++p) {
        g.unravel(p, m.data());
        f[p] = amp * std::cos(2.0 * M_PI * g.coord(0, m[0]) / g.periods[0]);
    }
    return f;
}

ScalarField constant_field(const TorusGrid& g, double c) {
    ScalarField f(g);
    for (auto& v : f.v) v = Complex(c, 0.0);
    return f;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) s = std::max(s, std::abs(a[p] - b[p]));
    return s;
}

// Problem with a known solution: F(phi, z) = phi - htilde with htilde chosen
// so phi_star solves it (F' = 1 makes the solution unique).
struct Manufactured {
    EllipticProblem pb;
    ScalarField phi_star;
};

Manufactured manufactured(const HermitianMetricField& ghat, std::uint64_t seed,
                          double amp) {
    const TorusGrid& g = ghat.grid();
    ScalarField ps = testutil::seeded_band(g, seed, 2, amp, true);
    HermitianMetricField gm = metric_from_potential(ghat, ps);
    ScalarField ht(g);
    for (std::size_t p = 0; p < ht.size(); ++p)
        ht[p] = Complex(gm.logdet[p].real() - ghat.logdet[p].real() + ps[p].real(), 0.0);
    Manufactured m;
    m.pb = {ghat, forcing_linear(1.0, ht), Normalization::None};
    m.phi_star = ps;
    return m;
}

}  // namespace

TEST_CASE("residual closed forms and guards") {
    TorusGrid g = grid1d(32);
    EllipticProblem pb{flat_metric(g), forcing_zero(), Normalization::None};

    CHECK(sup_norm(ma_residual(ScalarField(g), pb)) < 1e-14);

    // phi = a cos(2 pi x / L): Hess = -(a/4)(2 pi / L)^2 cos, r = log(1 + Hess).
    double a = 0.4, w = 2.0 * M_PI / g.periods[0];
    ScalarField phi = cos_x(g, a);
    ScalarField r = ma_residual(phi, pb);
    std::vector<long> m(g.real_dim());
    for (std::size_t p = 0; p < r.size(); p += 17) {
        g.unravel(p, m.data());
        double c = std::cos(w * g.coord(0, m[0]));
        CHECK(r[p].real() ==
              doctest::Approx(std::log(1.0 - 0.25 * a * w * w * c)).epsilon(1e-10));
    }

    CHECK_THROWS_AS(ma_residual(ScalarField(grid1d(16)), pb), std::invalid_argument);
    CHECK_THROWS_AS(ma_residual(cos_x(g, 60.0), pb), NotAdmissible);
}

TEST_CASE("volume identity vanishes for admissible potentials") {
    TorusGrid g1 = make_grid(1, {2 * M_PI, 2 * M_PI}, 32);
    HermitianMetricField gh1 = perturbed_metric(g1, 5, 0.1);
    std::mt19937_64 rng(23);
    ScalarField phi1 = testutil::random_band(g1, 3, rng, 0.2);
    CHECK(volume_identity(phi1, gh1) < 1e-12);

    TorusGrid g2 = make_grid(2, std::vector<double>(4, 2 * M_PI), 12);
    HermitianMetricField gh2 = flat_metric(g2);
    ScalarField phi2 = testutil::seeded_band(g2, 4, 2, 0.05, true);
    CHECK(volume_identity(phi2, gh2) < 1e-10);
}

TEST_CASE("normalize_pair balances the sups and ignores input shifts") {
    TorusGrid g = grid1d(16);
    std::mt19937_64 rng(3);
    ScalarField psi = testutil::random_band(g, 3, rng, 0.8);
    ScalarField phi = testutil::random_band(g, 3, rng, 0.5);

    ScalarField out = normalize_pair(psi, phi);
    double up = -1e300, dn = -1e300;
    for (std::size_t p = 0; p < out.size(); ++p) {
        up = std::max(up, out[p].real() - phi[p].real());
        dn = std::max(dn, phi[p].real() - out[p].real());
    }
    CHECK(std::abs(up - dn) < 1e-14);

    ScalarField shifted = psi + Complex(1.7, 0.0);
    CHECK(sup_diff(normalize_pair(shifted, phi), out) < 1e-13);
}

TEST_CASE("c constant: one for zero forcing, e^k for constant forcing") {
    TorusGrid g = grid1d(16);
    HermitianMetricField gh = flat_metric(g);
    ScalarField phi(g);
    CHECK(c_constant(phi, gh, forcing_zero()) == doctest::Approx(1.0).epsilon(1e-14));

    // forcing_linear(0, h) evaluates to -h, so h = -k gives F = k.
    ForcingSpec fk = forcing_linear(0.0, constant_field(g, -0.7));
    CHECK(c_constant(phi, gh, fk) == doctest::Approx(std::exp(0.7)).epsilon(1e-13));

    TorusGrid g2 = make_grid(1, {2 * M_PI, 2 * M_PI}, 32);
    HermitianMetricField gp = perturbed_metric(g2, 8, 0.1);
    ForcingSpec fk2 = forcing_linear(0.0, constant_field(g2, -0.3));
    CHECK(c_constant(ScalarField(g2), gp, fk2) ==
          doctest::Approx(std::exp(0.3)).epsilon(1e-13));
}

TEST_CASE("manufactured solution recovered from a zero start") {
    TorusGrid g = grid1d(64);
    Manufactured m = manufactured(flat_metric(g), 17, 0.08);

    SolveReport rep = solve_elliptic(m.pb, ScalarField(g));
    CHECK(rep.residual < 1e-10);
    CHECK(sup_diff(rep.phi, m.phi_star) < 1e-8);
    CHECK(rep.admissibility_margin > 0.0);
    CHECK(rep.iterations < 30);
    // the stored residual must match a from-scratch recomputation
    CHECK(std::abs(sup_norm(ma_residual(rep.phi, m.pb)) - rep.residual) < 1e-12);
}

TEST_CASE("newton iteration shows a quadratic tail") {
    TorusGrid g = grid1d(64);
    Manufactured m = manufactured(flat_metric(g), 29, 0.08);
    SolveReport rep = solve_elliptic(m.pb, ScalarField(g));

    const auto& h = rep.residual_history;
    REQUIRE(h.size() >= 4);
    double best = 0.0;
    for (std::size_t k = 2; k < h.size(); ++k) {
        if (h[k] <= 0 || h[k - 1] <= 0 || h[k - 2] <= 0) continue;
        double num = std::log(h[k] / h[k - 1]);
        double den = std::log(h[k - 1] / h[k - 2]);
        if (den < 0) best = std::max(best, num / den);
    }
    CHECK(best >= 1.8);
}

TEST_CASE("two starts give the same solution and mismatched problems are refused") {
    TorusGrid g = grid1d(48);
    Manufactured m = manufactured(flat_metric(g), 41, 0.06);

    SolveReport a = solve_elliptic(m.pb, ScalarField(g));
    std::mt19937_64 rng(7);
    SolveReport b = solve_elliptic(m.pb, testutil::random_band(g, 2, rng, 0.05));
    CHECK(stability_gap(a.phi, b.phi, m.pb) < 1e-8);

    EllipticProblem other{flat_metric(g), forcing_zero(), Normalization::None};
    CHECK_THROWS_AS(stability_gap(a.phi, b.phi, other), std::invalid_argument);
}

TEST_CASE("elliptic solution is a fixed point of the flow") {
    TorusGrid g = grid1d(48);
    Manufactured m = manufactured(flat_metric(g), 13, 0.06);
    SolveReport rep = solve_elliptic(m.pb, ScalarField(g));

    DtPolicy pol;
    pol.snapshot_every = 0.01;
    Trajectory tr = run_flow(rep.phi, m.pb.ghat, m.pb.F, 0.05, pol);
    for (const auto& pt : tr.points) CHECK(sup_diff(pt.phi, rep.phi) < 1e-8);
}

TEST_CASE("mean-zero gauge handles forcing without a phi term") {
    TorusGrid g = make_grid(1, {2 * M_PI, 2 * M_PI}, 32);
    EllipticProblem pb{flat_metric(g), forcing_zero(), Normalization::MeanZero};

    std::mt19937_64 rng(31);
    ScalarField init = testutil::random_band(g, 2, rng, 0.05) + Complex(0.37, 0.0);
    SolveReport rep = solve_elliptic(pb, init);
    CHECK(rep.residual < 1e-10);
    double mean = integrate(rep.phi).real() / (2 * M_PI * 2 * M_PI);
    CHECK(std::abs(mean) < 1e-12);
    // flat problem: the only solutions are constants, so mean zero means zero
    CHECK(sup_norm(rep.phi) < 1e-6);
}

TEST_CASE("inadmissible initial guess is rejected") {
    TorusGrid g = grid1d(32);
    EllipticProblem pb{flat_metric(g), forcing_zero(), Normalization::None};
    CHECK_THROWS_AS(solve_elliptic(pb, cos_x(g, 60.0)), NotAdmissible);
}

TEST_CASE("manufactured solve in complex dimension two") {
    TorusGrid g = grid2d(12);
    Manufactured m = manufactured(flat_metric(g), 9, 0.03);

    SolveReport rep = solve_elliptic(m.pb, ScalarField(g));
    CHECK(rep.residual < 1e-10);
    CHECK(sup_diff(rep.phi, m.phi_star) < 1e-8);
    CHECK(rep.admissibility_margin > 0.0);
}
