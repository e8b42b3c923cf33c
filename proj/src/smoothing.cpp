#include "mafl/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mafl/errors.hpp"

namespace mafl {

namespace {

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
        s = std::max(s, std::abs(a[p].real() - b[p].real()));
    return s;
}

void force_real(ScalarField& f) {
    for (auto& c : f.v) c = Complex(c.real(), 0.0);
}

// F(phi, z) - s, shifting the forcing by the log of the level's c constant.
ForcingSpec shifted(const ForcingSpec& F, double s) {
    ForcingSpec out = F;
    out.kind = F.kind + "+const";
    auto base = F.F;
    out.F = [base, s](const ScalarField& ph) {
        ScalarField r = base(ph);
        for (auto& c : r.v) c -= Complex(s, 0.0);
        return r;
    };
    return out;
}

}  // namespace

NonsmoothSolution build_nonsmooth_solution(const HermitianMetricField& ghat,
                                           const KinkSpec& spec) {
    const TorusGrid& g = ghat.grid();
    if (spec.pieces < 1) throw std::invalid_argument("kink spec needs >= 1 piece");
    const double tau = spec.tau_factor * g.spacing(0);
    const double w = 2.0 * M_PI / g.periods[0];

    // softmax_tau of shifted cosines along the first real axis
    ScalarField phi(g);
    std::vector<long> m(g.real_dim());
    for (std::size_t p = 0; p < phi.size(); ++p) {
        g.unravel(p, m.data());
        double x = g.coord(0, m[0]);
        double mx = -1e300;
        for (int k = 0; k < spec.pieces; ++k)
            mx = std::max(mx, spec.amp * std::cos(w * x - k * M_PI / spec.pieces));
        double s = 0.0;
        for (int k = 0; k < spec.pieces; ++k)
            s += std::exp((spec.amp * std::cos(w * x - k * M_PI / spec.pieces) - mx) / tau);
        phi[p] = Complex(mx + tau * std::log(s), 0.0);
    }

    HermitianMetricField gm;
    try {
        gm = metric_from_potential(ghat, phi);
    } catch (const NotAdmissible& e) {
        throw InadmissibleConstruction("kinked potential leaves the admissible cone",
                                       e.min_eig);
    }
    if (gm.min_eig <= spec.margin)
        throw InadmissibleConstruction("kinked potential admissibility margin too small",
                                       gm.min_eig);

    // F(p, z) = lambda p - (lambda phi + log det ratio), exact at phi
    ScalarField h(g);
    for (std::size_t p = 0; p < h.size(); ++p)
        h[p] = Complex(spec.lambda * phi[p].real() + gm.logdet[p].real() -
                           ghat.logdet[p].real(),
                       0.0);
    return {phi, forcing_linear(spec.lambda, h)};
}

SmoothingReport run_pipeline(const SmoothingExperiment& exp) {
    const TorusGrid& g = exp.ghat.grid();
    if (!(exp.phi.grid == g))
        throw std::invalid_argument("base potential grid does not match the metric");
    if (exp.levels.size() < 1) throw std::invalid_argument("need at least one level");

    SmoothingReport rep;
    rep.levels = exp.levels;
    rep.T = exp.T;
    {
        ScalarField fp = exp.F.Fp(exp.phi);
        rep.fprime_sup = sup_norm(fp);
    }

    DtPolicy pol;
    pol.snapshot_every = exp.snapshot_every;

    for (int j : exp.levels) {
        LevelResult lr;
        lr.j = j;
        try {
            ScalarField phij = mollify(exp.phi, j);
            force_real(phij);
            lr.phij_err = sup_diff(phij, exp.phi);

            lr.cj = c_constant(phij, exp.ghat, exp.F);
            if (!(lr.cj > 0)) throw NoConvergence("nonpositive c constant");

            // stationary problem of the level: forcing F(phi_j, z) - log c_j,
            // constant in the unknown, solved in the mean-zero gauge
            ScalarField Gf = exp.F.F(phij);
            ScalarField neg(g);
            for (std::size_t p = 0; p < neg.size(); ++p)
                neg[p] = Complex(-(Gf[p].real() - std::log(lr.cj)), 0.0);
            EllipticProblem pb{exp.ghat, forcing_linear(0.0, neg),
                               Normalization::MeanZero};
            SolveReport sol = solve_elliptic(pb, phij);

            ScalarField psi = normalize_pair(sol.phi, exp.phi);
            lr.psij_err = sup_diff(psi, exp.phi);

            // t=0 identity: flow rhs at psi_j equals F(psi_j) - F(phi_j)
            ScalarField idv = exp.F.F(psi) - Gf;
            lr.phidot0 = sup_norm(idv);

            ForcingSpec Gflow = shifted(exp.F, std::log(lr.cj * exp.c_scale));
            lr.tr = run_flow(psi, exp.ghat, Gflow, exp.T, pol);
            lr.eq47_residual = sup_diff(lr.tr.points[0].phidot, idv);
            lr.ok = true;
        } catch (const std::exception& e) {
            lr.error = e.what();
        }
        rep.results.push_back(std::move(lr));
    }

    const LevelResult* first_ok = nullptr;
    const LevelResult* finest_ok = nullptr;
    for (const auto& lr : rep.results)
        if (lr.ok) {
            if (!first_ok) first_ok = &lr;
            finest_ok = &lr;
        }
    if (first_ok) {
        for (const auto& pt : first_ok->tr.points) rep.times.push_back(pt.t);
        for (std::size_t a = 0; a < rep.results.size(); ++a)
            for (std::size_t b = a + 1; b < rep.results.size(); ++b) {
                const auto& la = rep.results[a];
                const auto& lb = rep.results[b];
                if (!la.ok || !lb.ok) continue;
                if (la.tr.points.size() != rep.times.size() ||
                    lb.tr.points.size() != rep.times.size())
                    continue;
                std::vector<double> d(rep.times.size());
                for (std::size_t t = 0; t < d.size(); ++t)
                    d[t] = sup_diff(la.tr.points[t].phi, lb.tr.points[t].phi);
                rep.pairwise.push_back({{la.j, lb.j}, std::move(d)});
            }
        if (finest_ok->tr.points.size() == rep.times.size())
            for (const auto& pt : finest_ok->tr.points)
                rep.recovery_err.push_back(sup_diff(pt.phi, exp.phi));
    }
    return rep;
}

BoundVerdict cauchy_check(const SmoothingReport& rep, double t) {
    std::vector<const LevelResult*> ok;
    for (const auto& lr : rep.results)
        if (lr.ok) ok.push_back(&lr);
    if (ok.size() < 3)
        throw std::invalid_argument("cauchy check needs >= 3 successful levels");
    std::size_t ti = rep.times.size();
    for (std::size_t i = 0; i < rep.times.size(); ++i)
        if (std::abs(rep.times[i] - t) < 1e-9) ti = i;
    if (ti == rep.times.size())
        throw std::invalid_argument("cauchy check time is not a shared snapshot");

    BoundVerdict v;
    v.name = "cauchy";
    v.t_critical = t;
    v.constants["factor"] = 1.5;
    std::vector<double> d;
    for (std::size_t i = 0; i + 1 < ok.size(); ++i) {
        double dist = sup_diff(ok[i]->tr.points[ti].phi, ok[i + 1]->tr.points[ti].phi);
        d.push_back(dist);
        char key[64];
        std::snprintf(key, sizeof key, "d_%d_%d", ok[i]->j, ok[i + 1]->j);
        v.constants[key] = dist;
    }
    v.pass = true;
    v.margin = 1e300;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        if (d[i] < 1e-14 && d[i + 1] < 1e-14) continue;  // identical-data ladder
        double slack = d[i] - 1.5 * d[i + 1];
        v.margin = std::min(v.margin, slack);
        if (slack < 0) v.pass = false;
    }
    if (v.margin == 1e300) v.margin = 0.0;
    return v;
}

BoundVerdict recovery_check(const SmoothingReport& rep) {
    const LevelResult* finest = nullptr;
    for (const auto& lr : rep.results)
        if (lr.ok) finest = &lr;
    if (!finest || rep.recovery_err.size() != rep.times.size() || rep.times.empty())
        throw std::invalid_argument("recovery check needs finest-level data");

    BoundVerdict v;
    v.name = "recovery";
    const double C = 1.05 * rep.fprime_sup;
    v.constants["C_fit"] = C;
    v.constants["phidot0"] = finest->phidot0;
    v.constants["psi_err"] = finest->psij_err;

    // (a) stationarity trend at T/2
    std::size_t half = 0;
    for (std::size_t i = 1; i < rep.times.size(); ++i)
        if (std::abs(rep.times[i] - 0.5 * rep.T) < std::abs(rep.times[half] - 0.5 * rep.T))
            half = i;
    double speed_half = sup_norm(finest->tr.points[half].phidot);
    v.constants["phidot_half"] = speed_half;
    double margin_a = 3.0 * finest->phidot0 + 1e-6 - speed_half;

    // (b) recovery of the base potential under the e^{Ct} envelope
    double margin_b = 1e300;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        double bound = finest->psij_err * std::exp(C * rep.times[i]) + 1e-6;
        double slack = bound - rep.recovery_err[i];
        if (slack < margin_b) {
            margin_b = slack;
            v.t_critical = rep.times[i];
        }
    }
    v.margin = std::min(margin_a, margin_b);
    v.pass = v.margin >= 0.0;
    return v;
}

std::string smoothing_report_json(const SmoothingReport& rep) {
    char buf[256];
    std::string s = "{\n";
    std::snprintf(buf, sizeof buf, "\"T\": %.17g,\n\"fprime_sup\": %.17g,\n", rep.T,
                  rep.fprime_sup);
    s += buf;
    s += "\"levels\": [\n";
    for (std::size_t i = 0; i < rep.results.size(); ++i) {
        const auto& lr = rep.results[i];
        std::snprintf(buf, sizeof buf,
                      "  {\"j\": %d, \"ok\": %s, \"phij_err\": %.17g, \"cj\": %.17g, "
                      "\"psij_err\": %.17g, \"phidot0\": %.17g, \"eq47_residual\": %.17g",
                      lr.j, lr.ok ? "true" : "false", lr.phij_err, lr.cj, lr.psij_err,
                      lr.phidot0, lr.eq47_residual);
        s += buf;
        if (!lr.ok) s += ", \"error\": \"" + lr.error + "\"";
        s += i + 1 < rep.results.size() ? "},\n" : "}\n";
    }
    s += "],\n\"times\": [";
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", rep.times[i]);
        s += buf;
    }
    s += "],\n\"pairwise\": {";
    for (std::size_t k = 0; k < rep.pairwise.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s\n  \"%d,%d\": [", k ? "," : "",
                      rep.pairwise[k].first.first, rep.pairwise[k].first.second);
        s += buf;
        const auto& d = rep.pairwise[k].second;
        for (std::size_t i = 0; i < d.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", d[i]);
            s += buf;
        }
        s += "]";
    }
    s += "\n},\n\"recovery_err\": [";
    for (std::size_t i = 0; i < rep.recovery_err.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", rep.recovery_err[i]);
        s += buf;
    }
    s += "]\n}\n";
    return s;
}

std::string pairwise_csv(const SmoothingReport& rep) {
    char buf[64];
    std::string s = "t";
    for (const auto& [pr, d] : rep.pairwise) {
        std::snprintf(buf, sizeof buf, ",d_%d_%d", pr.first, pr.second);
        s += buf;
    }
    s += "\n";
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", rep.times[i]);
        s += buf;
        for (const auto& [pr, d] : rep.pairwise) {
            std::snprintf(buf, sizeof buf, ",%.17g", d[i]);
            s += buf;
        }
        s += "\n";
    }
    return s;
}

}  // namespace mafl
