#include "mafl/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mafl/errors.hpp"

namespace mafl {

namespace {

double torus_volume(const TorusGrid& g) {
    double v = 1.0;
    for (int a = 0; a < g.real_dim(); ++a) v *= g.periods[a];
    return v;
}

double mean_real(const ScalarField& f) {
    return integrate(f).real() / torus_volume(f.grid);
}

void force_real(ScalarField& f) {
    for (auto& c : f.v) c = Complex(c.real(), 0.0);
}

// Laplacian_g v + fp * v, the linearization of the residual at phi.
ScalarField apply_linearization(const HermitianMetricField& g, const ScalarField& fp,
                                const ScalarField& v) {
    const TorusGrid& gr = g.grid();
    const int n = gr.n;
    CVec spec = fft::forward(gr.dims(), v.v);
    ScalarField out(gr);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            CVec s = spec;
            apply_holo_symbol(gr, s, p);
            apply_anti_symbol(gr, s, q);
            CVec d = fft::inverse(gr.dims(), s);
            const CVec& iv = g.invc(p, q);
            for (std::size_t x = 0; x < out.size(); ++x) out[x] += iv[x] * d[x];
        }
    for (std::size_t x = 0; x < out.size(); ++x)
        out[x] = Complex(out[x].real() + fp[x].real() * v[x].real(), 0.0);
    return out;
}

// Symbol of the flat Laplacian, -(1/4) sum_a omega_a^2 per spectral bin.
std::vector<double> flat_lap_symbol(const TorusGrid& g) {
    const int d = g.real_dim();
    std::vector<std::vector<double>> w2(d, std::vector<double>(g.res));
    for (int a = 0; a < d; ++a)
        for (long m = 0; m < g.res; ++m) {
            long k = fft::signed_freq(m, g.res);
            if (2 * k == g.res) k = 0;
            double w = 2.0 * M_PI * k / g.periods[a];
            w2[a][m] = w * w;
        }
    std::vector<double> sym(g.npoints());
    std::vector<long> idx(d);
    for (std::size_t p = 0; p < sym.size(); ++p) {
        g.unravel(p, idx.data());
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += w2[a][idx[a]];
        sym[p] = -0.25 * s;
    }
    return sym;
}

// (Lap_flat + shift)^{-1}, the spectral preconditioner. gauge drops every
// mode the Hessian cannot see (constants and the zeroed Nyquist symbols):
// with no zeroth-order term those lie in the kernel of the linearization and
// dividing them by the tiny shift would amplify roundoff into junk the
// residual cannot detect.
ScalarField precondition(const ScalarField& v, const std::vector<double>& sym,
                         double shift, bool gauge) {
    const TorusGrid& gr = v.grid;
    CVec spec = fft::forward(gr.dims(), v.v);
    for (std::size_t p = 0; p < spec.size(); ++p) {
        if (gauge && sym[p] == 0.0)
            spec[p] = Complex(0.0, 0.0);
        else
            spec[p] /= sym[p] + shift;
    }
    ScalarField out(gr, fft::inverse(gr.dims(), spec));
    force_real(out);
    return out;
}

double dot(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) s += a[p].real() * b[p].real();
    return s;
}

void project_mean(ScalarField& f) {
    double m = mean_real(f);
    for (auto& c : f.v) c = Complex(c.real() - m, 0.0);
}

// Preconditioned BiCGStab for (Lap_g + fp) x = b. Breakdown returns the
// current iterate; the Newton line search rejects useless directions.
ScalarField bicgstab(const HermitianMetricField& g, const ScalarField& fp,
                     const ScalarField& b, const std::vector<double>& sym, double shift,
                     bool gauge, double rel_tol, int max_it) {
    const TorusGrid& gr = g.grid();
    ScalarField x(gr), r = b, rhat = b, p(gr), v(gr);
    if (gauge) {
        project_mean(r);
        rhat = r;
    }
    double bnorm = std::sqrt(dot(r, r));
    if (bnorm == 0.0) return x;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    for (int it = 0; it < max_it; ++it) {
        double rho1 = dot(rhat, r);
        if (std::abs(rho1) < 1e-300) break;
        double beta = (rho1 / rho) * (alpha / omega);
        for (std::size_t q = 0; q < p.size(); ++q)
            p[q] = Complex(r[q].real() + beta * (p[q].real() - omega * v[q].real()), 0.0);
        ScalarField phat = precondition(p, sym, shift, gauge);
        v = apply_linearization(g, fp, phat);
        if (gauge) project_mean(v);
        double denom = dot(rhat, v);
        if (std::abs(denom) < 1e-300) break;
        alpha = rho1 / denom;
        ScalarField s(gr);
        for (std::size_t q = 0; q < s.size(); ++q)
            s[q] = Complex(r[q].real() - alpha * v[q].real(), 0.0);
        if (std::sqrt(dot(s, s)) < rel_tol * bnorm) {
            for (std::size_t q = 0; q < x.size(); ++q)
                x[q] = Complex(x[q].real() + alpha * phat[q].real(), 0.0);
            break;
        }
        ScalarField shat = precondition(s, sym, shift, gauge);
        ScalarField t = apply_linearization(g, fp, shat);
        if (gauge) project_mean(t);
        double tt = dot(t, t);
        if (tt < 1e-300) break;
        omega = dot(t, s) / tt;
        for (std::size_t q = 0; q < x.size(); ++q)
            x[q] = Complex(x[q].real() + alpha * phat[q].real() + omega * shat[q].real(),
                           0.0);
        for (std::size_t q = 0; q < r.size(); ++q)
            r[q] = Complex(s[q].real() - omega * t[q].real(), 0.0);
        if (std::sqrt(dot(r, r)) < rel_tol * bnorm) break;
        rho = rho1;
        if (std::abs(omega) < 1e-300) break;
    }
    return x;
}

}  // namespace

ScalarField ma_residual(const ScalarField& phi, const EllipticProblem& pb) {
    if (!(phi.grid == pb.ghat.grid()))
        throw std::invalid_argument("potential grid does not match the metric grid");
    ScalarField ph = phi;
    force_real(ph);
    HermitianMetricField g = metric_from_potential(pb.ghat, ph);
    return flow_rhs(g, pb.ghat, ph, pb.F);
}

SolveReport solve_elliptic(const EllipticProblem& pb, const ScalarField& phi_init,
                           int max_iter) {
    const TorusGrid& gr = pb.ghat.grid();
    if (!(phi_init.grid == gr))
        throw std::invalid_argument("initial potential grid does not match the metric");
    const double tol = 1e-10;
    const double eta = 1e-6;

    ScalarField phi = phi_init;
    force_real(phi);
    HermitianMetricField g = metric_from_potential(pb.ghat, phi);
    ScalarField r = flow_rhs(g, pb.ghat, phi, pb.F);
    double rsup = sup_norm(r);

    std::vector<double> sym = flat_lap_symbol(gr);
    SolveReport rep;
    rep.residual_history.push_back(rsup);

    int iter = 0;
    bool converged = rsup < tol;
    while (!converged && iter < max_iter) {
        ++iter;
        ScalarField fp = pb.F.Fp(phi);
        force_real(fp);
        bool gauge = sup_norm(fp) < 1e-8;
        double shift = std::max(sup_real(fp), eta);

        ScalarField b(gr);
        for (std::size_t p = 0; p < b.size(); ++p) b[p] = Complex(-r[p].real(), 0.0);
        double rel = std::max(1e-13, std::min(1e-3, 0.1 * rsup));
        ScalarField delta = bicgstab(g, fp, b, sym, shift, gauge, rel, 400);
        if (!all_finite(delta))
            throw NoConvergence("elliptic inner solve produced NaN/Inf");

        double s = 1.0;
        bool accepted = false, saw_admissible = false;
        for (int half = 0; half < 40 && !accepted; ++half, s *= 0.5) {
            ScalarField cand(gr);
            for (std::size_t p = 0; p < cand.size(); ++p)
                cand[p] = Complex(phi[p].real() + s * delta[p].real(), 0.0);
            try {
                HermitianMetricField gc = metric_from_potential(pb.ghat, cand);
                saw_admissible = true;
                ScalarField rc = flow_rhs(gc, pb.ghat, cand, pb.F);
                double rcs = sup_norm(rc);
                if (rcs <= (1.0 - 1e-4 * s) * rsup) {
                    phi = std::move(cand);
                    g = std::move(gc);
                    r = std::move(rc);
                    rsup = rcs;
                    accepted = true;
                }
            } catch (const NotAdmissible&) {
            } catch (const SingularMetric&) {
            }
        }
        if (!accepted) {
            if (!saw_admissible)
                throw NotAdmissible("no admissible Newton step", 0, 0.0);
            throw NoConvergence("elliptic line search failed to reduce the residual");
        }
        rep.residual_history.push_back(rsup);
        converged = rsup < tol;
    }
    if (!converged)
        throw NoConvergence("elliptic solve did not reach tolerance");

    if (pb.norm == Normalization::MeanZero) {
        double m = mean_real(phi);
        for (auto& c : phi.v) c = Complex(c.real() - m, 0.0);
        g = metric_from_potential(pb.ghat, phi);
        r = flow_rhs(g, pb.ghat, phi, pb.F);
        rsup = sup_norm(r);
        if (rsup >= tol)
            throw NoConvergence("mean-zero shift broke convergence (forcing not gauge invariant)");
    }

    rep.phi = std::move(phi);
    rep.residual = rsup;
    rep.iterations = iter;
    rep.admissibility_margin = g.min_eig;
    return rep;
}

double volume_identity(const ScalarField& phi, const HermitianMetricField& ghat) {
    ScalarField ph = phi;
    force_real(ph);
    HermitianMetricField g = metric_from_potential(ghat, ph);
    ScalarField dg(g.grid()), dh(g.grid());
    for (std::size_t p = 0; p < dg.size(); ++p) {
        dg[p] = Complex(std::exp(g.logdet[p].real()), 0.0);
        dh[p] = Complex(std::exp(ghat.logdet[p].real()), 0.0);
    }
    double vg = integrate(dg).real();
    double vh = integrate(dh).real();
    return std::abs(vg - vh) / vh;
}

ScalarField normalize_pair(const ScalarField& psi, const ScalarField& phi) {
    if (!(psi.grid == phi.grid))
        throw std::invalid_argument("normalize_pair needs matching grids");
    double up = -1e300, dn = -1e300;
    for (std::size_t p = 0; p < psi.size(); ++p) {
        double d = phi[p].real() - psi[p].real();
        up = std::max(up, d);
        dn = std::max(dn, -d);
    }
    double s = 0.5 * (up - dn);
    ScalarField out = psi;
    for (auto& c : out.v) c = Complex(c.real() + s, 0.0);
    return out;
}

double c_constant(const ScalarField& phi_j, const HermitianMetricField& ghat,
                  const ForcingSpec& F) {
    if (!(phi_j.grid == ghat.grid()))
        throw std::invalid_argument("c_constant needs matching grids");
    ScalarField ph = phi_j;
    force_real(ph);
    ScalarField f = F.F(ph);
    ScalarField num(ph.grid), den(ph.grid);
    for (std::size_t p = 0; p < num.size(); ++p) {
        double w = std::exp(ghat.logdet[p].real());
        num[p] = Complex(w, 0.0);
        den[p] = Complex(std::exp(-f[p].real()) * w, 0.0);
    }
    return integrate(num).real() / integrate(den).real();
}

double stability_gap(const ScalarField& phi1, const ScalarField& phi2,
                     const EllipticProblem& pb) {
    double r1 = sup_norm(ma_residual(phi1, pb));
    double r2 = sup_norm(ma_residual(phi2, pb));
    if (r1 >= 1e-9 || r2 >= 1e-9)
        throw std::invalid_argument(
            "stability_gap inputs must both solve the given problem to 1e-9");
    ScalarField d(phi1.grid);
    for (std::size_t p = 0; p < d.size(); ++p)
        d[p] = Complex(phi1[p].real() - phi2[p].real(), 0.0);
    double m = mean_real(d);
    double gap = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p)
        gap = std::max(gap, std::abs(d[p].real() - m));
    return gap;
}

}  // namespace mafl
