#include "mafl/estimates.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mafl {

namespace {

struct SupLoc {
    double v = 0.0;
    std::size_t arg = 0;
};

SupLoc sup_loc(const ScalarField& f) {
    SupLoc s;
    for (std::size_t p = 0; p < f.size(); ++p) {
        double a = std::abs(f[p]);
        if (a > s.v) {
            s.v = a;
            s.arg = p;
        }
    }
    return s;
}

TensorField hessian_of(const ScalarField& phi) {
    const TorusGrid& g = phi.grid;
    CVec spec = fft::forward(g.dims(), phi.v);
    TensorField out(g, {IndexKind::LowerHolo, IndexKind::LowerAnti});
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            CVec s = spec;
            apply_holo_symbol(g, s, i);
            apply_anti_symbol(g, s, j);
            out.comps[i * g.n + j] = fft::inverse(g.dims(), s);
        }
    return out;
}

}  // namespace

ScalarField gradient_energy(const ScalarField& phi, const HermitianMetricField& ghat) {
    const TorusGrid& gr = phi.grid;
    const int n = gr.n;
    CVec spec = fft::forward(gr.dims(), phi.v);
    std::vector<CVec> d(n);
    for (int i = 0; i < n; ++i) d[i] = d_holo_spec(gr, spec, i).v;
    ScalarField out(gr);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const CVec& iv = ghat.invc(i, j);
            for (std::size_t p = 0; p < out.size(); ++p)
                out[p] += iv[p] * d[i][p] * std::conj(d[j][p]);
        }
    for (auto& v : out.v) v = Complex(std::max(v.real(), 0.0), 0.0);
    return out;
}

ScalarField trace_quantity(const HermitianMetricField& g, const HermitianMetricField& ghat) {
    const int n = g.n();
    ScalarField out(g.grid());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const CVec& iv = ghat.invc(i, j);
            const CVec& gm = g.gc(i, j);
            for (std::size_t p = 0; p < out.size(); ++p) out[p] += iv[p] * gm[p];
        }
    for (auto& v : out.v) v = Complex(v.real(), 0.0);
    return out;
}

ScalarField trace_quantity_potential(const HermitianMetricField& ghat,
                                     const ScalarField& phi) {
    const int n = ghat.n();
    TensorField h = hessian_of(phi);
    ScalarField out(ghat.grid());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const CVec& iv = ghat.invc(i, j);
            const CVec& hm = h.comps[i * n + j];
            for (std::size_t p = 0; p < out.size(); ++p) out[p] += iv[p] * hm[p];
        }
    for (auto& v : out.v) v = Complex(v.real() + n, 0.0);
    return out;
}

TensorField phi_tensor(const HermitianMetricField& g, const HermitianMetricField& ghat) {
    TensorField a = christoffel(g);
    TensorField b = christoffel(ghat);
    for (std::size_t c = 0; c < a.ncomps(); ++c)
        for (std::size_t p = 0; p < a.comps[c].size(); ++p) a.comps[c][p] -= b.comps[c][p];
    return a;
}

ScalarField third_order_S(const HermitianMetricField& g, const HermitianMetricField& ghat) {
    return tensor_norm_sq(phi_tensor(g, ghat), g);
}

ScalarField third_order_S_hessian_route(const HermitianMetricField& g,
                                        const HermitianMetricField& ghat,
                                        const ScalarField& phi) {
    TensorField h = hessian_of(phi);
    TensorField cd = covariant_derivative(h, christoffel(ghat), false);
    return tensor_norm_sq(cd, g);
}

ScalarField ricci_norm(const HermitianMetricField& g) {
    return tensor_norm(chern_ricci(g), g);
}

double identity_dbar_phi_residual(const HermitianMetricField& g,
                                  const HermitianMetricField& ghat) {
    const TorusGrid& gr = g.grid();
    const int n = g.n();
    const std::size_t np = gr.npoints();
    TensorField phi = phi_tensor(g, ghat);
    TensorField R = chern_curvature(g);
    TensorField Rh = chern_curvature(ghat);
    double sup = 0.0;
    for (int q = 0; q < n; ++q) {
        TensorField dphi = d_anti(phi, q);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const CVec& lhs = dphi.comps[(i * n + j) * n + k];
                    // dbar_q Phi_{ij}^k = -R_{i qbar j}^k + Rhat_{i qbar j}^k
                    CVec rhs(np, Complex(0.0));
                    for (int l = 0; l < n; ++l) {
                        const CVec& gi = g.invc(k, l);
                        const CVec& hi = ghat.invc(k, l);
                        const CVec& rc = R.comps[((i * n + q) * n + j) * n + l];
                        const CVec& rh = Rh.comps[((i * n + q) * n + j) * n + l];
                        for (std::size_t p = 0; p < np; ++p)
                            rhs[p] += -gi[p] * rc[p] + hi[p] * rh[p];
                    }
                    for (std::size_t p = 0; p < np; ++p)
                        sup = std::max(sup, std::abs(lhs[p] - rhs[p]));
                }
    }
    return sup;
}

double identity_ricci_residual(const HermitianMetricField& g,
                               const HermitianMetricField& ghat) {
    const TorusGrid& gr = g.grid();
    const int n = g.n();
    const std::size_t np = gr.npoints();
    TensorField phi = phi_tensor(g, ghat);
    TensorField ric = chern_ricci(g);
    TensorField rich = chern_ricci(ghat);

    // trace Phi_i = Phi_{ik}^k, then its dbar_j derivative
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
        ScalarField tr(gr);
        for (int k = 0; k < n; ++k) {
            const CVec& c = phi.comps[(i * n + k) * n + k];
            for (std::size_t p = 0; p < np; ++p) tr[p] += c[p];
        }
        CVec spec = fft::forward(gr.dims(), tr.v);
        for (int j = 0; j < n; ++j) {
            ScalarField d = d_anti_spec(gr, spec, j);
            const CVec& rc = ric.comps[i * n + j];
            const CVec& rh = rich.comps[i * n + j];
            // Tracing the dbar-Phi identity over (k = j) gives
            // Ric = Richat - dbar trace(Phi); the trace of Phi is the
            // log-determinant ratio gradient.
            for (std::size_t p = 0; p < np; ++p)
                sup = std::max(sup, std::abs(rc[p] - rh[p] + d[p]));
        }
    }
    return sup;
}

namespace {

// One snapshot's worth of monitored quantities.
struct SnapshotEstimates {
    SupLoc rho, tr, s, ric;
};

SnapshotEstimates snapshot_estimates(const ScalarField& phi,
                                     const HermitianMetricField& ghat,
                                     const TensorField& gamma_hat) {
    HermitianMetricField g = metric_from_potential(ghat, phi);
    SnapshotEstimates e;
    e.rho = sup_loc(gradient_energy(phi, ghat));
    e.tr = sup_loc(trace_quantity(g, ghat));
    TensorField gam = christoffel(g);
    for (std::size_t c = 0; c < gam.ncomps(); ++c)
        for (std::size_t p = 0; p < gam.comps[c].size(); ++p)
            gam.comps[c][p] -= gamma_hat.comps[c][p];
    e.s = sup_loc(tensor_norm_sq(gam, g));
    e.ric = sup_loc(ricci_norm(g));
    return e;
}

double run_sup_phi(const Trajectory& tr) {
    double s = 0.0;
    for (const auto& pt : tr.points) s = std::max(s, sup_real(pt.phi));
    return s;
}

// H = t log rho - (A phi - phi^2 / A); returns max over unmasked points.
BarrierPoint barrier_gradient_at(double t, const ScalarField& phi,
                                 const HermitianMetricField& ghat, double A) {
    ScalarField rho = gradient_energy(phi, ghat);
    BarrierPoint b;
    b.t = t;
    b.degenerate = true;
    for (std::size_t p = 0; p < rho.size(); ++p) {
        double r = rho[p].real();
        if (r < 1e-300) continue;
        double x = phi[p].real();
        double h = t * std::log(r) - (A * x - x * x / A);
        if (b.degenerate || h > b.max_h) {
            b.max_h = h;
            b.argmax = p;
            b.degenerate = false;
        }
    }
    return b;
}

BarrierPoint barrier_trace_at(double t, const ScalarField& phi,
                              const HermitianMetricField& ghat, double A, double alpha,
                              double phi_run_sup) {
    HermitianMetricField g = metric_from_potential(ghat, phi);
    ScalarField tr = trace_quantity(g, ghat);
    const double fac = t > 0 ? std::exp(-alpha / t) : 0.0;
    BarrierPoint b;
    b.t = t;
    bool first = true;
    for (std::size_t p = 0; p < tr.size(); ++p) {
        double h = fac * std::log(tr[p].real()) +
                   std::exp(A * (phi_run_sup - phi[p].real()));
        if (first || h > b.max_h) {
            b.max_h = h;
            b.argmax = p;
            first = false;
        }
    }
    return b;
}

}  // namespace

EstimateSeries estimate_series(const Trajectory& tr, const HermitianMetricField& ghat,
                               double A, double alpha) {
    EstimateSeries out;
    TensorField gamma_hat = christoffel(ghat);
    const double phi_sup = run_sup_phi(tr);
    for (const auto& pt : tr.points) {
        EstimateRow r;
        r.t = pt.t;
        r.sup_phi = sup_norm(pt.phi);
        r.sup_phidot = sup_norm(pt.phidot);
        SnapshotEstimates e = snapshot_estimates(pt.phi, ghat, gamma_hat);
        r.sup_rho = e.rho.v;
        r.arg_rho = e.rho.arg;
        r.trace_max = e.tr.v;
        r.arg_trace = e.tr.arg;
        r.s_max = e.s.v;
        r.arg_s = e.s.arg;
        r.ric_max = e.ric.v;
        r.arg_ric = e.ric.arg;
        BarrierPoint bg = barrier_gradient_at(pt.t, pt.phi, ghat, A);
        r.h_grad = bg.degenerate ? 0.0 : bg.max_h;
        r.h_grad_degenerate = bg.degenerate;
        r.h_trace = barrier_trace_at(pt.t, pt.phi, ghat, A, alpha, phi_sup).max_h;
        r.dt = pt.dt;
        r.rejects = pt.rejects;
        out.rows.push_back(r);
    }
    return out;
}

std::string estimate_series_csv(const EstimateSeries& s) {
    std::string out = "t,sup_phi,sup_phidot,sup_rho,trace_max,S_max,ric_max,dt,rejects\n";
    char buf[512];
    for (const auto& r : s.rows) {
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld\n", r.t,
                      r.sup_phi, r.sup_phidot, r.sup_rho, r.trace_max, r.s_max, r.ric_max,
                      r.dt, r.rejects);
        out += buf;
    }
    return out;
}

std::vector<BarrierPoint> barrier_gradient(const Trajectory& tr,
                                           const HermitianMetricField& ghat, double A) {
    std::vector<BarrierPoint> out;
    for (const auto& pt : tr.points)
        out.push_back(barrier_gradient_at(pt.t, pt.phi, ghat, A));
    return out;
}

std::vector<BarrierPoint> barrier_trace(const Trajectory& tr,
                                        const HermitianMetricField& ghat, double A,
                                        double alpha) {
    std::vector<BarrierPoint> out;
    const double phi_sup = run_sup_phi(tr);
    for (const auto& pt : tr.points)
        out.push_back(barrier_trace_at(pt.t, pt.phi, ghat, A, alpha, phi_sup));
    return out;
}

std::string bound_verdicts_json(const std::vector<BoundVerdict>& vs) {
    std::string s = "[\n";
    char buf[256];
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto& v = vs[i];
        s += "  {\"name\": \"" + v.name + "\", \"constants\": {";
        bool first = true;
        for (const auto& [k, c] : v.constants) {
            std::snprintf(buf, sizeof buf, "%s\"%s\": %.17g", first ? "" : ", ", k.c_str(),
                          c);
            s += buf;
            first = false;
        }
        std::snprintf(buf, sizeof buf,
                      "}, \"margin\": %.17g, \"pass\": %s, \"t_critical\": %.17g}%s\n",
                      v.margin, v.pass ? "true" : "false", v.t_critical,
                      i + 1 < vs.size() ? "," : "");
        s += buf;
    }
    s += "]\n";
    return s;
}

BoundVerdict check_lemma31(const Trajectory& tr, const ForcingSpec& F) {
    if (tr.points.empty()) throw std::invalid_argument("empty trajectory");
    BoundVerdict v;
    v.name = "lemma_3_1";

    double sup_fp = 0.0, sup_f = 0.0;
    for (const auto& pt : tr.points) {
        sup_fp = std::max(sup_fp, sup_norm(F.Fp(pt.phi)));
        sup_f = std::max(sup_f, sup_norm(F.F(pt.phi)));
    }
    // Empirical constant: 5% headroom over the realized sup|F'|, never
    // claimed to be the paper's maximum-principle constant.
    const double C = 1.05 * sup_fp;
    const double pd0 = sup_norm(tr.points.front().phidot);
    const double p0 = sup_norm(tr.points.front().phi);
    const double slack = 1e-8 * (1.0 + pd0);

    v.constants["C_empirical"] = C;
    v.constants["sup_fprime"] = sup_fp;
    v.constants["sup_phidot0"] = pd0;
    v.constants["slack"] = slack;

    double margin = 1e300;
    double tcrit = tr.points.front().t;
    double running_pd = 0.0;
    for (const auto& pt : tr.points) {
        double pd = sup_norm(pt.phidot);
        running_pd = std::max(running_pd, pd);
        // (3.2): sup|phidot(t)| <= sup|phidot(0)| e^{Ct}
        double m = pd0 * std::exp(C * pt.t) + slack - pd;
        // growth chain: sup|phi(t)| <= sup|phi(0)| + t sup|phidot|
        m = std::min(m, p0 + pt.t * running_pd + slack - sup_norm(pt.phi));
        // (3.3): |log det g / det ghat| = |phidot - F| <= sup|phidot| + sup|F|
        double logratio = 0.0;
        ScalarField f = F.F(pt.phi);
        for (std::size_t p = 0; p < pt.phi.size(); ++p)
            logratio = std::max(logratio, std::abs(pt.phidot[p].real() - f[p].real()));
        m = std::min(m, pd + sup_f + slack - logratio);
        if (m < margin) {
            margin = m;
            tcrit = pt.t;
        }
    }
    v.margin = margin;
    v.pass = margin >= 0.0;
    v.t_critical = tcrit;
    return v;
}

BoundVerdict check_smoothing_bounds(const std::vector<Trajectory>& family,
                                    const HermitianMetricField& ghat, double eps) {
    if (family.size() < 2) throw std::invalid_argument("need at least two levels");

    // Precondition: initial data uniformly bounded across levels. A family
    // whose sup|phidot(0)| keeps growing level over level has no uniform
    // bound to check against.
    bool increasing = true;
    double first_pd = sup_norm(family.front().points.front().phidot);
    double last_pd = first_pd;
    for (std::size_t j = 1; j < family.size(); ++j) {
        double pd = sup_norm(family[j].points.front().phidot);
        if (pd <= last_pd) increasing = false;
        last_pd = pd;
    }
    if (increasing && last_pd > 5.0 * (first_pd + 1e-12))
        throw std::invalid_argument("initial sup|phidot| grows across levels");

    TensorField gamma_hat = christoffel(ghat);
    double mx[4], mn[4];
    for (int q = 0; q < 4; ++q) {
        mx[q] = 0.0;
        mn[q] = 1e300;
    }
    for (const auto& tr : family) {
        const TrajectoryPoint* at = nullptr;
        for (const auto& pt : tr.points)
            if (std::abs(pt.t - eps) <= 1e-9 * std::max(1.0, eps)) at = &pt;
        if (!at) throw std::invalid_argument("missing common snapshot time");
        SnapshotEstimates e = snapshot_estimates(at->phi, ghat, gamma_hat);
        double vals[4] = {e.rho.v, e.tr.v, e.s.v, e.ric.v};
        for (int q = 0; q < 4; ++q) {
            mx[q] = std::max(mx[q], vals[q]);
            mn[q] = std::min(mn[q], vals[q]);
        }
    }

    BoundVerdict v;
    v.name = "uniform_smoothing_bounds";
    const char* names[4] = {"ratio_rho", "ratio_trace", "ratio_S", "ratio_ric"};
    double worst = 0.0;
    for (int q = 0; q < 4; ++q) {
        double ratio = mx[q] / std::max(mn[q], 1e-300);
        v.constants[names[q]] = ratio;
        worst = std::max(worst, ratio);
    }
    v.constants["threshold"] = 10.0;
    v.margin = 10.0 - worst;
    v.pass = v.margin >= 0.0 && std::isfinite(worst);
    v.t_critical = eps;
    return v;
}

}  // namespace mafl
