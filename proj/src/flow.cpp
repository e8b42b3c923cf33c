#include "mafl/flow.hpp"

#include <cmath>
#include <stdexcept>

#include "mafl/errors.hpp"

namespace mafl {

namespace {

// Hess(phi)_{i jbar} = d_i d_jbar phi, all components from one forward
// transform of phi.
TensorField hessian(const ScalarField& phi) {
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

double min_eig_at(int n, const Complex* m) {
    if (n == 1) return m[0].real();
    double tr = m[0].real() + m[3].real();
    double det = m[0].real() * m[3].real() - std::norm(m[1]);
    double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    return 0.5 * (tr - disc);
}

}  // namespace

HermitianMetricField metric_from_potential(const HermitianMetricField& ghat,
                                           const ScalarField& phi) {
    const TorusGrid& gr = ghat.grid();
    const int n = gr.n;
    TensorField h = hessian(phi);
    TensorField gt(gr, {IndexKind::LowerHolo, IndexKind::LowerAnti});
    const std::size_t np = gr.npoints();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            CVec& c = gt.comps[i * n + j];
            const CVec& a = h.comps[i * n + j];
            const CVec& b = h.comps[j * n + i];
            const CVec& base = ghat.gc(i, j);
            // Symmetrize the Hessian pair so roundoff cannot break
            // Hermitian symmetry of the result.
            for (std::size_t p = 0; p < np; ++p)
                c[p] = base[p] + 0.5 * (a[p] + std::conj(b[p]));
        }

    double worst = 0.0;
    std::size_t worst_p = 0;
    bool bad = false;
    std::array<Complex, 4> m{};
    for (std::size_t p = 0; p < np; ++p) {
        for (int i = 0; i < n * n; ++i) m[i] = gt.comps[i][p];
        double lo = min_eig_at(n, m.data());
        if (lo <= 0.0 && (!bad || lo < worst)) {
            bad = true;
            worst = lo;
            worst_p = p;
        }
    }
    if (bad)
        throw NotAdmissible("potential leaves the admissible cone", worst_p, worst);
    return HermitianMetricField::make(gt);
}

ScalarField flow_rhs(const HermitianMetricField& g, const HermitianMetricField& ghat,
                     const ScalarField& phi, const ForcingSpec& F) {
    ScalarField rhs = F.F(phi);
    for (std::size_t p = 0; p < rhs.size(); ++p)
        rhs[p] = Complex(rhs[p].real() + g.logdet[p].real() - ghat.logdet[p].real(), 0.0);
    return rhs;
}

FlowState make_state(double t, const ScalarField& phi, const HermitianMetricField& ghat,
                     const ForcingSpec& F) {
    FlowState s;
    s.t = t;
    s.phi = phi;
    for (auto& v : s.phi.v) v = Complex(v.real(), 0.0);
    s.g = metric_from_potential(ghat, s.phi);
    s.phidot = flow_rhs(s.g, ghat, s.phi, F);
    return s;
}

namespace {

ScalarField axpy(const ScalarField& phi, double c, const ScalarField& k) {
    ScalarField out(phi.grid);
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = Complex(phi[p].real() + c * k[p].real(), 0.0);
    return out;
}

ScalarField stage_rhs(const ScalarField& phi, const HermitianMetricField& ghat,
                      const ForcingSpec& F) {
    HermitianMetricField g = metric_from_potential(ghat, phi);
    return flow_rhs(g, ghat, phi, F);
}

}  // namespace

FlowState step(const FlowState& s, double dt, const HermitianMetricField& ghat,
               const ForcingSpec& F) {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    try {
        const ScalarField& k1 = s.phidot;
        ScalarField k2 = stage_rhs(axpy(s.phi, 0.5 * dt, k1), ghat, F);
        ScalarField k3 = stage_rhs(axpy(s.phi, 0.5 * dt, k2), ghat, F);
        ScalarField k4 = stage_rhs(axpy(s.phi, dt, k3), ghat, F);
        ScalarField phi1(s.phi.grid);
        for (std::size_t p = 0; p < phi1.size(); ++p)
            phi1[p] = Complex(s.phi[p].real() +
                                  dt / 6.0 *
                                      (k1[p].real() + 2.0 * k2[p].real() +
                                       2.0 * k3[p].real() + k4[p].real()),
                              0.0);
        if (!all_finite(phi1)) throw NonFinite("flow step produced NaN/Inf");
        FlowState out = make_state(s.t + dt, phi1, ghat, F);
        if (!all_finite(out.phidot)) throw NonFinite("flow RHS produced NaN/Inf");
        return out;
    } catch (const NotAdmissible& e) {
        throw StepRejected(std::string("stage left the admissible cone: ") + e.what());
    } catch (const SingularMetric& e) {
        throw StepRejected(std::string("stage metric near singular: ") + e.what());
    }
}

Trajectory run_flow(const ScalarField& phi0, const HermitianMetricField& ghat,
                    const ForcingSpec& F, double t_end, const DtPolicy& policy) {
    if (!(t_end > 0)) throw std::invalid_argument("t_end must be positive");
    const TorusGrid& gr = ghat.grid();
    Trajectory tr;
    tr.grid = gr;
    tr.policy = policy;
    tr.t_end = t_end;

    double h = gr.spacing(0);
    for (int a = 1; a < gr.real_dim(); ++a) h = std::min(h, gr.spacing(a));

    FlowState s = make_state(0.0, phi0, ghat, F);
    tr.points.push_back({0.0, s.phi, s.phidot, 0.0, 0});

    double cfl = policy.cfl;
    int accepted_since_change = 0;
    long rejects_since_snap = 0;
    int next_snap = 1;
    const double eps = 1e-12;

    while (s.t < t_end - eps) {
        double ratio = std::max(s.g.max_eig / s.g.min_eig, 1.0);
        double dt = cfl * h * h / (gr.n * ratio);
        double target = t_end;
        if (policy.snapshot_every > 0) {
            double cand = next_snap * policy.snapshot_every;
            if (cand < t_end - eps) target = cand;
        }
        if (s.t + dt > target - eps) dt = target - s.t;
        if (dt < 1e-12) throw Stalled("flow time step collapsed");

        try {
            FlowState next = step(s, dt, ghat, F);
            s = std::move(next);
            ++tr.total_steps;
            if (++accepted_since_change >= policy.double_after) {
                cfl = std::min(2.0 * cfl, policy.cfl_cap);
                accepted_since_change = 0;
            }
        } catch (const StepRejected&) {
            cfl *= 0.5;
            accepted_since_change = 0;
            ++rejects_since_snap;
            ++tr.total_rejects;
            continue;
        }

        if (s.t >= target - eps) {
            tr.points.push_back({s.t, s.phi, s.phidot, dt, rejects_since_snap});
            rejects_since_snap = 0;
            if (target < t_end - eps) ++next_snap;
        }
    }
    return tr;
}

std::vector<double> linearized_residual(const Trajectory& tr,
                                        const HermitianMetricField& ghat,
                                        const ForcingSpec& F, double fprime_scale) {
    if (tr.points.size() < 3)
        throw std::invalid_argument("linearized residual needs >= 3 snapshots");
    const TorusGrid& gr = tr.grid;
    const int n = gr.n;
    std::vector<double> out;
    for (std::size_t k = 1; k + 1 < tr.points.size(); ++k) {
        double d1 = tr.points[k].t - tr.points[k - 1].t;
        double d2 = tr.points[k + 1].t - tr.points[k].t;
        if (std::abs(d1 - d2) > 1e-9 * std::max(d1, d2))
            throw std::invalid_argument("linearized residual needs uniform snapshot times");
        const ScalarField& pd = tr.points[k].phidot;
        HermitianMetricField g = metric_from_potential(ghat, tr.points[k].phi);

        // Laplacian_g phidot = g^{p qbar} d_p d_qbar phidot (scalar case).
        CVec spec = fft::forward(gr.dims(), pd.v);
        ScalarField lap(gr);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                CVec s = spec;
                apply_holo_symbol(gr, s, p);
                apply_anti_symbol(gr, s, q);
                CVec d = fft::inverse(gr.dims(), s);
                const CVec& iv = g.invc(p, q);
                for (std::size_t x = 0; x < lap.size(); ++x) lap[x] += iv[x] * d[x];
            }

        ScalarField fp = F.Fp(tr.points[k].phi);
        double sup = 0.0;
        for (std::size_t x = 0; x < lap.size(); ++x) {
            Complex tfd = (tr.points[k + 1].phidot[x] - tr.points[k - 1].phidot[x]) /
                          (d1 + d2);
            Complex r = tfd - lap[x] - fprime_scale * fp[x].real() * pd[x];
            sup = std::max(sup, std::abs(r));
        }
        out.push_back(sup);
    }
    return out;
}

}  // namespace mafl
