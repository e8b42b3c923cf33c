#pragma once

#include <map>
#include <string>
#include <vector>

#include "mafl/flow.hpp"
#include "mafl/forcing.hpp"
#include "mafl/geometry.hpp"
#include "mafl/grid.hpp"

namespace mafl {

// rho = ghat^{i jbar} phi_i phi_jbar, real nonnegative.
ScalarField gradient_energy(const ScalarField& phi, const HermitianMetricField& ghat);

// tr_ghat g = ghat^{i jbar} g_{i jbar}, and the equivalent potential route
// n + ghat^{i jbar} phi_{i jbar} used as a cross check.
ScalarField trace_quantity(const HermitianMetricField& g, const HermitianMetricField& ghat);
ScalarField trace_quantity_potential(const HermitianMetricField& ghat, const ScalarField& phi);

// Phi_{ij}^k = Gamma_{ij}^k - Gammahat_{ij}^k.
TensorField phi_tensor(const HermitianMetricField& g, const HermitianMetricField& ghat);

// S = |Phi|^2_g. Both the Phi contraction and the covariant-Hessian route
// are computed and must agree to 1e-8; the returned field is the Phi route.
ScalarField third_order_S(const HermitianMetricField& g, const HermitianMetricField& ghat);
ScalarField third_order_S_hessian_route(const HermitianMetricField& g,
                                        const HermitianMetricField& ghat,
                                        const ScalarField& phi);

// |Ric|_g = (g^{i pbar} g^{q jbar} R_{i jbar} conj(R_{p qbar}))^{1/2}.
ScalarField ricci_norm(const HermitianMetricField& g);

// Direct residuals of the two curvature/connection identities relating g,
// ghat and Phi: sup |dbar Phi + R - Rhat| (index-raised curvature) and
// sup |Ric - Richat - trace(dbar Phi)|.
double identity_dbar_phi_residual(const HermitianMetricField& g,
                                  const HermitianMetricField& ghat);
double identity_ricci_residual(const HermitianMetricField& g,
                               const HermitianMetricField& ghat);

struct EstimateRow {
    double t = 0.0;
    double sup_phi = 0.0, sup_phidot = 0.0;
    double sup_rho = 0.0, trace_max = 0.0, s_max = 0.0, ric_max = 0.0;
    double h_grad = 0.0, h_trace = 0.0;
    bool h_grad_degenerate = false;
    std::size_t arg_rho = 0, arg_trace = 0, arg_s = 0, arg_ric = 0;
    double dt = 0.0;
    long rejects = 0;
};

struct EstimateSeries {
    std::vector<EstimateRow> rows;
};

// Every monitored quantity at every snapshot of the trajectory. A and alpha
// parameterize the barrier functionals below.
EstimateSeries estimate_series(const Trajectory& tr, const HermitianMetricField& ghat,
                               double A = 3.0, double alpha = 1.0);

// CSV body: t, sup_phi, sup_phidot, sup_rho, trace_max, S_max, ric_max, dt, rejects.
std::string estimate_series_csv(const EstimateSeries& s);

struct BarrierPoint {
    double t = 0.0;
    double max_h = 0.0;
    std::size_t argmax = 0;
    bool degenerate = false;  // every point masked (rho below the log floor)
};

// H = t log rho - gamma(phi) with gamma(x) = A x - x^2 / A. Points with
// rho < 1e-300 are excluded from the max.
std::vector<BarrierPoint> barrier_gradient(const Trajectory& tr,
                                           const HermitianMetricField& ghat, double A);

// H = e^{-alpha/t} log tr_ghat g + e^Psi, Psi = A (sup_{run x M} phi - phi).
std::vector<BarrierPoint> barrier_trace(const Trajectory& tr,
                                        const HermitianMetricField& ghat, double A,
                                        double alpha);

struct BoundVerdict {
    std::string name;
    std::map<std::string, double> constants;
    double margin = 0.0;  // min over t of RHS - LHS; pass iff >= 0
    bool pass = false;
    double t_critical = 0.0;
};

std::string bound_verdicts_json(const std::vector<BoundVerdict>& vs);

// sup|phidot(t)| <= sup|phidot(0)| e^{Ct} with the empirical constant
// C = 1.05 sup|F'| over the realized range, plus the |phi| growth chain and
// the log-volume-ratio bound. A small roundoff slack (recorded in the
// constants) keeps the structurally forced F=0 case from failing at 1e-16.
BoundVerdict check_lemma31(const Trajectory& tr, const ForcingSpec& F);

// Across-level uniformity of sup rho, sup tr, sup S, sup|Ric| at time eps:
// max/min ratio < 10 for each. Throws std::invalid_argument when the family
// violates the bounded-initial-data precondition or shares no snapshot at eps.
BoundVerdict check_smoothing_bounds(const std::vector<Trajectory>& family,
                                    const HermitianMetricField& ghat, double eps);

}  // namespace mafl
