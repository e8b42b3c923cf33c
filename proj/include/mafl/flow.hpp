#pragma once

#include <vector>

#include "mafl/forcing.hpp"
#include "mafl/geometry.hpp"
#include "mafl/grid.hpp"

namespace mafl {

// g = ghat + Hess(phi), the metric of omega_hat + i ddbar phi. Throws
// NotAdmissible (with the offending point and eigenvalue) when the form
// fails to be positive.
HermitianMetricField metric_from_potential(const HermitianMetricField& ghat,
                                           const ScalarField& phi);

struct FlowState {
    double t = 0.0;
    ScalarField phi;
    HermitianMetricField g;  // cache of ghat + Hess phi
    ScalarField phidot;      // cache of the RHS at phi
};

// phidot = log(det g / det ghat) + F(phi, z).
ScalarField flow_rhs(const HermitianMetricField& g, const HermitianMetricField& ghat,
                     const ScalarField& phi, const ForcingSpec& F);

FlowState make_state(double t, const ScalarField& phi, const HermitianMetricField& ghat,
                     const ForcingSpec& F);

// One classical RK4 update. Every stage is admissibility-checked; a failing
// stage surfaces as StepRejected so the caller can shrink dt.
FlowState step(const FlowState& s, double dt, const HermitianMetricField& ghat,
               const ForcingSpec& F);

struct DtPolicy {
    double cfl = 0.35;        // dt = cfl * h^2 / (n * eigenvalue ratio of g)
    double cfl_cap = 0.56;    // growth ceiling for the adaptive cfl
    int double_after = 50;    // accepted steps before the cfl doubles
    double snapshot_every = 0.0;  // 0: record only endpoints
};

struct TrajectoryPoint {
    double t = 0.0;
    ScalarField phi;
    ScalarField phidot;
    double dt = 0.0;
    long rejects = 0;
};

struct Trajectory {
    TorusGrid grid;
    DtPolicy policy;
    double t_end = 0.0;
    std::vector<TrajectoryPoint> points;
    long total_steps = 0;
    long total_rejects = 0;
};

// Integrate from phi0 to t_end. Snapshots land on exact multiples of
// snapshot_every (dt is clipped to hit them) plus both endpoints. dt halves
// on rejection and creeps back up after enough accepted steps. Throws
// Stalled when dt collapses below 1e-12 and NonFinite on NaN/Inf.
Trajectory run_flow(const ScalarField& phi0, const HermitianMetricField& ghat,
                    const ForcingSpec& F, double t_end, const DtPolicy& policy = {});

// Residual of the differentiated flow equation d(phidot)/dt =
// Laplacian_g phidot + F'(phi) phidot at each interior snapshot of a
// uniformly spaced trajectory (second-order time difference against the
// spectral spatial side). fprime_scale deliberately corrupts the F' term
// for sensitivity checks.
std::vector<double> linearized_residual(const Trajectory& tr,
                                        const HermitianMetricField& ghat,
                                        const ForcingSpec& F, double fprime_scale = 1.0);

}  // namespace mafl
