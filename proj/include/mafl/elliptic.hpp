#pragma once

#include <vector>

#include "mafl/flow.hpp"
#include "mafl/forcing.hpp"
#include "mafl/geometry.hpp"
#include "mafl/grid.hpp"

namespace mafl {

enum class Normalization { None, SymmetricSup, MeanZero };

// Stationary problem log(det(ghat + Hess phi) / det ghat) + F(phi, z) = 0.
struct EllipticProblem {
    HermitianMetricField ghat;
    ForcingSpec F;
    Normalization norm = Normalization::None;
};

struct SolveReport {
    ScalarField phi;
    double residual = 0.0;
    int iterations = 0;
    double c = 1.0;  // filled by pipelines that solve the c-normalized equation
    double admissibility_margin = 0.0;  // min eigenvalue of the final metric
    std::vector<double> residual_history;
};

// r = log(det(ghat + Hess phi) / det ghat) + F(phi, z); zero at solutions.
ScalarField ma_residual(const ScalarField& phi, const EllipticProblem& pb);

// Damped Newton with a spectrally preconditioned BiCGStab inner solve of
// the linearization Lap_g dphi + F' dphi = -r. When sup|F'| vanishes the
// constant mode is gauged out (solutions are unique up to constants only).
// Converged when sup|r| < 1e-10; throws NoConvergence after max_iter and
// NotAdmissible when no admissible step exists.
SolveReport solve_elliptic(const EllipticProblem& pb, const ScalarField& phi_init,
                           int max_iter = 200);

// Relative defect |int det(ghat + Hess phi) - int det ghat| / int det ghat.
double volume_identity(const ScalarField& phi, const HermitianMetricField& ghat);

// psi + s with s chosen so sup(psi' - phi) = sup(phi - psi').
ScalarField normalize_pair(const ScalarField& psi, const ScalarField& phi);

// c = int det ghat / int e^{-F(phi_j, z)} det ghat.
double c_constant(const ScalarField& phi_j, const HermitianMetricField& ghat,
                  const ForcingSpec& F);

// sup |(phi1 - phi2) - mean(phi1 - phi2)| after checking both fields solve
// the problem to 1e-9 (guards against comparing different problems).
double stability_gap(const ScalarField& phi1, const ScalarField& phi2,
                     const EllipticProblem& pb);

}  // namespace mafl
