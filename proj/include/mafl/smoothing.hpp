#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mafl/elliptic.hpp"
#include "mafl/estimates.hpp"
#include "mafl/flow.hpp"
#include "mafl/forcing.hpp"

namespace mafl {

struct KinkSpec {
    double amp = 0.3;
    int pieces = 2;           // shifted cosines under the regularized max
    double tau_factor = 2.0;  // kink width in units of the grid spacing
    double lambda = 1.0;      // phi-slope of the manufactured forcing
    double margin = 0.05;     // required admissibility margin of ghat + Hess phi
};

struct NonsmoothSolution {
    ScalarField phi;
    ForcingSpec F;
};

// phi = softmax of shifted cosines, kinked at scale tau = tau_factor * h, with
// F(p, z) = lambda (p - phi(z)) - log(det(ghat + Hess phi)/det ghat)(z) so phi
// solves the stationary equation exactly on the grid. Throws
// InadmissibleConstruction when the margin requirement fails.
NonsmoothSolution build_nonsmooth_solution(const HermitianMetricField& ghat,
                                           const KinkSpec& spec);

struct SmoothingExperiment {
    HermitianMetricField ghat;
    ScalarField phi;  // base potential, typically kinked at grid scale
    ForcingSpec F;
    std::vector<int> levels = {8, 16, 32, 64};  // mollification bands
    double T = 0.1;
    double snapshot_every = 0.01;
    // Deliberate corruption of the c constant used by the flows (sensitivity
    // hook for the recovery check); 1 is the honest pipeline.
    double c_scale = 1.0;
};

struct LevelResult {
    int j = 0;
    bool ok = false;
    std::string error;       // failure diagnostics when !ok
    double phij_err = 0.0;   // ||phi_j - phi||inf
    double cj = 0.0;
    double psij_err = 0.0;   // ||psi_j - phi||inf
    double phidot0 = 0.0;    // sup|F(psi_j) - F(phi_j)|, the t=0 flow speed
    double eq47_residual = 0.0;  // |actual flow rhs at psi_j - that identity|
    Trajectory tr;
};

struct SmoothingReport {
    std::vector<int> levels;
    double T = 0.0;
    double fprime_sup = 0.0;  // sup|F'| at the base potential
    std::vector<LevelResult> results;
    std::vector<double> times;  // shared snapshot times
    // sup distances ||phi_j(t) - phi_k(t)||inf per level pair, inner index
    // running over times
    std::vector<std::pair<std::pair<int, int>, std::vector<double>>> pairwise;
    std::vector<double> recovery_err;  // ||phi_finest(t) - phi||inf over times
};

// Mollify, solve the approximating stationary problems with their c
// constants, normalize against the base, run the flows, and collect the
// report. Per-level failures are recorded, not fatal.
SmoothingReport run_pipeline(const SmoothingExperiment& exp);

// Pairwise distances between consecutive levels at snapshot time t must each
// shrink by >= 1.5x. Needs >= 3 successful levels sharing that time.
BoundVerdict cauchy_check(const SmoothingReport& rep, double t);

// Finest level: (a) sup|phidot| at T/2 below 3 x the t=0 identity speed plus
// 1e-6; (b) ||phi(t) - phi_base||inf <= ||psi - phi_base||inf e^{C t} + 1e-6
// with C = 1.05 sup|F'|.
BoundVerdict recovery_check(const SmoothingReport& rep);

std::string smoothing_report_json(const SmoothingReport& rep);
std::string pairwise_csv(const SmoothingReport& rep);

}  // namespace mafl
