#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mafl/errors.hpp"
#include "mafl/grid.hpp"

namespace mafl {

// Metric g_{ij} with cached pointwise inverse and log det.
// Components are matrices M[i][j] = g_{i jbar}; the inverse is stored as
// inv[i][j] = g^{i jbar} with the convention g^{i jbar} g_{k jbar} = delta^i_k,
// i.e. inv[i][j] = (M^{-1})_{ji}.
struct HermitianMetricField {
    TensorField g;    // signature (LowerHolo, LowerAnti)
    TensorField inv;  // signature (UpperHolo, UpperAnti)
    ScalarField logdet;
    double min_eig = 0.0;
    double max_eig = 0.0;

    int n() const { return g.grid.n; }
    const TorusGrid& grid() const { return g.grid; }
    const CVec& gc(int i, int j) const { return g.comps[i * g.grid.n + j]; }
    const CVec& invc(int i, int j) const { return inv.comps[i * g.grid.n + j]; }

    // Validates Hermitian symmetry (1e-12) and positive definiteness
    // (min eigenvalue > 1e-10 max eigenvalue), computes inverse and log det.
    // full=false skips the inverse and log det fields; the residual suites
    // recompute them pointwise so large grids stay within memory.
    static HermitianMetricField make(const TensorField& comps, bool full = true);
};

HermitianMetricField flat_metric(const TorusGrid& grid);

// Seeded band-limited perturbation of the flat metric, g = delta + h with
// sup|h_ij| <= eps by construction. The perturbation is a fixed function of
// the seed (coefficients keyed by signed frequency), so the same metric can
// be sampled at several resolutions.
HermitianMetricField perturbed_metric(const TorusGrid& grid, std::uint64_t seed, double eps,
                                      int band = 2, bool full = true);

// Gamma_{ij}^k at component index {i,j,k}, signature (L,L,U).
TensorField christoffel(const HermitianMetricField& g);
// T_{ij}^k = Gamma_{ij}^k - Gamma_{ji}^k.
TensorField torsion(const HermitianMetricField& g);
// R_{i jbar k lbar} at {i,j,k,l}, signature (L,Lbar,L,Lbar).
TensorField chern_curvature(const HermitianMetricField& g);
// R_{i jbar} = -d_i d_jbar log det g.
TensorField chern_ricci(const HermitianMetricField& g);
// Cross-check route g^{k lbar} R_{i jbar k lbar}.
TensorField chern_ricci_trace_route(const HermitianMetricField& g);

// Covariant derivative with the new index prepended: holo adds a LowerHolo
// slot acting on unbarred slots, anti adds a LowerAnti slot acting on barred
// slots with conjugated Christoffels. gamma is christoffel(g).
TensorField covariant_derivative(const TensorField& t, const TensorField& gamma, bool anti);

// Pointwise |t|^2_g: each slot contracted with g or its inverse per kind.
ScalarField tensor_norm_sq(const TensorField& t, const HermitianMetricField& g);
ScalarField tensor_norm(const TensorField& t, const HermitianMetricField& g);

// (tr_ghat g, tr_g ghat).
std::pair<ScalarField, ScalarField> trace_pair(const HermitianMetricField& g,
                                               const HermitianMetricField& ghat);

// Local holomorphic coordinate jet at a grid point: linear map A and
// symmetric quadratic coefficients Q with z = z_p + A(w + Q(w,w)/2),
// normalizing the metric to identity and killing d g_{a abar}/dw^c at p.
struct FrameJet {
    int n = 0;
    std::vector<Complex> A;   // A[i*n+a] = dz^i/dw'^a linear part
    std::vector<Complex> Q;   // Q[(k*n+j)*n+l] = Q^k_{jl}, symmetric in (j,l)
    std::vector<Complex> g0;  // transformed metric at p, row-major a,b
    std::vector<Complex> dg;  // transformed d_c g_{a bbar} at p, [(c*n+a)*n+b]
};
FrameJet guan_li_frame(const HermitianMetricField& ghat, std::size_t point);

struct ResidualReport {
    std::string identity_name;
    double sup_residual = 0.0;
    int res = 0;
    std::uint64_t metric_seed = 0;
};

std::string residual_report_json(const std::vector<ResidualReport>& reports);

// Memory-lean residual suites. curvature_scale != 1 deliberately corrupts the
// curvature side (harness sensitivity hook). byte_budget caps cached
// intermediate fields so the n=2 res-64 case stays within a few GB.
std::vector<ResidualReport> verify_commutation(const HermitianMetricField& g,
                                               const TensorField& X, const TensorField& a,
                                               std::uint64_t seed,
                                               double curvature_scale = 1.0,
                                               std::size_t byte_budget = std::size_t(2) << 30);
std::vector<ResidualReport> verify_torsion_bianchi(const HermitianMetricField& g,
                                                   std::uint64_t seed,
                                                   std::size_t byte_budget = std::size_t(2)
                                                                             << 30);

// Both suites over one shared cache of derived fields: cheaper than the two
// calls above when both sets of residuals are wanted for the same metric.
std::vector<ResidualReport> verify_identities(const HermitianMetricField& g,
                                              const TensorField& X, const TensorField& a,
                                              std::uint64_t seed,
                                              std::size_t byte_budget = std::size_t(2) << 30);

namespace detail {

// Reference route built from the generic materialized operators. Used for
// n=1 and as a cross check of the lean route on small grids.
std::vector<ResidualReport> verify_commutation_full(const HermitianMetricField& g,
                                                    const TensorField& X, const TensorField& a,
                                                    std::uint64_t seed, double curvature_scale);
std::vector<ResidualReport> verify_torsion_bianchi_full(const HermitianMetricField& g,
                                                        std::uint64_t seed);

}  // namespace detail

}  // namespace mafl
