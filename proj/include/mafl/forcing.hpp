#pragma once

#include <functional>
#include <string>

#include "mafl/grid.hpp"

namespace mafl {

// Forcing term F(phi, z) with the derivative evaluators the flow and the
// estimate machinery need. All evaluators act pointwise on a real potential
// field and return real fields on the same grid.
struct ForcingSpec {
    std::string kind;
    std::function<ScalarField(const ScalarField&)> F;
    std::function<ScalarField(const ScalarField&)> Fp;   // dF/dphi
    std::function<ScalarField(const ScalarField&)> Fpp;  // d2F/dphi2
    // Spatial Wirtinger derivatives at fixed phi: d/dz^i, d2/(dphi dz^i),
    // d2/(dz^i dzbar^j).
    std::function<ScalarField(const ScalarField&, int)> Fz;
    std::function<ScalarField(const ScalarField&, int)> Fpz;
    std::function<ScalarField(const ScalarField&, int, int)> Fzz;
};

ForcingSpec forcing_zero();

// F(phi, z) = lambda*phi - h(z).
ForcingSpec forcing_linear(double lambda, const ScalarField& h);

// F parsed from an expression in phi and the real coordinates x1,y1,x2,y2
// (x,y alias the first pair). Supported: + - * / ^, unary minus, parentheses,
// numbers, pi, sin, cos, exp, log, tanh, sqrt. All derivative evaluators are
// exact symbolic derivatives of the parsed tree.
ForcingSpec forcing_expression(const std::string& expr);

}  // namespace mafl
