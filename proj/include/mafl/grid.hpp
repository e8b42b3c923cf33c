#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mafl/fft.hpp"

namespace mafl {

// Uniform periodic grid over the 2n real coordinates of a flat complex torus.
// Real axes are ordered x1, y1, x2, y2 with z^j = x^j + i y^j pairing axes
// (2j, 2j+1). Points are stored row-major with the last axis fastest.
struct TorusGrid {
    int n = 1;
    int res = 0;
    std::vector<double> periods;

    int real_dim() const { return 2 * n; }
    std::size_t npoints() const {
        std::size_t p = 1;
        for (int a = 0; a < real_dim(); ++a) p *= static_cast<std::size_t>(res);
        return p;
    }
    std::vector<int> dims() const { return std::vector<int>(real_dim(), res); }
    double spacing(int axis) const { return periods[axis] / res; }
    double coord(int axis, long index) const { return periods[axis] * index / res; }

    // Decompose flat point index into per-axis indices (last axis fastest).
    void unravel(std::size_t p, long* out) const;

    bool operator==(const TorusGrid& o) const {
        return n == o.n && res == o.res && periods == o.periods;
    }
};

TorusGrid make_grid(int n, const std::vector<double>& periods, int res);

struct ScalarField {
    TorusGrid grid;
    CVec v;

    ScalarField() = default;
    explicit ScalarField(const TorusGrid& g) : grid(g), v(g.npoints()) {}
    ScalarField(const TorusGrid& g, CVec vals) : grid(g), v(std::move(vals)) {}

    std::size_t size() const { return v.size(); }
    Complex& operator[](std::size_t i) { return v[i]; }
    const Complex& operator[](std::size_t i) const { return v[i]; }
};

enum class IndexKind : std::uint8_t {
    LowerHolo = 0,   // lower unbarred
    LowerAnti = 1,   // lower barred
    UpperHolo = 2,   // upper unbarred
    UpperAnti = 3,   // upper barred
};

// Complex tensor field stored one contiguous scalar block per component so
// spectral transforms run per component. Component index is row-major over
// the signature, last tensor index fastest.
struct TensorField {
    TorusGrid grid;
    std::vector<IndexKind> signature;
    std::vector<CVec> comps;

    TensorField() = default;
    TensorField(const TorusGrid& g, std::vector<IndexKind> sig);

    int rank() const { return static_cast<int>(signature.size()); }
    std::size_t ncomps() const { return comps.size(); }
    CVec& comp(std::size_t c) { return comps[c]; }
    const CVec& comp(std::size_t c) const { return comps[c]; }

    // Flat component index from tensor indices (each in [0, n)).
    std::size_t cindex(std::initializer_list<int> idx) const;
};

ScalarField d_holo(const ScalarField& f, int j);
ScalarField d_anti(const ScalarField& f, int j);
TensorField d_holo(const TensorField& t, int j);
TensorField d_anti(const TensorField& t, int j);

Complex integrate(const ScalarField& f);
double sup_norm(const ScalarField& f);

// Max of real parts and min of real parts, for fields known to be real.
double sup_real(const ScalarField& f);
double inf_real(const ScalarField& f);

ScalarField mollify(const ScalarField& f, int j);

// Spectral round trips used by several modules.
CVec spectrum(const ScalarField& f);
ScalarField from_spectrum(const TorusGrid& g, const CVec& spec);

// Derivative applied to an explicit spectrum, returning a physical field.
// Saves one forward transform when many derivatives of one field are needed.
ScalarField d_holo_spec(const TorusGrid& g, const CVec& spec, int j);
ScalarField d_anti_spec(const TorusGrid& g, const CVec& spec, int j);

// Multiply a spectrum in place by a Wirtinger derivative symbol. Composing
// several symbols before a single inverse transform avoids round trips.
void apply_holo_symbol(const TorusGrid& g, CVec& spec, int j);
void apply_anti_symbol(const TorusGrid& g, CVec& spec, int j);

// Field arithmetic helpers.
ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(const ScalarField& a, const ScalarField& b);
ScalarField operator*(Complex c, const ScalarField& a);
ScalarField operator+(const ScalarField& a, Complex c);
ScalarField conj(const ScalarField& a);

bool all_finite(const ScalarField& f);

}  // namespace mafl
