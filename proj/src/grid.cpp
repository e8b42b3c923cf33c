#include "mafl/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace mafl {

void TorusGrid::unravel(std::size_t p, long* out) const {
    for (int a = real_dim() - 1; a >= 0; --a) {
        out[a] = static_cast<long>(p % res);
        p /= res;
    }
}

TorusGrid make_grid(int n, const std::vector<double>& periods, int res) {
    if (n != 1 && n != 2) throw std::invalid_argument("complex dimension must be 1 or 2");
    if (res < 8 || res % 2 != 0) throw std::invalid_argument("resolution must be even >= 8");
    if (static_cast<int>(periods.size()) != 2 * n)
        throw std::invalid_argument("need one period per real axis");
    for (double L : periods)
        if (!(L > 0)) throw std::invalid_argument("periods must be positive");
    TorusGrid g;
    g.n = n;
    g.res = res;
    g.periods = periods;
    return g;
}

TensorField::TensorField(const TorusGrid& g, std::vector<IndexKind> sig)
    : grid(g), signature(std::move(sig)) {
    std::size_t nc = 1;
    for (std::size_t k = 0; k < signature.size(); ++k) nc *= static_cast<std::size_t>(g.n);
    comps.resize(nc);
    for (auto& c : comps) c.assign(g.npoints(), Complex(0.0));
}

std::size_t TensorField::cindex(std::initializer_list<int> idx) const {
    if (idx.size() != signature.size()) throw std::invalid_argument("tensor index arity");
    std::size_t c = 0;
    for (int i : idx) c = c * grid.n + static_cast<std::size_t>(i);
    return c;
}

namespace {

// Angular frequencies for one axis; Nyquist bin zeroed so first derivatives
// of real fields stay real.
std::vector<double> axis_omegas(const TorusGrid& g, int axis) {
    std::vector<double> w(g.res);
    for (long m = 0; m < g.res; ++m) {
        long k = fft::signed_freq(m, g.res);
        if (2 * k == g.res) k = 0;
        w[m] = 2.0 * M_PI * k / g.periods[axis];
    }
    return w;
}

// Multiply a spectrum in place by the symbol of d/dz^j or d/dzbar^j.
void apply_wirtinger_symbol(const TorusGrid& g, CVec& spec, int j, bool anti) {
    const int ax = 2 * j, ay = 2 * j + 1;
    const std::vector<double> wx = axis_omegas(g, ax);
    const std::vector<double> wy = axis_omegas(g, ay);
    const double ysign = anti ? -1.0 : 1.0;

    std::size_t inner = 1;
    for (int a = ay + 1; a < g.real_dim(); ++a) inner *= g.res;
    std::size_t outer = 1;
    for (int a = 0; a < ax; ++a) outer *= g.res;

    // d_holo symbol: (i wx + wy)/2, d_anti: (i wx - wy)/2
    std::vector<double> sy(g.res), sx(g.res);
    for (int m = 0; m < g.res; ++m) {
        sy[m] = ysign * 0.5 * wy[m];
        sx[m] = 0.5 * wx[m];
    }
    double* v = reinterpret_cast<double*>(spec.data());
    std::size_t p = 0;
    if (inner > 1) {
        for (std::size_t o = 0; o < outer; ++o)
            for (int mx = 0; mx < g.res; ++mx)
                for (int my = 0; my < g.res; ++my) {
                    const double a = sy[my], b = sx[mx];
                    double* q = v + 2 * p;
                    for (std::size_t i = 0; i < inner; ++i) {
                        const double re = q[2 * i], im = q[2 * i + 1];
                        q[2 * i] = re * a - im * b;
                        q[2 * i + 1] = re * b + im * a;
                    }
                    p += inner;
                }
    } else {
        for (std::size_t o = 0; o < outer; ++o)
            for (int mx = 0; mx < g.res; ++mx) {
                const double b = sx[mx];
                double* q = v + 2 * p;
                for (int my = 0; my < g.res; ++my) {
                    const double re = q[2 * my], im = q[2 * my + 1];
                    q[2 * my] = re * sy[my] - im * b;
                    q[2 * my + 1] = re * b + im * sy[my];
                }
                p += static_cast<std::size_t>(g.res);
            }
    }
}

ScalarField wirtinger(const ScalarField& f, int j, bool anti) {
    if (j < 0 || j >= f.grid.n) throw std::out_of_range("axis index");
    CVec spec = fft::forward(f.grid.dims(), f.v);
    apply_wirtinger_symbol(f.grid, spec, j, anti);
    return ScalarField(f.grid, fft::inverse(f.grid.dims(), spec));
}

}  // namespace

ScalarField d_holo(const ScalarField& f, int j) { return wirtinger(f, j, false); }
ScalarField d_anti(const ScalarField& f, int j) { return wirtinger(f, j, true); }

ScalarField d_holo_spec(const TorusGrid& g, const CVec& spec, int j) {
    CVec s = spec;
    apply_wirtinger_symbol(g, s, j, false);
    return ScalarField(g, fft::inverse(g.dims(), s));
}

ScalarField d_anti_spec(const TorusGrid& g, const CVec& spec, int j) {
    CVec s = spec;
    apply_wirtinger_symbol(g, s, j, true);
    return ScalarField(g, fft::inverse(g.dims(), s));
}

void apply_holo_symbol(const TorusGrid& g, CVec& spec, int j) {
    if (j < 0 || j >= g.n) throw std::out_of_range("axis index");
    apply_wirtinger_symbol(g, spec, j, false);
}

void apply_anti_symbol(const TorusGrid& g, CVec& spec, int j) {
    if (j < 0 || j >= g.n) throw std::out_of_range("axis index");
    apply_wirtinger_symbol(g, spec, j, true);
}

TensorField d_holo(const TensorField& t, int j) {
    TensorField out(t.grid, t.signature);
    for (std::size_t c = 0; c < t.ncomps(); ++c)
        out.comps[c] = d_holo(ScalarField(t.grid, t.comps[c]), j).v;
    return out;
}

TensorField d_anti(const TensorField& t, int j) {
    TensorField out(t.grid, t.signature);
    for (std::size_t c = 0; c < t.ncomps(); ++c)
        out.comps[c] = d_anti(ScalarField(t.grid, t.comps[c]), j).v;
    return out;
}

Complex integrate(const ScalarField& f) {
    // Kahan-compensated serial sum; deterministic by construction.
    Complex sum(0.0), comp(0.0);
    for (const Complex& x : f.v) {
        Complex y = x - comp;
        Complex t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double vol = 1.0;
    for (double L : f.grid.periods) vol *= L;
    return sum * (vol / static_cast<double>(f.size()));
}

double sup_norm(const ScalarField& f) {
    double m = 0.0;
    for (const Complex& x : f.v) {
        double a = std::abs(x);
        if (a > m) m = a;
    }
    return m;
}

double sup_real(const ScalarField& f) {
    double m = f.v.empty() ? 0.0 : f.v[0].real();
    for (const Complex& x : f.v)
        if (x.real() > m) m = x.real();
    return m;
}

double inf_real(const ScalarField& f) {
    double m = f.v.empty() ? 0.0 : f.v[0].real();
    for (const Complex& x : f.v)
        if (x.real() < m) m = x.real();
    return m;
}

ScalarField mollify(const ScalarField& f, int j) {
    if (j < 1) throw std::invalid_argument("mollification level must be >= 1");
    const TorusGrid& g = f.grid;
    CVec spec = fft::forward(g.dims(), f.v);
    std::vector<long> m(g.real_dim());
    const double inv2j2 = 1.0 / (2.0 * static_cast<double>(j) * j);
    for (std::size_t p = 0; p < spec.size(); ++p) {
        g.unravel(p, m.data());
        long kmax = 0;
        double k2 = 0.0;
        for (int a = 0; a < g.real_dim(); ++a) {
            long k = fft::signed_freq(m[a], g.res);
            kmax = std::max(kmax, std::abs(k));
            k2 += static_cast<double>(k) * k;
        }
        if (kmax > j)
            spec[p] = 0.0;
        else
            spec[p] *= std::exp(-k2 * inv2j2);
    }
    return ScalarField(g, fft::inverse(g.dims(), spec));
}

CVec spectrum(const ScalarField& f) { return fft::forward(f.grid.dims(), f.v); }

ScalarField from_spectrum(const TorusGrid& g, const CVec& spec) {
    return ScalarField(g, fft::inverse(g.dims(), spec));
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    ScalarField r(a.grid, a.v);
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] += b.v[i];
    return r;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    ScalarField r(a.grid, a.v);
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] -= b.v[i];
    return r;
}

ScalarField operator*(const ScalarField& a, const ScalarField& b) {
    ScalarField r(a.grid, a.v);
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] *= b.v[i];
    return r;
}

ScalarField operator*(Complex c, const ScalarField& a) {
    ScalarField r(a.grid, a.v);
    for (auto& x : r.v) x *= c;
    return r;
}

ScalarField operator+(const ScalarField& a, Complex c) {
    ScalarField r(a.grid, a.v);
    for (auto& x : r.v) x += c;
    return r;
}

ScalarField conj(const ScalarField& a) {
    ScalarField r(a.grid, a.v);
    for (auto& x : r.v) x = std::conj(x);
    return r;
}

bool all_finite(const ScalarField& f) {
    for (const Complex& x : f.v)
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    return true;
}

}  // namespace mafl
