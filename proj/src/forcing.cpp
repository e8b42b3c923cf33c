#include "mafl/forcing.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace mafl {

namespace {

ScalarField real_part(ScalarField f) {
    for (auto& v : f.v) v = Complex(v.real(), 0.0);
    return f;
}

// Expression tree. Variables are phi and the four real torus coordinates;
// derivative evaluators differentiate the tree symbolically so no
// finite-difference error enters the forcing side.
struct Node;
using NodeP = std::shared_ptr<const Node>;

struct Node {
    enum Kind { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Fun } kind;
    double val = 0.0;     // Num
    int var = -1;         // Var: 0=phi, 1..4 = x1,y1,x2,y2
    std::string fn;       // Fun
    NodeP a, b;
};

NodeP num(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Num;
    n->val = v;
    return n;
}

NodeP var(int v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Var;
    n->var = v;
    return n;
}

NodeP mk(Node::Kind k, NodeP a, NodeP b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodeP fun(std::string name, NodeP a) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Fun;
    n->fn = std::move(name);
    n->a = std::move(a);
    return n;
}

bool is_num(const NodeP& n, double v) { return n->kind == Node::Num && n->val == v; }

// Light simplification keeps repeated symbolic differentiation from blowing
// the tree up with zero branches.
NodeP add(NodeP a, NodeP b) {
    if (is_num(a, 0.0)) return b;
    if (is_num(b, 0.0)) return a;
    if (a->kind == Node::Num && b->kind == Node::Num) return num(a->val + b->val);
    return mk(Node::Add, a, b);
}

NodeP sub(NodeP a, NodeP b) {
    if (is_num(b, 0.0)) return a;
    if (a->kind == Node::Num && b->kind == Node::Num) return num(a->val - b->val);
    return mk(Node::Sub, a, b);
}

NodeP neg(NodeP a) {
    if (a->kind == Node::Num) return num(-a->val);
    return mk(Node::Neg, a);
}

NodeP mul(NodeP a, NodeP b) {
    if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
    if (is_num(a, 1.0)) return b;
    if (is_num(b, 1.0)) return a;
    if (a->kind == Node::Num && b->kind == Node::Num) return num(a->val * b->val);
    return mk(Node::Mul, a, b);
}

NodeP div(NodeP a, NodeP b) {
    if (is_num(a, 0.0)) return num(0.0);
    if (is_num(b, 1.0)) return a;
    if (a->kind == Node::Num && b->kind == Node::Num) return num(a->val / b->val);
    return mk(Node::Div, a, b);
}

NodeP pow_node(NodeP a, NodeP b) {
    if (is_num(b, 1.0)) return a;
    if (is_num(b, 0.0)) return num(1.0);
    return mk(Node::Pow, a, b);
}

struct Parser {
    const std::string& s;
    std::size_t p = 0;

    explicit Parser(const std::string& src) : s(src) {}

    void skip() {
        while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    }
    bool eat(char c) {
        skip();
        if (p < s.size() && s[p] == c) {
            ++p;
            return true;
        }
        return false;
    }

    NodeP parse() {
        NodeP e = expr();
        skip();
        if (p != s.size()) throw std::invalid_argument("forcing expression: trailing input");
        return e;
    }

    NodeP expr() {
        NodeP e = term();
        for (;;) {
            if (eat('+'))
                e = add(e, term());
            else if (eat('-'))
                e = sub(e, term());
            else
                return e;
        }
    }

    NodeP term() {
        NodeP e = unary();
        for (;;) {
            if (eat('*'))
                e = mul(e, unary());
            else if (eat('/'))
                e = div(e, unary());
            else
                return e;
        }
    }

    NodeP unary() {
        if (eat('-')) return neg(unary());
        if (eat('+')) return unary();
        return power();
    }

    NodeP power() {
        NodeP base = primary();
        if (eat('^')) return pow_node(base, unary());
        return base;
    }

    NodeP primary() {
        skip();
        if (p >= s.size()) throw std::invalid_argument("forcing expression: unexpected end");
        char c = s[p];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = std::stod(s.substr(p), &used);
            p += used;
            return num(v);
        }
        if (c == '(') {
            ++p;
            NodeP e = expr();
            if (!eat(')')) throw std::invalid_argument("forcing expression: missing ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t q = p;
            while (q < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[q])) || s[q] == '_'))
                ++q;
            std::string name = s.substr(p, q - p);
            p = q;
            if (name == "phi") return var(0);
            if (name == "x" || name == "x1") return var(1);
            if (name == "y" || name == "y1") return var(2);
            if (name == "x2") return var(3);
            if (name == "y2") return var(4);
            if (name == "pi") return num(M_PI);
            if (eat('(')) {
                NodeP a = expr();
                if (!eat(')')) throw std::invalid_argument("forcing expression: missing ')'");
                if (name == "sin" || name == "cos" || name == "exp" || name == "log" ||
                    name == "tanh" || name == "sqrt")
                    return fun(name, a);
                throw std::invalid_argument("forcing expression: unknown function " + name);
            }
            throw std::invalid_argument("forcing expression: unknown name " + name);
        }
        throw std::invalid_argument(std::string("forcing expression: unexpected '") + c + "'");
    }
};

NodeP diff(const NodeP& n, int v) {
    switch (n->kind) {
        case Node::Num:
            return num(0.0);
        case Node::Var:
            return num(n->var == v ? 1.0 : 0.0);
        case Node::Add:
            return add(diff(n->a, v), diff(n->b, v));
        case Node::Sub:
            return sub(diff(n->a, v), diff(n->b, v));
        case Node::Neg:
            return neg(diff(n->a, v));
        case Node::Mul:
            return add(mul(diff(n->a, v), n->b), mul(n->a, diff(n->b, v)));
        case Node::Div:
            return div(sub(mul(diff(n->a, v), n->b), mul(n->a, diff(n->b, v))),
                       mul(n->b, n->b));
        case Node::Pow: {
            if (n->b->kind == Node::Num) {
                double e = n->b->val;
                return mul(mul(num(e), pow_node(n->a, num(e - 1.0))), diff(n->a, v));
            }
            // a^b = exp(b log a)
            NodeP rewritten = fun("exp", mul(n->b, fun("log", n->a)));
            return diff(rewritten, v);
        }
        case Node::Fun: {
            NodeP da = diff(n->a, v);
            if (is_num(da, 0.0)) return num(0.0);
            if (n->fn == "sin") return mul(fun("cos", n->a), da);
            if (n->fn == "cos") return neg(mul(fun("sin", n->a), da));
            if (n->fn == "exp") return mul(fun("exp", n->a), da);
            if (n->fn == "log") return div(da, n->a);
            if (n->fn == "tanh") {
                NodeP t = fun("tanh", n->a);
                return mul(sub(num(1.0), mul(t, t)), da);
            }
            if (n->fn == "sqrt") return div(da, mul(num(2.0), fun("sqrt", n->a)));
            throw std::logic_error("forcing expression: bad function");
        }
    }
    throw std::logic_error("forcing expression: bad node");
}

double eval(const NodeP& n, double phi, const double* xy) {
    switch (n->kind) {
        case Node::Num:
            return n->val;
        case Node::Var:
            return n->var == 0 ? phi : xy[n->var - 1];
        case Node::Add:
            return eval(n->a, phi, xy) + eval(n->b, phi, xy);
        case Node::Sub:
            return eval(n->a, phi, xy) - eval(n->b, phi, xy);
        case Node::Neg:
            return -eval(n->a, phi, xy);
        case Node::Mul:
            return eval(n->a, phi, xy) * eval(n->b, phi, xy);
        case Node::Div:
            return eval(n->a, phi, xy) / eval(n->b, phi, xy);
        case Node::Pow:
            return std::pow(eval(n->a, phi, xy), eval(n->b, phi, xy));
        case Node::Fun: {
            double a = eval(n->a, phi, xy);
            if (n->fn == "sin") return std::sin(a);
            if (n->fn == "cos") return std::cos(a);
            if (n->fn == "exp") return std::exp(a);
            if (n->fn == "log") return std::log(a);
            if (n->fn == "tanh") return std::tanh(a);
            if (n->fn == "sqrt") return std::sqrt(a);
            throw std::logic_error("forcing expression: bad function");
        }
    }
    throw std::logic_error("forcing expression: bad node");
}

ScalarField eval_field(const NodeP& tree, const ScalarField& phi) {
    const TorusGrid& g = phi.grid;
    ScalarField out(g);
    std::vector<long> m(g.real_dim());
    double xy[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t p = 0; p < out.size(); ++p) {
        g.unravel(p, m.data());
        for (int a = 0; a < g.real_dim(); ++a) xy[a] = g.coord(a, m[a]);
        out[p] = eval(tree, phi[p].real(), xy);
    }
    return out;
}

}  // namespace

ForcingSpec forcing_zero() {
    ForcingSpec f;
    f.kind = "zero";
    auto zero = [](const ScalarField& phi) { return ScalarField(phi.grid); };
    f.F = zero;
    f.Fp = zero;
    f.Fpp = zero;
    f.Fz = [](const ScalarField& phi, int) { return ScalarField(phi.grid); };
    f.Fpz = [](const ScalarField& phi, int) { return ScalarField(phi.grid); };
    f.Fzz = [](const ScalarField& phi, int, int) { return ScalarField(phi.grid); };
    return f;
}

ForcingSpec forcing_linear(double lambda, const ScalarField& h) {
    ForcingSpec f;
    f.kind = "linear";
    auto hspec = std::make_shared<CVec>(spectrum(h));
    auto hv = std::make_shared<ScalarField>(real_part(h));
    f.F = [lambda, hv](const ScalarField& phi) {
        ScalarField out(phi.grid);
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = lambda * phi[p].real() - hv->v[p].real();
        return out;
    };
    f.Fp = [lambda](const ScalarField& phi) {
        ScalarField out(phi.grid);
        for (auto& v : out.v) v = lambda;
        return out;
    };
    f.Fpp = [](const ScalarField& phi) { return ScalarField(phi.grid); };
    f.Fz = [hspec](const ScalarField& phi, int i) {
        ScalarField d = d_holo_spec(phi.grid, *hspec, i);
        for (auto& v : d.v) v = -v;
        return d;
    };
    f.Fpz = [](const ScalarField& phi, int) { return ScalarField(phi.grid); };
    f.Fzz = [hspec](const ScalarField& phi, int i, int j) {
        CVec s = *hspec;
        apply_holo_symbol(phi.grid, s, i);
        apply_anti_symbol(phi.grid, s, j);
        ScalarField d = from_spectrum(phi.grid, s);
        for (auto& v : d.v) v = -v;
        return d;
    };
    return f;
}

ForcingSpec forcing_expression(const std::string& expr) {
    Parser parser(expr);
    NodeP tree = parser.parse();

    // Real-coordinate partials; Wirtinger combinations are assembled below.
    // Variable slots: 0=phi, 1..4 = x1,y1,x2,y2.
    auto dphi = diff(tree, 0);
    auto dphi2 = diff(dphi, 0);
    std::array<NodeP, 4> dx, dpx;
    std::array<std::array<NodeP, 4>, 4> dxx;
    for (int a = 0; a < 4; ++a) {
        dx[a] = diff(tree, 1 + a);
        dpx[a] = diff(dx[a], 0);
        for (int b = 0; b < 4; ++b) dxx[a][b] = diff(dx[a], 1 + b);
    }

    ForcingSpec f;
    f.kind = "expression";
    f.F = [tree](const ScalarField& phi) { return eval_field(tree, phi); };
    f.Fp = [dphi](const ScalarField& phi) { return eval_field(dphi, phi); };
    f.Fpp = [dphi2](const ScalarField& phi) { return eval_field(dphi2, phi); };
    // d/dz^i = (d/dx_i - i d/dy_i)/2 on axes (2i, 2i+1).
    f.Fz = [dx](const ScalarField& phi, int i) {
        ScalarField rx = eval_field(dx[2 * i], phi);
        ScalarField ry = eval_field(dx[2 * i + 1], phi);
        ScalarField out(phi.grid);
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = 0.5 * Complex(rx[p].real(), -ry[p].real());
        return out;
    };
    f.Fpz = [dpx](const ScalarField& phi, int i) {
        ScalarField rx = eval_field(dpx[2 * i], phi);
        ScalarField ry = eval_field(dpx[2 * i + 1], phi);
        ScalarField out(phi.grid);
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = 0.5 * Complex(rx[p].real(), -ry[p].real());
        return out;
    };
    // d2/(dz^i dzbar^j) = (dxx + dyy + i(dxy - dyx))/4 on the paired axes.
    f.Fzz = [dxx](const ScalarField& phi, int i, int j) {
        ScalarField axx = eval_field(dxx[2 * i][2 * j], phi);
        ScalarField ayy = eval_field(dxx[2 * i + 1][2 * j + 1], phi);
        ScalarField axy = eval_field(dxx[2 * i][2 * j + 1], phi);
        ScalarField ayx = eval_field(dxx[2 * i + 1][2 * j], phi);
        ScalarField out(phi.grid);
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = 0.25 * Complex(axx[p].real() + ayy[p].real(),
                                    axy[p].real() - ayx[p].real());
        return out;
    };
    return f;
}

}  // namespace mafl
