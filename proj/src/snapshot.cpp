#include "mafl/snapshot.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mafl {
namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    static_assert(sizeof(double) == 8);
    // Host is little-endian; bytes go out as stored.
    os.write(reinterpret_cast<const char*>(&v), 8);
}

double get_f64(std::istream& is) {
    double v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_body(std::ostream& os, const TensorField& t) {
    os.write("MAFL", 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(t.grid.n));
    put_u32(os, static_cast<std::uint32_t>(t.grid.res));
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (IndexKind k : t.signature) {
        char c = static_cast<char>(k);
        os.write(&c, 1);
    }
    for (double L : t.grid.periods) put_f64(os, L);
    const std::size_t np = t.grid.npoints();
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t c = 0; c < t.ncomps(); ++c) {
            put_f64(os, t.comps[c][p].real());
            put_f64(os, t.comps[c][p].imag());
        }
}

}  // namespace

void save_snapshot(const std::string& path, const TensorField& t) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        write_body(os, t);
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed for " + path);
}

void save_snapshot(const std::string& path, const ScalarField& f) {
    TensorField t(f.grid, {});
    t.comps.assign(1, f.v);
    save_snapshot(path, t);
}

TensorField load_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "MAFL") throw std::runtime_error("bad snapshot magic");
    std::uint32_t version = get_u32(is);
    if (version != kVersion) throw std::runtime_error("unsupported snapshot version");
    int n = static_cast<int>(get_u32(is));
    int res = static_cast<int>(get_u32(is));
    int rank = static_cast<int>(get_u32(is));
    std::vector<IndexKind> sig(rank);
    for (int i = 0; i < rank; ++i) {
        char c;
        is.read(&c, 1);
        if (c < 0 || c > 3) throw std::runtime_error("bad signature code");
        sig[i] = static_cast<IndexKind>(c);
    }
    std::vector<double> periods(2 * n);
    for (double& L : periods) L = get_f64(is);
    TorusGrid g = make_grid(n, periods, res);
    TensorField t(g, sig);
    const std::size_t np = g.npoints();
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t c = 0; c < t.comps.size(); ++c) {
            double re = get_f64(is);
            double im = get_f64(is);
            t.comps[c][p] = Complex(re, im);
        }
    if (!is) throw std::runtime_error("truncated snapshot " + path);
    return t;
}

ScalarField load_scalar_snapshot(const std::string& path) {
    TensorField t = load_snapshot(path);
    if (t.rank() != 0) throw std::runtime_error("snapshot is not scalar");
    return ScalarField(t.grid, t.comps[0]);
}

}  // namespace mafl
