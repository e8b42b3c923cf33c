#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace mafl {

// 64-byte aligned allocator so FFTW SIMD kernels can run on field storage.
template <class T>
struct AlignedAlloc {
    using value_type = T;
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) {}
    T* allocate(std::size_t n);
    void deallocate(T* p, std::size_t) noexcept;
    bool operator==(const AlignedAlloc&) const { return true; }
};

using Complex = std::complex<double>;
using CVec = std::vector<Complex, AlignedAlloc<Complex>>;

namespace fft {

// Unnormalized forward DFT over a multi-dimensional periodic array
// (row-major, dims[0] slowest). Plans are cached per shape.
CVec forward(const std::vector<int>& dims, const CVec& vals);

// Inverse DFT, normalized by 1/N so inverse(forward(x)) == x to roundoff.
CVec inverse(const std::vector<int>& dims, const CVec& spec);

// Signed integer frequency for bin m of an axis with res points.
// The Nyquist bin of an even axis maps to +res/2; odd-derivative symbols
// must zero it explicitly to keep real fields real.
inline long signed_freq(long m, long res) { return m <= res / 2 ? m : m - res; }

}  // namespace fft
}  // namespace mafl
