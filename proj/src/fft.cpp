#include "mafl/fft.hpp"

#include <fftw3.h>

#include <cstdlib>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mafl {

namespace {

// Large work buffers cycle rapidly through the spectral code; recycling them
// keeps the pages mapped and avoids repeated soft page-fault storms.
constexpr std::size_t kPoolMin = std::size_t(1) << 20;
constexpr std::size_t kPoolCap = std::size_t(512) << 20;

std::mutex& pool_mutex() {
    static std::mutex mu;
    return mu;
}

std::multimap<std::size_t, void*>& pool() {
    static std::multimap<std::size_t, void*> p;
    return p;
}

std::size_t pool_bytes = 0;

}  // namespace

void* pool_alloc(std::size_t bytes) {
    bytes = ((bytes + 63) / 64) * 64;
    if (bytes >= kPoolMin) {
        std::lock_guard<std::mutex> lock(pool_mutex());
        auto it = pool().find(bytes);
        if (it != pool().end()) {
            void* p = it->second;
            pool_bytes -= it->first;
            pool().erase(it);
            return p;
        }
    }
    void* p = std::aligned_alloc(64, bytes);
    if (!p) throw std::bad_alloc{};
    return p;
}

void pool_free(void* p, std::size_t bytes) noexcept {
    bytes = ((bytes + 63) / 64) * 64;
    if (bytes >= kPoolMin) {
        std::lock_guard<std::mutex> lock(pool_mutex());
        if (pool_bytes + bytes <= kPoolCap) {
            pool().emplace(bytes, p);
            pool_bytes += bytes;
            return;
        }
    }
    std::free(p);
}

template <class T>
T* AlignedAlloc<T>::allocate(std::size_t n) {
    return static_cast<T*>(pool_alloc(n * sizeof(T)));
}

template <class T>
void AlignedAlloc<T>::deallocate(T* p, std::size_t n) noexcept {
    pool_free(p, n * sizeof(T));
}

template struct AlignedAlloc<Complex>;

namespace fft {
namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    std::size_t n = 0;
};

// One cached plan pair per array shape. Planning with FFTW_MEASURE is slow
// for the large 4d shapes, so plans live for the whole process.
PlanPair& plan_for(const std::vector<int>& dims) {
    static std::map<std::vector<int>, PlanPair> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(dims);
    if (it != cache.end()) return it->second;

    PlanPair p;
    p.n = 1;
    for (int d : dims) p.n *= static_cast<std::size_t>(d);
    p.in = fftw_alloc_complex(p.n);
    p.out = fftw_alloc_complex(p.n);
    unsigned flags = p.n <= (1u << 22) ? FFTW_MEASURE : FFTW_ESTIMATE;
    p.fwd = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), p.in, p.out,
                          FFTW_FORWARD, flags);
    p.bwd = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), p.in, p.out,
                          FFTW_BACKWARD, flags);
    if (!p.fwd || !p.bwd) throw std::runtime_error("fftw planning failed");
    // The scratch arrays are only needed while planning; execution always
    // supplies its own (equally aligned) buffers.
    fftw_free(p.in);
    fftw_free(p.out);
    p.in = nullptr;
    p.out = nullptr;
    return cache.emplace(dims, p).first->second;
}

CVec run(const std::vector<int>& dims, const CVec& x, bool forward_dir) {
    PlanPair& p = plan_for(dims);
    if (x.size() != p.n) throw std::invalid_argument("fft: size/shape mismatch");
    CVec y(p.n);
    auto* in = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(x.data()));
    auto* out = reinterpret_cast<fftw_complex*>(y.data());
    fftw_execute_dft(forward_dir ? p.fwd : p.bwd, in, out);
    if (!forward_dir) {
        const double scale = 1.0 / static_cast<double>(p.n);
        for (auto& v : y) v *= scale;
    }
    return y;
}

}  // namespace

CVec forward(const std::vector<int>& dims, const CVec& vals) { return run(dims, vals, true); }
CVec inverse(const std::vector<int>& dims, const CVec& spec) { return run(dims, spec, false); }

}  // namespace fft
}  // namespace mafl
