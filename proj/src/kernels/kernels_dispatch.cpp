#include "hb/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace hb::kernels {

const Ops* avx2_ops_compiled();  // defined in kernels_avx2.cpp (may return null)

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<const Ops*> g_active{nullptr};

const Ops* pick_default() {
    if (const char* env = std::getenv("HB_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
        if (std::strcmp(env, "avx2") == 0) {
            const Ops* v = avx2_ops();
            if (!v) throw std::runtime_error("HB_SIMD=avx2 requested but AVX2 is unavailable");
            return v;
        }
        // anything else (incl. "auto") falls through to detection
    }
    if (const Ops* v = avx2_ops()) return v;
    return &scalar_ops();
}

}  // namespace

const Ops* avx2_ops() {
    const Ops* compiled = avx2_ops_compiled();
    return (compiled && cpu_has_avx2()) ? compiled : nullptr;
}

const Ops& ops() {
    const Ops* p = g_active.load(std::memory_order_acquire);
    if (!p) {
        p = pick_default();
        g_active.store(p, std::memory_order_release);
    }
    return *p;
}

Isa active_isa() { return &ops() == &scalar_ops() ? Isa::scalar : Isa::avx2; }

void force_isa(Isa isa) {
    if (isa == Isa::scalar) {
        g_active.store(&scalar_ops(), std::memory_order_release);
        return;
    }
    const Ops* v = avx2_ops();
    if (!v) throw std::runtime_error("AVX2 kernels unavailable on this host");
    g_active.store(v, std::memory_order_release);
}

}  // namespace hb::kernels
