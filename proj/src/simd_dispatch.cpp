// Runtime kernel selection: pick the best instruction set the CPU
// supports, let MCF_KERNELS force a specific one for testing.

#include "mcf/simd.hpp"

#include <cstdlib>
#include <mutex>

namespace mcf::simd {

const Kernels* avx2_kernels_impl();
const Kernels* neon_kernels_impl();

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Selection {
    const Kernels* table;
    Isa isa;
};

Selection select() {
    const Kernels* avx2 = cpu_has_avx2() ? avx2_kernels_impl() : nullptr;
    const Kernels* neon = neon_kernels_impl();

    if (const char* forced = std::getenv("MCF_KERNELS")) {
        std::string f(forced);
        if (f == "avx2" && avx2) return {avx2, Isa::avx2};
        if (f == "neon" && neon) return {neon, Isa::neon};
        return {&scalar_kernels(), Isa::scalar};
    }
    if (avx2) return {avx2, Isa::avx2};
    if (neon) return {neon, Isa::neon};
    return {&scalar_kernels(), Isa::scalar};
}

const Selection& selection() {
    static Selection s = select();
    return s;
}

}  // namespace

const Kernels* kernels_for(Isa isa) {
    switch (isa) {
        case Isa::scalar: return &scalar_kernels();
        case Isa::avx2: return cpu_has_avx2() ? avx2_kernels_impl() : nullptr;
        case Isa::neon: return neon_kernels_impl();
    }
    return nullptr;
}

const Kernels& active() { return *selection().table; }
Isa active_isa() { return selection().isa; }

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

}  // namespace mcf::simd
