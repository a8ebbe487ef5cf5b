#include "wdro/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace wdro::kernels {
namespace {

Isa detect() {
    const char* force = std::getenv("WDRO_FORCE_SCALAR");
    if (force != nullptr && *force != '\0') return Isa::Scalar;
    return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool avx2_supported() {
#if defined(WDRO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa set_isa(Isa isa) {
    if (isa == Isa::Avx2 && !avx2_supported())
        throw std::runtime_error("AVX2 kernels requested but not supported on this CPU");
    return current().exchange(isa);
}

const KernelTable& active() {
#if defined(WDRO_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2_table();
#endif
    return scalar_table();
}

}  // namespace wdro::kernels
