#include <atomic>
#include <cstdlib>
#include <string>

#include "frames/error.hpp"
#include "frames/kernels.hpp"
#include "kernels_internal.hpp"

namespace frames::kernels {

namespace {

std::atomic<const KernelSet*> g_active{nullptr};

const KernelSet& best_available() {
    if (const auto* avx2 = avx2_kernels()) return *avx2;
    return scalar_kernels();
}

const KernelSet& by_name(std::string_view name) {
    if (name == "auto") return best_available();
    if (name == "scalar") return scalar_kernels();
    if (name == "avx2") {
        if (const auto* avx2 = avx2_kernels()) return *avx2;
    }
    throw EnvironmentError("kernel set '" + std::string(name) + "' is not available on this machine");
}

}  // namespace

const KernelSet* avx2_kernels() noexcept {
#if defined(FRAMES_HAVE_AVX2_KERNELS)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (supported) return &detail::avx2_set();
#endif
    return nullptr;
}

std::vector<std::string_view> available() {
    std::vector<std::string_view> names{scalar_kernels().name};
    if (const auto* avx2 = avx2_kernels()) names.push_back(avx2->name);
    return names;
}

const KernelSet& active() {
    const KernelSet* set = g_active.load(std::memory_order_acquire);
    if (set) return *set;
    const char* env = std::getenv("FRAMES_KERNELS");
    const KernelSet& chosen = env && *env ? by_name(env) : best_available();
    const KernelSet* expected = nullptr;
    g_active.compare_exchange_strong(expected, &chosen, std::memory_order_acq_rel);
    return *g_active.load(std::memory_order_acquire);
}

void select(std::string_view name) { g_active.store(&by_name(name), std::memory_order_release); }

}  // namespace frames::kernels
