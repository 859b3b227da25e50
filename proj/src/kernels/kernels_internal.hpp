#pragma once

#include "frames/kernels.hpp"

namespace frames::kernels::detail {

#if defined(FRAMES_HAVE_AVX2_KERNELS)
// Defined in avx2.cpp, which is the only translation unit built with -mavx2.
// Callers must check CPU support before invoking any entry.
const KernelSet& avx2_set() noexcept;
#endif

}  // namespace frames::kernels::detail
