#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hg {

// Keeps large activation buffers on the heap between steps instead of returning them to the OS.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace hg
