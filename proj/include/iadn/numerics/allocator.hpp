#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace iadn {

/// Keeps large activation and gradient buffers on the heap between passes instead of
/// returning them to the OS, which avoids repeated page faults on every iteration.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace iadn
