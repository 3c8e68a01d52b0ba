#pragma once

namespace mfg {

/// Number of threads an OpenMP parallel region will currently use.
int max_threads();

/// Caps the OpenMP team size (n >= 1). Results are thread-count invariant by
/// construction; this only affects wall time.
void set_threads(int n);

}  // namespace mfg
