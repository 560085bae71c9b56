#pragma once

namespace pfstab {

/// Selects between the OpenMP kernel and its serial reference. Both
/// variants produce bit-identical results; the serial path exists for
/// testing and benchmarking.
enum class Exec { Serial, Parallel };

/// Caps the OpenMP thread count. `n <= 0` restores the default, which is
/// itself capped by the PFSTAB_THREADS environment variable when set.
void set_thread_count(int n);

/// Thread count the parallel kernels will use.
int thread_count();

}  // namespace pfstab
