#include "pfstab/exec.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pfstab {

namespace {

int env_cap() {
    const char* raw = std::getenv("PFSTAB_THREADS");
    if (raw == nullptr) return 0;
    try {
        return std::max(0, std::stoi(raw));
    } catch (...) {
        return 0;
    }
}

}  // namespace

void set_thread_count(int n) {
#ifdef _OPENMP
    int requested = n > 0 ? n : omp_get_num_procs();
    if (int cap = env_cap(); cap > 0) requested = std::min(requested, cap);
    omp_set_num_threads(std::max(1, requested));
#else
    (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace pfstab
