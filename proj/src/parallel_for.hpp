#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#include "pfstab/exec.hpp"

namespace pfstab::detail {

/// Runs body(i) for i in [0, n), either serially or with OpenMP. Each index
/// must write only its own output slot. If any iteration throws, the
/// exception of the lowest failing index is rethrown, so error reports do
/// not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first;
    std::size_t first_index = std::numeric_limits<std::size_t>::max();
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical(pfstab_parallel_for_error)
            {
                if (i < first_index) {
                    first_index = i;
                    first = std::current_exception();
                }
            }
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace pfstab::detail
