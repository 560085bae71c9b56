#pragma once

#include <cstdio>
#include <string>

namespace pfstab {

/// Round-trip decimal form of a double (17 significant digits).
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_hex64(unsigned long long v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", v);
    return buf;
}

}  // namespace pfstab
