#pragma once

#include <cstdio>
#include <string>

namespace fpk {

/// 17 significant digits: lossless round trip for 64-bit doubles.
inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace fpk
