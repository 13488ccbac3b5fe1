#pragma once

#include <limits>
#include <stdexcept>

namespace covrl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Density-ratio conventions: x/0 = +inf for x > 0, and 0/0 = 1.
inline double ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? kInf : 1.0;
}

// Clipping operator: min(w, gamma). Maps +inf to gamma.
inline double clip(double value, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("clip: gamma must be > 0");
    return value < gamma ? value : gamma;
}

// Reciprocal under the same conventions (used by the mixture operator).
inline double ext_reciprocal(double v) {
    if (v == 0.0) return kInf;
    if (v == kInf) return 0.0;
    return 1.0 / v;
}

} // namespace covrl
