#pragma once

#include <cmath>
#include <cstddef>

namespace coserec {

/// ceil(ratio * n) for ratios given in decimal. A small tolerance absorbs
/// binary rounding so that e.g. 0.3 * 10 yields 3, not 4.
inline std::size_t ratio_count(double ratio, std::size_t n) {
  const double x = ratio * static_cast<double>(n);
  const double c = std::ceil(x - 1e-9);
  return c <= 0.0 ? 0 : static_cast<std::size_t>(c);
}

}  // namespace coserec
