#pragma once

#include <span>
#include <vector>

namespace flowseries {

double mean(std::span<const double> v);
// Population standard deviation (divides by n).
double pstdev(std::span<const double> v);

// Pearson correlation; 0 when either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Linear resampling onto n uniformly spaced points spanning the input; the
// first and last values are kept exactly.
std::vector<double> resample_linear(std::span<const double> v, std::size_t n);

}  // namespace flowseries
