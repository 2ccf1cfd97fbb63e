#pragma once

#include <span>
#include <vector>

namespace rtarb {

/// Index of the level-p order statistic among n sorted values:
/// ceil(p * (n + 1)) - 1, clamped to [0, n - 1].
std::size_t quantile_index(std::size_t n, double level);

/// Empirical quantile of an ascending sequence using quantile_index.
double quantile_sorted(std::span<const double> sorted, double level);

/// Same rule on unsorted data; works on a copy.
double empirical_quantile(std::span<const double> values, double level);

/// In-place selection variant; reorders `scratch`.
double empirical_quantile_inplace(std::vector<double> &scratch, double level);

} // namespace rtarb
