#include "rtarb/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtarb {

std::size_t quantile_index(std::size_t n, double level) {
	if (n == 0) throw std::invalid_argument("quantile of empty sequence");
	// slack keeps p * (n + 1) that is integral up to rounding from jumping one rank
	const double rank = std::ceil(level * static_cast<double>(n + 1) - 1e-9);
	if (!(rank >= 1.0)) return 0;
	const auto idx = static_cast<std::size_t>(std::min(rank, static_cast<double>(n))) - 1;
	return std::min(idx, n - 1);
}

double quantile_sorted(std::span<const double> sorted, double level) {
	return sorted[quantile_index(sorted.size(), level)];
}

double empirical_quantile(std::span<const double> values, double level) {
	std::vector<double> scratch(values.begin(), values.end());
	return empirical_quantile_inplace(scratch, level);
}

double empirical_quantile_inplace(std::vector<double> &scratch, double level) {
	const auto k = quantile_index(scratch.size(), level);
	std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
	return scratch[k];
}

} // namespace rtarb
