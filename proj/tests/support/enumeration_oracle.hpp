#pragma once

#include "rtarb/arbitrage.hpp"

#include <limits>
#include <span>
#include <vector>

namespace rtarb::testing {

/// Plain depth-first enumeration of every action path on the L-level grid.
/// Returns the best objective only.
inline double enumerate_best(std::span<const double> prices, const StorageParams &p, std::size_t levels) {
	std::vector<double> charge{0.0}, discharge{0.0};
	for (std::size_t k = 1; k < levels; ++k) {
		const double q = p.power * static_cast<double>(k) / static_cast<double>(levels - 1);
		charge.push_back(q);
		discharge.push_back(0.0);
		charge.push_back(0.0);
		discharge.push_back(q);
	}
	double best = -std::numeric_limits<double>::infinity();
	auto go = [&](auto &&self, std::size_t t, double soc, double value) -> void {
		if (t == prices.size()) {
			if (value > best) best = value;
			return;
		}
		for (std::size_t i = 0; i < charge.size(); ++i) {
			const double b = charge[i], d = discharge[i];
			if (d > 0.0 && prices[t] < 0.0) continue;
			const double next = soc - d / p.efficiency + b * p.efficiency;
			if (next < -1e-9 || next > p.capacity + 1e-9) continue;
			self(self, t + 1, next, value + prices[t] * (d - b) - p.discharge_cost * d);
		}
	};
	go(go, 0, p.initial_soc, 0.0);
	return best;
}

} // namespace rtarb::testing
