#include "rtarb/arbitrage.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rtarb {

namespace {

constexpr double kSocTolerance = 1e-10;    // MWh, feasibility slack inside the solvers
constexpr double kCheckTolerance = 1e-9;   // MWh, validate_schedule
constexpr double kSnap = 1e-9;             // grid units
constexpr double kTieScale = 1e-10;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double snap(double x) {
	const double r = std::round(x);
	return std::abs(x - r) < kSnap ? r : x;
}

// Candidate actions in tie-break order: idle, then by magnitude with charge first.
struct Action {
	double discharge;
	double charge;
	double soc_delta;
};

std::vector<Action> action_list(const StorageParams &p, std::size_t levels) {
	const double delta = p.power / static_cast<double>(levels - 1);
	std::vector<Action> out;
	out.reserve(2 * levels - 1);
	out.push_back({0.0, 0.0, 0.0});
	for (std::size_t m = 1; m < levels; ++m) {
		const double q = delta * static_cast<double>(m);
		out.push_back({0.0, q, q * p.efficiency});
		out.push_back({q, 0.0, -q / p.efficiency});
	}
	return out;
}

double step_reward(const Action &a, double price, double cost) {
	return price * (a.discharge - a.charge) - cost * a.discharge;
}

// Applies an action at exact SoC; returns false when it leaves [0, E].
bool apply(const Action &a, double soc, double capacity, double &next) {
	next = soc + a.soc_delta;
	if (next < -kSocTolerance || next > capacity + kSocTolerance) return false;
	next = std::clamp(next, 0.0, capacity);
	return true;
}

double problem_scale(std::span<const double> prices, const StorageParams &p) {
	double m = 0.0;
	for (double x : prices) m = std::max(m, std::abs(x));
	return p.power * (m + p.discharge_cost);
}

void check_prices(std::span<const double> prices) {
	if (prices.empty()) throw std::invalid_argument("empty price scenario");
	for (double x : prices) {
		if (!std::isfinite(x)) throw std::invalid_argument("non-finite price in scenario");
	}
}

Schedule make_schedule(std::size_t T) {
	Schedule s;
	s.discharge.assign(T, 0.0);
	s.charge.assign(T, 0.0);
	s.soc.assign(T, 0.0);
	return s;
}

} // namespace

void StorageParams::validate() const {
	if (!(power > 0.0) || !std::isfinite(power)) throw ConfigError("storage power must be > 0");
	if (!(capacity > 0.0) || !std::isfinite(capacity)) throw ConfigError("storage capacity must be > 0");
	if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("storage efficiency must lie in (0, 1]");
	if (!(discharge_cost >= 0.0) || !std::isfinite(discharge_cost)) throw ConfigError("discharge cost must be >= 0");
	if (!(initial_soc >= 0.0 && initial_soc <= capacity)) {
		throw ConfigError("initial SoC must lie in [0, capacity]");
	}
}

void SolverConfig::validate() const {
	if (soc_grid_points < 2) throw ConfigError("soc_grid_points must be >= 2");
	if (action_levels < 2) throw ConfigError("action_levels must be >= 2");
}

double schedule_objective(const Schedule &s, std::span<const double> prices, double discharge_cost) {
	double total = 0.0;
	for (std::size_t t = 0; t < s.size(); ++t) {
		total += prices[t] * (s.discharge[t] - s.charge[t]) - discharge_cost * s.discharge[t];
	}
	return total;
}

ArbitrageSolver::ArbitrageSolver(const StorageParams &params, const SolverConfig &cfg) : params_(params), cfg_(cfg) {
	params_.validate();
	cfg_.validate();
	delta_ = cfg_.action_step(params_);
	spacing_ = params_.capacity / static_cast<double>(cfg_.soc_grid_points - 1);
	const auto G = static_cast<std::ptrdiff_t>(cfg_.soc_grid_points);
	for (std::size_t m = 1; m < cfg_.action_levels; ++m) {
		const double energy = delta_ * static_cast<double>(m);

		Move c{};
		c.energy = energy;
		c.soc_delta = energy * params_.efficiency;
		const double up = snap(c.soc_delta / spacing_);
		c.base = static_cast<std::ptrdiff_t>(std::floor(up));
		c.weight = up - static_cast<double>(c.base);
		const double last = std::floor(static_cast<double>(G - 1) - up + kSnap);
		c.feasible_anywhere = last >= 0.0;
		c.g_first = 0;
		c.g_last = c.feasible_anywhere ? static_cast<std::size_t>(last) : 0;
		charges_.push_back(c);

		Move d{};
		d.energy = energy;
		d.soc_delta = -energy / params_.efficiency;
		const double down = snap(energy / params_.efficiency / spacing_);
		const auto ceil_down = static_cast<std::ptrdiff_t>(std::ceil(down));
		d.base = -ceil_down;
		d.weight = static_cast<double>(ceil_down) - down;
		d.feasible_anywhere = ceil_down <= G - 1;
		d.g_first = static_cast<std::size_t>(ceil_down);
		d.g_last = static_cast<std::size_t>(G - 1);
		discharges_.push_back(d);
	}
	for (const Action &a : action_list(params_, cfg_.action_levels)) {
		actions_.push_back({a.discharge, a.charge, a.soc_delta, a.soc_delta / spacing_});
	}
}

bool ArbitrageSolver::uses_exact_states(std::size_t horizon) const {
	if (horizon <= 1) return true;
	const double k = static_cast<double>(horizon - 1) * static_cast<double>(cfg_.action_levels - 1);
	const double bound = (k + 1.0) * (k + 2.0) / 2.0;
	return bound <= static_cast<double>(cfg_.exact_state_limit);
}

double ArbitrageSolver::tie_tolerance(std::span<const double> prices) const {
	return kTieScale * problem_scale(prices, params_);
}

Schedule ArbitrageSolver::solve(std::span<const double> prices, double initial_soc) const {
	return std::move(solve_many(prices, std::span<const double>(&initial_soc, 1)).front());
}

std::vector<Schedule> ArbitrageSolver::solve_many(std::span<const double> prices,
                                                  std::span<const double> initial_socs) const {
	check_prices(prices);
	std::vector<double> starts;
	starts.reserve(initial_socs.size());
	for (double e : initial_socs) {
		if (!(e >= -kSocTolerance && e <= params_.capacity + kSocTolerance)) {
			throw std::invalid_argument("initial SoC outside [0, capacity]");
		}
		starts.push_back(std::clamp(e, 0.0, params_.capacity));
	}
	std::vector<Schedule> out;
	out.reserve(starts.size());
	if (uses_exact_states(prices.size())) {
		for (double e0 : starts) out.push_back(solve_exact(prices, e0));
	} else {
		thread_local std::vector<double> value;
		backward_grid(prices, value);
		for (double e0 : starts) out.push_back(forward_grid(prices, value, e0));
	}
	for (Schedule &s : out) s.objective = schedule_objective(s, prices, params_.discharge_cost);
	return out;
}

namespace {

// cur[g] = max(cur[g], reward + interpolated src) over g in [first, last].
__attribute__((target_clones("avx2", "default")))
void relax(double *__restrict cur, const double *__restrict src, std::size_t first, std::size_t last, double reward,
           double w) {
	for (std::size_t g = first; g <= last; ++g) {
		const double v = reward + src[g] + w * (src[g + 1] - src[g]);
		cur[g] = v > cur[g] ? v : cur[g];
	}
}

} // namespace

void ArbitrageSolver::backward_grid(std::span<const double> prices, std::vector<double> &value) const {
	const std::size_t T = prices.size();
	const std::size_t G = cfg_.soc_grid_points;
	const std::size_t stride = G + 1; // one padding node past the top of the grid
	const double cost = params_.discharge_cost;

	// value[t * stride + g] = V_t(g * spacing) for t in [1, T]; V_T = 0.
	value.assign((T + 1) * stride, 0.0);
	for (std::size_t t = T - 1; t >= 1; --t) {
		const double *next = value.data() + (t + 1) * stride;
		double *cur = value.data() + t * stride;
		const double price = prices[t];
		if (t == T - 1) {
			// Zero terminal value: only the largest feasible move can beat idle.
			if (price < 0.0) {
				for (const Move &m : charges_) {
					if (m.feasible_anywhere) std::fill(cur + m.g_first, cur + m.g_last + 1, -price * m.energy);
				}
			} else if (price > cost) {
				for (const Move &m : discharges_) {
					if (m.feasible_anywhere) std::fill(cur + m.g_first, cur + m.g_last + 1, (price - cost) * m.energy);
				}
			}
			cur[G] = cur[G - 1];
			continue;
		}
		std::copy(next, next + G, cur);
		for (const Move &m : charges_) {
			if (m.feasible_anywhere) relax(cur, next + m.base, m.g_first, m.g_last, -price * m.energy, m.weight);
		}
		if (price >= 0.0) {
			for (const Move &m : discharges_) {
				if (m.feasible_anywhere) relax(cur, next + m.base, m.g_first, m.g_last, (price - cost) * m.energy, m.weight);
			}
		}
		cur[G] = cur[G - 1];
	}
}

Schedule ArbitrageSolver::forward_grid(std::span<const double> prices, const std::vector<double> &value,
                                       double e0) const {
	const std::size_t T = prices.size();
	const std::size_t G = cfg_.soc_grid_points;
	const std::size_t stride = G + 1;
	const double cost = params_.discharge_cost;
	const double top = static_cast<double>(G - 1);
	const double tol = tie_tolerance(prices);

	Schedule s = make_schedule(T);
	double soc = e0;
	for (std::size_t t = 0; t < T; ++t) {
		const double price = prices[t];
		const double *v = value.data() + (t + 1) * stride;
		const double pos0 = soc / spacing_;
		double best = kNegInf;
		const StepAction *chosen = &actions_.front();
		double chosen_next = soc;
		for (const StepAction &a : actions_) {
			if (a.discharge > 0.0 && price < 0.0) continue;
			const double next = soc + a.soc_delta;
			if (next < -kSocTolerance || next > params_.capacity + kSocTolerance) continue;
			const double pos = std::clamp(pos0 + a.shift, 0.0, top);
			const auto i = static_cast<std::size_t>(pos);
			const double w = pos - static_cast<double>(i);
			const double future = v[i] + w * (v[i + 1] - v[i]);
			const double total = price * (a.discharge - a.charge) - cost * a.discharge + future;
			if (total > best + tol) {
				best = total;
				chosen = &a;
				chosen_next = next;
			}
		}
		chosen_next = std::clamp(chosen_next, 0.0, params_.capacity);
		s.discharge[t] = chosen->discharge;
		s.charge[t] = chosen->charge;
		s.soc[t] = chosen_next;
		soc = chosen_next;
	}
	return s;
}

Schedule ArbitrageSolver::solve_exact(std::span<const double> prices, double e0) const {
	const std::size_t T = prices.size();
	const double cost = params_.discharge_cost;
	const auto actions = action_list(params_, cfg_.action_levels);
	constexpr double kMerge = 1e-12;

	auto allowed = [&](const Action &a, std::size_t t) { return !(a.discharge > 0.0 && prices[t] < 0.0); };

	// states[t]: sorted distinct SoC values reachable before interval t
	std::vector<std::vector<double>> states(T);
	states[0] = {e0};
	for (std::size_t t = 0; t + 1 < T; ++t) {
		std::vector<double> next_states;
		for (double soc : states[t]) {
			for (const Action &a : actions) {
				double next = 0.0;
				if (allowed(a, t) && apply(a, soc, params_.capacity, next)) next_states.push_back(next);
			}
		}
		std::sort(next_states.begin(), next_states.end());
		std::vector<double> merged;
		for (double x : next_states) {
			if (merged.empty() || x - merged.back() > kMerge) merged.push_back(x);
		}
		states[t + 1] = std::move(merged);
	}

	auto lookup = [&](std::size_t t, double soc) {
		const auto &set = states[t];
		auto it = std::lower_bound(set.begin(), set.end(), soc - 2 * kMerge);
		if (it == set.end() || std::abs(*it - soc) > 2 * kMerge) {
			throw std::logic_error("reachable-state lookup failed");
		}
		return static_cast<std::size_t>(it - set.begin());
	};

	std::vector<std::vector<double>> value(T + 1);
	value[T] = {};
	for (std::size_t t = T; t-- > 0;) {
		value[t].assign(states[t].size(), kNegInf);
		for (std::size_t i = 0; i < states[t].size(); ++i) {
			for (const Action &a : actions) {
				double next = 0.0;
				if (!allowed(a, t) || !apply(a, states[t][i], params_.capacity, next)) continue;
				const double future = t + 1 < T ? value[t + 1][lookup(t + 1, next)] : 0.0;
				value[t][i] = std::max(value[t][i], step_reward(a, prices[t], cost) + future);
			}
		}
	}

	const double tol = tie_tolerance(prices);
	Schedule s = make_schedule(T);
	double soc = e0;
	for (std::size_t t = 0; t < T; ++t) {
		double best = kNegInf;
		const Action *chosen = &actions.front();
		double chosen_next = soc;
		for (const Action &a : actions) {
			double next = 0.0;
			if (!allowed(a, t) || !apply(a, soc, params_.capacity, next)) continue;
			const double future = t + 1 < T ? value[t + 1][lookup(t + 1, next)] : 0.0;
			const double v = step_reward(a, prices[t], cost) + future;
			if (v > best + tol) {
				best = v;
				chosen = &a;
				chosen_next = next;
			}
		}
		s.discharge[t] = chosen->discharge;
		s.charge[t] = chosen->charge;
		s.soc[t] = chosen_next;
		soc = chosen_next;
	}
	return s;
}

Schedule optimize_schedule(std::span<const double> prices, const StorageParams &params, const SolverConfig &cfg) {
	return ArbitrageSolver(params, cfg).solve(prices);
}

Schedule brute_force_oracle(std::span<const double> prices, const StorageParams &params, std::size_t action_levels) {
	params.validate();
	check_prices(prices);
	if (prices.size() > 6 || action_levels > 11 || action_levels < 2) {
		throw std::invalid_argument("brute_force_oracle: instance too large (T <= 6, 2 <= levels <= 11)");
	}
	const std::size_t T = prices.size();
	const auto actions = action_list(params, action_levels);
	const double tol = kTieScale * problem_scale(prices, params);

	std::vector<std::size_t> path(T), best_path(T);
	double best = kNegInf, best_p = 0.0, best_b = 0.0;
	bool found = false;

	auto recurse = [&](auto &&self, std::size_t t, double soc, double obj, double sum_p, double sum_b) -> void {
		if (t == T) {
			const bool better = obj > best + tol;
			const bool tie_smaller = std::abs(obj - best) <= tol && (sum_p < best_p || (sum_p == best_p && sum_b < best_b));
			if (!found || better || tie_smaller) {
				found = true;
				best = obj;
				best_p = sum_p;
				best_b = sum_b;
				best_path = path;
			}
			return;
		}
		for (std::size_t k = 0; k < actions.size(); ++k) {
			const Action &a = actions[k];
			if (a.discharge > 0.0 && prices[t] < 0.0) continue;
			double next = 0.0;
			if (!apply(a, soc, params.capacity, next)) continue;
			path[t] = k;
			self(self, t + 1, next, obj + step_reward(a, prices[t], params.discharge_cost), sum_p + a.discharge,
			     sum_b + a.charge);
		}
	};
	recurse(recurse, 0, params.initial_soc, 0.0, 0.0, 0.0);

	Schedule s = make_schedule(T);
	double soc = params.initial_soc;
	for (std::size_t t = 0; t < T; ++t) {
		const Action &a = actions[best_path[t]];
		double next = 0.0;
		apply(a, soc, params.capacity, next);
		s.discharge[t] = a.discharge;
		s.charge[t] = a.charge;
		s.soc[t] = next;
		soc = next;
	}
	s.objective = schedule_objective(s, prices, params.discharge_cost);
	return s;
}

ProfitBreakdown evaluate_profit(const Schedule &schedule, std::span<const double> realized, const StorageParams &params) {
	if (schedule.size() != realized.size() || schedule.charge.size() != realized.size()) {
		throw std::invalid_argument("evaluate_profit: length mismatch");
	}
	ProfitBreakdown out;
	for (std::size_t t = 0; t < realized.size(); ++t) {
		out.revenue += realized[t] * schedule.discharge[t];
		out.charge_cost += realized[t] * schedule.charge[t];
		out.discharge_cost += params.discharge_cost * schedule.discharge[t];
	}
	out.net = out.revenue - out.charge_cost - out.discharge_cost;
	return out;
}

const char *to_string(ViolationKind kind) noexcept {
	switch (kind) {
	case ViolationKind::LengthMismatch: return "LengthMismatch";
	case ViolationKind::NegativeQuantity: return "NegativeQuantity";
	case ViolationKind::PowerLimit: return "PowerLimit";
	case ViolationKind::SocDynamics: return "SocDynamics";
	case ViolationKind::SocBounds: return "SocBounds";
	case ViolationKind::NegativePriceDischarge: return "NegativePriceDischarge";
	case ViolationKind::SimultaneousAction: return "SimultaneousAction";
	}
	return "Unknown";
}

std::vector<Violation> validate_schedule(const Schedule &s, const StorageParams &params, std::span<const double> prices) {
	std::vector<Violation> out;
	const std::size_t T = prices.size();
	if (s.discharge.size() != T || s.charge.size() != T || s.soc.size() != T) {
		out.push_back({ViolationKind::LengthMismatch, 0, "schedule and price lengths differ"});
		return out;
	}
	double prev = params.initial_soc;
	for (std::size_t t = 0; t < T; ++t) {
		const double p = s.discharge[t], b = s.charge[t], e = s.soc[t];
		if (p < -kCheckTolerance || b < -kCheckTolerance) {
			out.push_back({ViolationKind::NegativeQuantity, t, "negative charge or discharge"});
		}
		if (p > params.power + kCheckTolerance || b > params.power + kCheckTolerance) {
			out.push_back({ViolationKind::PowerLimit, t, "p=" + format_double(p) + " b=" + format_double(b)});
		}
		const double expected = prev - p / params.efficiency + b * params.efficiency;
		if (std::abs(e - expected) > kCheckTolerance) {
			out.push_back({ViolationKind::SocDynamics, t, "e=" + format_double(e) + " expected " + format_double(expected)});
		}
		if (e < -kCheckTolerance || e > params.capacity + kCheckTolerance) {
			out.push_back({ViolationKind::SocBounds, t, "e=" + format_double(e)});
		}
		if (p > kCheckTolerance && prices[t] < 0.0) {
			out.push_back({ViolationKind::NegativePriceDischarge, t, "discharge at price " + format_double(prices[t])});
		}
		if (p > kCheckTolerance && b > kCheckTolerance) {
			out.push_back({ViolationKind::SimultaneousAction, t, "charge and discharge in one interval"});
		}
		prev = e;
	}
	return out;
}

std::string schedule_csv_text(const Schedule &s, std::span<const double> prices, const StorageParams &params) {
	std::string out = "t,price,p,b,e,step_profit\n";
	for (std::size_t t = 0; t < s.size(); ++t) {
		const double profit = prices[t] * (s.discharge[t] - s.charge[t]) - params.discharge_cost * s.discharge[t];
		out += std::to_string(t) + ',' + format_double(prices[t]) + ',' + format_double(s.discharge[t]) + ',' +
		       format_double(s.charge[t]) + ',' + format_double(s.soc[t]) + ',' + format_double(profit) + '\n';
	}
	return out;
}

} // namespace rtarb
