#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rtarb {

/// Storage unit in per-interval energy units.
struct StorageParams {
	double power = 0.5;          // P: max charge/discharge energy per interval (MWh)
	double capacity = 1.0;       // E (MWh)
	double efficiency = 0.9;     // one-way
	double discharge_cost = 10.0; // $/MWh discharged
	double initial_soc = 0.0;    // e0 (MWh)

	/// Throws ConfigError on a violated parameter bound.
	void validate() const;
};

struct SolverConfig {
	std::size_t soc_grid_points = 101;
	std::size_t action_levels = 51;
	// Instances whose reachable SoC set stays below this size are solved on
	// the exact reachable states instead of the interpolated grid.
	std::size_t exact_state_limit = 1024;

	void validate() const;
	double action_step(const StorageParams &p) const {
		return p.power / static_cast<double>(action_levels - 1);
	}
};

/// Per-interval decisions for a price window. soc[t] is the state after interval t.
struct Schedule {
	std::vector<double> discharge;
	std::vector<double> charge;
	std::vector<double> soc;
	double objective = 0.0;

	std::size_t size() const noexcept { return discharge.size(); }
};

/// sum_t price_t * (p_t - b_t) - c * p_t
double schedule_objective(const Schedule &s, std::span<const double> prices, double discharge_cost);

/// Backward-induction solver for one storage unit. Holds the per-action
/// interpolation tables so repeated solves (Monte-Carlo samples) reuse them.
/// solve() is const and reentrant.
class ArbitrageSolver {
public:
	ArbitrageSolver(const StorageParams &params, const SolverConfig &cfg);

	/// Maximizes sum price_t (p_t - b_t) - c p_t from `initial_soc` with zero
	/// terminal value; discharge is suppressed where price_t < 0.
	Schedule solve(std::span<const double> prices, double initial_soc) const;
	Schedule solve(std::span<const double> prices) const { return solve(prices, params_.initial_soc); }

	/// One schedule per initial SoC. On the grid path the backward pass is
	/// shared, so this is cheaper than repeated solve() calls.
	std::vector<Schedule> solve_many(std::span<const double> prices, std::span<const double> initial_socs) const;

	/// True when solve() on a window of this length uses the exact reachable-state DP.
	bool uses_exact_states(std::size_t horizon) const;

	const StorageParams &params() const noexcept { return params_; }
	const SolverConfig &config() const noexcept { return cfg_; }

private:
	struct Move {
		double energy;     // grid-side MWh
		double soc_delta;  // signed MWh
		std::ptrdiff_t base;   // grid offset of the left interpolation node
		double weight;         // weight of the right node
		std::size_t g_first;   // feasible grid states [g_first, g_last]
		std::size_t g_last;
		bool feasible_anywhere;
	};

	struct StepAction {
		double discharge;
		double charge;
		double soc_delta;
		double shift; // soc_delta in grid units
	};

	void backward_grid(std::span<const double> prices, std::vector<double> &value) const;
	Schedule forward_grid(std::span<const double> prices, const std::vector<double> &value, double e0) const;
	Schedule solve_exact(std::span<const double> prices, double e0) const;
	double tie_tolerance(std::span<const double> prices) const;

	StorageParams params_;
	SolverConfig cfg_;
	double delta_;     // action step
	double spacing_;   // SoC grid spacing
	std::vector<Move> charges_;    // magnitude 1..L-1
	std::vector<Move> discharges_; // magnitude 1..L-1
	std::vector<StepAction> actions_;  // idle, then by magnitude with charge first
};

Schedule optimize_schedule(std::span<const double> prices, const StorageParams &params, const SolverConfig &cfg = {});

/// Exhaustive search over the same action grid. Requires T <= 6 and
/// action_levels <= 11. Ties go to the lexicographically smallest (sum p, sum b).
Schedule brute_force_oracle(std::span<const double> prices, const StorageParams &params, std::size_t action_levels);

struct ProfitBreakdown {
	double revenue = 0.0;
	double charge_cost = 0.0;
	double discharge_cost = 0.0;
	double net = 0.0;
};

ProfitBreakdown evaluate_profit(const Schedule &schedule, std::span<const double> realized, const StorageParams &params);

enum class ViolationKind {
	LengthMismatch,
	NegativeQuantity,
	PowerLimit,
	SocDynamics,
	SocBounds,
	NegativePriceDischarge,
	SimultaneousAction,
};

const char *to_string(ViolationKind kind) noexcept;

struct Violation {
	ViolationKind kind;
	std::size_t t;
	std::string detail;
};

/// Every Schedule constraint checked at 1e-9 MWh; empty result means feasible.
std::vector<Violation> validate_schedule(const Schedule &schedule, const StorageParams &params,
                                         std::span<const double> prices);

/// CSV: t,price,p,b,e,step_profit
std::string schedule_csv_text(const Schedule &schedule, std::span<const double> prices, const StorageParams &params);

} // namespace rtarb
