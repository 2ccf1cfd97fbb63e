#pragma once

#include "rtarb/arbitrage.hpp"
#include "rtarb/conformal.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rtarb {

enum class PolicyMode { Conservative, Aggressive };

struct PolicyConfig {
	std::size_t samples = 100;
	PolicyMode mode = PolicyMode::Conservative;
	std::uint64_t seed = 0;
	double decision_tolerance = 1e-9; // MWh threshold for "> 0"
	// Stop sampling once the first-step decision is settled as Idle. Only the
	// first decision is then reported, with counts over the samples drawn.
	bool first_step_only = false;

	void validate() const;
};

enum class ActionKind { Idle, Charge, Discharge };

const char *to_string(ActionKind kind) noexcept;

struct AggregatedDecision {
	ActionKind action = ActionKind::Idle;
	double quantity = 0.0; // MWh, > 0 unless Idle
	std::size_t agree_charge = 0;
	std::size_t agree_discharge = 0;
	bool clipped = false; // quantity reduced to keep the executed SoC feasible
};

/// lower + (upper - lower) * u, for u in [0, 1].
double sample_price(const PredictionInterval &interval, double u);

/// One scenario with an independent U(0,1) draw per interval. Throws
/// std::invalid_argument on an infinite bound.
std::vector<double> sample_scenario(std::span<const PredictionInterval> intervals, std::mt19937_64 &rng);

/// Replaces infinite bounds with point_forecast +/- 5 * scale.
PredictionInterval clamp_interval(const PredictionInterval &interval, double point_forecast, double scale);

/// All-agree rule per step: Charge iff every sample charges, Discharge iff
/// every sample discharges, else Idle. Quantity is the min (conservative)
/// or max (aggressive) of the agreeing variable.
std::vector<AggregatedDecision> aggregate(std::span<const Schedule> schedules, PolicyMode mode, double tolerance);

/// Executes decisions from `initial_soc`, clipping each quantity to what the
/// SoC and power limits allow. Clipped entries are flagged; a quantity clipped
/// to zero becomes Idle.
Schedule execute_decisions(std::vector<AggregatedDecision> &decisions, const StorageParams &params, double initial_soc);

struct PolicyResult {
	std::vector<AggregatedDecision> decisions;
	Schedule executed; // decisions after clipping, from the given initial SoC
	std::size_t samples_used = 0;
};

/// Draws cfg.samples scenarios from the intervals, solves each, and aggregates.
/// Sample i uses an RNG seeded from (cfg.seed, stream, i), so results do not
/// depend on evaluation order.
PolicyResult run_policy(std::span<const PredictionInterval> intervals, const ArbitrageSolver &solver,
                        double initial_soc, const PolicyConfig &cfg, std::uint64_t stream = 0);

struct PolicyStart {
	double initial_soc = 0.0;
	PolicyMode mode = PolicyMode::Conservative;
};

/// run_policy for several starting states on the same samples (cfg.mode is
/// ignored). Each result equals the corresponding single run_policy call.
std::vector<PolicyResult> run_policy_batch(std::span<const PredictionInterval> intervals, const ArbitrageSolver &solver,
                                           std::span<const PolicyStart> starts, const PolicyConfig &cfg,
                                           std::uint64_t stream = 0);

PolicyResult run_policy(std::span<const PredictionInterval> intervals, const StorageParams &params,
                        const PolicyConfig &cfg, const SolverConfig &solver_cfg, std::uint64_t stream = 0);

} // namespace rtarb
