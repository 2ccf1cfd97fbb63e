#include "rtarb/risk_policy.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rtarb {

void PolicyConfig::validate() const {
	if (samples < 1) throw ConfigError("policy sample count must be >= 1");
	if (!(decision_tolerance >= 0.0)) throw ConfigError("decision tolerance must be >= 0");
}

const char *to_string(ActionKind kind) noexcept {
	switch (kind) {
	case ActionKind::Idle: return "idle";
	case ActionKind::Charge: return "charge";
	case ActionKind::Discharge: return "discharge";
	}
	return "unknown";
}

double sample_price(const PredictionInterval &interval, double u) {
	return interval.lower + (interval.upper - interval.lower) * u;
}

std::vector<double> sample_scenario(std::span<const PredictionInterval> intervals, std::mt19937_64 &rng) {
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	std::vector<double> prices(intervals.size());
	for (std::size_t t = 0; t < intervals.size(); ++t) {
		if (!intervals[t].finite()) throw std::invalid_argument("sample_scenario: infinite interval bound");
		prices[t] = sample_price(intervals[t], unit(rng));
	}
	return prices;
}

PredictionInterval clamp_interval(const PredictionInterval &interval, double point_forecast, double scale) {
	PredictionInterval out = interval;
	if (!std::isfinite(out.lower)) out.lower = point_forecast - 5.0 * scale;
	if (!std::isfinite(out.upper)) out.upper = point_forecast + 5.0 * scale;
	if (out.lower > out.upper) std::swap(out.lower, out.upper);
	return out;
}

std::vector<AggregatedDecision> aggregate(std::span<const Schedule> schedules, PolicyMode mode, double tolerance) {
	if (schedules.empty()) throw std::invalid_argument("aggregate: no schedules");
	const std::size_t T = schedules.front().size();
	for (const auto &s : schedules) {
		if (s.size() != T || s.charge.size() != T) throw std::invalid_argument("aggregate: schedule length mismatch");
	}
	std::vector<AggregatedDecision> out(T);
	for (std::size_t t = 0; t < T; ++t) {
		auto &d = out[t];
		double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
		double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
		for (const auto &s : schedules) {
			if (s.charge[t] > tolerance) {
				++d.agree_charge;
				cmin = std::min(cmin, s.charge[t]);
				cmax = std::max(cmax, s.charge[t]);
			}
			if (s.discharge[t] > tolerance) {
				++d.agree_discharge;
				dmin = std::min(dmin, s.discharge[t]);
				dmax = std::max(dmax, s.discharge[t]);
			}
		}
		const bool conservative = mode == PolicyMode::Conservative;
		if (d.agree_charge == schedules.size()) {
			d.action = ActionKind::Charge;
			d.quantity = conservative ? cmin : cmax;
		} else if (d.agree_discharge == schedules.size()) {
			d.action = ActionKind::Discharge;
			d.quantity = conservative ? dmin : dmax;
		}
	}
	return out;
}

Schedule execute_decisions(std::vector<AggregatedDecision> &decisions, const StorageParams &params, double initial_soc) {
	const std::size_t T = decisions.size();
	Schedule s;
	s.discharge.assign(T, 0.0);
	s.charge.assign(T, 0.0);
	s.soc.assign(T, 0.0);
	double soc = initial_soc;
	for (std::size_t t = 0; t < T; ++t) {
		auto &d = decisions[t];
		if (d.action == ActionKind::Charge) {
			const double room = std::max(0.0, (params.capacity - soc) / params.efficiency);
			const double q = std::min({d.quantity, params.power, room});
			if (d.quantity - q > 1e-12) d.clipped = true;
			s.charge[t] = q;
			soc = std::min(params.capacity, soc + q * params.efficiency);
		} else if (d.action == ActionKind::Discharge) {
			const double avail = std::max(0.0, soc * params.efficiency);
			const double q = std::min({d.quantity, params.power, avail});
			if (d.quantity - q > 1e-12) d.clipped = true;
			s.discharge[t] = q;
			soc = std::max(0.0, soc - q / params.efficiency);
		}
		if (d.action != ActionKind::Idle && (s.charge[t] + s.discharge[t]) <= 0.0) {
			d.action = ActionKind::Idle;
			d.quantity = 0.0;
		} else if (d.action != ActionKind::Idle) {
			d.quantity = s.charge[t] + s.discharge[t];
		}
		s.soc[t] = soc;
	}
	return s;
}

std::vector<PolicyResult> run_policy_batch(std::span<const PredictionInterval> intervals, const ArbitrageSolver &solver,
                                           std::span<const PolicyStart> starts, const PolicyConfig &cfg,
                                           std::uint64_t stream) {
	cfg.validate();
	const std::size_t K = starts.size();
	std::vector<double> socs;
	for (const auto &st : starts) socs.push_back(st.initial_soc);

	std::vector<std::vector<Schedule>> schedules(K);
	// The step-0 decision is Idle once some sample declines to charge and some declines to discharge.
	std::vector<char> no_charge(K, 0), no_discharge(K, 0);
	std::size_t used = 0;
	for (std::size_t i = 0; i < cfg.samples; ++i) {
		std::mt19937_64 rng(derive_seed(cfg.seed, stream, i));
		const auto scenario = sample_scenario(intervals, rng);
		auto plans = solver.solve_many(scenario, socs);
		++used;
		bool settled = true;
		for (std::size_t k = 0; k < K; ++k) {
			if (!(plans[k].charge.front() > cfg.decision_tolerance)) no_charge[k] = 1;
			if (!(plans[k].discharge.front() > cfg.decision_tolerance)) no_discharge[k] = 1;
			settled = settled && no_charge[k] && no_discharge[k];
			schedules[k].push_back(std::move(plans[k]));
		}
		if (cfg.first_step_only && settled) break;
	}

	std::vector<PolicyResult> out(K);
	for (std::size_t k = 0; k < K; ++k) {
		if (cfg.first_step_only) {
			for (auto &s : schedules[k]) {
				s.discharge.resize(1);
				s.charge.resize(1);
				s.soc.resize(1);
			}
		}
		PolicyResult &r = out[k];
		r.decisions = aggregate(schedules[k], starts[k].mode, cfg.decision_tolerance);
		r.executed = execute_decisions(r.decisions, solver.params(), starts[k].initial_soc);
		r.executed.objective = 0.0;
		r.samples_used = used;
	}
	return out;
}

PolicyResult run_policy(std::span<const PredictionInterval> intervals, const ArbitrageSolver &solver,
                        double initial_soc, const PolicyConfig &cfg, std::uint64_t stream) {
	const PolicyStart start{initial_soc, cfg.mode};
	return std::move(run_policy_batch(intervals, solver, std::span<const PolicyStart>(&start, 1), cfg, stream).front());
}

PolicyResult run_policy(std::span<const PredictionInterval> intervals, const StorageParams &params,
                        const PolicyConfig &cfg, const SolverConfig &solver_cfg, std::uint64_t stream) {
	const ArbitrageSolver solver(params, solver_cfg);
	return run_policy(intervals, solver, params.initial_soc, cfg, stream);
}

} // namespace rtarb
