#include "rtarb/backtest.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>
#include <stdexcept>

namespace rtarb {

const char *to_string(StrategyKind kind) noexcept {
	switch (kind) {
	case StrategyKind::PerfectForecast: return "perfect";
	case StrategyKind::PointForecast: return "point";
	case StrategyKind::RiskAverseConservative: return "conservative";
	case StrategyKind::RiskAverseAggressive: return "aggressive";
	}
	return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
	for (auto kind : kAllStrategies) {
		if (name == to_string(kind)) return kind;
	}
	return std::nullopt;
}

bool uses_intervals(StrategyKind kind) noexcept {
	return kind == StrategyKind::RiskAverseConservative || kind == StrategyKind::RiskAverseAggressive;
}

void BacktestConfig::validate() const {
	if (horizon < 1) throw ConfigError("horizon must be >= 1");
	tracker.validate();
	policy.validate();
	solver.validate();
	storage.validate();
}

Schedule BacktestResult::executed_schedule() const {
	Schedule s;
	for (const auto &step : steps) {
		s.discharge.push_back(step.discharge);
		s.charge.push_back(step.charge);
		s.soc.push_back(step.soc);
	}
	s.objective = totals.total_profit;
	return s;
}

std::vector<double> BacktestResult::realized_prices() const {
	std::vector<double> out;
	out.reserve(steps.size());
	for (const auto &step : steps) out.push_back(step.price);
	return out;
}

BacktestInputs prepare_backtest(const PriceSeries &series, const DatasetSplit &split,
                                const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg) {
	cfg.validate();
	if (forecaster.horizon != cfg.horizon) {
		throw ConfigError("forecaster horizon " + std::to_string(forecaster.horizon) +
		                  " differs from backtest horizon " + std::to_string(cfg.horizon));
	}
	BacktestInputs in{&series, split, forecaster.sigma, synthetic_forecast(series, split, forecaster), nullptr};
	in.intervals = std::make_shared<const IntervalLog>(run_conformal(series, in.panel, split, cfg.tracker));
	return in;
}

namespace {

void settle(BacktestResult &result, const StorageParams &storage, double &soc, std::size_t index, double price,
            double plan_charge, double plan_discharge) {
	ExecutedStep step;
	step.index = index;
	step.price = price;
	if (plan_discharge > 0.0 && price < 0.0) {
		step.discharge_cancelled = true;
		++result.cancelled_discharges;
		plan_discharge = 0.0;
	}
	step.charge = std::min({plan_charge, storage.power, std::max(0.0, (storage.capacity - soc) / storage.efficiency)});
	step.discharge = std::min({plan_discharge, storage.power, std::max(0.0, soc * storage.efficiency)});
	soc = std::clamp(soc + step.charge * storage.efficiency - step.discharge / storage.efficiency, 0.0, storage.capacity);
	step.soc = soc;
	step.profit = price * (step.discharge - step.charge) - storage.discharge_cost * step.discharge;
	step.purchase = price * step.charge;
	result.steps.push_back(step);
}

void finish_days(BacktestResult &result) {
	for (const auto &step : result.steps) {
		const std::size_t day = (step.index - result.test_begin) / 24;
		if (result.days.size() <= day) result.days.push_back({day, step.index, 0, 0.0, 0.0});
		auto &d = result.days.back();
		++d.intervals;
		d.profit += step.profit;
		d.purchases += step.purchase;
	}
	for (const auto &d : result.days) {
		result.totals.total_profit += d.profit;
		result.totals.total_purchases += d.purchases;
		if (d.profit < 0.0) ++result.totals.negative_days;
	}
}

} // namespace

std::vector<BacktestResult> simulate_strategies(const BacktestInputs &inputs, const BacktestConfig &cfg,
                                                std::span<const StrategyKind> strategies) {
	cfg.validate();
	const PriceSeries &series = *inputs.series;
	const IntervalLog *log = inputs.intervals.get();
	const std::size_t H = cfg.horizon;
	const StorageParams &storage = cfg.storage;
	const ArbitrageSolver solver(storage, cfg.solver);
	const std::size_t K = strategies.size();

	std::vector<BacktestResult> results(K);
	std::vector<double> soc(K, storage.initial_soc);
	std::vector<std::size_t> interval_users;
	for (std::size_t k = 0; k < K; ++k) {
		BacktestResult &r = results[k];
		r.strategy = strategies[k];
		r.sigma = inputs.sigma;
		r.test_begin = inputs.split.test_begin();
		r.test_end = inputs.split.test_end();
		r.storage = storage;
		r.intervals = inputs.intervals;
		r.steps.reserve(inputs.split.test);
		if (uses_intervals(strategies[k])) interval_users.push_back(k);
	}
	if (!interval_users.empty() && !log) throw std::invalid_argument("interval strategies need an interval log");

	std::vector<double> window(H);
	std::vector<PredictionInterval> bounded(H);
	std::vector<PolicyStart> starts;
	const std::size_t test_begin = inputs.split.test_begin(), test_end = inputs.split.test_end();

	for (std::size_t t = test_begin - 1; t + 1 < test_end; ++t) {
		if (!interval_users.empty()) {
			const auto ivs = log->window(t);
			const auto points = log->point_window(t);
			for (std::size_t h = 0; h < H; ++h) bounded[h] = clamp_interval(ivs[h], points[h], log->clamp_scale[h]);
			starts.clear();
			for (std::size_t k : interval_users) {
				const auto mode = strategies[k] == StrategyKind::RiskAverseAggressive ? PolicyMode::Aggressive
				                                                                      : PolicyMode::Conservative;
				starts.push_back({soc[k], mode});
			}
			const auto prs = run_policy_batch(bounded, solver, starts, cfg.policy, t);
			for (std::size_t j = 0; j < interval_users.size(); ++j) {
				const std::size_t k = interval_users[j];
				const auto &pr = prs[j];
				for (std::size_t h = 0; h < pr.decisions.size(); ++h) {
					const auto &d = pr.decisions[h];
					results[k].decisions.push_back({t, h + 1, d.action, d.quantity, d.agree_charge, d.agree_discharge});
				}
				if (pr.decisions.front().clipped) ++results[k].clipped_decisions;
				settle(results[k], storage, soc[k], t + 1, series[t + 1], pr.executed.charge.front(),
				       pr.executed.discharge.front());
			}
		}
		for (std::size_t k = 0; k < K; ++k) {
			if (uses_intervals(strategies[k])) continue;
			if (strategies[k] == StrategyKind::PerfectForecast) {
				for (std::size_t h = 0; h < H; ++h) window[h] = series[t + 1 + h];
			} else {
				const auto f = inputs.panel.window(t);
				std::copy(f.begin(), f.end(), window.begin());
			}
			const Schedule plan = solver.solve(window, soc[k]);
			const std::size_t logged = cfg.policy.first_step_only ? 1 : H;
			for (std::size_t h = 0; h < logged; ++h) {
				DecisionRow row{t, h + 1, ActionKind::Idle, 0.0, 0, 0};
				if (plan.charge[h] > cfg.policy.decision_tolerance) {
					row.action = ActionKind::Charge;
					row.quantity = plan.charge[h];
					row.agree_charge = 1;
				} else if (plan.discharge[h] > cfg.policy.decision_tolerance) {
					row.action = ActionKind::Discharge;
					row.quantity = plan.discharge[h];
					row.agree_discharge = 1;
				}
				results[k].decisions.push_back(row);
			}
			settle(results[k], storage, soc[k], t + 1, series[t + 1], plan.charge.front(), plan.discharge.front());
		}
	}
	for (auto &r : results) finish_days(r);
	return results;
}

BacktestResult simulate_strategy(const BacktestInputs &inputs, const BacktestConfig &cfg, StrategyKind strategy) {
	return std::move(simulate_strategies(inputs, cfg, std::span<const StrategyKind>(&strategy, 1)).front());
}

BacktestResult run_backtest(const PriceSeries &series, const DatasetSplit &split,
                            const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg) {
	const auto inputs = prepare_backtest(series, split, forecaster, cfg);
	return simulate_strategy(inputs, cfg, cfg.strategy);
}

std::vector<BacktestResult> run_backtests(const PriceSeries &series, const DatasetSplit &split,
                                          const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg,
                                          std::span<const StrategyKind> strategies, bool parallel) {
	const auto inputs = prepare_backtest(series, split, forecaster, cfg);
	if (!parallel) return simulate_strategies(inputs, cfg, strategies);
	std::vector<std::future<BacktestResult>> jobs;
	for (auto kind : strategies) {
		jobs.push_back(std::async(std::launch::async, [&inputs, &cfg, kind] { return simulate_strategy(inputs, cfg, kind); }));
	}
	std::vector<BacktestResult> results;
	for (auto &job : jobs) results.push_back(job.get());
	return results;
}

std::vector<SummaryRow> summarize(std::span<const BacktestResult> results) {
	std::vector<SummaryRow> rows;
	for (const auto &r : results) {
		if (r.test_begin != results.front().test_begin || r.test_end != results.front().test_end) {
			throw std::invalid_argument("summarize: results cover different test ranges");
		}
		SummaryRow row{r.sigma, r.strategy, r.totals.negative_days, r.totals.total_profit, r.totals.total_purchases,
		               std::nullopt, std::nullopt};
		if (uses_intervals(r.strategy) && r.intervals) {
			row.coverage = r.intervals->overall_coverage();
			const auto w = r.intervals->widths();
			double total = 0.0;
			std::size_t n = 0;
			for (std::size_t h = 0; h < w.mean_width.size(); ++h) {
				if (w.finite_count[h] == 0) continue;
				total += w.mean_width[h] * static_cast<double>(w.finite_count[h]);
				n += w.finite_count[h];
			}
			if (n > 0) row.mean_width = total / static_cast<double>(n);
		}
		rows.push_back(row);
	}
	return rows;
}

std::string summary_csv_text(std::span<const SummaryRow> rows) {
	std::string out = "sigma,strategy,negative_days,total_profit,total_purchases,coverage,mean_width\n";
	for (const auto &r : rows) {
		out += format_fixed(r.sigma, 3) + ',' + to_string(r.strategy) + ',' + std::to_string(r.negative_days) + ',' +
		       format_fixed(r.total_profit, 6) + ',' + format_fixed(r.total_purchases, 6) + ',' +
		       (r.coverage ? format_fixed(*r.coverage, 6) : std::string()) + ',' +
		       (r.mean_width ? format_fixed(*r.mean_width, 6) : std::string()) + '\n';
	}
	return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string &text) {
	std::istringstream in(text);
	std::string line;
	if (!std::getline(in, line) || split_csv_line(line).size() != 7) {
		throw DataError(DataErrorKind::MissingColumn, "summary.csv header not recognized");
	}
	std::vector<SummaryRow> rows;
	while (std::getline(in, line)) {
		if (line.empty()) continue;
		const auto f = split_csv_line(line);
		if (f.size() != 7) throw DataError(DataErrorKind::InvalidSeries, "malformed summary row: " + line);
		const auto kind = parse_strategy(f[1]);
		if (!kind) throw DataError(DataErrorKind::InvalidSeries, "unknown strategy '" + f[1] + "'");
		SummaryRow r;
		try {
			r.sigma = std::stod(f[0]);
			r.strategy = *kind;
			r.negative_days = static_cast<std::size_t>(std::stoull(f[2]));
			r.total_profit = std::stod(f[3]);
			r.total_purchases = std::stod(f[4]);
			if (!f[5].empty()) r.coverage = std::stod(f[5]);
			if (!f[6].empty()) r.mean_width = std::stod(f[6]);
		} catch (const std::exception &) {
			throw DataError(DataErrorKind::NonNumericPrice, "malformed summary row: " + line);
		}
		rows.push_back(r);
	}
	return rows;
}

std::string render_summary_table(std::span<const SummaryRow> rows) {
	std::string out;
	char buf[256];
	std::snprintf(buf, sizeof(buf), "%8s  %-13s %9s %14s %16s %9s %10s\n", "sigma", "case", "neg.days", "profit($)",
	              "purchases($)", "coverage", "width");
	out += buf;
	for (const auto &r : rows) {
		const std::string cov = r.coverage ? format_fixed(*r.coverage, 4) : "-";
		const std::string wid = r.mean_width ? format_fixed(*r.mean_width, 2) : "-";
		std::snprintf(buf, sizeof(buf), "%8.2f  %-13s %9zu %14.2f %16.2f %9s %10s\n", r.sigma, to_string(r.strategy),
		              r.negative_days, r.total_profit, r.total_purchases, cov.c_str(), wid.c_str());
		out += buf;
	}
	return out;
}

std::string daily_csv_text(std::span<const BacktestResult> results) {
	std::string out = "strategy,day,first_index,intervals,profit,purchases\n";
	for (const auto &r : results) {
		for (const auto &d : r.days) {
			out += std::string(to_string(r.strategy)) + ',' + std::to_string(d.day) + ',' + std::to_string(d.first_index) +
			       ',' + std::to_string(d.intervals) + ',' + format_double(d.profit) + ',' + format_double(d.purchases) +
			       '\n';
		}
	}
	return out;
}

std::string decisions_csv_text(std::span<const BacktestResult> results) {
	std::string out = "strategy,origin_index,t_offset,action,quantity_mwh,n_agree_charge,n_agree_discharge\n";
	for (const auto &r : results) {
		for (const auto &d : r.decisions) {
			out += std::string(to_string(r.strategy)) + ',' + std::to_string(d.origin) + ',' + std::to_string(d.offset) +
			       ',' + to_string(d.action) + ',' + format_double(d.quantity) + ',' + std::to_string(d.agree_charge) +
			       ',' + std::to_string(d.agree_discharge) + '\n';
		}
	}
	return out;
}

std::string steps_csv_text(std::span<const BacktestResult> results) {
	std::string out = "strategy,index,price,p,b,e,step_profit,purchase,discharge_cancelled\n";
	for (const auto &r : results) {
		for (const auto &s : r.steps) {
			out += std::string(to_string(r.strategy)) + ',' + std::to_string(s.index) + ',' + format_double(s.price) +
			       ',' + format_double(s.discharge) + ',' + format_double(s.charge) + ',' + format_double(s.soc) + ',' +
			       format_double(s.profit) + ',' + format_double(s.purchase) + ',' +
			       (s.discharge_cancelled ? "1" : "0") + '\n';
		}
	}
	return out;
}

void emit_figure_data(const BacktestResult &result, const std::filesystem::path &dir) {
	const std::string name = to_string(result.strategy);
	std::string profit = "day,daily_profit,cumulative_profit\n";
	std::string purchases = "day,daily_purchases,cumulative_purchases\n";
	double cum_profit = 0.0, cum_purchases = 0.0;
	for (const auto &d : result.days) {
		cum_profit += d.profit;
		cum_purchases += d.purchases;
		profit += std::to_string(d.day) + ',' + format_double(d.profit) + ',' + format_double(cum_profit) + '\n';
		purchases += std::to_string(d.day) + ',' + format_double(d.purchases) + ',' + format_double(cum_purchases) + '\n';
	}
	write_file_atomic(dir / ("figure_cumulative_profit_" + name + ".csv"), profit);
	write_file_atomic(dir / ("figure_cumulative_purchases_" + name + ".csv"), purchases);

	if (!result.intervals) return;
	const IntervalLog &log = *result.intervals;
	const auto widths = log.widths();
	const auto cov = log.coverage_by_offset();
	std::string width_table = "offset,mean_width,finite_count,excluded_infinite,coverage\n";
	for (std::size_t h = 0; h < log.horizon; ++h) {
		width_table += std::to_string(h + 1) + ',' + format_double(widths.mean_width[h]) + ',' +
		               std::to_string(widths.finite_count[h]) + ',' + std::to_string(widths.excluded_infinite[h]) + ',' +
		               format_double(cov[h]) + '\n';
	}
	write_file_atomic(dir / "figure_width_by_horizon.csv", width_table);

	std::string rolling = "origin_index,offset,covered,cumulative_coverage\n";
	std::size_t hits = 0;
	for (std::size_t i = 0; i < log.pid.size(); ++i) {
		const bool covered = log.pid[i].contains(log.realized[i]);
		if (covered) ++hits;
		rolling += std::to_string(log.first_origin + i / log.horizon) + ',' + std::to_string(i % log.horizon + 1) + ',' +
		           (covered ? "1" : "0") + ',' + format_double(static_cast<double>(hits) / static_cast<double>(i + 1)) +
		           '\n';
	}
	write_file_atomic(dir / "figure_rolling_coverage.csv", rolling);
}

void write_result_bundle(std::span<const BacktestResult> results, const std::filesystem::path &dir) {
	std::filesystem::create_directories(dir);
	if (!results.empty() && results.front().intervals) {
		write_file_atomic(dir / "intervals.csv", interval_csv_text(*results.front().intervals));
	}
	write_file_atomic(dir / "decisions.csv", decisions_csv_text(results));
	write_file_atomic(dir / "daily.csv", daily_csv_text(results));
	write_file_atomic(dir / "steps.csv", steps_csv_text(results));
	for (const auto &r : results) emit_figure_data(r, dir);
}

} // namespace rtarb
