#pragma once

#include "rtarb/arbitrage.hpp"
#include "rtarb/conformal_eval.hpp"
#include "rtarb/market_data.hpp"
#include "rtarb/risk_policy.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rtarb {

enum class StrategyKind { PerfectForecast, PointForecast, RiskAverseConservative, RiskAverseAggressive };

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::PerfectForecast, StrategyKind::PointForecast,
                                                  StrategyKind::RiskAverseConservative,
                                                  StrategyKind::RiskAverseAggressive};

const char *to_string(StrategyKind kind) noexcept;
std::optional<StrategyKind> parse_strategy(std::string_view name);
bool uses_intervals(StrategyKind kind) noexcept;

struct BacktestConfig {
	std::size_t horizon = 6;
	TrackerConfig tracker;
	PolicyConfig policy;
	SolverConfig solver;
	StorageParams storage;
	StrategyKind strategy = StrategyKind::RiskAverseConservative;

	void validate() const;
};

struct ExecutedStep {
	std::size_t index = 0; // series index of the settled interval
	double price = 0.0;
	double discharge = 0.0;
	double charge = 0.0;
	double soc = 0.0;
	double profit = 0.0;
	double purchase = 0.0;
	bool discharge_cancelled = false; // planned discharge hit a realized negative price
};

struct DailyResult {
	std::size_t day = 0;
	std::size_t first_index = 0;
	std::size_t intervals = 0;
	double profit = 0.0;
	double purchases = 0.0;
};

struct DecisionRow {
	std::size_t origin = 0;
	std::size_t offset = 0;
	ActionKind action = ActionKind::Idle;
	double quantity = 0.0;
	std::size_t agree_charge = 0;
	std::size_t agree_discharge = 0;
};

struct BacktestTotals {
	std::size_t negative_days = 0;
	double total_profit = 0.0;
	double total_purchases = 0.0;
};

struct BacktestResult {
	StrategyKind strategy = StrategyKind::PointForecast;
	double sigma = 0.0;
	std::size_t test_begin = 0;
	std::size_t test_end = 0;
	StorageParams storage;
	std::vector<ExecutedStep> steps;
	std::vector<DailyResult> days;
	BacktestTotals totals;
	std::vector<DecisionRow> decisions;
	std::size_t cancelled_discharges = 0;
	std::size_t clipped_decisions = 0;
	std::shared_ptr<const IntervalLog> intervals; // shared by every strategy of one run

	Schedule executed_schedule() const;
	std::vector<double> realized_prices() const;
};

/// Forecast panel and conformal intervals for one (series, forecaster) pair;
/// shared by all strategies because neither depends on storage decisions.
struct BacktestInputs {
	const PriceSeries *series = nullptr;
	DatasetSplit split;
	double sigma = 0.0;
	ForecastPanel panel;
	std::shared_ptr<const IntervalLog> intervals;
};

BacktestInputs prepare_backtest(const PriceSeries &series, const DatasetSplit &split,
                                const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg);

/// Receding-horizon simulation: at each origin t plan over t+1..t+H, settle
/// only interval t+1 at the realized price (a discharge planned into a
/// negative realized price is cancelled), then move to t+1.
BacktestResult simulate_strategy(const BacktestInputs &inputs, const BacktestConfig &cfg, StrategyKind strategy);

/// Several strategies in lockstep. The interval strategies share their
/// Monte-Carlo samples and backward passes; results match simulate_strategy.
std::vector<BacktestResult> simulate_strategies(const BacktestInputs &inputs, const BacktestConfig &cfg,
                                                std::span<const StrategyKind> strategies);

BacktestResult run_backtest(const PriceSeries &series, const DatasetSplit &split,
                            const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg);

/// All strategies on one shared panel; `parallel` runs them on separate threads.
std::vector<BacktestResult> run_backtests(const PriceSeries &series, const DatasetSplit &split,
                                          const SyntheticForecasterConfig &forecaster, const BacktestConfig &cfg,
                                          std::span<const StrategyKind> strategies, bool parallel = false);

struct SummaryRow {
	double sigma = 0.0;
	StrategyKind strategy = StrategyKind::PointForecast;
	std::size_t negative_days = 0;
	double total_profit = 0.0;
	double total_purchases = 0.0;
	std::optional<double> coverage;   // interval strategies only
	std::optional<double> mean_width; // mean finite width over all offsets
};

/// One row per result; throws std::invalid_argument if test ranges differ.
std::vector<SummaryRow> summarize(std::span<const BacktestResult> results);

std::string summary_csv_text(std::span<const SummaryRow> rows);
std::vector<SummaryRow> parse_summary_csv(const std::string &text);
std::string render_summary_table(std::span<const SummaryRow> rows);

std::string daily_csv_text(std::span<const BacktestResult> results);
std::string decisions_csv_text(std::span<const BacktestResult> results);
std::string steps_csv_text(std::span<const BacktestResult> results);

/// Writes cumulative profit and purchases per strategy, the per-offset width
/// table and the running coverage series into `dir`.
void emit_figure_data(const BacktestResult &result, const std::filesystem::path &dir);

/// intervals.csv, decisions.csv, daily.csv, steps.csv and figure_*.csv.
void write_result_bundle(std::span<const BacktestResult> results, const std::filesystem::path &dir);

} // namespace rtarb
