#include "rtarb/arbitrage.hpp"
#include "rtarb/backtest.hpp"
#include "rtarb/cli.hpp"
#include "rtarb/config.hpp"
#include "rtarb/conformal_eval.hpp"
#include "rtarb/io_util.hpp"
#include "rtarb/market_data.hpp"
#include "rtarb/risk_policy.hpp"
#include "support/enumeration_oracle.hpp"
#include "support/generators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rtarb;
namespace fs = std::filesystem;

namespace {

constexpr double kAlpha = 0.05;
constexpr std::size_t kSeriesLength = 2160;
constexpr std::size_t kEvalHorizon = 24;

struct Outcome {
	bool pass = false;
	std::string detail;
	double budget_s = 0.0; // 0: no runtime bound
};

using Clock = std::chrono::steady_clock;

std::string fmt(double x, int digits = 4) { return format_fixed(x, digits); }

RunConfig conformal_run_config() {
	RunConfig cfg;
	cfg.data.length = kSeriesLength;
	cfg.conformal.eval_horizon = kEvalHorizon;
	cfg.conformal.tracker.alpha = kAlpha;
	cfg.conformal.aci = {0.05, kAlpha};
	return cfg;
}

struct ConformalRun {
	double sigma;
	IntervalLog log;
};

std::vector<ConformalRun> conformal_runs(const RunConfig &cfg, const std::function<PriceSeries(const PriceSeries &,
                                                                                               const DatasetSplit &)> &shift,
                                         bool with_aci) {
	const RunSeeds seeds = derive_run_seeds(cfg);
	const PriceSeries series = load_series(cfg, seeds);
	const DatasetSplit split = resolve_split(cfg, series.size(), kEvalHorizon);
	const PriceSeries realized = shift ? shift(series, split) : series;
	std::vector<ConformalRun> out;
	for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
		const auto fc = forecaster_config(cfg, seeds, i, kEvalHorizon);
		const auto panel = synthetic_forecast(series, split, fc);
		const std::optional<AciConfig> aci = with_aci ? std::optional(cfg.conformal.aci) : std::nullopt;
		out.push_back({fc.sigma, run_conformal(realized, panel, split, cfg.conformal.tracker, aci)});
	}
	return out;
}

// 1: two-sided offset-1 coverage for both forecasters on the 90-day series.
// 3: mean finite width at offset 24 exceeds offset 1 for sigma = 5.
std::pair<Outcome, Outcome> coverage_and_width() {
	const auto runs = conformal_runs(conformal_run_config(), nullptr, false);
	Outcome cov{true, "", 10.0}, width{false, "", 0.0};
	for (const auto &r : runs) {
		const double c = r.log.coverage_by_offset().front();
		cov.pass = cov.pass && c >= 0.93 && c <= 0.97;
		cov.detail += "sigma=" + fmt(r.sigma, 0) + " coverage@1=" + fmt(c) + " ";
		if (r.sigma == 5.0) {
			const auto w = r.log.widths();
			width.pass = w.mean_width[kEvalHorizon - 1] > w.mean_width[0];
			width.detail = "sigma=5 width@1=" + fmt(w.mean_width[0], 3) + " width@24=" + fmt(w.mean_width[kEvalHorizon - 1], 3);
		}
	}
	cov.detail += "(band [0.93, 0.97], origins " + std::to_string(runs.front().log.origin_count) + ")";
	return {cov, width};
}

// 2: +100 $/MWh on the realized prices for 50 steps. ACI must emit an infinite
// interval, the PID tracker none, and the PID offset-1 trailing-100 coverage
// must be back at >= 0.93 no later than 200 steps after the shift ends.
Outcome regime_shift() {
	constexpr std::size_t kShiftStart = 300, kShiftLength = 50, kWindow = 100, kRecovery = 200;
	constexpr double kMagnitude = 100.0, kRecovered = 0.93;
	const RunConfig cfg = conformal_run_config();
	std::size_t shift_begin = 0;
	const auto runs = conformal_runs(
	    cfg,
	    [&](const PriceSeries &s, const DatasetSplit &split) {
		    shift_begin = split.test_begin() + kShiftStart;
		    return with_level_shift(s, shift_begin, kShiftLength, kMagnitude);
	    },
	    true);
	const std::size_t shift_end = shift_begin + kShiftLength;

	Outcome o{true, "", 5.0};
	for (const auto &r : runs) {
		const auto &log = r.log;
		const std::size_t aci_inf = log.infinite_count(IntervalMethod::Aci);
		const std::size_t pid_inf = log.infinite_count(IntervalMethod::Pid);
		// Offset-1 hit indicator by realized index (origin + 1).
		std::vector<int> hit(log.first_origin + log.origin_count + 1, -1);
		for (std::size_t t = log.first_origin; t < log.first_origin + log.origin_count; ++t) {
			const std::size_t i = log.index(t, 1);
			hit[t + 1] = log.pid[i].contains(log.realized[i]) ? 1 : 0;
		}
		std::size_t shift_misses = 0;
		for (std::size_t j = shift_begin; j < shift_end; ++j) shift_misses += hit[j] == 0;
		std::optional<std::size_t> recovered_at;
		for (std::size_t j = shift_end; j < hit.size() && j <= shift_end + kRecovery; ++j) {
			std::size_t hits = 0;
			for (std::size_t k = j + 1 - kWindow; k <= j; ++k) hits += hit[k] == 1;
			if (static_cast<double>(hits) / kWindow >= kRecovered) {
				recovered_at = j - shift_end;
				break;
			}
		}
		const bool ok = aci_inf >= 1 && pid_inf == 0 && shift_misses > 0 && recovered_at.has_value();
		o.pass = o.pass && ok;
		o.detail += "sigma=" + fmt(r.sigma, 0) + " aci_inf=" + std::to_string(aci_inf) + " pid_inf=" +
		            std::to_string(pid_inf) + " shift_misses@1=" + std::to_string(shift_misses) + " recovered_after=" +
		            (recovered_at ? std::to_string(*recovered_at) : std::string(">200")) + " ";
	}
	return o;
}

// 4: DP vs exhaustive oracle, T <= 4, prices in [-20, 150], shared action grid.
Outcome oracle_equivalence() {
	std::mt19937_64 rng(20240501);
	std::size_t agree = 0, agree_independent = 0;
	double worst = 0.0;
	constexpr int kInstances = 500;
	for (int i = 0; i < kInstances; ++i) {
		const std::size_t T = 1 + rng() % 4;
		const std::size_t L = 2 + rng() % 5;
		const auto prices = testing::random_prices(rng, T, -20.0, 150.0);
		const StorageParams p = testing::random_storage(rng);
		SolverConfig sc;
		sc.action_levels = L;
		sc.soc_grid_points = 201;
		const double dp = optimize_schedule(prices, p, sc).objective;
		const double oracle = brute_force_oracle(prices, p, L).objective;
		const double independent = testing::enumerate_best(prices, p, L);
		const double err = std::abs(dp - oracle) / std::max(1.0, std::abs(oracle));
		worst = std::max(worst, err);
		agree += err <= 1e-6;
		agree_independent += std::abs(dp - independent) <= 1e-6 * std::max(1.0, std::abs(independent));
	}
	return {agree == kInstances && agree_independent == kInstances,
	        std::to_string(agree) + "/" + std::to_string(kInstances) + " within 1e-6 of the oracle, " +
	            std::to_string(agree_independent) + "/" + std::to_string(kInstances) +
	            " of an independent enumeration, worst rel. gap " + format_double(worst),
	        30.0};
}

struct SeedRow {
	double point_profit, point_purchases;
	double profit[2], purchases[2]; // conservative, aggressive
};

// 5: one-year synthetic backtests, 20 seeds, both forecasters.
Outcome policy_direction() {
	constexpr std::uint64_t kSeeds = 20;
	constexpr std::size_t kNeeded = 18; // 90% of 20
	const StrategyKind kinds[] = {StrategyKind::PointForecast, StrategyKind::RiskAverseConservative,
	                              StrategyKind::RiskAverseAggressive};
	std::map<double, std::vector<SeedRow>> rows;
	for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
		RunConfig cfg;
		cfg.seed = seed;
		cfg.policy.first_step_only = true;
		const RunSeeds seeds = derive_run_seeds(cfg);
		const PriceSeries series = load_series(cfg, seeds);
		const DatasetSplit split = resolve_split(cfg, series.size(), cfg.horizon);
		const BacktestConfig bcfg = backtest_config(cfg, seeds);
		for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
			const auto res = run_backtests(series, split, forecaster_config(cfg, seeds, i, cfg.horizon), bcfg, kinds);
			SeedRow r{res[0].totals.total_profit, res[0].totals.total_purchases,
			          {res[1].totals.total_profit, res[2].totals.total_profit},
			          {res[1].totals.total_purchases, res[2].totals.total_purchases}};
			rows[cfg.sigmas[i]].push_back(r);
		}
	}

	std::size_t good[2] = {0, 0}, good_both = 0, bad[2] = {0, 0}, bad_both = 0;
	double pr_ratio[2] = {0, 0}, pu_ratio[2] = {0, 0};
	for (const auto &r : rows.at(5.0)) {
		bool both = true;
		for (int m = 0; m < 2; ++m) {
			const bool ok = r.purchases[m] <= 0.5 * r.point_purchases && r.profit[m] >= 0.7 * r.point_profit;
			good[m] += ok;
			both = both && ok;
			pr_ratio[m] += r.profit[m] / r.point_profit / kSeeds;
			pu_ratio[m] += r.purchases[m] / r.point_purchases / kSeeds;
		}
		good_both += both;
	}
	double point40 = 0.0, ra40[2] = {0, 0};
	for (const auto &r : rows.at(40.0)) {
		bool both = true;
		for (int m = 0; m < 2; ++m) {
			const bool ok = r.point_profit < r.profit[m];
			bad[m] += ok;
			both = both && ok;
			ra40[m] += r.profit[m] / kSeeds;
		}
		bad_both += both;
		point40 += r.point_profit / kSeeds;
	}
	std::ostringstream d;
	d << "sigma=5 seeds meeting purchases<=0.5x and profit>=0.7x point: conservative " << good[0] << "/20, aggressive "
	  << good[1] << "/20, both " << good_both << "/20 (mean profit ratio " << fmt(pr_ratio[0], 3) << "/"
	  << fmt(pr_ratio[1], 3) << ", purchase ratio " << fmt(pu_ratio[0], 3) << "/" << fmt(pu_ratio[1], 3)
	  << "); sigma=40 seeds with point profit below risk-averse: conservative " << bad[0] << "/20, aggressive "
	  << bad[1] << "/20, both " << bad_both << "/20 (mean profit point " << fmt(point40, 0) << ", conservative "
	  << fmt(ra40[0], 0) << ", aggressive " << fmt(ra40[1], 0) << ")";
	return {good_both >= kNeeded && bad_both >= kNeeded, d.str(), 300.0};
}

// Optional part of 5: row ordering on a user-supplied hourly NYC price CSV.
// Counts toward the overall result only when the file is supplied.
bool real_data_ordering() {
	const char *path = std::getenv("RTARB_NYISO_CSV");
	if (!path || !*path) {
		std::cout << "SKIP [5b] real-data ordering: set RTARB_NYISO_CSV to an hourly timestamp,price CSV to enable\n";
		return true;
	}
	const auto t0 = Clock::now();
	RunConfig cfg;
	cfg.data.csv = path;
	if (const char *c = std::getenv("RTARB_NYISO_PRICE_COLUMN")) cfg.data.columns.price = c;
	if (const char *c = std::getenv("RTARB_NYISO_TIMESTAMP_COLUMN")) cfg.data.columns.timestamp = c;
	cfg.policy.first_step_only = true;
	bool pass = true;
	std::string detail;
	try {
		const RunSeeds seeds = derive_run_seeds(cfg);
		const PriceSeries series = load_series(cfg, seeds);
		const DatasetSplit split = resolve_split(cfg, series.size(), cfg.horizon);
		const BacktestConfig bcfg = backtest_config(cfg, seeds);
		// Expected orders, best first: strategy indices into kAllStrategies.
		const std::map<double, std::pair<std::vector<int>, std::vector<int>>> expected{
		    {5.0, {{0, 1, 3, 2}, {1, 0, 3, 2}}},
		    {40.0, {{0, 3, 2, 1}, {1, 0, 3, 2}}},
		};
		for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
			const double sigma = cfg.sigmas[i];
			const auto res = run_backtests(series, split, forecaster_config(cfg, seeds, i, cfg.horizon), bcfg, kAllStrategies);
			std::vector<int> by_profit{0, 1, 2, 3}, by_purchases{0, 1, 2, 3};
			std::sort(by_profit.begin(), by_profit.end(),
			          [&](int a, int b) { return res[a].totals.total_profit > res[b].totals.total_profit; });
			std::sort(by_purchases.begin(), by_purchases.end(),
			          [&](int a, int b) { return res[a].totals.total_purchases > res[b].totals.total_purchases; });
			const auto &want = expected.at(sigma);
			const bool ok = by_profit == want.first && by_purchases == want.second;
			pass = pass && ok;
			detail += "sigma=" + fmt(sigma, 0) + (ok ? " ordering matches " : " ordering differs ");
		}
	} catch (const std::exception &e) {
		pass = false;
		detail = e.what();
	}
	const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
	std::cout << (pass ? "PASS" : "FAIL") << " [5b] real-data ordering: " << detail << "(" << fmt(secs, 1) << " s)\n";
	return pass;
}

// 6: the module property suites, plus the two >= 1000-case properties rerun here.
Outcome invariant_suites() {
	std::size_t suites_ok = 0, suites = 0;
	std::string failed;
	std::istringstream list(RTARB_UNIT_TEST_BINARIES);
	std::string bin;
	while (std::getline(list, bin, ',')) {
		++suites;
		const std::string cmd = "\"" + bin + "\" --minimal > /dev/null 2>&1";
		if (std::system(cmd.c_str()) == 0) {
			++suites_ok;
		} else {
			failed += " " + fs::path(bin).filename().string();
		}
	}

	std::mt19937_64 rng(77);
	std::size_t feasible = 0;
	constexpr std::size_t kCases = 1000;
	for (std::size_t i = 0; i < kCases; ++i) {
		const auto prices = testing::random_prices(rng, 1 + rng() % 24, -50.0, 300.0);
		const StorageParams p = testing::random_storage(rng);
		feasible += validate_schedule(optimize_schedule(prices, p), p, prices).empty();
	}
	std::size_t aggregation_ok = 0;
	for (std::size_t i = 0; i < kCases; ++i) {
		const StorageParams p = testing::random_storage(rng);
		const ArbitrageSolver solver(p, {});
		const auto ivs = testing::random_intervals(rng, 1 + rng() % 6);
		PolicyConfig cfg;
		cfg.samples = 1 + rng() % 8;
		cfg.seed = rng();
		std::vector<Schedule> samples;
		for (std::size_t k = 0; k < cfg.samples; ++k) {
			std::mt19937_64 srng(derive_seed(cfg.seed, 0, k));
			samples.push_back(solver.solve(sample_scenario(ivs, srng), p.initial_soc));
		}
		const auto cons = aggregate(samples, PolicyMode::Conservative, cfg.decision_tolerance);
		const auto aggr = aggregate(samples, PolicyMode::Aggressive, cfg.decision_tolerance);
		bool ok = true;
		for (std::size_t t = 0; t < ivs.size(); ++t) {
			ok = ok && cons[t].action == aggr[t].action && cons[t].quantity <= aggr[t].quantity;
			for (const auto &s : samples) {
				if (cons[t].action == ActionKind::Charge) ok = ok && s.charge[t] > cfg.decision_tolerance;
				if (cons[t].action == ActionKind::Discharge) ok = ok && s.discharge[t] > cfg.decision_tolerance;
			}
		}
		cfg.mode = i % 2 ? PolicyMode::Aggressive : PolicyMode::Conservative;
		const auto r = run_policy(ivs, solver, p.initial_soc, cfg);
		ok = ok && validate_schedule(r.executed, p, std::vector<double>(ivs.size(), 1.0)).empty();
		aggregation_ok += ok;
	}
	return {suites_ok == suites && feasible == kCases && aggregation_ok == kCases,
	        std::to_string(suites_ok) + "/" + std::to_string(suites) + " module suites pass" +
	            (failed.empty() ? "" : " (failed:" + failed + ")") + "; schedule feasibility " + std::to_string(feasible) +
	            "/1000; aggregation and clipped execution " + std::to_string(aggregation_ok) + "/1000",
	        0.0};
}

// 7: a backtest rerun from its own manifest reproduces summary.csv byte for byte.
Outcome determinism() {
	testing::TempDir dir("acceptance");
	const auto first = dir.path() / "first", second = dir.path() / "second", third = dir.path() / "third";
	std::ostringstream out, err;
	const std::vector<std::string> base{"backtest",
	                                    "--set",
	                                    "data.synthetic.length=1061",
	                                    "--set",
	                                    "seed=7",
	                                    "-o",
	                                    first.string()};
	if (cli::run(base, out, err) != 0) return {false, "first run failed: " + err.str(), 0.0};
	const std::string manifest = (first / "run_manifest.json").string();
	if (cli::run({"backtest", "-c", manifest, "-o", second.string()}, out, err) != 0 ||
	    cli::run({"backtest", "-c", manifest, "-o", third.string()}, out, err) != 0) {
		return {false, "manifest rerun failed: " + err.str(), 0.0};
	}
	const auto a = read_file(first / "summary.csv"), b = read_file(second / "summary.csv"),
	           c = read_file(third / "summary.csv");
	const bool same = a == b && b == c;
	const bool bundles = read_file(first / "sigma_40" / "steps.csv") == read_file(second / "sigma_40" / "steps.csv");
	return {same && bundles,
	        std::string("summary.csv ") + (same ? "identical" : "differs") + " across 3 runs (" +
	            std::to_string(a.size()) + " bytes); steps.csv " + (bundles ? "identical" : "differs"),
	        0.0};
}

bool report(int id, const char *name, const Outcome &o, double secs) {
	const bool in_time = o.budget_s <= 0.0 || secs < o.budget_s;
	const bool pass = o.pass && in_time;
	std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " (" << fmt(secs, 2)
	          << " s" << (o.budget_s > 0 ? ", budget " + fmt(o.budget_s, 0) + " s" : std::string()) << ")\n";
	std::cout.flush();
	return pass;
}

template <class F>
auto timed(F &&f) {
	const auto t0 = Clock::now();
	auto result = f();
	return std::make_pair(std::move(result), std::chrono::duration<double>(Clock::now() - t0).count());
}

} // namespace

int main() {
	bool all = true;
	{
		const auto [pair, secs] = timed(coverage_and_width);
		all &= report(1, "coverage at horizon 1", pair.first, secs);
		all &= report(3, "width grows with offset", pair.second, secs);
	}
	{
		const auto [o, secs] = timed(regime_shift);
		all &= report(2, "regime shift, ACI vs PID", o, secs);
	}
	{
		const auto [o, secs] = timed(oracle_equivalence);
		all &= report(4, "DP-oracle equivalence", o, secs);
	}
	{
		const auto [o, secs] = timed(policy_direction);
		all &= report(5, "policy direction, 1-year backtests", o, secs);
		all &= real_data_ordering();
	}
	{
		const auto [o, secs] = timed(invariant_suites);
		all &= report(6, "invariant suites", o, secs);
	}
	{
		const auto [o, secs] = timed(determinism);
		all &= report(7, "manifest determinism", o, secs);
	}
	std::cout << (all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << '\n';
	return all ? 0 : 1;
}
