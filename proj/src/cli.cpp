#include "rtarb/cli.hpp"

#include "rtarb/backtest.hpp"
#include "rtarb/config.hpp"
#include "rtarb/conformal_eval.hpp"
#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"
#include "rtarb/market_data.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace rtarb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
	std::string config;
	std::vector<std::string> overrides;
	std::string output;
};

void add_common(CLI::App *cmd, CommonOptions &opts) {
	cmd->add_option("-c,--config", opts.config, "JSON config file or run manifest");
	cmd->add_option("-s,--set", opts.overrides, "Override a config key, e.g. --set policy.samples=50")->take_all();
	cmd->add_option("-o,--output", opts.output, "Output directory (overrides output_dir)");
}

RunConfig resolve_config(const CommonOptions &opts, const std::string &command) {
	json doc = json::object();
	if (!opts.config.empty()) {
		if (!fs::exists(opts.config)) throw ConfigError("config file not found: " + opts.config);
		try {
			doc = json::parse(read_file(opts.config));
		} catch (const json::parse_error &e) {
			throw ConfigError("cannot parse " + opts.config + ": " + e.what());
		}
		if (doc.is_object() && doc.contains("config") && doc.contains("version")) doc = doc.at("config");
	}
	for (const auto &o : opts.overrides) apply_override(doc, o);
	if (!opts.output.empty()) doc["output_dir"] = opts.output;
	RunConfig cfg = run_config_from_json(doc);
	if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir(command);
	return cfg;
}

std::string sigma_dir(double sigma) { return "sigma_" + format_double(sigma); }

void write_manifest(const RunConfig &cfg, const RunSeeds &seeds, const std::string &command) {
	write_file_atomic(cfg.output_dir / "run_manifest.json", manifest_json(cfg, seeds, command).dump(2) + "\n");
}

int cmd_generate(const RunConfig &cfg, std::ostream &out) {
	if (cfg.data.csv) throw ConfigError("generate needs a synthetic profile; data.csv is set");
	const RunSeeds seeds = derive_run_seeds(cfg);
	const PriceSeries series = load_series(cfg, seeds);
	const fs::path path = cfg.output_dir / "prices.csv";
	write_price_csv(series, path, cfg.data.columns);
	write_manifest(cfg, seeds, "generate");

	const auto &p = series.prices();
	const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
	double ss = 0.0;
	for (double x : p) ss += (x - mean) * (x - mean);
	const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
	out << "wrote " << path.string() << '\n'
	    << "rows " << p.size() << "  mean " << format_fixed(mean, 3) << "  sd "
	    << format_fixed(std::sqrt(ss / static_cast<double>(p.size())), 3) << "  min " << format_fixed(*lo, 3) << "  max "
	    << format_fixed(*hi, 3) << '\n';
	return kOk;
}

std::string coverage_report_csv(const std::vector<std::pair<double, IntervalLog>> &logs) {
	std::string text = "sigma,method,offset,coverage,mean_width,finite_intervals,infinite_intervals\n";
	for (const auto &[sigma, log] : logs) {
		for (auto method : {IntervalMethod::Pid, IntervalMethod::Aci}) {
			if (method == IntervalMethod::Aci && log.aci.empty()) continue;
			const auto cov = log.coverage_by_offset(method);
			const auto w = log.widths(method);
			const char *name = method == IntervalMethod::Pid ? "pid" : "aci";
			for (std::size_t h = 0; h < log.horizon; ++h) {
				const std::size_t finite = w.finite_count[h];
				text += format_fixed(sigma, 3) + ',' + name + ',' + std::to_string(h + 1) + ',' + format_fixed(cov[h], 6) +
				        ',' + (finite ? format_fixed(w.mean_width[h], 6) : std::string()) + ',' +
				        std::to_string(finite) + ',' + std::to_string(log.origin_count - finite) + '\n';
			}
		}
	}
	return text;
}

int cmd_conformal_eval(const RunConfig &cfg, std::ostream &out) {
	const RunSeeds seeds = derive_run_seeds(cfg);
	const PriceSeries series = load_series(cfg, seeds);
	const std::size_t H = cfg.conformal.eval_horizon;
	const DatasetSplit split = resolve_split(cfg, series.size(), H);
	// Forecasts come from the unshifted series; only the realized prices move.
	PriceSeries realized = series;
	if (const auto &rs = cfg.conformal.regime_shift) {
		if (rs->start >= split.test) throw ConfigError("conformal.regime_shift.start lies past the test block");
		realized = with_level_shift(series, split.test_begin() + rs->start, rs->length, rs->magnitude);
	}
	const std::optional<AciConfig> aci = cfg.conformal.aci_enabled ? std::optional(cfg.conformal.aci) : std::nullopt;

	std::vector<std::pair<double, IntervalLog>> logs;
	for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
		const auto fc = forecaster_config(cfg, seeds, i, H);
		const ForecastPanel panel = synthetic_forecast(series, split, fc);
		IntervalLog log = run_conformal(realized, panel, split, cfg.conformal.tracker, aci);
		const fs::path dir = cfg.output_dir / sigma_dir(fc.sigma);
		write_file_atomic(dir / "intervals.csv", interval_csv_text(log));
		if (aci) write_file_atomic(dir / "intervals_aci.csv", interval_csv_text(log, IntervalMethod::Aci));
		logs.emplace_back(fc.sigma, std::move(log));
	}
	write_file_atomic(cfg.output_dir / "coverage_report.csv", coverage_report_csv(logs));
	write_manifest(cfg, seeds, "conformal-eval");

	for (const auto &[sigma, log] : logs) {
		const auto cov = log.coverage_by_offset();
		const auto w = log.widths();
		out << "sigma " << format_fixed(sigma, 3) << "  coverage " << format_fixed(log.overall_coverage(), 4)
		    << "  offset 1: coverage " << format_fixed(cov.front(), 4) << " width " << format_fixed(w.mean_width.front(), 3)
		    << "  offset " << H << ": coverage " << format_fixed(cov.back(), 4) << " width "
		    << format_fixed(w.mean_width.back(), 3) << '\n';
		if (aci) {
			out << "  aci coverage " << format_fixed(log.overall_coverage(IntervalMethod::Aci), 4) << "  infinite intervals "
			    << log.infinite_count(IntervalMethod::Aci) << "  pid infinite intervals "
			    << log.infinite_count(IntervalMethod::Pid) << '\n';
		}
	}
	out << "wrote " << (cfg.output_dir / "coverage_report.csv").string() << '\n';
	return kOk;
}

int cmd_backtest(const RunConfig &cfg, std::ostream &out) {
	const RunSeeds seeds = derive_run_seeds(cfg);
	const PriceSeries series = load_series(cfg, seeds);
	const DatasetSplit split = resolve_split(cfg, series.size(), cfg.horizon);
	const BacktestConfig bcfg = backtest_config(cfg, seeds);

	std::vector<SummaryRow> rows;
	for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) {
		const auto fc = forecaster_config(cfg, seeds, i, cfg.horizon);
		const auto results = run_backtests(series, split, fc, bcfg, cfg.strategies);
		write_result_bundle(results, cfg.output_dir / sigma_dir(fc.sigma));
		const auto part = summarize(results);
		rows.insert(rows.end(), part.begin(), part.end());
	}
	write_file_atomic(cfg.output_dir / "summary.csv", summary_csv_text(rows));
	write_manifest(cfg, seeds, "backtest");
	out << render_summary_table(rows) << "wrote " << (cfg.output_dir / "summary.csv").string() << '\n';
	return kOk;
}

int cmd_report(const std::string &bundle, const std::string &format, std::ostream &out) {
	const fs::path path = fs::path(bundle) / "summary.csv";
	if (!fs::exists(path)) throw DataError(DataErrorKind::MissingFile, "no such file: " + path.string());
	const auto rows = parse_summary_csv(read_file(path));
	out << (format == "csv" ? summary_csv_text(rows) : render_summary_table(rows));
	return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
	CLI::App app{"Conformal risk-averse storage arbitrage toolkit", "rtarb"};
	app.require_subcommand(1);
	app.set_version_flag("--version", kVersion);

	CommonOptions gen_opts, eval_opts, bt_opts;
	auto *gen = app.add_subcommand("generate", "Write a synthetic price CSV");
	add_common(gen, gen_opts);
	auto *eval = app.add_subcommand("conformal-eval", "Run the interval trackers and write a coverage report");
	add_common(eval, eval_opts);
	auto *bt = app.add_subcommand("backtest", "Run the arbitrage strategies and write a result bundle");
	add_common(bt, bt_opts);
	std::string bundle, format = "table";
	auto *rep = app.add_subcommand("report", "Re-render summary.csv from an existing bundle");
	rep->add_option("bundle", bundle, "Bundle directory")->required();
	rep->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

	std::vector<std::string> reversed(args.rbegin(), args.rend());
	try {
		app.parse(reversed);
	} catch (const CLI::CallForHelp &) {
		out << app.help();
		return kOk;
	} catch (const CLI::CallForAllHelp &) {
		out << app.help("", CLI::AppFormatMode::All);
		return kOk;
	} catch (const CLI::CallForVersion &) {
		out << kVersion << '\n';
		return kOk;
	} catch (const CLI::ParseError &e) {
		err << "error: " << e.what() << '\n';
		return kConfigError;
	}

	try {
		if (gen->parsed()) return cmd_generate(resolve_config(gen_opts, "generate"), out);
		if (eval->parsed()) return cmd_conformal_eval(resolve_config(eval_opts, "conformal-eval"), out);
		if (bt->parsed()) return cmd_backtest(resolve_config(bt_opts, "backtest"), out);
		return cmd_report(bundle, format, out);
	} catch (const Error &e) {
		err << "error: " << e.what() << '\n';
		switch (e.category()) {
		case ErrorCategory::Config: return kConfigError;
		case ErrorCategory::Data: return kDataError;
		case ErrorCategory::Runtime: return kRuntimeError;
		}
		return kRuntimeError;
	} catch (const std::exception &e) {
		err << "error: " << e.what() << '\n';
		return kRuntimeError;
	}
}

int run(int argc, char **argv) {
	std::vector<std::string> args(argv + 1, argv + argc);
	return run(args, std::cout, std::cerr);
}

} // namespace rtarb::cli
