#pragma once

#include "rtarb/backtest.hpp"
#include "rtarb/conformal.hpp"
#include "rtarb/market_data.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rtarb {

inline constexpr const char *kVersion = "0.1.0";

struct DataConfig {
	std::optional<std::filesystem::path> csv; // synthetic when unset
	ColumnMap columns;
	SyntheticProfile profile;
	std::size_t length = 9101; // 336 calibration + 8760 test + horizon - 1
};

struct SplitConfig {
	std::size_t calibration = 336;
	std::optional<std::size_t> test; // largest that fits when unset
};

struct RegimeShift {
	std::size_t start = 0; // offset into the test block
	std::size_t length = 50;
	double magnitude = 100.0;
};

struct ConformalConfig {
	TrackerConfig tracker;
	std::size_t eval_horizon = 24;
	bool aci_enabled = true;
	AciConfig aci;
	std::optional<RegimeShift> regime_shift;
};

struct RunConfig {
	DataConfig data;
	SplitConfig split;
	std::vector<double> sigmas{5.0, 40.0};
	std::size_t lookback = 24;
	double horizon_growth = 0.02;
	std::size_t horizon = 6;
	ConformalConfig conformal;
	PolicyConfig policy;
	SolverConfig solver;
	StorageParams storage;
	std::vector<StrategyKind> strategies{kAllStrategies, kAllStrategies + 4};
	std::filesystem::path output_dir;
	std::uint64_t seed = 2024;

	/// Throws ConfigError on any invalid nested value.
	void validate() const;
};

/// Seeds derived from RunConfig::seed. Recorded in every manifest.
struct RunSeeds {
	std::uint64_t data = 0;
	std::vector<std::uint64_t> forecaster; // one per sigma
	std::uint64_t policy = 0;
};

RunSeeds derive_run_seeds(const RunConfig &cfg);

/// Output directory used when the config leaves it empty: $RTARB_OUTPUT_ROOT/<command>,
/// or results/<command>.
std::filesystem::path default_output_dir(const std::string &command);

nlohmann::json to_json(const RunConfig &cfg);

/// Strict: unknown keys and wrong types are ConfigErrors. Missing keys keep
/// their defaults. A run manifest is accepted and its "config" object used.
RunConfig run_config_from_json(const nlohmann::json &doc);

RunConfig load_run_config(const std::filesystem::path &path);

/// Applies "a.b.c=value" to `doc`. The value is parsed as JSON when possible
/// and kept as a string otherwise.
void apply_override(nlohmann::json &doc, const std::string &assignment);

/// Series named by the data section: the CSV, or the synthetic profile at
/// seeds.data.
PriceSeries load_series(const RunConfig &cfg, const RunSeeds &seeds);

DatasetSplit resolve_split(const RunConfig &cfg, std::size_t series_length, std::size_t horizon);

BacktestConfig backtest_config(const RunConfig &cfg, const RunSeeds &seeds);
SyntheticForecasterConfig forecaster_config(const RunConfig &cfg, const RunSeeds &seeds, std::size_t sigma_index,
                                            std::size_t horizon);

nlohmann::json manifest_json(const RunConfig &cfg, const RunSeeds &seeds, const std::string &command);

} // namespace rtarb
