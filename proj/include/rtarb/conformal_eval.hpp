#pragma once

#include "rtarb/conformal.hpp"
#include "rtarb/market_data.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rtarb {

/// Scores truth[s + h] - forecast(s, h) for every origin s whose target
/// s + h falls inside the calibration block.
std::vector<double> calibration_scores(const PriceSeries &truth, const ForecastPanel &panel,
                                       const DatasetSplit &split, std::size_t offset);

enum class IntervalMethod { Pid, Aci };

/// Intervals issued over the test origins [calibration - 1, test_end - 1),
/// origin-major with `horizon` offsets per origin.
struct IntervalLog {
	std::size_t horizon = 0;
	std::size_t first_origin = 0;
	std::size_t origin_count = 0;
	std::vector<double> point;
	std::vector<double> realized;
	std::vector<PredictionInterval> pid;
	std::vector<PredictionInterval> aci; // empty unless ACI was requested
	std::vector<double> clamp_scale;     // per offset: 0.99 quantile of |calibration residual|

	std::size_t index(std::size_t origin, std::size_t offset) const;
	std::span<const PredictionInterval> window(std::size_t origin, IntervalMethod method = IntervalMethod::Pid) const;
	std::span<const double> point_window(std::size_t origin) const;
	const std::vector<PredictionInterval> &intervals(IntervalMethod method) const;

	std::vector<double> coverage_by_offset(IntervalMethod method = IntervalMethod::Pid) const;
	double overall_coverage(IntervalMethod method = IntervalMethod::Pid) const;
	HorizonWidths widths(IntervalMethod method = IntervalMethod::Pid) const;
	std::size_t infinite_count(IntervalMethod method) const;
};

/// Streams the test range through one independent (upper, lower) tracker pair
/// per offset. At origin t every score realized at index t is fed to its
/// offset's trackers before the intervals for t are issued, so offset h sees
/// scores with an h-step lag.
IntervalLog run_conformal(const PriceSeries &truth, const ForecastPanel &panel, const DatasetSplit &split,
                          const TrackerConfig &cfg, const std::optional<AciConfig> &aci = std::nullopt);

/// CSV: origin_index,offset,point_forecast,lower,upper,realized,covered
std::string interval_csv_text(const IntervalLog &log, IntervalMethod method = IntervalMethod::Pid);

} // namespace rtarb
