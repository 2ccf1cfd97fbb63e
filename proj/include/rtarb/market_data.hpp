#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rtarb {

using Timestamp = std::chrono::sys_seconds;

/// Uniformly spaced price observations in $/MWh. Index i is observed at
/// start_time + i * step. Immutable once constructed.
class PriceSeries {
public:
	/// Throws DataError(InvalidSeries) unless prices has at least two finite
	/// entries and step is positive.
	PriceSeries(Timestamp start_time, std::chrono::seconds step, std::vector<double> prices);

	Timestamp start_time() const noexcept { return start_time_; }
	std::chrono::seconds step() const noexcept { return step_; }
	std::span<const double> prices() const noexcept { return prices_; }
	std::size_t size() const noexcept { return prices_.size(); }
	double operator[](std::size_t i) const { return prices_[i]; }
	Timestamp time_at(std::size_t i) const { return start_time_ + step_ * static_cast<std::int64_t>(i); }

private:
	Timestamp start_time_;
	std::chrono::seconds step_;
	std::vector<double> prices_;
};

/// Calibration block [0, calibration) followed by the test block
/// [calibration, calibration + test).
struct DatasetSplit {
	std::size_t calibration = 336;
	std::size_t test = 0;

	std::size_t test_begin() const noexcept { return calibration; }
	std::size_t test_end() const noexcept { return calibration + test; }
	// Throws DataError(InvalidSeries) when a block is empty or the split overruns the series.
	void validate(std::size_t series_length) const;
};

/// Largest split that still leaves a full forecast window for the last test step.
DatasetSplit default_split(std::size_t series_length, std::size_t horizon, std::size_t calibration = 336);

struct ColumnMap {
	std::string timestamp = "timestamp";
	std::string price = "price";
};

Timestamp parse_timestamp(const std::string &text);
std::string format_timestamp(Timestamp t);

PriceSeries load_price_csv(const std::filesystem::path &path, const ColumnMap &columns = {},
                           std::chrono::seconds expected_step = std::chrono::hours(1));
void write_price_csv(const PriceSeries &series, const std::filesystem::path &path, const ColumnMap &columns = {});
std::string price_csv_text(const PriceSeries &series, const ColumnMap &columns = {});

struct SyntheticProfile {
	double base = 100.0;
	double daily_amplitude = 10.0;
	double ar_coefficient = 0.5;
	double noise_sd = 12.0;
	double spike_probability = 0.01;
	double spike_magnitude = 350.0;
	Timestamp start_time = std::chrono::sys_days{std::chrono::year{2023} / 1 / 1};

	void validate() const;
};

/// Hourly series: base + daily sinusoid (trough 04:00, peak 16:00) + AR(1)
/// noise + occasional upward spikes of size magnitude * U(0.5, 1.5).
PriceSeries generate_synthetic_series(std::size_t length, std::uint64_t seed, const SyntheticProfile &profile = {});

/// Copy of `series` with `magnitude` added to the prices in [start, start + length).
PriceSeries with_level_shift(const PriceSeries &series, std::size_t start, std::size_t length, double magnitude);

struct SyntheticForecasterConfig {
	double sigma = 5.0;
	std::size_t horizon = 6;
	std::size_t lookback = 24; // unused by the synthetic forecaster
	// Noise sd at offset h is sigma * (1 + horizon_growth * (h - 1)).
	double horizon_growth = 0.02;
	std::uint64_t seed = 0;

	void validate() const;
	double sigma_at(std::size_t offset) const noexcept {
		return sigma * (1.0 + horizon_growth * static_cast<double>(offset - 1));
	}
};

/// Point forecasts for origins [first_origin, first_origin + origin_count).
/// value(t, h) is the forecast made at t for index t + h, h in [1, horizon].
class ForecastPanel {
public:
	ForecastPanel(std::size_t first_origin, std::size_t horizon, std::vector<double> values);

	std::size_t first_origin() const noexcept { return first_origin_; }
	std::size_t origin_count() const noexcept { return horizon_ == 0 ? 0 : values_.size() / horizon_; }
	std::size_t end_origin() const noexcept { return first_origin_ + origin_count(); }
	std::size_t horizon() const noexcept { return horizon_; }
	bool has_origin(std::size_t t) const noexcept { return t >= first_origin_ && t < end_origin(); }

	double value(std::size_t origin, std::size_t offset) const;
	std::span<const double> window(std::size_t origin) const;

private:
	std::size_t first_origin_;
	std::size_t horizon_;
	std::vector<double> values_;
};

/// Forecasts for every origin in [0, split.test_end() - 1): truth at t + h plus
/// independent Gaussian noise. Throws DataError(HorizonPastEnd) when the last
/// window would run past the series.
ForecastPanel synthetic_forecast(const PriceSeries &series, const DatasetSplit &split,
                                 const SyntheticForecasterConfig &cfg);

} // namespace rtarb
