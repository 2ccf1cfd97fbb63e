#include "rtarb/market_data.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace rtarb {

using namespace std::chrono;

PriceSeries::PriceSeries(Timestamp start_time, seconds step, std::vector<double> prices)
    : start_time_(start_time), step_(step), prices_(std::move(prices)) {
	if (step_ <= seconds::zero()) throw DataError(DataErrorKind::InvalidSeries, "step must be positive");
	if (prices_.size() < 2) throw DataError(DataErrorKind::InvalidSeries, "series needs at least 2 observations");
	for (std::size_t i = 0; i < prices_.size(); ++i) {
		if (!std::isfinite(prices_[i])) {
			throw DataError(DataErrorKind::InvalidSeries, "non-finite price at index " + std::to_string(i));
		}
	}
}

void DatasetSplit::validate(std::size_t series_length) const {
	if (calibration < 1 || test < 1) {
		throw DataError(DataErrorKind::InvalidSeries, "calibration and test blocks must be non-empty");
	}
	if (calibration + test > series_length) {
		throw DataError(DataErrorKind::InvalidSeries, "split (" + std::to_string(calibration) + " + " +
		                                                  std::to_string(test) + ") exceeds series length " +
		                                                  std::to_string(series_length));
	}
}

DatasetSplit default_split(std::size_t series_length, std::size_t horizon, std::size_t calibration) {
	// last executed index is test_end - 1 and its origin needs indices up to test_end - 2 + horizon
	if (series_length + 1 < calibration + horizon + 1) {
		throw DataError(DataErrorKind::InvalidSeries, "series too short for calibration block and horizon");
	}
	return DatasetSplit{calibration, series_length + 1 - calibration - horizon};
}

namespace {

bool parse_int(std::string_view s, int &out) {
	if (s.empty()) return false;
	const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
	return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

} // namespace

Timestamp parse_timestamp(const std::string &text) {
	const std::string_view s(text);
	auto fail = [&]() -> Timestamp { throw DataError(DataErrorKind::BadTimestamp, "cannot parse '" + text + "'"); };
	if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return fail();
	int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
	if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d) ||
	    !parse_int(s.substr(11, 2), hh) || !parse_int(s.substr(14, 2), mm)) {
		return fail();
	}
	std::size_t pos = 16;
	if (pos < s.size() && s[pos] == ':') {
		if (!parse_int(s.substr(pos + 1, 2), ss)) return fail();
		pos += 3;
		if (pos < s.size() && s[pos] == '.') {
			++pos;
			while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
		}
	}
	int offset_minutes = 0;
	if (pos < s.size()) {
		const char sign = s[pos];
		if (sign == 'Z' && pos + 1 == s.size()) {
			pos = s.size();
		} else if (sign == '+' || sign == '-') {
			auto rest = s.substr(pos + 1);
			int oh = 0, om = 0;
			if (rest.size() == 5 && rest[2] == ':') {
				if (!parse_int(rest.substr(0, 2), oh) || !parse_int(rest.substr(3, 2), om)) return fail();
			} else if (rest.size() == 4) {
				if (!parse_int(rest.substr(0, 2), oh) || !parse_int(rest.substr(2, 2), om)) return fail();
			} else if (rest.size() == 2) {
				if (!parse_int(rest, oh)) return fail();
			} else {
				return fail();
			}
			offset_minutes = (sign == '+' ? 1 : -1) * (oh * 60 + om);
		} else {
			return fail();
		}
	}
	const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
	if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) return fail();
	return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
	const auto dp = floor<days>(t);
	const year_month_day ymd{dp};
	const hh_mm_ss hms{t - dp};
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
	              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
	              static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
	              static_cast<int>(hms.seconds().count()));
	return buf;
}

PriceSeries load_price_csv(const std::filesystem::path &path, const ColumnMap &columns, seconds expected_step) {
	if (!std::filesystem::exists(path)) {
		throw DataError(DataErrorKind::MissingFile, "no such file: " + path.string());
	}
	const std::string text = read_file(path);
	std::istringstream in(text);
	std::string line;
	bool have_header = false;
	while (std::getline(in, line)) {
		if (line.find_first_not_of(" \t\r") != std::string::npos) {
			have_header = true;
			break;
		}
	}
	if (!have_header) throw DataError(DataErrorKind::EmptyFile, path.string() + " is empty");

	const auto header = split_csv_line(line);
	auto column_index = [&](const std::string &name) {
		const auto it = std::find(header.begin(), header.end(), name);
		if (it == header.end()) {
			throw DataError(DataErrorKind::MissingColumn, "column '" + name + "' not found in " + path.string());
		}
		return static_cast<std::size_t>(it - header.begin());
	};
	const std::size_t ts_col = column_index(columns.timestamp);
	const std::size_t price_col = column_index(columns.price);

	std::vector<Timestamp> stamps;
	std::vector<double> prices;
	std::size_t row = 1;
	while (std::getline(in, line)) {
		++row;
		if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
		const auto fields = split_csv_line(line);
		if (fields.size() <= std::max(ts_col, price_col)) {
			throw DataError(DataErrorKind::MissingColumn, "row " + std::to_string(row) + " has too few fields");
		}
		stamps.push_back(parse_timestamp(fields[ts_col]));
		const std::string &p = fields[price_col];
		double value = 0.0;
		const auto res = std::from_chars(p.data(), p.data() + p.size(), value);
		if (p.empty() || res.ec != std::errc{} || res.ptr != p.data() + p.size() || !std::isfinite(value)) {
			throw DataError(DataErrorKind::NonNumericPrice, "row " + std::to_string(row) + ": '" + p + "'");
		}
		prices.push_back(value);
	}
	if (prices.empty()) throw DataError(DataErrorKind::EmptyFile, path.string() + " has no data rows");

	for (std::size_t i = 1; i < stamps.size(); ++i) {
		const auto delta = stamps[i] - stamps[i - 1];
		if (delta != expected_step) {
			throw DataError(DataErrorKind::NonUniformSpacing,
			                "rows " + std::to_string(i + 1) + " -> " + std::to_string(i + 2) + " are " +
			                    std::to_string(delta.count()) + " s apart, expected " +
			                    std::to_string(expected_step.count()) + " s");
		}
	}
	return PriceSeries(stamps.front(), expected_step, std::move(prices));
}

std::string price_csv_text(const PriceSeries &series, const ColumnMap &columns) {
	std::string out = columns.timestamp + "," + columns.price + "\n";
	for (std::size_t i = 0; i < series.size(); ++i) {
		out += format_timestamp(series.time_at(i));
		out += ',';
		out += format_double(series[i]);
		out += '\n';
	}
	return out;
}

void write_price_csv(const PriceSeries &series, const std::filesystem::path &path, const ColumnMap &columns) {
	write_file_atomic(path, price_csv_text(series, columns));
}

void SyntheticProfile::validate() const {
	auto bad = [](const std::string &what) { throw ConfigError("invalid synthetic profile: " + what); };
	if (!std::isfinite(base) || !std::isfinite(daily_amplitude) || !std::isfinite(spike_magnitude)) bad("non-finite level");
	if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) bad("AR coefficient must lie in [0, 1)");
	if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) bad("noise sd must be >= 0");
	if (!(spike_probability >= 0.0 && spike_probability <= 1.0)) bad("spike probability must lie in [0, 1]");
}

PriceSeries generate_synthetic_series(std::size_t length, std::uint64_t seed, const SyntheticProfile &profile) {
	profile.validate();
	if (length < 2) throw ConfigError("synthetic series length must be >= 2");

	std::mt19937_64 rng(seed);
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	constexpr double two_pi = 6.283185307179586476925286766559;

	std::vector<double> prices(length);
	double ar_state = 0.0;
	for (std::size_t t = 0; t < length; ++t) {
		const double hour = static_cast<double>(t % 24);
		const double shape = -std::cos(two_pi * (hour - 4.0) / 24.0);
		ar_state = profile.ar_coefficient * ar_state + profile.noise_sd * gauss(rng);
		const bool spike = unit(rng) < profile.spike_probability;
		const double spike_size = profile.spike_magnitude * (0.5 + unit(rng));
		prices[t] = profile.base + profile.daily_amplitude * shape + ar_state + (spike ? spike_size : 0.0);
	}
	return PriceSeries(profile.start_time, hours(1), std::move(prices));
}

PriceSeries with_level_shift(const PriceSeries &series, std::size_t start, std::size_t length, double magnitude) {
	std::vector<double> prices(series.prices().begin(), series.prices().end());
	const std::size_t end = std::min(prices.size(), start + length);
	for (std::size_t i = std::min(start, end); i < end; ++i) prices[i] += magnitude;
	return PriceSeries(series.start_time(), series.step(), std::move(prices));
}

void SyntheticForecasterConfig::validate() const {
	if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("forecaster sigma must be >= 0");
	if (horizon < 1) throw ConfigError("forecaster horizon must be >= 1");
	if (lookback < 1) throw ConfigError("forecaster lookback must be >= 1");
	if (!(horizon_growth >= 0.0) || !std::isfinite(horizon_growth)) throw ConfigError("horizon_growth must be >= 0");
}

ForecastPanel::ForecastPanel(std::size_t first_origin, std::size_t horizon, std::vector<double> values)
    : first_origin_(first_origin), horizon_(horizon), values_(std::move(values)) {
	if (horizon_ < 1 || values_.size() % horizon_ != 0) {
		throw DataError(DataErrorKind::InvalidSeries, "forecast panel shape mismatch");
	}
	for (double v : values_) {
		if (!std::isfinite(v)) throw DataError(DataErrorKind::InvalidSeries, "non-finite forecast");
	}
}

double ForecastPanel::value(std::size_t origin, std::size_t offset) const {
	if (offset == 0 || offset > horizon_) throw std::out_of_range("forecast offset " + std::to_string(offset) + " out of range");
	return window(origin)[offset - 1];
}

std::span<const double> ForecastPanel::window(std::size_t origin) const {
	if (!has_origin(origin)) throw std::out_of_range("forecast origin " + std::to_string(origin) + " not in panel");
	return std::span<const double>(values_).subspan((origin - first_origin_) * horizon_, horizon_);
}

ForecastPanel synthetic_forecast(const PriceSeries &series, const DatasetSplit &split,
                                 const SyntheticForecasterConfig &cfg) {
	cfg.validate();
	split.validate(series.size());
	const std::size_t origins = split.test_end() - 1;
	const std::size_t H = cfg.horizon;
	if (origins == 0 || origins - 1 + H > series.size() - 1) {
		throw DataError(DataErrorKind::HorizonPastEnd,
		                "origin " + std::to_string(origins - 1) + " with horizon " + std::to_string(H) +
		                    " runs past series end (" + std::to_string(series.size()) + " observations)");
	}

	std::mt19937_64 rng(cfg.seed);
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::vector<double> values(origins * H);
	for (std::size_t t = 0; t < origins; ++t) {
		for (std::size_t h = 1; h <= H; ++h) {
			values[t * H + (h - 1)] = series[t + h] + cfg.sigma_at(h) * gauss(rng);
		}
	}
	return ForecastPanel(0, H, std::move(values));
}

} // namespace rtarb
