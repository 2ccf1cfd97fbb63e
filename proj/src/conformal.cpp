#include "rtarb/conformal.hpp"

#include "rtarb/error.hpp"
#include "rtarb/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rtarb {

double signed_residual(double truth, double forecast) {
	if (!std::isfinite(truth) || !std::isfinite(forecast)) {
		throw std::invalid_argument("signed_residual: non-finite input");
	}
	return truth - forecast;
}

void TrackerConfig::validate() const {
	if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("tracker alpha must lie in (0, 1)");
	if (!(integral_gain > 0.0) || !std::isfinite(integral_gain)) throw ConfigError("integral gain must be > 0");
	if (scorecaster == Scorecaster::RollingQuantile && window < 1) throw ConfigError("scorecaster window must be >= 1");
	if (saturation == Saturation::Tangent) {
		if (!(saturation_c > 0.0)) throw ConfigError("tangent saturation needs c > 0");
		if (!(saturation_exponent >= 0.0 && saturation_exponent < 1.0)) {
			throw ConfigError("saturation exponent must lie in [0, 1)");
		}
		if (!(saturation_b >= 0.0 && saturation_b <= std::tan(1.0))) {
			throw ConfigError("tangent saturation b must lie in [0, tan(1)]");
		}
	}
}

SaturationContract saturation_contract(const TrackerConfig &cfg) {
	if (cfg.saturation == Saturation::Linear) return {0.0, 0.0, 0.0};
	return {cfg.saturation_b, cfg.saturation_c, cfg.saturation_exponent};
}

double saturate(double integral, std::uint64_t t, const TrackerConfig &cfg) {
	if (cfg.saturation == Saturation::Linear) return integral;
	constexpr double limit = 1.5707963267948966 - 1e-3;
	const double scale = cfg.saturation_c * std::pow(static_cast<double>(std::max<std::uint64_t>(t, 1)),
	                                                 cfg.saturation_exponent);
	return std::tan(std::clamp(integral / scale, -limit, limit));
}

QuantileTracker::QuantileTracker(Side side, double side_alpha, double initial_quantile, double gain_scale,
                                 std::vector<double> history, const TrackerConfig &cfg)
    : side_(side), side_alpha_(side_alpha), q_base_(initial_quantile), q_(initial_quantile),
      gain_scale_(gain_scale), cfg_(cfg) {
	if (!(side_alpha >= 0.0 && side_alpha < 1.0)) throw std::invalid_argument("side_alpha must lie in [0, 1)");
	if (!std::isfinite(initial_quantile) || !std::isfinite(gain_scale) || gain_scale < 0.0) {
		throw std::invalid_argument("tracker needs finite initial quantile and non-negative gain scale");
	}
	const std::size_t keep = cfg_.scorecaster == Scorecaster::RollingQuantile ? cfg_.window : 0;
	const std::size_t skip = history.size() > keep ? history.size() - keep : 0;
	history_.assign(history.begin() + static_cast<std::ptrdiff_t>(skip), history.end());
}

double QuantileTracker::err_integral() const noexcept {
	return static_cast<double>(misses_) - side_alpha_ * static_cast<double>(steps_);
}

double QuantileTracker::scorecast() {
	if (cfg_.scorecaster == Scorecaster::None || history_.empty()) return q_base_;
	scratch_.assign(history_.begin(), history_.end());
	const double level = side_ == Side::Upper ? 1.0 - side_alpha_ : side_alpha_;
	return empirical_quantile_inplace(scratch_, level);
}

double QuantileTracker::step(double score) {
	if (!std::isfinite(score)) throw std::invalid_argument("tracker step: non-finite score");
	last_missed_ = side_ == Side::Upper ? score > q_ : score < q_;
	++steps_;
	if (last_missed_) ++misses_;

	if (cfg_.scorecaster == Scorecaster::RollingQuantile) {
		history_.push_back(score);
		while (history_.size() > cfg_.window) history_.pop_front();
	}
	const double correction = cfg_.integral_gain * gain_scale_ * saturate(err_integral(), steps_, cfg_);
	q_ = side_ == Side::Upper ? scorecast() + correction : scorecast() - correction;
	return q_;
}

QuantileTracker initialize_tracker(std::span<const double> calibration_scores, const TrackerConfig &cfg, Side side) {
	cfg.validate();
	if (calibration_scores.size() < 10) {
		throw DataError(DataErrorKind::TooFewScores,
		                "need >= 10 calibration scores, got " + std::to_string(calibration_scores.size()));
	}
	const double side_alpha = cfg.side_alpha();
	const double level = side == Side::Upper ? 1.0 - side_alpha : side_alpha;
	const double q0 = empirical_quantile(calibration_scores, level);
	std::vector<double> magnitudes(calibration_scores.size());
	std::transform(calibration_scores.begin(), calibration_scores.end(), magnitudes.begin(),
	               [](double s) { return std::abs(s); });
	const double gain_scale = empirical_quantile_inplace(magnitudes, 0.9);
	return QuantileTracker(side, side_alpha, q0, gain_scale,
	                       std::vector<double>(calibration_scores.begin(), calibration_scores.end()), cfg);
}

bool PredictionInterval::finite() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }

PredictionInterval build_interval(double point_forecast, double q_lower, double q_upper) {
	if (q_lower > q_upper) {
		const double mid = 0.5 * (q_lower + q_upper);
		q_lower = mid;
		q_upper = mid;
	}
	return {point_forecast + q_lower, point_forecast + q_upper};
}

AciTracker::AciTracker(std::vector<double> calibration_scores, const AciConfig &cfg)
    : sorted_(std::move(calibration_scores)), target_(cfg.alpha), gamma_(cfg.gamma), alpha_t_(cfg.alpha) {
	if (!(gamma_ > 0.0)) throw ConfigError("ACI gamma must be > 0");
	if (!(target_ > 0.0 && target_ < 1.0)) throw ConfigError("ACI alpha must lie in (0, 1)");
	if (sorted_.empty()) throw DataError(DataErrorKind::TooFewScores, "ACI needs calibration scores");
	std::sort(sorted_.begin(), sorted_.end());
}

double AciTracker::quantile() const {
	if (alpha_t_ <= 0.0) return std::numeric_limits<double>::infinity();
	if (alpha_t_ >= 1.0) return -std::numeric_limits<double>::infinity();
	return quantile_sorted(sorted_, 1.0 - alpha_t_);
}

double AciTracker::step(bool miss) {
	alpha_t_ += gamma_ * (target_ - (miss ? 1.0 : 0.0));
	return quantile();
}

PredictionInterval AciTracker::interval(double point_forecast, double quantile) {
	if (quantile == -std::numeric_limits<double>::infinity()) return {point_forecast, point_forecast};
	return {point_forecast - quantile, point_forecast + quantile};
}

double coverage(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
	if (intervals.size() != truths.size()) throw std::invalid_argument("coverage: length mismatch");
	if (intervals.empty()) throw std::invalid_argument("coverage: empty input");
	std::size_t hits = 0;
	for (std::size_t i = 0; i < intervals.size(); ++i) {
		if (intervals[i].contains(truths[i])) ++hits;
	}
	return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

HorizonWidths mean_width_by_horizon(std::span<const PredictionInterval> intervals, std::size_t horizon) {
	if (intervals.empty() || horizon == 0) throw std::invalid_argument("mean_width_by_horizon: empty panel");
	if (intervals.size() % horizon != 0) throw std::invalid_argument("mean_width_by_horizon: ragged panel");
	HorizonWidths out;
	out.mean_width.assign(horizon, 0.0);
	out.finite_count.assign(horizon, 0);
	out.excluded_infinite.assign(horizon, 0);
	for (std::size_t i = 0; i < intervals.size(); ++i) {
		const std::size_t h = i % horizon;
		if (intervals[i].finite()) {
			out.mean_width[h] += intervals[i].width();
			++out.finite_count[h];
		} else {
			++out.excluded_infinite[h];
		}
	}
	for (std::size_t h = 0; h < horizon; ++h) {
		out.mean_width[h] = out.finite_count[h] > 0 ? out.mean_width[h] / static_cast<double>(out.finite_count[h])
		                                            : std::numeric_limits<double>::quiet_NaN();
	}
	return out;
}

} // namespace rtarb
