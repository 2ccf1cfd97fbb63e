#include "rtarb/conformal_eval.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"
#include "rtarb/quantile.hpp"

#include <cmath>

namespace rtarb {

std::vector<double> calibration_scores(const PriceSeries &truth, const ForecastPanel &panel,
                                       const DatasetSplit &split, std::size_t offset) {
	std::vector<double> scores;
	for (std::size_t s = panel.first_origin(); s + offset < split.calibration && s < panel.end_origin(); ++s) {
		scores.push_back(signed_residual(truth[s + offset], panel.value(s, offset)));
	}
	return scores;
}

std::size_t IntervalLog::index(std::size_t origin, std::size_t offset) const {
	if (origin < first_origin || origin >= first_origin + origin_count || offset < 1 || offset > horizon) {
		throw std::out_of_range("interval log index out of range");
	}
	return (origin - first_origin) * horizon + (offset - 1);
}

const std::vector<PredictionInterval> &IntervalLog::intervals(IntervalMethod method) const {
	return method == IntervalMethod::Pid ? pid : aci;
}

std::span<const PredictionInterval> IntervalLog::window(std::size_t origin, IntervalMethod method) const {
	return std::span<const PredictionInterval>(intervals(method)).subspan(index(origin, 1), horizon);
}

std::span<const double> IntervalLog::point_window(std::size_t origin) const {
	return std::span<const double>(point).subspan(index(origin, 1), horizon);
}

std::vector<double> IntervalLog::coverage_by_offset(IntervalMethod method) const {
	const auto &ivs = intervals(method);
	std::vector<double> out(horizon, 0.0);
	if (origin_count == 0 || ivs.empty()) return out;
	for (std::size_t i = 0; i < ivs.size(); ++i) {
		if (ivs[i].contains(realized[i])) out[i % horizon] += 1.0;
	}
	for (double &c : out) c /= static_cast<double>(origin_count);
	return out;
}

double IntervalLog::overall_coverage(IntervalMethod method) const {
	return coverage(intervals(method), realized);
}

HorizonWidths IntervalLog::widths(IntervalMethod method) const { return mean_width_by_horizon(intervals(method), horizon); }

std::size_t IntervalLog::infinite_count(IntervalMethod method) const {
	std::size_t n = 0;
	for (const auto &iv : intervals(method)) {
		if (!iv.finite()) ++n;
	}
	return n;
}

IntervalLog run_conformal(const PriceSeries &truth, const ForecastPanel &panel, const DatasetSplit &split,
                          const TrackerConfig &cfg, const std::optional<AciConfig> &aci) {
	cfg.validate();
	split.validate(truth.size());
	const std::size_t H = panel.horizon();
	const std::size_t first = split.calibration - 1;
	const std::size_t end = split.test_end() - 1;
	if (panel.first_origin() > 0 || panel.end_origin() < end) {
		throw DataError(DataErrorKind::InvalidSeries, "forecast panel does not cover the split");
	}
	if (end - 1 + H > truth.size() - 1) {
		throw DataError(DataErrorKind::HorizonPastEnd, "test windows run past series end");
	}

	std::vector<QuantileTracker> upper, lower;
	std::vector<AciTracker> aci_trackers;
	IntervalLog log;
	log.horizon = H;
	log.first_origin = first;
	log.origin_count = end - first;
	log.clamp_scale.resize(H);
	for (std::size_t h = 1; h <= H; ++h) {
		const auto scores = calibration_scores(truth, panel, split, h);
		upper.push_back(initialize_tracker(scores, cfg, Side::Upper));
		lower.push_back(initialize_tracker(scores, cfg, Side::Lower));
		std::vector<double> magnitudes(scores.size());
		for (std::size_t i = 0; i < scores.size(); ++i) magnitudes[i] = std::abs(scores[i]);
		log.clamp_scale[h - 1] = empirical_quantile(magnitudes, 0.99);
		if (aci) aci_trackers.emplace_back(std::move(magnitudes), *aci);
	}

	const std::size_t cells = log.origin_count * H;
	log.point.reserve(cells);
	log.realized.reserve(cells);
	log.pid.reserve(cells);
	if (aci) log.aci.reserve(cells);
	std::vector<double> aci_q(H);
	for (std::size_t h = 0; h < H && aci; ++h) aci_q[h] = aci_trackers[h].quantile();

	for (std::size_t t = first; t < end; ++t) {
		for (std::size_t h = 1; h <= H; ++h) {
			if (t < h || t < split.calibration) continue;
			const std::size_t s = t - h; // origin whose offset-h target is realized now
			const double score = signed_residual(truth[t], panel.value(s, h));
			upper[h - 1].step(score);
			lower[h - 1].step(score);
			if (aci) {
				const bool miss = std::abs(score) > aci_q[h - 1];
				aci_q[h - 1] = aci_trackers[h - 1].step(miss);
			}
		}
		for (std::size_t h = 1; h <= H; ++h) {
			const double f = panel.value(t, h);
			log.point.push_back(f);
			log.realized.push_back(truth[t + h]);
			log.pid.push_back(build_interval(f, lower[h - 1].quantile(), upper[h - 1].quantile()));
			if (aci) log.aci.push_back(AciTracker::interval(f, aci_q[h - 1]));
		}
	}
	return log;
}

std::string interval_csv_text(const IntervalLog &log, IntervalMethod method) {
	const auto &ivs = log.intervals(method);
	std::string out = "origin_index,offset,point_forecast,lower,upper,realized,covered\n";
	for (std::size_t i = 0; i < ivs.size(); ++i) {
		const std::size_t origin = log.first_origin + i / log.horizon;
		const std::size_t offset = i % log.horizon + 1;
		out += std::to_string(origin) + ',' + std::to_string(offset) + ',' + format_double(log.point[i]) + ',' +
		       format_double(ivs[i].lower) + ',' + format_double(ivs[i].upper) + ',' + format_double(log.realized[i]) +
		       ',' + (ivs[i].contains(log.realized[i]) ? "1" : "0") + '\n';
	}
	return out;
}

} // namespace rtarb
