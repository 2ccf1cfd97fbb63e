#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

namespace rtarb {

/// Nonconformity score: truth - forecast. Throws std::invalid_argument on non-finite input.
double signed_residual(double truth, double forecast);

enum class Side { Upper, Lower };
enum class Saturation { Linear, Tangent };
enum class Scorecaster { None, RollingQuantile };

struct TrackerConfig {
	double alpha = 0.05;
	double integral_gain = 0.1;
	Saturation saturation = Saturation::Linear;
	// Tangent saturation: r_t(x) = tan(clamp(x / (c * t^exponent), +-(pi/2 - 1e-3))).
	// saturation_b is the level the contract promises once |x| >= c * t^exponent.
	double saturation_b = 1.0;
	double saturation_c = 10.0;
	double saturation_exponent = 0.5;
	Scorecaster scorecaster = Scorecaster::RollingQuantile;
	std::size_t window = 168;

	double side_alpha() const noexcept { return alpha / 2.0; }
	void validate() const;
};

/// Constants (b, c, gamma) for which r_t satisfies
/// x >= c*t^gamma => r_t(x) >= b and x <= -c*t^gamma => r_t(x) <= -b.
struct SaturationContract {
	double b;
	double c;
	double exponent;
};

SaturationContract saturation_contract(const TrackerConfig &cfg);
double saturate(double integral, std::uint64_t t, const TrackerConfig &cfg);

/// One side of the online quantile tracker:
///   q_{t+1} = qhat_{t+1} +/- K_I * S_ref * r_t(sum_i (miss_i - side_alpha))
/// where qhat is the rolling empirical quantile of recent scores (or the
/// calibration quantile when no scorecaster is configured).
class QuantileTracker {
public:
	QuantileTracker(Side side, double side_alpha, double initial_quantile, double gain_scale,
	                std::vector<double> history, const TrackerConfig &cfg);

	/// Records `score` against the current quantile and returns q_{t+1}.
	double step(double score);

	Side side() const noexcept { return side_; }
	double quantile() const noexcept { return q_; }
	double base_quantile() const noexcept { return q_base_; }
	double gain_scale() const noexcept { return gain_scale_; }
	double side_alpha() const noexcept { return side_alpha_; }
	std::uint64_t steps() const noexcept { return steps_; }
	std::uint64_t misses() const noexcept { return misses_; }
	/// sum_{i<=t} (1{miss_i} - side_alpha), computed from the integer counters.
	double err_integral() const noexcept;
	const std::deque<double> &history() const noexcept { return history_; }
	bool last_missed() const noexcept { return last_missed_; }

private:
	double scorecast();

	Side side_;
	double side_alpha_;
	double q_base_;
	double q_;
	double gain_scale_;
	TrackerConfig cfg_;
	std::deque<double> history_;
	std::vector<double> scratch_;
	std::uint64_t steps_ = 0;
	std::uint64_t misses_ = 0;
	bool last_missed_ = false;
};

/// Starts a tracker from calibration scores (at least 10): q_0 is the
/// (1 - side_alpha) empirical quantile for the upper side and the side_alpha
/// quantile for the lower side; the gain scale is the 0.9 quantile of |scores|.
QuantileTracker initialize_tracker(std::span<const double> calibration_scores, const TrackerConfig &cfg, Side side);

struct PredictionInterval {
	double lower = -std::numeric_limits<double>::infinity();
	double upper = std::numeric_limits<double>::infinity();

	double width() const noexcept { return upper - lower; }
	bool finite() const noexcept;
	bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

/// [forecast + q_lower, forecast + q_upper]; crossed quantiles collapse to their midpoint.
PredictionInterval build_interval(double point_forecast, double q_lower, double q_upper);

struct AciConfig {
	double gamma = 0.05;
	double alpha = 0.05;
};

/// Adaptive conformal inference on absolute residuals:
/// alpha_{t+1} = alpha_t + gamma * (alpha - 1{miss}).
class AciTracker {
public:
	AciTracker(std::vector<double> calibration_scores, const AciConfig &cfg);

	/// Updates the working level and returns the new quantile: +inf once the
	/// level is <= 0, -inf once it is >= 1.
	double step(bool miss);
	double quantile() const;
	double alpha_t() const noexcept { return alpha_t_; }
	const std::vector<double> &calibration_scores() const noexcept { return sorted_; }

	/// Symmetric interval around the forecast; -inf quantile gives [f, f].
	static PredictionInterval interval(double point_forecast, double quantile);

private:
	std::vector<double> sorted_;
	double target_;
	double gamma_;
	double alpha_t_;
};

/// Fraction of intervals containing the matching truth.
double coverage(std::span<const PredictionInterval> intervals, std::span<const double> truths);

struct HorizonWidths {
	std::vector<double> mean_width;          // NaN for an offset with no finite interval
	std::vector<std::size_t> finite_count;
	std::vector<std::size_t> excluded_infinite;
};

/// Mean finite width per offset; `intervals` is origin-major with `horizon` offsets per origin.
HorizonWidths mean_width_by_horizon(std::span<const PredictionInterval> intervals, std::size_t horizon);

} // namespace rtarb
