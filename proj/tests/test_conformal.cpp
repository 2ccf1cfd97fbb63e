#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rtarb/conformal.hpp"
#include "rtarb/conformal_eval.hpp"
#include "rtarb/error.hpp"
#include "rtarb/market_data.hpp"
#include "rtarb/quantile.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace rtarb;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TrackerConfig plain_config(double gain = 1.0) {
	TrackerConfig cfg;
	cfg.integral_gain = gain;
	cfg.scorecaster = Scorecaster::None;
	return cfg;
}

std::vector<double> iota_scores(int n) {
	std::vector<double> v(static_cast<std::size_t>(n));
	std::iota(v.begin(), v.end(), 1.0);
	return v;
}

// Scores: gaussian noise around zero, mean shifted by `shift` for the second half.
std::vector<double> shifted_stream(std::uint64_t seed, std::size_t n, double sd, double shift) {
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> noise(0.0, sd);
	std::vector<double> out(n);
	for (std::size_t i = 0; i < n; ++i) out[i] = noise(rng) + (i >= n / 2 ? shift : 0.0);
	return out;
}

} // namespace

TEST_CASE("signed residual") {
	CHECK(signed_residual(50, 45) == 5.0);
	CHECK(signed_residual(45, 50) == -5.0);
	CHECK(signed_residual(17.25, 17.25) == 0.0);
	CHECK_THROWS_AS(signed_residual(NAN, 1.0), std::invalid_argument);
	CHECK_THROWS_AS(signed_residual(1.0, kInf), std::invalid_argument);
}

TEST_CASE("empirical quantile rule") {
	const auto s = iota_scores(100);
	CHECK(quantile_index(100, 0.975) == 98);
	CHECK(quantile_sorted(s, 0.975) == 99.0);
	CHECK(quantile_sorted(s, 0.025) == 3.0);
	CHECK(quantile_sorted(s, 0.5) == 51.0);
	CHECK(quantile_sorted(s, 1.0) == 100.0);
	CHECK(quantile_sorted(s, 0.0) == 1.0);
	CHECK(quantile_index(19, 0.95) == 18);
	std::vector<double> shuffled = s;
	std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
	CHECK(empirical_quantile(shuffled, 0.975) == 99.0);
	CHECK(empirical_quantile_inplace(shuffled, 0.9) == 91.0);
}

TEST_CASE("initialize_tracker sets the side quantiles") {
	TrackerConfig cfg;
	const auto s = iota_scores(100);
	const auto up = initialize_tracker(s, cfg, Side::Upper);
	const auto lo = initialize_tracker(s, cfg, Side::Lower);
	CHECK(up.quantile() == 99.0);
	CHECK(lo.quantile() == 3.0);
	CHECK(up.err_integral() == 0.0);
	CHECK(up.gain_scale() == 91.0);
	CHECK(up.history().size() == 100);

	const std::vector<double> sevens(20, 7.0);
	CHECK(initialize_tracker(sevens, cfg, Side::Upper).quantile() == 7.0);
	CHECK(initialize_tracker(sevens, cfg, Side::Lower).quantile() == 7.0);

	try {
		initialize_tracker(std::vector<double>{1, 2, 3, 4, 5}, cfg, Side::Upper);
		FAIL("expected TooFewScores");
	} catch (const DataError &e) {
		CHECK(e.kind() == DataErrorKind::TooFewScores);
	}
	cfg.alpha = 1.2;
	CHECK_THROWS_AS(initialize_tracker(s, cfg, Side::Upper), ConfigError);
}

TEST_CASE("rolling history is bounded by the window") {
	TrackerConfig cfg;
	cfg.window = 24;
	auto tr = initialize_tracker(iota_scores(100), cfg, Side::Upper);
	CHECK(tr.history().size() == 24);
	for (int i = 0; i < 50; ++i) {
		tr.step(static_cast<double>(i));
		CHECK(tr.history().size() <= 24);
	}
	cfg.scorecaster = Scorecaster::None;
	CHECK(initialize_tracker(iota_scores(100), cfg, Side::Upper).history().empty());
}

TEST_CASE("tracker step hand-computed example") {
	const double s_ref = 8.0;
	QuantileTracker tr(Side::Upper, 0.05, 10.0, s_ref, {}, plain_config());
	const double q = tr.step(12.0);
	CHECK(tr.last_missed());
	CHECK(tr.err_integral() == doctest::Approx(0.95));
	CHECK(q == doctest::Approx(10.0 + 0.95 * s_ref));
	CHECK_THROWS_AS(tr.step(NAN), std::invalid_argument);
}

TEST_CASE("no misses lower the upper quantile by a constant step") {
	const double s_ref = 8.0, gain = 0.5, a = 0.05;
	QuantileTracker tr(Side::Upper, a, 10.0, s_ref, {}, plain_config(gain));
	double prev = tr.quantile();
	for (int i = 0; i < 40; ++i) {
		const double q = tr.step(prev - 1000.0);
		CHECK_FALSE(tr.last_missed());
		CHECK(q < prev);
		CHECK(prev - q == doctest::Approx(gain * a * s_ref));
		prev = q;
	}
}

TEST_CASE("zero side alpha counts raw misses") {
	QuantileTracker tr(Side::Upper, 0.0, 0.0, 1.0, {}, plain_config());
	double prev = tr.quantile();
	for (int i = 1; i <= 25; ++i) {
		const double q = tr.step(prev + 1.0);
		CHECK(tr.err_integral() == static_cast<double>(i));
		CHECK(q > prev);
		prev = q;
	}
}

TEST_CASE("lower side mirrors the upper side") {
	QuantileTracker up(Side::Upper, 0.05, 10.0, 4.0, {}, plain_config());
	QuantileTracker lo(Side::Lower, 0.05, -10.0, 4.0, {}, plain_config());
	std::mt19937_64 rng(9);
	std::normal_distribution<double> n(0.0, 10.0);
	for (int i = 0; i < 500; ++i) {
		const double s = n(rng);
		up.step(s);
		lo.step(-s);
		CHECK(up.last_missed() == lo.last_missed());
		CHECK(up.quantile() == doctest::Approx(-lo.quantile()));
	}
}

TEST_CASE("err_integral is recomputable from the miss log") {
	TrackerConfig cfg;
	auto tr = initialize_tracker(shifted_stream(1, 200, 5.0, 0.0), cfg, Side::Upper);
	std::size_t misses = 0;
	const auto stream = shifted_stream(2, 3000, 5.0, 30.0);
	for (std::size_t i = 0; i < stream.size(); ++i) {
		tr.step(stream[i]);
		if (tr.last_missed()) ++misses;
		CHECK(tr.err_integral() == doctest::Approx(static_cast<double>(misses) - 0.025 * static_cast<double>(i + 1)));
	}
}

TEST_CASE("long-run per-side miscoverage on shifted streams") {
	// Tangent saturation without a scorecaster absorbs the shift only at rate c*sqrt(t)/t,
	// too slowly for the band at this length; it is left out.
	const std::pair<Saturation, Scorecaster> configs[] = {{Saturation::Linear, Scorecaster::RollingQuantile},
	                                                      {Saturation::Linear, Scorecaster::None},
	                                                      {Saturation::Tangent, Scorecaster::RollingQuantile}};
	for (const auto &[sat, sc] : configs) {
		for (std::uint64_t seed = 1; seed <= 5; ++seed) {
			TrackerConfig cfg;
			cfg.saturation = sat;
			cfg.scorecaster = sc;
			const auto calib = shifted_stream(seed * 100, 336, 8.0, 0.0);
			auto up = initialize_tracker(calib, cfg, Side::Upper);
			auto lo = initialize_tracker(calib, cfg, Side::Lower);
			const auto stream = shifted_stream(seed, 4000, 8.0, 25.0);
			std::size_t covered = 0;
			for (double s : stream) {
				if (s >= lo.quantile() && s <= up.quantile()) ++covered;
				up.step(s);
				lo.step(s);
			}
			const double n = static_cast<double>(stream.size());
			CAPTURE(seed);
			CHECK(std::abs(static_cast<double>(up.misses()) / n - 0.025) <= 0.015);
			CHECK(std::abs(static_cast<double>(lo.misses()) / n - 0.025) <= 0.015);
			CHECK(std::abs(static_cast<double>(covered) / n - 0.95) <= 0.02);
		}
	}
}

TEST_CASE("forced misses raise the upper quantile at every step") {
	for (auto sat : {Saturation::Linear, Saturation::Tangent}) {
		TrackerConfig cfg;
		cfg.saturation = sat;
		// Calibrate on exactly one window so q_0 and the first scorecast agree.
		auto tr = initialize_tracker(shifted_stream(4, cfg.window, 5.0, 0.0), cfg, Side::Upper);
		double prev = tr.quantile();
		for (int k = 0; k < 300; ++k) {
			// Far above the current quantile and the whole window, so the scorecast cannot fall.
			const double q = tr.step(prev + 1e4 + k);
			CHECK(tr.last_missed());
			CHECK(q > prev);
			prev = q;
		}
	}
}

TEST_CASE("saturation contract holds pointwise") {
	TrackerConfig cfg;
	cfg.saturation = Saturation::Tangent;
	cfg.saturation_b = 1.2;
	cfg.saturation_c = 5.0;
	cfg.saturation_exponent = 0.4;
	const auto c = saturation_contract(cfg);
	std::mt19937_64 rng(5);
	std::uniform_real_distribution<double> ux(-500.0, 500.0);
	std::uniform_int_distribution<std::uint64_t> ut(1, 100000);
	for (int i = 0; i < 5000; ++i) {
		const double x = ux(rng);
		const auto t = ut(rng);
		const double edge = c.c * std::pow(static_cast<double>(t), c.exponent);
		const double r = saturate(x, t, cfg);
		if (x >= edge) CHECK(r >= c.b);
		if (x <= -edge) CHECK(r <= -c.b);
		CHECK(std::isfinite(r));
		CHECK((r > 0) == (x > 0));
	}
	TrackerConfig lin;
	CHECK(saturate(3.5, 10, lin) == 3.5);
	cfg.saturation_b = 2.0;
	CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("tracker trajectories are deterministic") {
	TrackerConfig cfg;
	const auto calib = shifted_stream(7, 336, 5.0, 0.0);
	const auto stream = shifted_stream(8, 1000, 5.0, 10.0);
	auto a = initialize_tracker(calib, cfg, Side::Upper);
	auto b = initialize_tracker(calib, cfg, Side::Upper);
	for (double s : stream) CHECK(a.step(s) == b.step(s));
}

TEST_CASE("build_interval") {
	auto iv = build_interval(30, -4, 6);
	CHECK(iv.lower == 26.0);
	CHECK(iv.upper == 36.0);
	iv = build_interval(30, 5, 3);
	CHECK(iv.lower == 34.0);
	CHECK(iv.upper == 34.0);
	iv = build_interval(30, -4, kInf);
	CHECK(iv.lower == 26.0);
	CHECK(iv.upper == kInf);
	CHECK_FALSE(iv.finite());
}

TEST_CASE("ACI update examples") {
	const AciConfig cfg{0.05, 0.05};
	AciTracker aci(iota_scores(100), cfg);
	aci.step(true);
	CHECK(aci.alpha_t() == doctest::Approx(0.0025));
	CHECK(std::isfinite(aci.quantile()));
	for (int i = 0; i < 11; ++i) aci.step(false);
	CHECK(aci.alpha_t() == doctest::Approx(0.03));
	const double q = aci.step(true);
	CHECK(aci.alpha_t() == doctest::Approx(-0.0175));
	CHECK(q == kInf);
	const auto iv = AciTracker::interval(30.0, q);
	CHECK(iv.lower == -kInf);
	CHECK(iv.upper == kInf);
}

TEST_CASE("ACI rises by gamma * alpha without misses") {
	AciTracker aci(iota_scores(100), {0.05, 0.05});
	double prev = aci.alpha_t();
	for (int i = 0; i < 400; ++i) {
		aci.step(false);
		CHECK(aci.alpha_t() - prev == doctest::Approx(0.0025));
		prev = aci.alpha_t();
	}
	CHECK(aci.alpha_t() >= 1.0);
	CHECK(aci.quantile() == -kInf);
	const auto iv = AciTracker::interval(12.0, aci.quantile());
	CHECK(iv.lower == 12.0);
	CHECK(iv.upper == 12.0);
}

TEST_CASE("ACI diverges after enough consecutive misses") {
	for (double gamma : {0.005, 0.01, 0.05, 0.2}) {
		AciTracker aci(iota_scores(50), {gamma, 0.05});
		// Each miss lowers alpha_t by gamma * (1 - alpha).
		const int k = static_cast<int>(std::ceil(0.05 / (gamma * 0.95) + 1e-12));
		for (int i = 0; i < k; ++i) aci.step(true);
		CHECK(aci.alpha_t() <= 0.0);
		CHECK(aci.quantile() == kInf);
	}
	CHECK_THROWS_AS(AciTracker({1.0}, {0.0, 0.05}), ConfigError);
	CHECK_THROWS_AS(AciTracker({}, {0.05, 0.05}), DataError);
}

TEST_CASE("coverage") {
	const std::vector<double> ones(20, 1.0);
	CHECK(coverage(std::vector<PredictionInterval>(20), ones) == 1.0);
	CHECK(coverage(std::vector<PredictionInterval>(20, {0.0, 0.0}), ones) == 0.0);
	std::vector<PredictionInterval> ivs(20, {0.0, 2.0});
	ivs[7] = {5.0, 6.0};
	CHECK(coverage(ivs, ones) == doctest::Approx(0.95));
	CHECK(coverage(std::vector<PredictionInterval>{{1.0, 1.0}}, std::vector<double>{1.0}) == 1.0);
	CHECK_THROWS_AS(coverage(ivs, std::vector<double>(3, 1.0)), std::invalid_argument);
	CHECK_THROWS_AS(coverage({}, {}), std::invalid_argument);
}

TEST_CASE("mean width by horizon") {
	std::vector<PredictionInterval> ivs(6, {0.0, 10.0});
	auto w = mean_width_by_horizon(ivs, 1);
	CHECK(w.mean_width[0] == 10.0);
	CHECK(w.excluded_infinite[0] == 0);

	ivs = {{0, 8}, {-kInf, 3}, {0, 12}, {0, 4}};
	w = mean_width_by_horizon(ivs, 2);
	CHECK(w.mean_width[0] == 10.0);
	CHECK(w.mean_width[1] == 4.0);
	CHECK(w.excluded_infinite[1] == 1);
	CHECK(w.finite_count[1] == 1);

	w = mean_width_by_horizon(std::vector<PredictionInterval>(2, {-kInf, kInf}), 1);
	CHECK(std::isnan(w.mean_width[0]));
	CHECK_THROWS_AS(mean_width_by_horizon({}, 1), std::invalid_argument);
	CHECK_THROWS_AS(mean_width_by_horizon(ivs, 3), std::invalid_argument);
}

TEST_CASE("run_conformal feeds each offset its own lagged scores") {
	const auto series = generate_synthetic_series(900, 21);
	const std::size_t H = 4;
	const auto split = default_split(series.size(), H);
	SyntheticForecasterConfig fc;
	fc.sigma = 10.0;
	fc.horizon = H;
	fc.seed = 3;
	const auto panel = synthetic_forecast(series, split, fc);
	TrackerConfig cfg;
	const auto log = run_conformal(series, panel, split, cfg);
	REQUIRE(log.origin_count == split.test);
	REQUIRE(log.pid.size() == split.test * H);

	// Reference: one standalone tracker pair per offset, offsets processed in reverse.
	for (std::size_t h = H; h >= 1; --h) {
		const auto scores = calibration_scores(series, panel, split, h);
		CHECK(scores.size() == split.calibration - h);
		auto up = initialize_tracker(scores, cfg, Side::Upper);
		auto lo = initialize_tracker(scores, cfg, Side::Lower);
		for (std::size_t t = log.first_origin; t < log.first_origin + log.origin_count; ++t) {
			if (t >= split.calibration) {
				const double s = series[t] - panel.value(t - h, h);
				up.step(s);
				lo.step(s);
			}
			const auto expect = build_interval(panel.value(t, h), lo.quantile(), up.quantile());
			const auto &got = log.pid[log.index(t, h)];
			REQUIRE(got.lower == expect.lower);
			REQUIRE(got.upper == expect.upper);
			CHECK(log.realized[log.index(t, h)] == series[t + h]);
		}
	}
}

TEST_CASE("run_conformal is deterministic and reports coverage") {
	const auto series = generate_synthetic_series(2600, 4);
	const auto split = default_split(series.size(), 24);
	SyntheticForecasterConfig fc;
	fc.sigma = 5.0;
	fc.horizon = 24;
	fc.seed = 12;
	const auto panel = synthetic_forecast(series, split, fc);
	const auto a = run_conformal(series, panel, split, {}, AciConfig{});
	const auto b = run_conformal(series, panel, split, {}, AciConfig{});
	CHECK(interval_csv_text(a) == interval_csv_text(b));
	CHECK(interval_csv_text(a, IntervalMethod::Aci) == interval_csv_text(b, IntervalMethod::Aci));
	const auto cov = a.coverage_by_offset();
	CHECK(cov.front() >= 0.93);
	CHECK(cov.front() <= 0.97);
	CHECK(a.infinite_count(IntervalMethod::Pid) == 0);
	const auto w = a.widths();
	CHECK(w.mean_width.back() > w.mean_width.front());
	const auto csv = interval_csv_text(a);
	CHECK(csv.rfind("origin_index,offset,point_forecast,lower,upper,realized,covered\n", 0) == 0);
	CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(a.pid.size() + 1));
}
