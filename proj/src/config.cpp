#include "rtarb/config.hpp"

#include "rtarb/error.hpp"
#include "rtarb/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace rtarb {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::uint64_t, unsigned long> && std::is_same_v<std::size_t, unsigned long>);

// Reads one JSON object, rejecting unknown keys and mistyped values.
class Section {
public:
	Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
		if (!j_.is_object()) throw ConfigError(label() + " must be an object");
	}

	const json *find(const char *key) {
		seen_.insert(key);
		const auto it = j_.find(key);
		return it == j_.end() ? nullptr : &*it;
	}

	void read(const char *key, double &out) {
		if (const json *v = find(key)) {
			if (!v->is_number()) throw ConfigError(name(key) + " must be a number");
			out = v->get<double>();
		}
	}
	void read(const char *key, std::size_t &out) {
		if (const json *v = find(key)) {
			if (!v->is_number_unsigned()) throw ConfigError(name(key) + " must be a non-negative integer");
			out = v->get<std::size_t>();
		}
	}
	void read(const char *key, bool &out) {
		if (const json *v = find(key)) {
			if (!v->is_boolean()) throw ConfigError(name(key) + " must be true or false");
			out = v->get<bool>();
		}
	}
	void read(const char *key, std::string &out) {
		if (const json *v = find(key)) {
			if (!v->is_string()) throw ConfigError(name(key) + " must be a string");
			out = v->get<std::string>();
		}
	}

	std::optional<Section> child(const char *key) {
		if (const json *v = find(key)) return Section(*v, name(key));
		return std::nullopt;
	}

	std::string name(const char *key) const { return path_.empty() ? key : path_ + "." + key; }

	void finish() const {
		for (const auto &item : j_.items()) {
			if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + name(item.key().c_str()) + "'");
		}
	}

private:
	std::string label() const { return path_.empty() ? "config" : path_; }

	const json &j_;
	std::string path_;
	std::set<std::string> seen_;
};

const char *saturation_name(Saturation s) { return s == Saturation::Linear ? "linear" : "tangent"; }
const char *scorecaster_name(Scorecaster s) { return s == Scorecaster::None ? "none" : "rolling_quantile"; }

void read_profile(Section &s, SyntheticProfile &p) {
	s.read("base", p.base);
	s.read("daily_amplitude", p.daily_amplitude);
	s.read("ar_coefficient", p.ar_coefficient);
	s.read("noise_sd", p.noise_sd);
	s.read("spike_probability", p.spike_probability);
	s.read("spike_magnitude", p.spike_magnitude);
	std::string start;
	s.read("start_time", start);
	if (!start.empty()) {
		try {
			p.start_time = parse_timestamp(start);
		} catch (const Error &e) {
			throw ConfigError(s.name("start_time") + ": " + e.what());
		}
	}
}

void read_tracker(Section &s, TrackerConfig &t) {
	s.read("alpha", t.alpha);
	s.read("integral_gain", t.integral_gain);
	std::string sat = saturation_name(t.saturation);
	s.read("saturation", sat);
	if (sat == "linear") t.saturation = Saturation::Linear;
	else if (sat == "tangent") t.saturation = Saturation::Tangent;
	else throw ConfigError(s.name("saturation") + " must be 'linear' or 'tangent'");
	s.read("saturation_b", t.saturation_b);
	s.read("saturation_c", t.saturation_c);
	s.read("saturation_exponent", t.saturation_exponent);
	std::string sc = scorecaster_name(t.scorecaster);
	s.read("scorecaster", sc);
	if (sc == "none") t.scorecaster = Scorecaster::None;
	else if (sc == "rolling_quantile") t.scorecaster = Scorecaster::RollingQuantile;
	else throw ConfigError(s.name("scorecaster") + " must be 'none' or 'rolling_quantile'");
	s.read("window", t.window);
}

} // namespace

void RunConfig::validate() const {
	if (data.csv && data.csv->empty()) throw ConfigError("data.csv must not be empty");
	if (!data.csv) {
		data.profile.validate();
		if (data.length < 2) throw ConfigError("data.synthetic.length must be >= 2");
	}
	if (split.calibration < 10) throw ConfigError("split.calibration must be >= 10");
	if (sigmas.empty()) throw ConfigError("forecaster.sigmas must not be empty");
	for (double s : sigmas) {
		if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("forecaster.sigmas entries must be finite and >= 0");
	}
	if (!(horizon_growth >= 0.0)) throw ConfigError("forecaster.horizon_growth must be >= 0");
	if (horizon < 1 || horizon > 24) throw ConfigError("horizon must lie in [1, 24]");
	conformal.tracker.validate();
	if (conformal.eval_horizon < 1) throw ConfigError("conformal.eval_horizon must be >= 1");
	if (!(conformal.aci.gamma > 0.0)) throw ConfigError("conformal.aci.gamma must be > 0");
	if (conformal.regime_shift && conformal.regime_shift->length == 0) {
		throw ConfigError("conformal.regime_shift.length must be >= 1");
	}
	policy.validate();
	solver.validate();
	storage.validate();
	if (strategies.empty()) throw ConfigError("strategies must name at least one strategy");
}

RunSeeds derive_run_seeds(const RunConfig &cfg) {
	RunSeeds s;
	s.data = derive_seed(cfg.seed, 1);
	for (std::size_t i = 0; i < cfg.sigmas.size(); ++i) s.forecaster.push_back(derive_seed(cfg.seed, 2, i));
	s.policy = derive_seed(cfg.seed, 3);
	return s;
}

std::filesystem::path default_output_dir(const std::string &command) {
	const char *root = std::getenv("RTARB_OUTPUT_ROOT");
	const std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::path("results");
	return base / command;
}

json to_json(const RunConfig &cfg) {
	const auto &p = cfg.data.profile;
	json data = {{"timestamp_column", cfg.data.columns.timestamp}, {"price_column", cfg.data.columns.price}};
	if (cfg.data.csv) data["csv"] = cfg.data.csv->string();
	data["synthetic"] = {{"length", cfg.data.length},
	                     {"base", p.base},
	                     {"daily_amplitude", p.daily_amplitude},
	                     {"ar_coefficient", p.ar_coefficient},
	                     {"noise_sd", p.noise_sd},
	                     {"spike_probability", p.spike_probability},
	                     {"spike_magnitude", p.spike_magnitude},
	                     {"start_time", format_timestamp(p.start_time)}};

	json split = {{"calibration", cfg.split.calibration}};
	if (cfg.split.test) split["test"] = *cfg.split.test;

	const auto &t = cfg.conformal.tracker;
	json conformal = {{"alpha", t.alpha},
	                  {"integral_gain", t.integral_gain},
	                  {"saturation", saturation_name(t.saturation)},
	                  {"saturation_b", t.saturation_b},
	                  {"saturation_c", t.saturation_c},
	                  {"saturation_exponent", t.saturation_exponent},
	                  {"scorecaster", scorecaster_name(t.scorecaster)},
	                  {"window", t.window},
	                  {"eval_horizon", cfg.conformal.eval_horizon},
	                  {"aci", {{"enabled", cfg.conformal.aci_enabled}, {"gamma", cfg.conformal.aci.gamma}}}};
	if (const auto &rs = cfg.conformal.regime_shift) {
		conformal["regime_shift"] = {{"start", rs->start}, {"length", rs->length}, {"magnitude", rs->magnitude}};
	}

	json strategies = json::array();
	for (auto k : cfg.strategies) strategies.push_back(to_string(k));

	return {{"data", data},
	        {"split", split},
	        {"forecaster", {{"sigmas", cfg.sigmas}, {"lookback", cfg.lookback}, {"horizon_growth", cfg.horizon_growth}}},
	        {"horizon", cfg.horizon},
	        {"conformal", conformal},
	        {"policy",
	         {{"samples", cfg.policy.samples},
	          {"decision_tolerance", cfg.policy.decision_tolerance},
	          {"first_step_only", cfg.policy.first_step_only}}},
	        {"solver",
	         {{"soc_grid_points", cfg.solver.soc_grid_points},
	          {"action_levels", cfg.solver.action_levels},
	          {"exact_state_limit", cfg.solver.exact_state_limit}}},
	        {"storage",
	         {{"power", cfg.storage.power},
	          {"capacity", cfg.storage.capacity},
	          {"efficiency", cfg.storage.efficiency},
	          {"discharge_cost", cfg.storage.discharge_cost},
	          {"initial_soc", cfg.storage.initial_soc}}},
	        {"strategies", strategies},
	        {"output_dir", cfg.output_dir.string()},
	        {"seed", cfg.seed}};
}

RunConfig run_config_from_json(const json &doc) {
	if (doc.is_object() && doc.contains("config") && doc.contains("version")) return run_config_from_json(doc.at("config"));

	RunConfig cfg;
	Section root(doc, "");
	if (auto s = root.child("data")) {
		std::string csv;
		s->read("csv", csv);
		if (s->find("csv")) cfg.data.csv = csv;
		s->read("timestamp_column", cfg.data.columns.timestamp);
		s->read("price_column", cfg.data.columns.price);
		if (auto syn = s->child("synthetic")) {
			syn->read("length", cfg.data.length);
			read_profile(*syn, cfg.data.profile);
			syn->finish();
		}
		s->finish();
	}
	if (auto s = root.child("split")) {
		s->read("calibration", cfg.split.calibration);
		std::size_t test = 0;
		s->read("test", test);
		if (s->find("test")) cfg.split.test = test;
		s->finish();
	}
	if (auto s = root.child("forecaster")) {
		if (const json *v = s->find("sigmas")) {
			if (!v->is_array()) throw ConfigError("forecaster.sigmas must be an array of numbers");
			cfg.sigmas.clear();
			for (const auto &x : *v) {
				if (!x.is_number()) throw ConfigError("forecaster.sigmas must be an array of numbers");
				cfg.sigmas.push_back(x.get<double>());
			}
		}
		s->read("lookback", cfg.lookback);
		s->read("horizon_growth", cfg.horizon_growth);
		s->finish();
	}
	root.read("horizon", cfg.horizon);
	if (auto s = root.child("conformal")) {
		read_tracker(*s, cfg.conformal.tracker);
		s->read("eval_horizon", cfg.conformal.eval_horizon);
		if (auto aci = s->child("aci")) {
			aci->read("enabled", cfg.conformal.aci_enabled);
			aci->read("gamma", cfg.conformal.aci.gamma);
			aci->finish();
		}
		if (auto rs = s->child("regime_shift")) {
			RegimeShift shift;
			rs->read("start", shift.start);
			rs->read("length", shift.length);
			rs->read("magnitude", shift.magnitude);
			rs->finish();
			cfg.conformal.regime_shift = shift;
		}
		s->finish();
	}
	cfg.conformal.aci.alpha = cfg.conformal.tracker.alpha;
	if (auto s = root.child("policy")) {
		s->read("samples", cfg.policy.samples);
		s->read("decision_tolerance", cfg.policy.decision_tolerance);
		s->read("first_step_only", cfg.policy.first_step_only);
		s->finish();
	}
	if (auto s = root.child("solver")) {
		s->read("soc_grid_points", cfg.solver.soc_grid_points);
		s->read("action_levels", cfg.solver.action_levels);
		s->read("exact_state_limit", cfg.solver.exact_state_limit);
		s->finish();
	}
	if (auto s = root.child("storage")) {
		s->read("power", cfg.storage.power);
		s->read("capacity", cfg.storage.capacity);
		s->read("efficiency", cfg.storage.efficiency);
		s->read("discharge_cost", cfg.storage.discharge_cost);
		s->read("initial_soc", cfg.storage.initial_soc);
		s->finish();
	}
	if (const json *v = root.find("strategies")) {
		if (!v->is_array()) throw ConfigError("strategies must be an array of names");
		cfg.strategies.clear();
		for (const auto &x : *v) {
			const auto kind = x.is_string() ? parse_strategy(x.get<std::string>()) : std::nullopt;
			if (!kind) throw ConfigError("unknown strategy " + x.dump());
			if (std::find(cfg.strategies.begin(), cfg.strategies.end(), *kind) == cfg.strategies.end()) {
				cfg.strategies.push_back(*kind);
			}
		}
	}
	std::string out;
	root.read("output_dir", out);
	cfg.output_dir = out;
	root.read("seed", cfg.seed);
	root.finish();
	cfg.validate();
	return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
	if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
	json doc;
	try {
		doc = json::parse(read_file(path));
	} catch (const json::parse_error &e) {
		throw ConfigError("cannot parse " + path.string() + ": " + e.what());
	}
	return run_config_from_json(doc);
}

void apply_override(json &doc, const std::string &assignment) {
	const auto eq = assignment.find('=');
	if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
	const std::string key = assignment.substr(0, eq);
	const std::string text = assignment.substr(eq + 1);
	json value = json::parse(text, nullptr, false);
	if (value.is_discarded()) value = text;

	json *node = &doc;
	std::size_t pos = 0;
	while (true) {
		const auto dot = key.find('.', pos);
		const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
		if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
		if (node->is_null()) *node = json::object();
		if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
		if (dot == std::string::npos) {
			(*node)[part] = value;
			return;
		}
		node = &(*node)[part];
		pos = dot + 1;
	}
}

PriceSeries load_series(const RunConfig &cfg, const RunSeeds &seeds) {
	if (cfg.data.csv) return load_price_csv(*cfg.data.csv, cfg.data.columns);
	return generate_synthetic_series(cfg.data.length, seeds.data, cfg.data.profile);
}

DatasetSplit resolve_split(const RunConfig &cfg, std::size_t series_length, std::size_t horizon) {
	DatasetSplit split = default_split(series_length, horizon, cfg.split.calibration);
	if (cfg.split.test) split.test = *cfg.split.test;
	split.validate(series_length);
	if (split.test_end() + horizon - 1 > series_length) {
		throw DataError(DataErrorKind::HorizonPastEnd, "split test block of " + std::to_string(split.test) +
		                                                   " leaves no full " + std::to_string(horizon) +
		                                                   "-step window inside " + std::to_string(series_length) + " rows");
	}
	return split;
}

BacktestConfig backtest_config(const RunConfig &cfg, const RunSeeds &seeds) {
	BacktestConfig b;
	b.horizon = cfg.horizon;
	b.tracker = cfg.conformal.tracker;
	b.policy = cfg.policy;
	b.policy.seed = seeds.policy;
	b.solver = cfg.solver;
	b.storage = cfg.storage;
	return b;
}

SyntheticForecasterConfig forecaster_config(const RunConfig &cfg, const RunSeeds &seeds, std::size_t sigma_index,
                                            std::size_t horizon) {
	SyntheticForecasterConfig f;
	f.sigma = cfg.sigmas.at(sigma_index);
	f.horizon = horizon;
	f.lookback = cfg.lookback;
	f.horizon_growth = cfg.horizon_growth;
	f.seed = seeds.forecaster.at(sigma_index);
	return f;
}

json manifest_json(const RunConfig &cfg, const RunSeeds &seeds, const std::string &command) {
	return {{"version", kVersion},
	        {"command", command},
	        {"config", to_json(cfg)},
	        {"seeds", {{"data", seeds.data}, {"forecaster", seeds.forecaster}, {"policy", seeds.policy}}}};
}

} // namespace rtarb
