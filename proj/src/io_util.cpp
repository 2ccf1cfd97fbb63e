#include "rtarb/io_util.hpp"

#include "rtarb/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rtarb {

const char *to_string(DataErrorKind kind) noexcept {
	switch (kind) {
	case DataErrorKind::MissingFile: return "MissingFile";
	case DataErrorKind::MissingColumn: return "MissingColumn";
	case DataErrorKind::EmptyFile: return "EmptyFile";
	case DataErrorKind::BadTimestamp: return "BadTimestamp";
	case DataErrorKind::NonUniformSpacing: return "NonUniformSpacing";
	case DataErrorKind::NonNumericPrice: return "NonNumericPrice";
	case DataErrorKind::InvalidSeries: return "InvalidSeries";
	case DataErrorKind::HorizonPastEnd: return "HorizonPastEnd";
	case DataErrorKind::TooFewScores: return "TooFewScores";
	}
	return "Unknown";
}

namespace {

std::string_view trim(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
	return s;
}

} // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
	std::vector<std::string> fields;
	std::size_t start = 0;
	while (true) {
		const auto comma = line.find(',', start);
		auto field = trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
		if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
			field = field.substr(1, field.size() - 2);
		}
		fields.emplace_back(field);
		if (comma == std::string_view::npos) break;
		start = comma + 1;
	}
	return fields;
}

void write_file_atomic(const std::filesystem::path &path, std::string_view contents) {
	if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
	auto tmp = path;
	tmp += ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) throw Error(ErrorCategory::Runtime, "cannot open " + tmp.string() + " for writing");
		out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
		if (!out) throw Error(ErrorCategory::Runtime, "write failed for " + tmp.string());
	}
	std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw DataError(DataErrorKind::MissingFile, "cannot open " + path.string());
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

std::string format_double(double value) {
	if (std::isnan(value)) return "nan";
	if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
	char buf[64];
	const auto res = std::to_chars(buf, buf + sizeof(buf), value);
	return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int precision) {
	if (!std::isfinite(value)) return format_double(value);
	char buf[64];
	std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
	std::string s(buf);
	if (s == "-0" || s.rfind("-0.", 0) == 0) {
		// avoid "-0.000000" for tiny negatives that round to zero
		bool all_zero = true;
		for (char c : s.substr(1)) {
			if (c != '0' && c != '.') all_zero = false;
		}
		if (all_zero) s.erase(0, 1);
	}
	return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_a, std::uint64_t stream_b) {
	return splitmix64(splitmix64(splitmix64(base) ^ stream_a) ^ (stream_b * 0xd1b54a32d192ed03ULL));
}

} // namespace rtarb
