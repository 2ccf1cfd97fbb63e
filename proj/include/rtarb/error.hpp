#pragma once

#include <stdexcept>
#include <string>

namespace rtarb {

// Broad failure class; the CLI maps these to exit codes.
enum class ErrorCategory { Config, Data, Runtime };

class Error : public std::runtime_error {
public:
	Error(ErrorCategory category, const std::string &what) : std::runtime_error(what), category_(category) {}
	ErrorCategory category() const noexcept { return category_; }

private:
	ErrorCategory category_;
};

enum class DataErrorKind {
	MissingFile,
	MissingColumn,
	EmptyFile,
	BadTimestamp,
	NonUniformSpacing,
	NonNumericPrice,
	InvalidSeries,
	HorizonPastEnd,
	TooFewScores,
};

const char *to_string(DataErrorKind kind) noexcept;

class DataError : public Error {
public:
	DataError(DataErrorKind kind, const std::string &what)
	    : Error(ErrorCategory::Data, std::string(to_string(kind)) + ": " + what), kind_(kind) {}
	DataErrorKind kind() const noexcept { return kind_; }

private:
	DataErrorKind kind_;
};

class ConfigError : public Error {
public:
	explicit ConfigError(const std::string &what) : Error(ErrorCategory::Config, what) {}
};

} // namespace rtarb
