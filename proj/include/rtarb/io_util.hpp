#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rtarb {

/// Splits one CSV record on commas. Surrounding whitespace and a single
/// layer of double quotes are stripped from each field.
std::vector<std::string> split_csv_line(std::string_view line);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

std::string read_file(const std::filesystem::path &path);

// Shortest round-trippable decimal; "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double value);

// Fixed-precision rendering used by report tables.
std::string format_fixed(double value, int precision = 6);

/// Mixes a base seed with stream identifiers into an independent 64-bit seed
/// (splitmix64 finalizer applied per component).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_a, std::uint64_t stream_b = 0);

} // namespace rtarb
