#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmil::text {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double x);

/// Parses a full token as a double; throws IoError on trailing garbage.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

/// Space-separated shortest round-trip representation.
std::string join_doubles(std::span<const double> values, char sep = ' ');
std::vector<double> split_doubles(std::string_view line, char sep = ' ');

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::string& path);
/// Writes atomically enough for our purposes: truncate + write + check.
void write_file(const std::string& path, std::string_view contents);

/// Little-endian binary primitives used by the KDE support format.
void append_u64_le(std::string& out, std::uint64_t v);
void append_f64_le(std::string& out, double v);
std::uint64_t read_u64_le(std::string_view in, std::size_t& pos);
double read_f64_le(std::string_view in, std::size_t& pos);

/// FNV-1a 64-bit, used for configuration fingerprints.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace cmil::text
