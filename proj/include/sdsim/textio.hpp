#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdsim {

// Shortest decimal form that parses back to the identical double (17
// significant digits). Used for every floating-point value in CSV output.
std::string format_g17(double v);

// Exact hex-float rendering, round-trips to the last ulp via strtod.
std::string format_hex(double v);

// strtod wrappers that reject trailing garbage.
double parse_double(const std::string& token);
std::uint64_t parse_u64(const std::string& token);
long parse_long(const std::string& token);

// Whole-file helpers. write_file_atomic writes to "<path>.tmp" and renames,
// so readers never observe a partially written file.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);

// FNV-1a 64-bit, used for run ids and manifest content digests.
std::uint64_t fnv1a64(const std::string& bytes);
std::string to_hex16(std::uint64_t v);

// Splits a CSV line; no quoting, the formats here never embed commas.
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::string> split_ws(const std::string& line);

}  // namespace sdsim
