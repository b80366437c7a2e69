#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace adaptq {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);

// FNV-1a, 64-bit. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

// 128 random bits from the OS entropy source, hex-encoded (32 chars).
std::string random_hex_id();
// 128 pseudo-random bits derived from a seed, hex-encoded.
std::string seeded_hex_id(std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Returns an ISO-8601 UTC timestamp. Injected wherever timestamps are
// recorded so mock runs can use a deterministic clock.
using Clock = std::function<std::string()>;

Clock system_clock();
// Starts at 1970-01-01T00:00:00Z and advances one second per call.
Clock logical_clock();

// Root holding curricula/ and templates/. ADAPTQ_DATA_DIR overrides the
// compiled-in source location.
std::filesystem::path default_data_dir();

}  // namespace adaptq
