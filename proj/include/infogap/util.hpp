#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace infogap::util {

// 64-bit FNV-1a; stable across platforms, used for cache keys and manifests.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view line, char delimiter);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::uint64_t hash_file(const std::filesystem::path& path);

// Tab-separated table with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;  // throws InputError when absent
    std::string to_string(char delimiter = '\t') const;
};

Table parse_table(std::string_view text, char delimiter = '\t');
Table read_table(const std::filesystem::path& path, char delimiter = '\t');
void write_table(const std::filesystem::path& path, const Table& table, char delimiter = '\t');

}  // namespace infogap::util
