#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace pfnet {

// Flat "key=value" text, one pair per line; '#' starts a comment line.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

double kv_double(const KeyValues& kv, const std::string& key);
std::uint64_t kv_uint(const KeyValues& kv, const std::string& key);

}  // namespace pfnet
