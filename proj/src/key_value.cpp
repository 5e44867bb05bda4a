#include "pfnet/key_value.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pfnet/errors.hpp"

namespace pfnet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

const std::string& lookup(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("missing key '" + key + "'");
  return it->second;
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_key_values(kv);
}

double kv_double(const KeyValues& kv, const std::string& key) {
  const std::string& s = lookup(kv, key);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("key '" + key + "': '" + s + "' is not a number");
  return v;
}

std::uint64_t kv_uint(const KeyValues& kv, const std::string& key) {
  const std::string& s = lookup(kv, key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("key '" + key + "': '" + s + "' is not a non-negative integer");
  return v;
}

}  // namespace pfnet
