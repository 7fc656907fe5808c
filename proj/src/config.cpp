#include "ptower/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ptower/errors.hpp"

namespace ptower {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty key");
    if (kv.values_.count(key)) throw FormatError("line " + std::to_string(line_no) + ": duplicate key `" + key + "`");
    kv.values_.emplace(std::move(key), std::move(value));
    if (end == text.size()) break;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open `" + path + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw FormatError("key `" + key + "`: cannot parse `" + text + "`");
  return value;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    out.push_back(parse_number<T>(key, trim(std::string_view(text).substr(pos, comma - pos))));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::optional<std::string> KeyValues::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::optional<std::int64_t> KeyValues::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<std::int64_t>(key, *s);
}

std::optional<std::uint64_t> KeyValues::get_uint(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<std::uint64_t>(key, *s);
}

std::optional<double> KeyValues::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<double>(key, *s);
}

std::optional<std::vector<std::int64_t>> KeyValues::get_int_list(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_list<std::int64_t>(key, *s);
}

std::optional<std::vector<double>> KeyValues::get_double_list(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_list<double>(key, *s);
}

std::vector<std::string> KeyValues::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) out.push_back(k);
  }
  return out;
}

}  // namespace ptower
