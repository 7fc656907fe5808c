// Flat key-value text files: one `key = value` per line, `#` starts a comment.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ptower {

class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Typed accessors; each marks the key as consumed.
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_uint(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::vector<std::int64_t>> get_int_list(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Keys never read through a typed accessor.
  std::vector<std::string> unconsumed() const;
  void mark_consumed(const std::string& key) const { consumed_.insert(key); }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

std::string trim(std::string_view s);

}  // namespace ptower
