#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dixon {

// Flat key=value settings. '#' starts a comment; blank lines are ignored;
// keys and values are trimmed. A later assignment of the same key wins.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma or whitespace separated integers.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  // Sorted key=value lines, one per entry.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dixon
